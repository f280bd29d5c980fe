#include "episurr/epi/model.hpp"

#include "episurr/common/error.hpp"

#include <string>

namespace episurr::epi {

ForceOfInfection force_of_infection(const CompartmentState& state, const EpiParameters& params,
                                    const ContactMatrix& contacts)
{
    std::array<double, kAgeGroups> pressure{};
    for (std::size_t j = 0; j < kAgeGroups; ++j) {
        const double alive = state.age_total(j) - state(j, State::Dead);
        if (!(alive > 0.0)) {
            throw DegeneratePopulationError("age group " + std::to_string(j) + " has no living population");
        }
        pressure[j] = (params.non_isolated_no_symptoms * state(j, State::InfectedNoSymptoms) +
                       params.non_isolated_symptoms * state(j, State::InfectedSymptoms)) /
                      alive;
    }
    ForceOfInfection lambda{};
    for (std::size_t i = 0; i < kAgeGroups; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < kAgeGroups; ++j) {
            sum += contacts(i, j) * pressure[j];
        }
        lambda[i] = params.transmission_probability[i] * sum;
    }
    return lambda;
}

void add_transitions(const CompartmentState& x, const ForceOfInfection& lambda, const EpiParameters& p,
                     CompartmentState& dx)
{
    for (std::size_t a = 0; a < kAgeGroups; ++a) {
        const double infections = x(a, State::Susceptible) * lambda[a];
        const double out_e = x(a, State::Exposed) / p.time_exposed[a];
        const double out_ns = x(a, State::InfectedNoSymptoms) / p.time_infected_no_symptoms[a];
        const double out_sy = x(a, State::InfectedSymptoms) / p.time_infected_symptoms[a];
        const double out_sev = x(a, State::InfectedSevere) / p.time_infected_severe[a];
        const double out_cr = x(a, State::InfectedCritical) / p.time_infected_critical[a];

        const double mu_sy = p.symptomatic_per_no_symptoms[a];
        const double mu_sev = p.severe_per_symptomatic[a];
        const double mu_cr = p.critical_per_severe[a];
        const double mu_d = p.deaths_per_critical[a];

        dx(a, State::Susceptible) -= infections;
        dx(a, State::Exposed) += infections - out_e;
        dx(a, State::InfectedNoSymptoms) += out_e - out_ns;
        dx(a, State::InfectedSymptoms) += mu_sy * out_ns - out_sy;
        dx(a, State::InfectedSevere) += mu_sev * out_sy - out_sev;
        dx(a, State::InfectedCritical) += mu_cr * out_sev - out_cr;
        dx(a, State::Recovered) +=
            (1.0 - mu_sy) * out_ns + (1.0 - mu_sev) * out_sy + (1.0 - mu_cr) * out_sev + (1.0 - mu_d) * out_cr;
        dx(a, State::Dead) += mu_d * out_cr;
    }
}

CompartmentState rhs(const CompartmentState& state, double t, const EpiParameters& params,
                     const ContactPolicy& policy)
{
    const auto lambda = force_of_infection(state, params, contact_rate(policy, t));
    CompartmentState deriv;
    add_transitions(state, lambda, params, deriv);
    return deriv;
}

} // namespace episurr::epi
