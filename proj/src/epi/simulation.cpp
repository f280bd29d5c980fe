#include "episurr/epi/simulation.hpp"

#include "episurr/common/error.hpp"
#include "episurr/epi/model.hpp"

#include <cmath>
#include <cstring>

namespace episurr::epi {

void validate_state(const CompartmentState& state)
{
    for (double v : state.values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidArgument("compartment values must be finite and nonnegative");
        }
    }
}

DailyTrajectory integrate(const CompartmentState& initial, const EpiParameters& params, const ContactPolicy& policy,
                          int horizon, const Tolerances& tol, IntegrationStats* stats)
{
    if (horizon < 1) {
        throw InvalidArgument("horizon must be at least one day");
    }
    validate_state(initial);
    params.validate();
    const ContactSchedule schedule(policy);

    auto system = [&](double t, std::span<const double> y, std::span<double> dydt) {
        CompartmentState x;
        std::memcpy(x.values.data(), y.data(), sizeof(double) * kCompartments);
        CompartmentState dx;
        add_transitions(x, force_of_infection(x, params, schedule.at(t)), params, dx);
        std::memcpy(dydt.data(), dx.values.data(), sizeof(double) * kCompartments);
    };
    DormandPrince<decltype(system)> stepper(system, kCompartments, tol);

    DailyTrajectory out;
    out.days.reserve(static_cast<std::size_t>(horizon) + 1);
    out.days.push_back(initial);
    CompartmentState y = initial;
    IntegrationStats local;
    const auto breaks = schedule.breakpoints();
    auto next_break = breaks.begin();
    double t = 0.0;
    for (int day = 1; day <= horizon; ++day) {
        const double end = static_cast<double>(day);
        for (; next_break != breaks.end() && *next_break < end; ++next_break) {
            stepper.advance(t, y.values, *next_break, local);
        }
        stepper.advance(t, y.values, end, local);
        out.days.push_back(y);
    }
    if (stats) {
        *stats += local;
    }
    return out;
}

} // namespace episurr::epi
