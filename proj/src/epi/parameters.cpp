#include "episurr/epi/parameters.hpp"

#include "episurr/common/error.hpp"

#include <cmath>
#include <string>

namespace episurr::epi {

EpiParameters EpiParameters::wild_type()
{
    EpiParameters p;
    p.time_exposed = {3.335, 3.335, 3.335, 3.335, 3.335, 3.335};
    p.time_infected_no_symptoms = {2.74, 2.74, 2.565, 2.565, 2.565, 2.565};
    p.time_infected_symptoms = {7.02625, 7.02625, 7.0665, 6.9385, 6.835, 6.775};
    p.time_infected_severe = {5, 5, 5.925, 7.55, 8.5, 11};
    p.time_infected_critical = {6.95, 6.95, 6.86, 17.36, 17.1, 11.6};
    p.transmission_probability = {0.03, 0.06, 0.06, 0.06, 0.09, 0.175};
    p.symptomatic_per_no_symptoms = {0.75, 0.75, 0.8, 0.8, 0.8, 0.8};
    p.severe_per_symptomatic = {0.0075, 0.0075, 0.019, 0.0615, 0.165, 0.225};
    p.critical_per_severe = {0.075, 0.075, 0.075, 0.15, 0.3, 0.4};
    p.deaths_per_critical = {0.05, 0.05, 0.14, 0.14, 0.4, 0.6};
    p.non_isolated_no_symptoms = 1.0;
    p.non_isolated_symptoms = 0.25;
    return p;
}

namespace {

void check_durations(const AgeArray& values, const char* name)
{
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidArgument(std::string(name) + ": durations must be positive");
        }
    }
}

void check_probability(double v, const char* name)
{
    if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidArgument(std::string(name) + ": probability outside [0,1]");
    }
}

void check_probabilities(const AgeArray& values, const char* name)
{
    for (double v : values) {
        check_probability(v, name);
    }
}

} // namespace

void EpiParameters::validate() const
{
    check_durations(time_exposed, "time_exposed");
    check_durations(time_infected_no_symptoms, "time_infected_no_symptoms");
    check_durations(time_infected_symptoms, "time_infected_symptoms");
    check_durations(time_infected_severe, "time_infected_severe");
    check_durations(time_infected_critical, "time_infected_critical");
    check_probabilities(transmission_probability, "transmission_probability");
    check_probabilities(symptomatic_per_no_symptoms, "symptomatic_per_no_symptoms");
    check_probabilities(severe_per_symptomatic, "severe_per_symptomatic");
    check_probabilities(critical_per_severe, "critical_per_severe");
    check_probabilities(deaths_per_critical, "deaths_per_critical");
    check_probability(non_isolated_no_symptoms, "non_isolated_no_symptoms");
    check_probability(non_isolated_symptoms, "non_isolated_symptoms");
}

} // namespace episurr::epi
