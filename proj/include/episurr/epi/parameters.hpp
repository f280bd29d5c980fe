#pragma once

#include "episurr/epi/compartments.hpp"

#include <array>

namespace episurr::epi {

using AgeArray = std::array<double, kAgeGroups>;

/// Disease parameters of the age-resolved model.
///
/// Durations are in days. The four mu values are the probabilities of moving to the
/// next, more severe state; the complement recovers.
struct EpiParameters {
    AgeArray time_exposed;
    AgeArray time_infected_no_symptoms;
    AgeArray time_infected_symptoms;
    AgeArray time_infected_severe;
    AgeArray time_infected_critical;

    AgeArray transmission_probability;

    AgeArray symptomatic_per_no_symptoms;
    AgeArray severe_per_symptomatic;
    AgeArray critical_per_severe;
    AgeArray deaths_per_critical;

    /// Share of asymptomatic/presymptomatic infectious persons that are not isolated.
    double non_isolated_no_symptoms = 1.0;
    /// Share of symptomatic infectious persons that are not isolated.
    double non_isolated_symptoms = 0.25;

    /// Wild-type values for the six age groups.
    static EpiParameters wild_type();

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
};

} // namespace episurr::epi
