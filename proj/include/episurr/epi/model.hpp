#pragma once

#include "episurr/epi/compartments.hpp"
#include "episurr/epi/contact_policy.hpp"
#include "episurr/epi/parameters.hpp"

#include <array>
#include <span>

namespace episurr::epi {

using ForceOfInfection = std::array<double, kAgeGroups>;

/// Per-age rate at which susceptibles become exposed:
///   lambda_i = rho_i * sum_j phi_ij * (xi_NS * I_NS,j + xi_Sy * I_Sy,j) / (N_j - D_j)
/// where N_j is the age total of `state`. Throws DegeneratePopulationError if
/// N_j - D_j <= 0 for any j.
ForceOfInfection force_of_infection(const CompartmentState& state, const EpiParameters& params,
                                    const ContactMatrix& contacts);

/// Adds the transition terms for `state` under infection force `lambda` to `deriv`.
/// The terms of one age group sum to zero.
void add_transitions(const CompartmentState& state, const ForceOfInfection& lambda, const EpiParameters& params,
                     CompartmentState& deriv);

/// Right-hand side of the single-region model at time t.
CompartmentState rhs(const CompartmentState& state, double t, const EpiParameters& params,
                     const ContactPolicy& policy);

} // namespace episurr::epi
