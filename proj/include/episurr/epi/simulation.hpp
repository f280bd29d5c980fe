#pragma once

#include "episurr/epi/compartments.hpp"
#include "episurr/epi/contact_policy.hpp"
#include "episurr/epi/integrator.hpp"
#include "episurr/epi/parameters.hpp"

namespace episurr::epi {

/// Solves the single-region model over [0, horizon] days and samples the state at
/// every integer day. Steps are truncated to land on day boundaries, so the daily
/// values are solver points rather than interpolants.
///
/// Throws InvalidArgument if horizon < 1 or the inputs are invalid,
/// DegeneratePopulationError and StepSizeUnderflowError from the solver.
DailyTrajectory integrate(const CompartmentState& initial, const EpiParameters& params, const ContactPolicy& policy,
                          int horizon, const Tolerances& tol = {}, IntegrationStats* stats = nullptr);

/// Throws InvalidArgument if any entry is negative or not finite.
void validate_state(const CompartmentState& state);

} // namespace episurr::epi
