#pragma once

#include "episurr/epi/compartments.hpp"
#include "episurr/epi/contact_policy.hpp"
#include "episurr/epi/parameters.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <span>

namespace episurr::epi {

// JSON layout (all keys optional on input; missing keys keep the defaults):
// {
//   "parameters": {"time_exposed": [6 numbers], ..., "non_isolated_symptoms": x},
//   "baseline_contacts": [[6 numbers] x 6],
//   "ramp_width": 0.5,
//   "change_points": [{"day": 10, "reduction": 0.4, "matrix": [[...] x 6]?}, ...]
// }

nlohmann::json to_json(const EpiParameters& params);
EpiParameters parameters_from_json(const nlohmann::json& j, EpiParameters base = EpiParameters::wild_type());

nlohmann::json to_json(const ContactMatrix& m);
ContactMatrix contact_matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ContactPolicy& policy);
ContactPolicy policy_from_json(const nlohmann::json& j, ContactPolicy base = {});

nlohmann::json to_json(const CompartmentState& state);
CompartmentState state_from_json(const nlohmann::json& j);

/// One trajectory per node. CSV columns: day,node,age,state,value.
void write_trajectories_csv(std::ostream& out, std::span<const DailyTrajectory> trajectories);
/// One JSON object per (day, node): {"day":d,"node":n,"values":[[8 numbers] x 6]}.
void write_trajectories_ndjson(std::ostream& out, std::span<const DailyTrajectory> trajectories);

} // namespace episurr::epi
