#pragma once

#include "episurr/epi/compartments.hpp"
#include "episurr/epi/contact_policy.hpp"
#include "episurr/epi/integrator.hpp"
#include "episurr/epi/parameters.hpp"
#include "episurr/metapop/graph.hpp"

#include <span>
#include <vector>

namespace episurr::metapop {

/// Commute rule. The share of node i's mobile persons travelling along edge (i, j)
/// each day is min(weight_scale * w_ij / N_i, edge_cap / outdeg_i), so at most
/// edge_cap of any compartment leaves a node.
struct ExchangeConfig {
    double weight_scale = 0.5;
    double edge_cap = 0.5;
};

struct MetapopOptions {
    epi::Tolerances tolerances{};
    ExchangeConfig exchange{};
    /// Worker threads for per-node integration; 0 = hardware concurrency.
    std::size_t threads = 1;
};

/// Daily commute-and-return scheme over the graph.
///
/// Each day [d, d+1]: every node integrates its residents over the first half day;
/// mobile compartments (all but severe, critical and dead) then travel along the
/// graph edges; over the second half day residents and visitors of a node share one
/// force of infection; at d+1 visitors return home. Each origin gets back exactly the
/// persons per age group it sent, with the state mix of the visitor pool at the
/// destination. Daily states are taken with everybody at home.
///
/// Throws InvalidArgument on size mismatches or invalid inputs and
/// DegeneratePopulationError if a node has an empty age group.
std::vector<epi::DailyTrajectory> simulate_metapopulation(const MetapopGraph& graph,
                                                          std::span<const epi::CompartmentState> initial,
                                                          const epi::EpiParameters& params,
                                                          const epi::ContactPolicy& policy, int horizon,
                                                          const MetapopOptions& options = {},
                                                          epi::IntegrationStats* stats = nullptr);

} // namespace episurr::metapop
