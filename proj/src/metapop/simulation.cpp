#include "episurr/metapop/simulation.hpp"

#include "episurr/common/error.hpp"
#include "episurr/common/parallel.hpp"
#include "episurr/epi/model.hpp"
#include "episurr/epi/simulation.hpp"

#include <algorithm>
#include <cstring>
#include <memory>

namespace episurr::metapop {

using epi::CompartmentState;
using epi::kAgeGroups;
using epi::kCompartments;
using epi::kStates;

namespace {

struct Edge {
    std::uint32_t from;
    std::uint32_t to;
    double share;
};

std::vector<Edge> commute_edges(const MetapopGraph& graph, const ExchangeConfig& cfg)
{
    const auto& w = graph.mobility();
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        std::size_t outdeg = 0;
        for (std::size_t j = 0; j < graph.size(); ++j) outdeg += w(i, j) > 0.0 ? 1 : 0;
        if (outdeg == 0) continue;
        const double cap = cfg.edge_cap / static_cast<double>(outdeg);
        for (std::size_t j = 0; j < graph.size(); ++j) {
            if (w(i, j) > 0.0) {
                const double share = std::min(cfg.weight_scale * w(i, j) / graph.nodes()[i].population, cap);
                edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), share});
            }
        }
    }
    return edges;
}

// Residents only.
struct LocalSystem {
    const epi::EpiParameters* params;
    const epi::ContactSchedule* schedule;

    void operator()(double t, std::span<const double> y, std::span<double> dydt) const
    {
        CompartmentState x;
        std::memcpy(x.values.data(), y.data(), sizeof(double) * kCompartments);
        CompartmentState dx;
        epi::add_transitions(x, epi::force_of_infection(x, *params, schedule->at(t)), *params, dx);
        std::memcpy(dydt.data(), dx.values.data(), sizeof(double) * kCompartments);
    }
};

// Residents followed by visitors; both groups see the force of infection of everyone present.
struct HostSystem {
    const epi::EpiParameters* params;
    const epi::ContactSchedule* schedule;

    void operator()(double t, std::span<const double> y, std::span<double> dydt) const
    {
        CompartmentState residents, visitors, present;
        std::memcpy(residents.values.data(), y.data(), sizeof(double) * kCompartments);
        std::memcpy(visitors.values.data(), y.data() + kCompartments, sizeof(double) * kCompartments);
        for (std::size_t k = 0; k < kCompartments; ++k) present.values[k] = residents.values[k] + visitors.values[k];
        const auto lambda = epi::force_of_infection(present, *params, schedule->at(t));
        CompartmentState dr, dv;
        epi::add_transitions(residents, lambda, *params, dr);
        epi::add_transitions(visitors, lambda, *params, dv);
        std::memcpy(dydt.data(), dr.values.data(), sizeof(double) * kCompartments);
        std::memcpy(dydt.data() + kCompartments, dv.values.data(), sizeof(double) * kCompartments);
    }
};

struct NodeSolver {
    epi::DormandPrince<LocalSystem> local;
    epi::DormandPrince<HostSystem> host;
    epi::IntegrationStats stats;
};

/// Advances through every breakpoint inside (t, end) before stopping at end.
template <class Stepper>
void advance_window(Stepper& stepper, double& t, std::span<double> y, double end, const std::vector<double>& breaks,
                    epi::IntegrationStats& stats)
{
    for (double b : breaks) {
        if (b > t && b < end) stepper.advance(t, y, b, stats);
    }
    stepper.advance(t, y, end, stats);
}

} // namespace

std::vector<epi::DailyTrajectory> simulate_metapopulation(const MetapopGraph& graph,
                                                          std::span<const CompartmentState> initial,
                                                          const epi::EpiParameters& params,
                                                          const epi::ContactPolicy& policy, int horizon,
                                                          const MetapopOptions& options, epi::IntegrationStats* stats)
{
    const std::size_t n = graph.size();
    if (initial.size() != n) {
        throw InvalidArgument("expected " + std::to_string(n) + " initial states, got " +
                              std::to_string(initial.size()));
    }
    if (horizon < 1) {
        throw InvalidArgument("horizon must be at least one day");
    }
    for (const auto& x : initial) epi::validate_state(x);
    params.validate();
    const epi::ContactSchedule schedule(policy);
    const auto breaks = schedule.breakpoints();
    const auto edges = commute_edges(graph, options.exchange);

    std::vector<std::unique_ptr<NodeSolver>> solvers;
    solvers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        solvers.push_back(std::make_unique<NodeSolver>(NodeSolver{
            epi::DormandPrince<LocalSystem>(LocalSystem{&params, &schedule}, kCompartments, options.tolerances),
            epi::DormandPrince<HostSystem>(HostSystem{&params, &schedule}, 2 * kCompartments, options.tolerances),
            {}}));
    }

    // host[i] holds residents of node i followed by its visitors.
    std::vector<std::array<double, 2 * kCompartments>> host(n);
    for (std::size_t i = 0; i < n; ++i) {
        host[i].fill(0.0);
        std::copy(initial[i].values.begin(), initial[i].values.end(), host[i].begin());
    }
    std::vector<std::array<double, kAgeGroups>> sent(edges.size());
    std::vector<std::array<double, kAgeGroups>> arrived(n);
    std::vector<std::array<double, kCompartments>> home(n);
    std::vector<bool> has_visitors(n, false);
    for (const auto& e : edges) has_visitors[e.to] = true;

    std::vector<epi::DailyTrajectory> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].days.reserve(static_cast<std::size_t>(horizon) + 1);
        out[i].days.push_back(initial[i]);
    }

    for (int day = 0; day < horizon; ++day) {
        const double t0 = day;
        const double mid = day + 0.5;
        const double t1 = day + 1.0;

        parallel_for(n, options.threads, [&](std::size_t i) {
            double t = t0;
            advance_window(solvers[i]->local, t, std::span<double>(host[i].data(), kCompartments), mid, breaks,
                           solvers[i]->stats);
        });

        for (auto& a : arrived) a.fill(0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(host[i].begin(), host[i].begin() + kCompartments, home[i].begin());
        }
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto& edge = edges[e];
            auto& origin = host[edge.from];
            auto& dest = host[edge.to];
            for (std::size_t a = 0; a < kAgeGroups; ++a) {
                double persons = 0.0;
                for (std::size_t s = 0; s < kStates; ++s) {
                    if (!epi::is_mobile(static_cast<epi::State>(s))) continue;
                    const std::size_t k = a * kStates + s;
                    const double moving = home[edge.from][k] * edge.share;
                    origin[k] -= moving;
                    dest[kCompartments + k] += moving;
                    persons += moving;
                }
                sent[e][a] = persons;
                arrived[edge.to][a] += persons;
            }
        }

        parallel_for(n, options.threads, [&](std::size_t i) {
            double t = mid;
            if (has_visitors[i]) {
                advance_window(solvers[i]->host, t, std::span<double>(host[i].data(), 2 * kCompartments), t1,
                               breaks, solvers[i]->stats);
            }
            else {
                advance_window(solvers[i]->local, t, std::span<double>(host[i].data(), kCompartments), t1, breaks,
                               solvers[i]->stats);
            }
        });

        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto& edge = edges[e];
            const auto& dest = host[edge.to];
            auto& origin = host[edge.from];
            for (std::size_t a = 0; a < kAgeGroups; ++a) {
                if (arrived[edge.to][a] <= 0.0) continue;
                const double fraction = sent[e][a] / arrived[edge.to][a];
                for (std::size_t s = 0; s < kStates; ++s) {
                    const std::size_t k = a * kStates + s;
                    origin[k] += fraction * dest[kCompartments + k];
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(host[i].begin() + kCompartments, host[i].end(), 0.0);
            CompartmentState x;
            std::copy(host[i].begin(), host[i].begin() + kCompartments, x.values.begin());
            out[i].days.push_back(x);
        }
    }

    if (stats) {
        for (const auto& s : solvers) *stats += s->stats;
    }
    return out;
}

} // namespace episurr::metapop
