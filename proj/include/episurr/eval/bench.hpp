#pragma once

#include "episurr/metapop/graph.hpp"
#include "episurr/scenario/sampling.hpp"
#include "episurr/surrogate/checkpoint.hpp"

#include <iosfwd>
#include <vector>

namespace episurr::eval {

struct BenchConfig {
    std::vector<std::size_t> executions{1, 10, 100};
    std::vector<int> horizons{30, 60, 90};
    std::vector<std::size_t> changes{0, 3};
    std::size_t repetitions = 5;
    scenario::Regime regime = scenario::Regime::outbreak;
    std::uint64_t seed = 1;
    /// Samples per surrogate forward pass.
    std::size_t batch = 10;
    /// Skip the simulator column, e.g. for quick surrogate-only runs.
    bool simulator = true;
};

struct BenchCell {
    std::size_t executions = 0;
    int horizon = 0;
    std::size_t changes = 0;
    /// Medians over the repetitions; 0 when the engine was skipped.
    double simulator_seconds = 0.0;
    double surrogate_seconds = 0.0;

    double speedup() const;
};

struct BenchReport {
    std::vector<BenchCell> cells;

    const BenchCell& at(std::size_t executions, int horizon, std::size_t changes) const;
    /// t(largest horizon) / t(smallest horizon) for one engine.
    double horizon_ratio(bool simulator, std::size_t executions, std::size_t changes) const;
    /// Least-squares seconds per predicted day across the horizons.
    double horizon_slope(bool simulator, std::size_t executions, std::size_t changes) const;
};

/// Wall-clock medians on one worker. Repetitions cycle through the horizons, after one
/// untimed warm-up round. The simulator runs the full 4 + horizon days from
/// the initial states; the surrogate time covers encoding the five input days, the
/// forward pass and decoding. Scenario sampling and the input-day simulation are
/// prepared beforehand and not timed. Throws InvalidArgument if the surrogate does not
/// cover the largest horizon or was built for another graph size.
BenchReport bench_runtime(const metapop::MetapopGraph& graph, const surrogate::Surrogate& model,
                          const BenchConfig& config);

/// Columns: executions,horizon,changes,simulator_s,surrogate_s,speedup.
void write_bench_csv(std::ostream& out, const BenchReport& report);

} // namespace episurr::eval
