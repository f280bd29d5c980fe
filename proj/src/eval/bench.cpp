#include "episurr/eval/bench.hpp"

#include "episurr/common/error.hpp"
#include "episurr/metapop/simulation.hpp"
#include "episurr/scenario/encoding.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>

namespace episurr::eval {

double BenchCell::speedup() const
{
    return surrogate_seconds > 0.0 ? simulator_seconds / surrogate_seconds : 0.0;
}

const BenchCell& BenchReport::at(std::size_t executions, int horizon, std::size_t changes) const
{
    for (const auto& c : cells) {
        if (c.executions == executions && c.horizon == horizon && c.changes == changes) return c;
    }
    throw InvalidArgument("no bench cell for " + std::to_string(executions) + " executions, horizon " +
                          std::to_string(horizon) + ", " + std::to_string(changes) + " changes");
}

namespace {

std::vector<const BenchCell*> row(const BenchReport& r, std::size_t executions, std::size_t changes)
{
    std::vector<const BenchCell*> out;
    for (const auto& c : r.cells) {
        if (c.executions == executions && c.changes == changes) out.push_back(&c);
    }
    std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->horizon < b->horizon; });
    if (out.size() < 2) throw InvalidArgument("need at least two horizons");
    return out;
}

double seconds(const BenchCell& c, bool simulator) { return simulator ? c.simulator_seconds : c.surrogate_seconds; }

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class Fn>
double seconds_of(Fn&& fn)
{
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Scenario {
    std::vector<epi::CompartmentState> init;
    epi::ContactPolicy policy;
    /// Five input days per node.
    std::vector<std::vector<epi::CompartmentState>> inputs;
};

} // namespace

double BenchReport::horizon_ratio(bool simulator, std::size_t executions, std::size_t changes) const
{
    const auto r = row(*this, executions, changes);
    return seconds(*r.back(), simulator) / seconds(*r.front(), simulator);
}

double BenchReport::horizon_slope(bool simulator, std::size_t executions, std::size_t changes) const
{
    const auto r = row(*this, executions, changes);
    double mx = 0.0, my = 0.0;
    for (auto* c : r) {
        mx += c->horizon;
        my += seconds(*c, simulator);
    }
    mx /= static_cast<double>(r.size());
    my /= static_cast<double>(r.size());
    double sxy = 0.0, sxx = 0.0;
    for (auto* c : r) {
        sxy += (c->horizon - mx) * (seconds(*c, simulator) - my);
        sxx += (c->horizon - mx) * (c->horizon - mx);
    }
    return sxy / sxx;
}

BenchReport bench_runtime(const metapop::MetapopGraph& graph, const surrogate::Surrogate& model,
                          const BenchConfig& config)
{
    if (config.repetitions == 0) throw InvalidArgument("repetitions must be positive");
    if (!model.spec().spatial || model.nodes() != graph.size()) {
        throw InvalidArgument("surrogate does not match the benchmark graph");
    }
    const int max_h = *std::max_element(config.horizons.begin(), config.horizons.end());
    if (static_cast<std::size_t>(max_h) > model.max_horizon()) {
        throw InvalidArgument("surrogate covers " + std::to_string(model.max_horizon()) + " days, benchmark needs " +
                              std::to_string(max_h));
    }
    const auto params = epi::EpiParameters::wild_type();
    const std::size_t max_exec = *std::max_element(config.executions.begin(), config.executions.end());
    const int input_days = static_cast<int>(scenario::kInputDays) - 1;

    BenchReport report;
    for (std::size_t changes : config.changes) {
        Rng rng(mix_seed(config.seed, changes));
        std::vector<Scenario> pool(max_exec);
        for (auto& s : pool) {
            for (const auto& node : graph.nodes()) {
                s.init.push_back(scenario::sample_init(config.regime, rng, node.population, node.age_shares));
            }
            s.policy.change_points = scenario::sample_change_points_exact(rng, changes, scenario::kChangeWindow);
            const auto runs = metapop::simulate_metapopulation(graph, s.init, params, s.policy, input_days);
            for (const auto& run : runs) s.inputs.push_back(run.days);
        }
        for (std::size_t executions : config.executions) {
            const auto scenarios = std::span(pool).first(executions);
            const std::size_t batch = std::max<std::size_t>(1, config.batch);
            const auto simulate = [&](int horizon) {
                for (const auto& s : scenarios) {
                    metapop::simulate_metapopulation(graph, s.init, params, s.policy, input_days + horizon);
                }
            };
            const auto infer = [&](int horizon) {
                for (std::size_t b = 0; b < scenarios.size(); b += batch) {
                    const auto chunk = scenarios.subspan(b, std::min(batch, scenarios.size() - b));
                    std::vector<std::vector<float>> feats;
                    for (const auto& s : chunk) feats.push_back(scenario::encode_spatial(s.inputs, s.policy));
                    std::vector<std::span<const float>> views(feats.begin(), feats.end());
                    const auto out = model.predict_batch(views, static_cast<std::size_t>(horizon));
                    if (out.empty()) throw Error("empty surrogate output");
                }
            };
            // Repetitions cycle through the horizons so drift in machine load hits all alike.
            const std::size_t nh = config.horizons.size();
            std::vector<std::vector<double>> sim_t(nh), sur_t(nh);
            for (std::size_t r = 0; r <= config.repetitions; ++r) {
                for (std::size_t k = 0; k < nh; ++k) {
                    const int horizon = config.horizons[k];
                    // Round 0 is an untimed warm-up.
                    if (config.simulator) {
                        const double t = seconds_of([&] { simulate(horizon); });
                        if (r > 0) sim_t[k].push_back(t);
                    }
                    const double t = seconds_of([&] { infer(horizon); });
                    if (r > 0) sur_t[k].push_back(t);
                }
            }
            for (std::size_t k = 0; k < nh; ++k) {
                BenchCell cell{executions, config.horizons[k], changes, 0.0, 0.0};
                if (config.simulator) cell.simulator_seconds = median(std::move(sim_t[k]));
                cell.surrogate_seconds = median(std::move(sur_t[k]));
                report.cells.push_back(cell);
            }
        }
    }
    return report;
}

void write_bench_csv(std::ostream& out, const BenchReport& report)
{
    out << "executions,horizon,changes,simulator_s,surrogate_s,speedup\n";
    for (const auto& c : report.cells) {
        out << c.executions << ',' << c.horizon << ',' << c.changes << ',' << c.simulator_seconds << ','
            << c.surrogate_seconds << ',' << c.speedup() << '\n';
    }
}

} // namespace episurr::eval
