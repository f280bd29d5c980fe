#include "episurr/eval/evaluation.hpp"

#include "episurr/common/error.hpp"
#include "episurr/common/random.hpp"
#include "episurr/epi/compartments.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace episurr::eval {

using epi::kCompartments;

SplitPlan split_dataset(std::size_t n, std::uint64_t seed)
{
    if (n < 10) throw InvalidArgument("splitting needs at least 10 samples, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    const auto held = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    SplitPlan plan;
    plan.seed = seed;
    plan.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(2 * held));
    plan.validation.assign(order.end() - static_cast<std::ptrdiff_t>(2 * held), order.end() - static_cast<std::ptrdiff_t>(held));
    plan.test.assign(order.end() - static_cast<std::ptrdiff_t>(held), order.end());
    return plan;
}

SplitPlan split_dataset(const scenario::Dataset& dataset, std::uint64_t seed)
{
    return split_dataset(dataset.records.size(), seed);
}

nlohmann::json to_json(const SplitPlan& plan)
{
    return {{"seed", plan.seed}, {"train", plan.train}, {"validation", plan.validation}, {"test", plan.test}};
}

void MapeStats::add(double pred, double target)
{
    if (target == 0.0) {
        ++excluded;
        return;
    }
    sum += std::abs(pred - target) / std::abs(target);
    ++used;
}

void MapeStats::merge(const MapeStats& other)
{
    sum += other.sum;
    used += other.used;
    excluded += other.excluded;
}

double MapeStats::mape() const
{
    return used ? 100.0 * sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
}

double MapeStats::exclusion_rate() const
{
    const auto total = used + excluded;
    return total ? static_cast<double>(excluded) / static_cast<double>(total) : 0.0;
}

namespace {

nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

} // namespace

nlohmann::json to_json(const MapeStats& s)
{
    return {{"mape", number_or_null(s.mape())},
            {"used", s.used},
            {"excluded", s.excluded},
            {"exclusion_rate", s.exclusion_rate()}};
}

MapeStats mape_stats(std::span<const float> pred, std::span<const float> target)
{
    if (pred.size() != target.size()) throw ShapeError("prediction and target sizes differ");
    MapeStats s;
    for (std::size_t i = 0; i < pred.size(); ++i) s.add(pred[i], target[i]);
    return s;
}

DummyEstimator fit_dummy(std::span<const std::vector<float>> train_labels)
{
    if (train_labels.empty()) throw InvalidArgument("dummy estimator needs training samples");
    DummyEstimator d;
    d.mean.assign(train_labels.front().size(), 0.0);
    for (const auto& y : train_labels) {
        if (y.size() != d.mean.size()) throw ShapeError("training labels have different sizes");
        for (std::size_t i = 0; i < y.size(); ++i) d.mean[i] += y[i];
    }
    for (auto& m : d.mean) m /= static_cast<double>(train_labels.size());
    d.samples = train_labels.size();
    return d;
}

DummyEstimator fit_dummy(const scenario::Dataset& dataset, std::span<const std::size_t> train_idx)
{
    std::vector<std::vector<float>> labels;
    labels.reserve(train_idx.size());
    for (auto i : train_idx) labels.push_back(dataset.records.at(i).labels);
    return fit_dummy(labels);
}

MapeStats evaluate_dummy(const DummyEstimator& dummy, std::span<const std::vector<float>> eval_labels)
{
    MapeStats s;
    for (const auto& y : eval_labels) {
        if (y.size() != dummy.mean.size()) throw ShapeError("evaluation labels do not match the estimator");
        for (std::size_t i = 0; i < y.size(); ++i) s.add(dummy.mean[i], y[i]);
    }
    return s;
}

MapeStats evaluate_dummy(const DummyEstimator& dummy, const scenario::Dataset& dataset,
                         std::span<const std::size_t> idx)
{
    MapeStats s;
    for (auto i : idx) {
        const auto& y = dataset.records.at(i).labels;
        if (y.size() != dummy.mean.size()) throw ShapeError("evaluation labels do not match the estimator");
        for (std::size_t k = 0; k < y.size(); ++k) s.add(dummy.mean[k], y[k]);
    }
    return s;
}

nlohmann::json to_json(const EvalReport& r)
{
    auto nodes = nlohmann::json::array();
    for (const auto& n : r.per_node) nodes.push_back(number_or_null(n.mape()));
    auto cells = nlohmann::json::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"horizon", c.horizon},
                         {"changes", c.changes},
                         {"samples", c.samples},
                         {"mape", number_or_null(c.stats.mape())},
                         {"used", c.stats.used}});
    }
    return {{"samples", r.samples}, {"overall", to_json(r.overall)}, {"per_node", nodes}, {"cells", cells}};
}

EvalReport evaluate_predictions(const scenario::Dataset& dataset, std::span<const std::size_t> idx,
                                const Predictor& predict, std::size_t batch)
{
    const std::size_t nodes = dataset.shape.nodes;
    const std::size_t days = dataset.shape.horizon;
    EvalReport report;
    report.per_node.resize(nodes);
    std::vector<std::size_t> horizons;
    for (std::size_t h : {30, 60, 90}) {
        if (h <= days) horizons.push_back(h);
    }
    if (horizons.empty()) horizons.push_back(days);
    for (std::size_t h : horizons) {
        for (std::size_t m = 0; m <= epi::kMaxChangePoints; ++m) report.cells.push_back({h, m, 0, {}});
    }
    if (batch == 0) batch = 1;

    for (std::size_t b = 0; b < idx.size(); b += batch) {
        const auto chunk = idx.subspan(b, std::min(batch, idx.size() - b));
        const auto preds = predict(chunk);
        if (preds.size() != chunk.size()) throw ShapeError("predictor returned the wrong number of samples");
        for (std::size_t k = 0; k < chunk.size(); ++k) {
            const auto& rec = dataset.records.at(chunk[k]);
            const auto& p = preds[k];
            if (p.size() != rec.labels.size()) {
                throw ShapeError("prediction has " + std::to_string(p.size()) + " values, labels have " +
                                 std::to_string(rec.labels.size()));
            }
            const std::size_t changes = rec.change_count();
            // Per-day totals so every horizon cell reuses them.
            std::vector<MapeStats> per_day(days);
            for (std::size_t d = 0; d < days; ++d) {
                for (std::size_t i = 0; i < nodes; ++i) {
                    MapeStats s;
                    const std::size_t off = (d * nodes + i) * kCompartments;
                    for (std::size_t c = 0; c < kCompartments; ++c) s.add(p[off + c], rec.labels[off + c]);
                    report.per_node[i].merge(s);
                    per_day[d].merge(s);
                }
                report.overall.merge(per_day[d]);
            }
            for (auto& cell : report.cells) {
                if (cell.changes != changes) continue;
                ++cell.samples;
                for (std::size_t d = 0; d < cell.horizon; ++d) cell.stats.merge(per_day[d]);
            }
            ++report.samples;
        }
    }
    return report;
}

EvalReport evaluate_model(const surrogate::Surrogate& model, const scenario::Dataset& dataset,
                          std::span<const std::size_t> idx)
{
    const auto& spec = model.spec();
    if (spec.spatial != dataset.config.spatial) throw EncodingMismatchError("model and dataset differ in spatial layout");
    if (model.nodes() != dataset.shape.nodes) {
        throw EncodingMismatchError("model runs on " + std::to_string(model.nodes()) + " nodes, dataset has " +
                                    std::to_string(dataset.shape.nodes));
    }
    if (model.max_horizon() < dataset.shape.horizon) {
        throw EncodingMismatchError("model predicts " + std::to_string(model.max_horizon()) + " days, dataset needs " +
                                    std::to_string(dataset.shape.horizon));
    }
    const std::size_t horizon = dataset.shape.horizon;
    return evaluate_predictions(dataset, idx, [&](std::span<const std::size_t> samples) {
        std::vector<std::span<const float>> feats;
        for (auto i : samples) feats.emplace_back(dataset.records.at(i).features);
        return model.predict_batch(feats, horizon);
    });
}

EvalReport evaluate_dummy_report(const DummyEstimator& dummy, const scenario::Dataset& dataset,
                                 std::span<const std::size_t> idx)
{
    const std::vector<float> mean(dummy.mean.begin(), dummy.mean.end());
    return evaluate_predictions(dataset, idx, [&](std::span<const std::size_t> samples) {
        return std::vector<std::vector<float>>(samples.size(), mean);
    });
}

} // namespace episurr::eval
