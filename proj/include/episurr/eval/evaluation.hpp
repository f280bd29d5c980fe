#pragma once

#include "episurr/scenario/dataset.hpp"
#include "episurr/surrogate/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <span>
#include <vector>

namespace episurr::eval {

struct SplitPlan {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

/// Seeded shuffle of 0..n-1, then round(0.1 n) samples each for validation and test
/// and the rest for training. Throws InvalidArgument below 10 samples.
SplitPlan split_dataset(std::size_t n, std::uint64_t seed);
SplitPlan split_dataset(const scenario::Dataset& dataset, std::uint64_t seed);

nlohmann::json to_json(const SplitPlan& plan);

/// Pooled MAPE in percent over every entry with a nonzero target.
struct MapeStats {
    double sum = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;

    void add(double pred, double target);
    void merge(const MapeStats& other);
    /// NaN when no entry was usable.
    double mape() const;
    double exclusion_rate() const;
};

nlohmann::json to_json(const MapeStats& s);

MapeStats mape_stats(std::span<const float> pred, std::span<const float> target);

/// Pointwise mean of the training trajectories.
struct DummyEstimator {
    std::vector<double> mean;
    std::size_t samples = 0;
};

/// Throws InvalidArgument for an empty training set and ShapeError for ragged labels.
DummyEstimator fit_dummy(std::span<const std::vector<float>> train_labels);
DummyEstimator fit_dummy(const scenario::Dataset& dataset, std::span<const std::size_t> train_idx);

MapeStats evaluate_dummy(const DummyEstimator& dummy, std::span<const std::vector<float>> eval_labels);
MapeStats evaluate_dummy(const DummyEstimator& dummy, const scenario::Dataset& dataset,
                         std::span<const std::size_t> idx);

/// MAPE over the first `horizon` days of the samples with `changes` change points.
struct EvalCell {
    std::size_t horizon = 0;
    std::size_t changes = 0;
    std::size_t samples = 0;
    MapeStats stats;
};

struct EvalReport {
    MapeStats overall;
    /// One entry per node; a single entry for non-spatial data.
    std::vector<MapeStats> per_node;
    std::vector<EvalCell> cells;
    std::size_t samples = 0;
};

nlohmann::json to_json(const EvalReport& r);

/// Predictions of one sample in label layout (day-major, node, compartment).
using Predictor = std::function<std::vector<std::vector<float>>(std::span<const std::size_t> samples)>;

/// Scores `predict` on `idx`. Cells use the horizons 30, 60, 90 that fit the dataset
/// and change counts 0..3. Throws ShapeError if a prediction has the wrong size.
EvalReport evaluate_predictions(const scenario::Dataset& dataset, std::span<const std::size_t> idx,
                                const Predictor& predict, std::size_t batch = 32);

/// Throws EncodingMismatchError if the model's nodes, inputs or horizon do not fit the dataset.
EvalReport evaluate_model(const surrogate::Surrogate& model, const scenario::Dataset& dataset,
                          std::span<const std::size_t> idx);

EvalReport evaluate_dummy_report(const DummyEstimator& dummy, const scenario::Dataset& dataset,
                                 std::span<const std::size_t> idx);

} // namespace episurr::eval
