#pragma once

#include "episurr/autodiff/optim.hpp"
#include "episurr/scenario/dataset.hpp"
#include "episurr/surrogate/checkpoint.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

namespace episurr::surrogate {

enum class Optimizer { adam, sgd };

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mape = 0.0;
    bool improved = false;
    double seconds = 0.0;
};

struct TrainConfig {
    std::size_t max_epochs = 1000;
    /// Epochs without validation improvement before stopping.
    std::size_t patience = 50;
    std::size_t batch_size = 32;
    Optimizer optimizer = Optimizer::adam;
    autodiff::AdamConfig adam{};
    double sgd_lr = 1e-2;
    std::uint64_t seed = 1;
    std::function<void(const EpochLog&)> on_epoch;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Widths for `dataset` around the given hidden layers.
ModelSpec model_spec_for(const scenario::Dataset& dataset, std::vector<LayerSpec> layers);

/// Adjacency of the graph a spatial dataset was generated on.
metapop::BinaryMatrix dataset_adjacency(const scenario::Dataset& dataset);

/// Mini-batch training of MAPE on the log1p scale. After each epoch the original-scale
/// MAPE on `val` is computed and the best weights are kept; training stops once
/// `patience` epochs pass without improvement. Throws DivergenceError on a non-finite
/// loss and EncodingMismatchError if spec and dataset widths differ.
Checkpoint train(const scenario::Dataset& dataset, std::span<const std::size_t> train_idx,
                 std::span<const std::size_t> val_idx, const ModelSpec& spec, const TrainConfig& config);

/// Original-scale MAPE of a network over the given samples.
double evaluate_mape(const Surrogate& model, const scenario::Dataset& dataset, std::span<const std::size_t> idx);

/// k folds of a contiguous partition of `idx`: pairs of (train, validation).
std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> k_folds(std::span<const std::size_t> idx,
                                                                                    std::size_t k);

struct GridConfig {
    std::string name;
    std::vector<LayerSpec> layers;
    TrainConfig train;
};

struct GridResult {
    GridConfig config;
    std::vector<double> fold_mape;
    double mean_mape = 0.0;
    double std_mape = 0.0;
    double train_seconds = 0.0;
    bool failed = false;
    std::string error;
};

/// k-fold cross-validation of every configuration on `train_idx`. A failing cell is
/// marked and the sweep continues. Sorted by mean MAPE (failed last, ties by name).
std::vector<GridResult> grid_search(const std::vector<GridConfig>& space, const scenario::Dataset& dataset,
                                    std::span<const std::size_t> train_idx, std::size_t k, std::size_t threads = 1);

/// Columns: rank,name,layers,optimizer,lr,mean_mape,std_mape,train_seconds,status.
void write_grid_csv(std::ostream& out, const std::vector<GridResult>& results);

/// Hidden-layer counts 0..max_layers times channel widths times optimizers.
std::vector<GridConfig> default_grid(std::size_t max_layers, const std::vector<std::size_t>& channels,
                                     LayerKind kind, const TrainConfig& base);

} // namespace episurr::surrogate
