#pragma once

#include "episurr/surrogate/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>

namespace episurr::surrogate {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    std::size_t best_epoch = 0;
    /// Original-scale validation MAPE of the stored weights; negative if untrained.
    double best_val_mape = -1.0;
    double train_seconds = 0.0;
    std::size_t train_samples = 0;
    std::size_t val_samples = 0;
};

nlohmann::json to_json(const TrainingMeta& m);
TrainingMeta training_meta_from_json(const nlohmann::json& j);

struct Checkpoint {
    Network<float> network;
    TrainingMeta meta;
    /// Description of the training data: {"regime", "horizon", "nodes", "graph": {...}}.
    nlohmann::json data = nlohmann::json::object();
};

/// "EGC1", u32 header length, JSON header {"version", "spec", "meta", "data",
/// "tensors": [{"name", "rows", "cols"}]}, then the f32 values of every tensor in
/// header order, little-endian.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CorruptFileError on bad magic, bad JSON, wrong tensor shapes or truncation
/// and VersionMismatchError for other versions.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Inference wrapper: fixed network plus the graph operators it runs on.
/// Elementwise max(expm1(y), 0): log-space network outputs back to counts.
void decode_counts(std::span<const float> y, std::span<float> out);

class Surrogate {
public:
    /// Spatial checkpoints need the adjacency of the graph the samples live on.
    Surrogate(Checkpoint ckpt, const metapop::BinaryMatrix* adjacency);

    const Checkpoint& checkpoint() const { return ckpt_; }
    const ModelSpec& spec() const { return ckpt_.network.spec(); }
    std::size_t nodes() const { return nodes_; }
    std::size_t max_horizon() const { return spec().output_horizon(); }

    /// One encoded sample in, the first `horizon` predicted days out: day-major, then
    /// node, then the 48 compartments, on the original scale and clamped at zero.
    /// Throws EncodingMismatchError on a wrong feature size and InvalidArgument if
    /// horizon exceeds the model's output horizon.
    std::vector<float> predict(std::span<const float> features, std::size_t horizon) const;

    /// Several samples in one forward pass.
    std::vector<std::vector<float>> predict_batch(std::span<const std::span<const float>> features,
                                                  std::size_t horizon) const;

    /// Values on the log1p scale, rows = samples x rows per sample, full output width.
    Matrix<float> forward_raw(std::span<const std::span<const float>> features) const;

private:
    Checkpoint ckpt_;
    std::optional<GraphOperators<float>> graph_;
    std::size_t nodes_ = 1;
    std::size_t rows_per_sample_ = 1;
};

} // namespace episurr::surrogate
