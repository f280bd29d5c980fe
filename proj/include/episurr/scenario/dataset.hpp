#pragma once

#include "episurr/metapop/graph.hpp"
#include "episurr/scenario/sampling.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace episurr::scenario {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct ScenarioConfig {
    Regime regime = Regime::outbreak;
    /// Predicted days after the five input days; one of 30, 60, 90.
    int horizon = 30;
    std::size_t max_changes = epi::kMaxChangePoints;
    int change_window = kChangeWindow;
    /// Forces exactly this many change points per sample instead of a uniform count.
    std::optional<std::size_t> fixed_changes;
    double ramp_width = epi::kDefaultRampWidth;
    std::uint64_t seed = 1;
    bool spatial = true;
    std::size_t n_samples = 100;
    /// Population of the single region used when `spatial` is false.
    double population = 100'000.0;
    metapop::GraphConfig graph;
    /// Worker threads; does not affect the output.
    std::size_t threads = 1;

    /// Throws InvalidArgument on unsupported horizons, change counts or windows.
    void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(const nlohmann::json& j);

/// Array sizes of one record.
struct SampleShape {
    std::size_t nodes = 1;
    std::size_t feature_rows = 0;
    std::size_t feature_cols = 0;
    std::size_t horizon = 0;

    std::size_t feature_size() const { return feature_rows * feature_cols; }
    /// Labels are day-major, then node, then the 48 compartments.
    std::size_t label_size() const { return horizon * nodes * epi::kCompartments; }
    bool operator==(const SampleShape&) const = default;
};

SampleShape sample_shape(const ScenarioConfig& config);

struct Record {
    /// Encoded inputs (log1p scale).
    std::vector<float> features;
    /// Simulated days 5 .. 4 + horizon on the original scale.
    std::vector<float> labels;
    /// {"index", "seed", "attempt", "regime", "change_points": [{"day", "reduction"}]}
    nlohmann::json meta;

    std::size_t change_count() const { return meta.at("change_points").size(); }
};

struct Dataset {
    ScenarioConfig config;
    SampleShape shape;
    std::vector<Record> records;
};

/// Simulation clock: day 0 is the first input day, change days are on the same clock,
/// and the simulator runs for 4 + horizon days. The sample's sub-seed is
/// seed ^ index; a failing simulation is redrawn up to three times from derived seeds.
/// `graph` must be given for spatial configs.
Record generate_sample(const ScenarioConfig& config, const metapop::MetapopGraph* graph, std::size_t index);

Dataset generate_dataset(const ScenarioConfig& config);

/// Streams records to `out` in index order, generating `threads` samples at a time.
void generate_dataset(const ScenarioConfig& config, std::ostream& out);

/// Binary layout: "EGS1", u32 header length, JSON header, then per record a u32 byte
/// length followed by f32 features, f32 labels and the JSON meta. Little-endian.
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Throws CorruptFileError on bad magic, truncation or count mismatch and
/// VersionMismatchError on an unknown version.
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

/// First line: the header. Then one record per line:
/// {"meta": {...}, "features": [...], "labels": [...]}.
void export_ndjson(std::ostream& out, const Dataset& dataset);

} // namespace episurr::scenario
