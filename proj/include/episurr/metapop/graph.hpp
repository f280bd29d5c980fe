#pragma once

#include "episurr/common/csr.hpp"
#include "episurr/epi/compartments.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace episurr::metapop {

/// Commuters per day from node i to node j, row-major n x n with zero diagonal.
struct MobilityMatrix {
    std::size_t n = 0;
    std::vector<double> weights;

    MobilityMatrix() = default;
    explicit MobilityMatrix(std::size_t size) : n(size), weights(size * size, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return weights[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return weights[i * n + j]; }

    /// Share of off-diagonal entries that are nonzero.
    double density() const;

    /// Throws InvalidArgument unless n >= 2, all weights are finite and >= 0 and the
    /// diagonal is zero.
    void validate() const;

    bool operator==(const MobilityMatrix&) const = default;
};

/// Parses n rows of n comma-separated numbers. Blank lines are skipped.
/// Throws ParseError with the 1-based row/column of the first bad cell, and for
/// ragged rows or a non-square matrix.
MobilityMatrix parse_mobility_csv(std::istream& in);
MobilityMatrix load_mobility(const std::filesystem::path& path);
void write_mobility_csv(std::ostream& out, const MobilityMatrix& m);

/// Seeded synthetic commuter network. Exactly round(density * n(n-1) / 2) node
/// pairs are connected in both directions; each direction gets an independent
/// weight, log-uniform in [kMinSyntheticCommuters, kMaxSyntheticCommuters].
inline constexpr double kMinSyntheticCommuters = 10.0;
inline constexpr double kMaxSyntheticCommuters = 5000.0;
MobilityMatrix synth_mobility(std::size_t n, double target_density, std::uint64_t seed);

/// Dense 0/1 matrix.
struct BinaryMatrix {
    std::size_t n = 0;
    std::vector<std::uint8_t> entries;

    BinaryMatrix() = default;
    explicit BinaryMatrix(std::size_t size) : n(size), entries(size * size, 0) {}

    std::uint8_t& operator()(std::size_t i, std::size_t j) { return entries[i * n + j]; }
    std::uint8_t operator()(std::size_t i, std::size_t j) const { return entries[i * n + j]; }

    bool symmetric() const;
    std::size_t nnz() const;

    bool operator==(const BinaryMatrix&) const = default;
};

/// A(i,j) = 1 iff mobility(i,j) > 0. With `symmetrize`, also when mobility(j,i) > 0.
BinaryMatrix adjacency_from_mobility(const MobilityMatrix& m, bool symmetrize = false);

/// D^{-1/2} A D^{-1/2} with D the row-degree matrix. Rows and columns of isolated
/// nodes stay zero.
CsrMatrix<double> normalize_adjacency(const BinaryMatrix& a);

/// D~^{-1/2} (A + I) D~^{-1/2} with D~ the row degrees of A + I.
CsrMatrix<double> normalize_with_self_loops(const BinaryMatrix& a);

struct Node {
    double population = 0.0;
    epi::AgeShares age_shares = epi::default_age_shares();
};

inline constexpr double kMinSyntheticPopulation = 50'000.0;
inline constexpr double kMaxSyntheticPopulation = 500'000.0;

/// Log-uniform populations in [kMinSyntheticPopulation, kMaxSyntheticPopulation]
/// with the default age shares.
std::vector<Node> synth_populations(std::size_t n, std::uint64_t seed);

/// CSV rows "node_id,population,share_0,...,share_5", optional header line.
/// Node ids must be 0..n-1 in any order.
std::vector<Node> parse_population_csv(std::istream& in);
std::vector<Node> load_populations(const std::filesystem::path& path);

/// Immutable region graph: populations, mobility and the derived adjacency forms.
class MetapopGraph {
public:
    MetapopGraph(std::vector<Node> nodes, MobilityMatrix mobility, bool symmetrize = false);

    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const MobilityMatrix& mobility() const { return mobility_; }
    const BinaryMatrix& adjacency() const { return adjacency_; }
    const CsrMatrix<double>& normalized_adjacency() const { return normalized_; }
    /// Nonzero share of the adjacency over all n*n entries.
    double density() const;

    /// {"n", "edges", "density", "symmetric", "degree_histogram": {"<degree>": count}}
    nlohmann::json summary() const;

private:
    std::vector<Node> nodes_;
    MobilityMatrix mobility_;
    BinaryMatrix adjacency_;
    CsrMatrix<double> normalized_;
};

/// Synthetic graph used by the dataset generator and the service when no CSV is given.
struct GraphConfig {
    std::size_t nodes = 400;
    double density = 0.25;
    std::uint64_t seed = 1;
    std::filesystem::path mobility_csv;
    std::filesystem::path population_csv;
};

MetapopGraph build_graph(const GraphConfig& config);
nlohmann::json to_json(const GraphConfig& config);
GraphConfig graph_config_from_json(const nlohmann::json& j);

} // namespace episurr::metapop
