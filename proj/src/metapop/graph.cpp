#include "episurr/metapop/graph.hpp"

#include "episurr/common/error.hpp"
#include "episurr/common/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

namespace episurr::metapop {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool parse_double(std::string_view cell, double& out)
{
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return res.ec == std::errc{} && res.ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return in;
}

double log_uniform(Rng& rng, double lo, double hi)
{
    return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

} // namespace

double MobilityMatrix::density() const
{
    if (n < 2) return 0.0;
    std::size_t nz = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && (*this)(i, j) > 0.0) ++nz;
    return static_cast<double>(nz) / static_cast<double>(n * (n - 1));
}

void MobilityMatrix::validate() const
{
    if (n < 2) throw InvalidArgument("mobility matrix needs at least 2 nodes");
    if (weights.size() != n * n) throw InvalidArgument("mobility matrix storage does not match n*n");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double w = (*this)(i, j);
            if (!std::isfinite(w) || w < 0.0) {
                throw InvalidArgument("mobility weight (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") must be finite and nonnegative");
            }
            if (i == j && w != 0.0) {
                throw InvalidArgument("mobility diagonal must be zero (node " + std::to_string(i) + ")");
            }
        }
    }
}

MobilityMatrix parse_mobility_csv(std::istream& in)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (rows.empty()) {
            width = cells.size();
        }
        else if (cells.size() != width) {
            throw ParseError("mobility row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                 " columns, expected " + std::to_string(width),
                             line_no, 0);
        }
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], row[c])) {
                throw ParseError("mobility row " + std::to_string(line_no) + " column " + std::to_string(c + 1) +
                                     ": '" + std::string(cells[c]) + "' is not a number",
                                 line_no, c + 1);
            }
            if (row[c] < 0.0) {
                throw ParseError("mobility row " + std::to_string(line_no) + " column " + std::to_string(c + 1) +
                                     ": negative weight",
                                 line_no, c + 1);
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() != width) {
        throw ParseError("mobility matrix is " + std::to_string(rows.size()) + "x" + std::to_string(width) +
                         ", expected a square matrix");
    }
    MobilityMatrix m(rows.size());
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) m(i, j) = rows[i][j];
    m.validate();
    return m;
}

MobilityMatrix load_mobility(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return parse_mobility_csv(in);
}

void write_mobility_csv(std::ostream& out, const MobilityMatrix& m)
{
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.n; ++j) {
            if (j) out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
    out.precision(old);
}

MobilityMatrix synth_mobility(std::size_t n, double target_density, std::uint64_t seed)
{
    if (n < 2) throw InvalidArgument("synth_mobility needs n >= 2");
    if (!(target_density >= 0.0 && target_density <= 1.0)) {
        throw InvalidArgument("target density must lie in [0,1]");
    }
    Rng rng(seed);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    const auto wanted = static_cast<std::size_t>(std::llround(target_density * static_cast<double>(pairs.size())));
    // Partial Fisher-Yates: the first `wanted` pairs form a uniform sample.
    for (std::size_t k = 0; k < wanted; ++k) {
        const std::size_t pick = k + rng.below(pairs.size() - k);
        std::swap(pairs[k], pairs[pick]);
    }
    MobilityMatrix m(n);
    for (std::size_t k = 0; k < wanted; ++k) {
        const auto [i, j] = pairs[k];
        m(i, j) = log_uniform(rng, kMinSyntheticCommuters, kMaxSyntheticCommuters);
        m(j, i) = log_uniform(rng, kMinSyntheticCommuters, kMaxSyntheticCommuters);
    }
    return m;
}

bool BinaryMatrix::symmetric() const
{
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
}

std::size_t BinaryMatrix::nnz() const
{
    return static_cast<std::size_t>(std::count(entries.begin(), entries.end(), std::uint8_t{1}));
}

BinaryMatrix adjacency_from_mobility(const MobilityMatrix& m, bool symmetrize)
{
    BinaryMatrix a(m.n);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.n; ++j) {
            const bool edge = m(i, j) > 0.0 || (symmetrize && m(j, i) > 0.0);
            a(i, j) = edge ? 1 : 0;
        }
    }
    return a;
}

namespace {

CsrMatrix<double> symmetric_normalize(const BinaryMatrix& a, bool self_loops)
{
    const std::size_t n = a.n;
    std::vector<double> inv_sqrt_degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t deg = self_loops ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j) deg += (a(i, j) && !(self_loops && i == j)) ? 1 : 0;
        inv_sqrt_degree[i] = deg > 0 ? 1.0 / std::sqrt(static_cast<double>(deg)) : 0.0;
    }
    CsrMatrix<double> out;
    out.rows = out.cols = n;
    out.row_ptr.assign(1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const bool edge = (self_loops && i == j) || a(i, j);
            if (edge && inv_sqrt_degree[i] > 0.0 && inv_sqrt_degree[j] > 0.0) {
                out.col_idx.push_back(static_cast<std::uint32_t>(j));
                out.values.push_back(inv_sqrt_degree[i] * inv_sqrt_degree[j]);
            }
        }
        out.row_ptr.push_back(out.values.size());
    }
    return out;
}

} // namespace

CsrMatrix<double> normalize_adjacency(const BinaryMatrix& a)
{
    return symmetric_normalize(a, false);
}

CsrMatrix<double> normalize_with_self_loops(const BinaryMatrix& a)
{
    return symmetric_normalize(a, true);
}

std::vector<Node> synth_populations(std::size_t n, std::uint64_t seed)
{
    Rng rng(mix_seed(seed, 0x706f70));
    std::vector<Node> nodes(n);
    for (auto& node : nodes) {
        node.population = std::round(log_uniform(rng, kMinSyntheticPopulation, kMaxSyntheticPopulation));
    }
    return nodes;
}

std::vector<Node> parse_population_csv(std::istream& in)
{
    std::map<std::size_t, Node> by_id;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        double first = 0.0;
        if (line_no == 1 && !parse_double(cells.front(), first)) continue; // header
        if (cells.size() != 2 + epi::kAgeGroups) {
            throw ParseError("population row " + std::to_string(line_no) + ": expected 8 columns", line_no, 0);
        }
        double values[2 + epi::kAgeGroups];
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], values[c])) {
                throw ParseError("population row " + std::to_string(line_no) + " column " + std::to_string(c + 1) +
                                     ": not a number",
                                 line_no, c + 1);
            }
        }
        const double id = values[0];
        if (id < 0 || std::floor(id) != id) {
            throw ParseError("population row " + std::to_string(line_no) + ": node_id must be a nonnegative integer",
                             line_no, 1);
        }
        Node node;
        node.population = values[1];
        if (!(node.population > 0.0)) {
            throw ParseError("population row " + std::to_string(line_no) + ": population must be positive", line_no,
                             2);
        }
        for (std::size_t a = 0; a < epi::kAgeGroups; ++a) node.age_shares[a] = values[2 + a];
        // Shares from files are usually rounded; renormalise before the exact check.
        const double sum = std::accumulate(node.age_shares.begin(), node.age_shares.end(), 0.0);
        if (!(std::abs(sum - 1.0) < 1e-3)) {
            throw ParseError("population row " + std::to_string(line_no) + ": age shares must sum to 1", line_no, 3);
        }
        for (double& s : node.age_shares) s /= sum;
        if (!by_id.emplace(static_cast<std::size_t>(id), node).second) {
            throw ParseError("population row " + std::to_string(line_no) + ": duplicate node_id", line_no, 1);
        }
    }
    std::vector<Node> nodes;
    for (const auto& [id, node] : by_id) {
        if (id != nodes.size()) {
            throw ParseError("population node ids must be 0..n-1 (missing " + std::to_string(nodes.size()) + ")");
        }
        nodes.push_back(node);
    }
    return nodes;
}

std::vector<Node> load_populations(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return parse_population_csv(in);
}

MetapopGraph::MetapopGraph(std::vector<Node> nodes, MobilityMatrix mobility, bool symmetrize)
    : nodes_(std::move(nodes)), mobility_(std::move(mobility))
{
    mobility_.validate();
    if (nodes_.size() != mobility_.n) {
        throw InvalidArgument("graph has " + std::to_string(nodes_.size()) + " nodes but the mobility matrix is " +
                              std::to_string(mobility_.n) + "x" + std::to_string(mobility_.n));
    }
    for (const auto& node : nodes_) {
        if (!(node.population > 0.0)) throw InvalidArgument("node populations must be positive");
    }
    adjacency_ = adjacency_from_mobility(mobility_, symmetrize);
    normalized_ = normalize_adjacency(adjacency_);
}

double MetapopGraph::density() const
{
    const double n = static_cast<double>(size());
    return static_cast<double>(adjacency_.nnz()) / (n * n);
}

nlohmann::json MetapopGraph::summary() const
{
    std::map<std::size_t, std::size_t> histogram;
    for (std::size_t i = 0; i < size(); ++i) {
        std::size_t deg = 0;
        for (std::size_t j = 0; j < size(); ++j) deg += adjacency_(i, j);
        ++histogram[deg];
    }
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [deg, count] : histogram) hist[std::to_string(deg)] = count;
    double total = 0.0;
    for (const auto& node : nodes_) total += node.population;
    return {
        {"n", size()},
        {"edges", adjacency_.nnz()},
        {"density", density()},
        {"symmetric", adjacency_.symmetric()},
        {"total_population", total},
        {"degree_histogram", hist},
    };
}

MetapopGraph build_graph(const GraphConfig& config)
{
    MobilityMatrix mobility = config.mobility_csv.empty()
                                  ? synth_mobility(config.nodes, config.density, config.seed)
                                  : load_mobility(config.mobility_csv);
    std::vector<Node> nodes = config.population_csv.empty() ? synth_populations(mobility.n, config.seed)
                                                            : load_populations(config.population_csv);
    return MetapopGraph(std::move(nodes), std::move(mobility));
}

nlohmann::json to_json(const GraphConfig& config)
{
    return {
        {"nodes", config.nodes},
        {"density", config.density},
        {"seed", config.seed},
        {"mobility_csv", config.mobility_csv.string()},
        {"population_csv", config.population_csv.string()},
    };
}

GraphConfig graph_config_from_json(const nlohmann::json& j)
{
    GraphConfig c;
    c.nodes = j.value("nodes", c.nodes);
    c.density = j.value("density", c.density);
    c.seed = j.value("seed", c.seed);
    c.mobility_csv = j.value("mobility_csv", std::string{});
    c.population_csv = j.value("population_csv", std::string{});
    return c;
}

} // namespace episurr::metapop
