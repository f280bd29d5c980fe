#include "episurr/scenario/dataset.hpp"

#include "episurr/common/error.hpp"
#include "episurr/common/parallel.hpp"
#include "episurr/epi/parameters.hpp"
#include "episurr/epi/simulation.hpp"
#include "episurr/metapop/simulation.hpp"
#include "episurr/scenario/encoding.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace episurr::scenario {

void ScenarioConfig::validate() const
{
    if (horizon != 30 && horizon != 60 && horizon != 90) {
        throw InvalidArgument("horizon must be 30, 60 or 90 days");
    }
    if (max_changes > epi::kMaxChangePoints) throw InvalidArgument("max_changes must be at most 3");
    if (fixed_changes && *fixed_changes > epi::kMaxChangePoints) {
        throw InvalidArgument("fixed_changes must be at most 3");
    }
    if (change_window < 1 || change_window > horizon) {
        throw InvalidArgument("change_window must lie in [1, horizon]");
    }
    if (!(ramp_width > 0.0 && ramp_width < 1.0)) throw InvalidArgument("ramp_width must lie in (0, 1)");
    if (!spatial && !(population > 0.0)) throw InvalidArgument("population must be positive");
}

nlohmann::json to_json(const ScenarioConfig& c)
{
    nlohmann::json j{{"regime", regime_name(c.regime)},
                     {"horizon", c.horizon},
                     {"input_days", kInputDays},
                     {"max_changes", c.max_changes},
                     {"change_window", c.change_window},
                     {"ramp_width", c.ramp_width},
                     {"seed", c.seed},
                     {"spatial", c.spatial},
                     {"n_samples", c.n_samples},
                     {"population", c.population},
                     {"graph", metapop::to_json(c.graph)}};
    j["fixed_changes"] = c.fixed_changes ? nlohmann::json(*c.fixed_changes) : nlohmann::json(nullptr);
    return j;
}

ScenarioConfig scenario_config_from_json(const nlohmann::json& j)
{
    ScenarioConfig c;
    if (j.contains("regime")) c.regime = regime_from_name(j.at("regime").get<std::string>());
    c.horizon = j.value("horizon", c.horizon);
    if (j.value("input_days", kInputDays) != kInputDays) throw InvalidArgument("input_days must be 5");
    c.max_changes = j.value("max_changes", c.max_changes);
    c.change_window = j.value("change_window", c.change_window);
    c.ramp_width = j.value("ramp_width", c.ramp_width);
    c.seed = j.value("seed", c.seed);
    c.spatial = j.value("spatial", c.spatial);
    c.n_samples = j.value("n_samples", c.n_samples);
    c.population = j.value("population", c.population);
    c.threads = j.value("threads", c.threads);
    if (j.contains("fixed_changes") && !j.at("fixed_changes").is_null()) {
        c.fixed_changes = j.at("fixed_changes").get<std::size_t>();
    }
    if (j.contains("graph")) c.graph = metapop::graph_config_from_json(j.at("graph"));
    c.validate();
    return c;
}

SampleShape sample_shape(const ScenarioConfig& config)
{
    SampleShape s;
    s.horizon = static_cast<std::size_t>(config.horizon);
    if (config.spatial) {
        s.nodes = config.graph.nodes;
        s.feature_rows = s.nodes;
        s.feature_cols = kSpatialWidth;
    }
    else {
        s.nodes = 1;
        s.feature_rows = kInputDays;
        s.feature_cols = kNonSpatialWidth;
    }
    return s;
}

namespace {

constexpr int kRetries = 3;

nlohmann::json change_points_json(const std::vector<epi::ContactChangePoint>& cps)
{
    auto arr = nlohmann::json::array();
    for (const auto& cp : cps) arr.push_back({{"day", cp.day}, {"reduction", cp.reduction}});
    return arr;
}

void append_labels(const epi::CompartmentState& x, std::vector<float>& out)
{
    for (double v : x.values) out.push_back(static_cast<float>(std::max(0.0, v)));
}

Record simulate_sample(const ScenarioConfig& config, const metapop::MetapopGraph* graph, Rng& rng)
{
    const auto params = epi::EpiParameters::wild_type();
    const int days = static_cast<int>(kInputDays) - 1 + config.horizon;
    Record rec;
    epi::ContactPolicy policy;
    policy.ramp_width = config.ramp_width;
    if (config.spatial) {
        std::vector<epi::CompartmentState> init;
        init.reserve(graph->size());
        for (const auto& node : graph->nodes()) {
            init.push_back(sample_init(config.regime, rng, node.population, node.age_shares));
        }
        policy.change_points = config.fixed_changes
                                   ? sample_change_points_exact(rng, *config.fixed_changes, config.change_window)
                                   : sample_change_points(rng, config.max_changes, config.change_window);
        const auto runs = metapop::simulate_metapopulation(*graph, init, params, policy, days);
        std::vector<std::vector<epi::CompartmentState>> inputs(runs.size());
        for (std::size_t i = 0; i < runs.size(); ++i) {
            inputs[i].assign(runs[i].days.begin(), runs[i].days.begin() + kInputDays);
        }
        rec.features = encode_spatial(inputs, policy);
        rec.labels.reserve(static_cast<std::size_t>(config.horizon) * runs.size() * epi::kCompartments);
        for (std::size_t d = kInputDays; d < kInputDays + static_cast<std::size_t>(config.horizon); ++d) {
            for (const auto& run : runs) append_labels(run.days[d], rec.labels);
        }
    }
    else {
        const auto init = sample_init(config.regime, rng, config.population, epi::default_age_shares());
        policy.change_points = config.fixed_changes
                                   ? sample_change_points_exact(rng, *config.fixed_changes, config.change_window)
                                   : sample_change_points(rng, config.max_changes, config.change_window);
        const auto run = epi::integrate(init, params, policy, days);
        rec.features = encode_nonspatial(std::span(run.days).first(kInputDays), policy);
        rec.labels.reserve(static_cast<std::size_t>(config.horizon) * epi::kCompartments);
        for (std::size_t d = kInputDays; d < run.days.size(); ++d) append_labels(run.days[d], rec.labels);
    }
    rec.meta = {{"regime", regime_name(config.regime)}, {"change_points", change_points_json(policy.change_points)}};
    return rec;
}

} // namespace

Record generate_sample(const ScenarioConfig& config, const metapop::MetapopGraph* graph, std::size_t index)
{
    if (config.spatial && graph == nullptr) throw InvalidArgument("spatial samples need a graph");
    const std::uint64_t sub_seed = config.seed ^ static_cast<std::uint64_t>(index);
    for (int attempt = 0;; ++attempt) {
        Rng rng(attempt == 0 ? sub_seed : mix_seed(sub_seed, static_cast<std::uint64_t>(attempt)));
        try {
            Record rec = simulate_sample(config, graph, rng);
            rec.meta["index"] = index;
            rec.meta["seed"] = sub_seed;
            rec.meta["attempt"] = attempt;
            return rec;
        }
        catch (const InvalidArgument&) {
            throw;
        }
        catch (const Error&) {
            if (attempt == kRetries) throw;
        }
    }
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v)
{
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(bytes, 4);
}

void put_floats(std::ostream& out, const std::vector<float>& v)
{
    for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

bool read_exact(std::istream& in, std::vector<unsigned char>& buf, std::size_t n)
{
    buf.resize(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

nlohmann::json header_json(const ScenarioConfig& config, const SampleShape& shape, std::size_t count)
{
    return {{"format", "EGS1"},
            {"version", kDatasetVersion},
            {"count", count},
            {"config", to_json(config)},
            {"shape",
             {{"nodes", shape.nodes},
              {"feature_rows", shape.feature_rows},
              {"feature_cols", shape.feature_cols},
              {"horizon", shape.horizon}}}};
}

void write_header(std::ostream& out, const ScenarioConfig& config, const SampleShape& shape, std::size_t count)
{
    out.write("EGS1", 4);
    const std::string header = header_json(config, shape, count).dump();
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
}

void write_record(std::ostream& out, const SampleShape& shape, const Record& rec)
{
    if (rec.features.size() != shape.feature_size() || rec.labels.size() != shape.label_size()) {
        throw ShapeError("record does not match the dataset shape");
    }
    const std::string meta = rec.meta.dump();
    const std::size_t bytes = 4 * (rec.features.size() + rec.labels.size()) + meta.size();
    put_u32(out, static_cast<std::uint32_t>(bytes));
    put_floats(out, rec.features);
    put_floats(out, rec.labels);
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
}

std::pair<ScenarioConfig, std::optional<metapop::MetapopGraph>> prepare(const ScenarioConfig& raw)
{
    raw.validate();
    ScenarioConfig config = raw;
    std::optional<metapop::MetapopGraph> graph;
    if (config.spatial) {
        graph.emplace(metapop::build_graph(config.graph));
        config.graph.nodes = graph->size();
    }
    return {config, std::move(graph)};
}

} // namespace

Dataset generate_dataset(const ScenarioConfig& raw)
{
    const auto prepared = prepare(raw);
    const auto& config = prepared.first;
    const auto& graph = prepared.second;
    Dataset ds;
    ds.config = config;
    ds.shape = sample_shape(config);
    ds.records.resize(config.n_samples);
    parallel_for(config.n_samples, config.threads, [&](std::size_t i) {
        ds.records[i] = generate_sample(config, graph ? &*graph : nullptr, i);
    });
    return ds;
}

void generate_dataset(const ScenarioConfig& raw, std::ostream& out)
{
    const auto prepared = prepare(raw);
    const auto& config = prepared.first;
    const auto& graph = prepared.second;
    const auto shape = sample_shape(config);
    write_header(out, config, shape, config.n_samples);
    const std::size_t chunk = std::max<std::size_t>(1, config.threads) * 4;
    std::vector<Record> buffer;
    for (std::size_t begin = 0; begin < config.n_samples; begin += chunk) {
        const std::size_t end = std::min(config.n_samples, begin + chunk);
        buffer.assign(end - begin, Record{});
        parallel_for(end - begin, config.threads, [&](std::size_t k) {
            buffer[k] = generate_sample(config, graph ? &*graph : nullptr, begin + k);
        });
        for (const auto& rec : buffer) write_record(out, shape, rec);
    }
    if (!out) throw IoError("failed to write dataset");
}

void write_dataset(std::ostream& out, const Dataset& dataset)
{
    write_header(out, dataset.config, dataset.shape, dataset.records.size());
    for (const auto& rec : dataset.records) write_record(out, dataset.shape, rec);
    if (!out) throw IoError("failed to write dataset");
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_dataset(out, dataset);
}

Dataset read_dataset(std::istream& in)
{
    std::vector<unsigned char> buf;
    if (!read_exact(in, buf, 4) || std::memcmp(buf.data(), "EGS1", 4) != 0) {
        throw CorruptFileError("not a dataset file (bad magic)");
    }
    if (!read_exact(in, buf, 4)) throw CorruptFileError("truncated dataset header");
    const std::uint32_t header_len = get_u32(buf.data());
    if (!read_exact(in, buf, header_len)) throw CorruptFileError("truncated dataset header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.begin(), buf.end());
    }
    catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("dataset header is not valid JSON: ") + e.what());
    }
    const auto version = header.value("version", 0u);
    if (version != kDatasetVersion) {
        throw VersionMismatchError("dataset version " + std::to_string(version) + ", expected " +
                                   std::to_string(kDatasetVersion));
    }
    Dataset ds;
    try {
        ds.config = scenario_config_from_json(header.at("config"));
        const auto& sh = header.at("shape");
        ds.shape.nodes = sh.at("nodes");
        ds.shape.feature_rows = sh.at("feature_rows");
        ds.shape.feature_cols = sh.at("feature_cols");
        ds.shape.horizon = sh.at("horizon");
    }
    catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("bad dataset header: ") + e.what());
    }
    const std::size_t count = header.at("count");
    const std::size_t nf = ds.shape.feature_size();
    const std::size_t nl = ds.shape.label_size();
    ds.records.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        if (!read_exact(in, buf, 4)) throw CorruptFileError("dataset truncated at record " + std::to_string(r));
        const std::size_t len = get_u32(buf.data());
        if (len < 4 * (nf + nl)) throw CorruptFileError("record " + std::to_string(r) + " is too short");
        if (!read_exact(in, buf, len)) throw CorruptFileError("dataset truncated at record " + std::to_string(r));
        Record rec;
        rec.features.resize(nf);
        rec.labels.resize(nl);
        for (std::size_t k = 0; k < nf; ++k) rec.features[k] = std::bit_cast<float>(get_u32(buf.data() + 4 * k));
        for (std::size_t k = 0; k < nl; ++k) {
            rec.labels[k] = std::bit_cast<float>(get_u32(buf.data() + 4 * (nf + k)));
        }
        try {
            rec.meta = nlohmann::json::parse(buf.begin() + static_cast<std::ptrdiff_t>(4 * (nf + nl)), buf.end());
        }
        catch (const nlohmann::json::exception&) {
            throw CorruptFileError("record " + std::to_string(r) + " has corrupt metadata");
        }
        ds.records.push_back(std::move(rec));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CorruptFileError("trailing bytes after the last record");
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_dataset(in);
}

void export_ndjson(std::ostream& out, const Dataset& dataset)
{
    out << header_json(dataset.config, dataset.shape, dataset.records.size()).dump() << '\n';
    for (const auto& rec : dataset.records) {
        nlohmann::json line{{"meta", rec.meta}, {"features", rec.features}, {"labels", rec.labels}};
        out << line.dump() << '\n';
    }
}

} // namespace episurr::scenario
