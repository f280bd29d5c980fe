#include "episurr/service/service.hpp"

#include "episurr/epi/parameters.hpp"
#include "episurr/metapop/simulation.hpp"
#include "episurr/scenario/encoding.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

namespace episurr::service {

using nlohmann::json;

namespace {

/// Error carrying an HTTP status for the handlers.
class HttpError : public Error {
public:
    HttpError(int status, const std::string& message, std::string field = {})
        : Error(message), status_(status), field_(std::move(field))
    {
    }
    int status() const { return status_; }
    const std::string& field() const { return field_; }

private:
    int status_;
    std::string field_;
};

HttpResponse error_response(int status, const std::string& message, const std::string& field = {})
{
    json err{{"status", status}, {"message", message}};
    if (!field.empty()) err["field"] = field;
    return {status, "application/json", json{{"error", err}}.dump()};
}

HttpResponse json_response(const json& j, int status = 200) { return {status, "application/json", j.dump()}; }

std::size_t hardware_workers()
{
    const auto n = std::thread::hardware_concurrency();
    return n ? n : 1;
}

} // namespace

ServiceConfig service_config_from_json(const json& j)
{
    ServiceConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.checkpoint = j.value("checkpoint", std::string{});
    if (j.contains("graph")) c.graph = metapop::graph_config_from_json(j.at("graph"));
    c.mechanistic_workers = j.value("mechanistic_workers", c.mechanistic_workers);
    c.http_threads = j.value("http_threads", c.http_threads);
    if (c.port < 0 || c.port > 65535) throw InvalidArgument("port must lie in 0..65535");
    if (c.http_threads == 0) throw InvalidArgument("http_threads must be positive");
    return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return service_config_from_json(json::parse(in));
    }
    catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

json to_json(const ServiceConfig& c)
{
    return {{"host", c.host},
            {"port", c.port},
            {"checkpoint", c.checkpoint.string()},
            {"graph", metapop::to_json(c.graph)},
            {"mechanistic_workers", c.mechanistic_workers},
            {"http_threads", c.http_threads}};
}

void apply_env_overrides(ServiceConfig& c, const std::function<const char*(const char*)>& getenv)
{
    if (const char* v = getenv("EPISURR_HOST"); v && *v) c.host = v;
    if (const char* v = getenv("EPISURR_PORT"); v && *v) {
        try {
            c.port = std::stoi(v);
        }
        catch (const std::exception&) {
            throw InvalidArgument(std::string("EPISURR_PORT is not a number: ") + v);
        }
    }
    if (const char* v = getenv("EPISURR_CHECKPOINT"); v && *v) c.checkpoint = v;
    if (const char* v = getenv("EPISURR_GRAPH"); v && *v) {
        const std::filesystem::path p(v);
        if (p.extension() == ".json") {
            std::ifstream in(p);
            if (!in) throw IoError("cannot open " + p.string());
            c.graph = metapop::graph_config_from_json(json::parse(in));
        }
        else {
            c.graph.mobility_csv = p;
        }
    }
    if (const char* v = getenv("EPISURR_WORKERS"); v && *v) {
        try {
            c.mechanistic_workers = static_cast<std::size_t>(std::stoul(v));
        }
        catch (const std::exception&) {
            throw InvalidArgument(std::string("EPISURR_WORKERS is not a number: ") + v);
        }
    }
}

std::string_view engine_name(Engine e) { return e == Engine::mechanistic ? "mechanistic" : "surrogate"; }

std::string graph_id(const metapop::GraphConfig& c)
{
    if (!c.mobility_csv.empty()) return "csv:" + c.mobility_csv.filename().string();
    char buf[96];
    std::snprintf(buf, sizeof buf, "synth-n%zu-d%g-s%llu", c.nodes, c.density, static_cast<unsigned long long>(c.seed));
    return buf;
}

namespace {

std::string at_index(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

double number_field(const json& obj, const char* key, const std::string& path)
{
    if (!obj.contains(key)) throw RequestError(path, "is required");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw RequestError(path, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw RequestError(path, "must be finite");
    return d;
}

} // namespace

ScenarioRequest parse_request(const json& body, std::size_t nodes)
{
    if (!body.is_object()) throw RequestError("$", "request body must be a JSON object");
    ScenarioRequest r;
    if (body.contains("engine")) {
        const auto& e = body.at("engine");
        if (e == "surrogate") r.engine = Engine::surrogate;
        else if (e == "mechanistic") r.engine = Engine::mechanistic;
        else throw RequestError("engine", "must be \"surrogate\" or \"mechanistic\"");
    }
    if (body.contains("horizon")) {
        const auto& h = body.at("horizon");
        if (!h.is_number_integer()) throw RequestError("horizon", "must be one of 30, 60, 90");
        r.horizon = h.get<int>();
        if (r.horizon != 30 && r.horizon != 60 && r.horizon != 90) {
            throw RequestError("horizon", "must be one of 30, 60, 90");
        }
    }
    if (body.contains("change_points")) {
        const auto& cps = body.at("change_points");
        if (!cps.is_array()) throw RequestError("change_points", "must be an array");
        if (cps.size() > epi::kMaxChangePoints) {
            throw RequestError("change_points", "at most " + std::to_string(epi::kMaxChangePoints) +
                                                    " change points are allowed, got " + std::to_string(cps.size()));
        }
        for (std::size_t i = 0; i < cps.size(); ++i) {
            const auto path = at_index("change_points", i);
            const auto& cp = cps[i];
            if (!cp.is_object()) throw RequestError(path, "must be an object");
            if (!cp.contains("day") || !cp.at("day").is_number_integer()) {
                throw RequestError(path + ".day", "must be an integer day");
            }
            const int day = cp.at("day").get<int>();
            if (day < 1 || day > scenario::kChangeWindow) {
                throw RequestError(path + ".day", "must lie in 1.." + std::to_string(scenario::kChangeWindow));
            }
            const double red = number_field(cp, "reduction", path + ".reduction");
            if (red < 0.0 || red >= 1.0) throw RequestError(path + ".reduction", "must lie in [0, 1)");
            for (const auto& prev : r.change_points) {
                if (prev.day == day) throw RequestError(path + ".day", "duplicates another change day");
            }
            r.change_points.push_back({static_cast<double>(day), red, std::nullopt});
        }
        std::sort(r.change_points.begin(), r.change_points.end(),
                  [](const auto& a, const auto& b) { return a.day < b.day; });
    }
    if (body.contains("initial")) {
        const auto& init = body.at("initial");
        if (!init.is_object()) throw RequestError("initial", "must be an object");
        if (init.contains("states")) {
            const auto& st = init.at("states");
            if (!st.is_array() || st.size() != nodes) {
                throw RequestError("initial.states", "must hold one state per node (" + std::to_string(nodes) + ")");
            }
            std::vector<epi::CompartmentState> states(nodes);
            for (std::size_t i = 0; i < nodes; ++i) {
                const auto path = at_index("initial.states", i);
                const auto& row = st[i];
                if (!row.is_array() || row.size() != epi::kCompartments) {
                    throw RequestError(path, "must hold 48 values (6 ages x 8 states)");
                }
                for (std::size_t k = 0; k < epi::kCompartments; ++k) {
                    const auto& v = row[k];
                    if (!v.is_number() || !std::isfinite(v.get<double>()) || v.get<double>() < 0.0) {
                        throw RequestError(at_index(path, k), "must be a finite nonnegative number");
                    }
                    states[i].values[k] = v.get<double>();
                }
                for (std::size_t a = 0; a < epi::kAgeGroups; ++a) {
                    if (states[i].age_total(a) <= 0.0) throw RequestError(path, "every age group needs persons");
                }
            }
            r.initial = std::move(states);
        }
        else {
            RegimeInit ri;
            if (init.contains("regime")) {
                const auto& g = init.at("regime");
                if (!g.is_string()) throw RequestError("initial.regime", "must be a string");
                try {
                    ri.regime = scenario::regime_from_name(g.get<std::string>());
                }
                catch (const InvalidArgument&) {
                    throw RequestError("initial.regime", "must be \"outbreak\" or \"persistent_threat\"");
                }
            }
            if (init.contains("seed")) {
                const auto& s = init.at("seed");
                if (!s.is_number_unsigned()) throw RequestError("initial.seed", "must be a nonnegative integer");
                ri.seed = s.get<std::uint64_t>();
            }
            r.initial = ri;
        }
    }
    if (body.contains("graph_id")) {
        if (!body.at("graph_id").is_string()) throw RequestError("graph_id", "must be a string");
        r.graph_id = body.at("graph_id").get<std::string>();
    }
    return r;
}

json to_json(const ScenarioRequest& r)
{
    json j{{"engine", engine_name(r.engine)}, {"horizon", r.horizon}};
    auto cps = json::array();
    for (const auto& cp : r.change_points) cps.push_back({{"day", static_cast<int>(cp.day)}, {"reduction", cp.reduction}});
    j["change_points"] = cps;
    if (const auto* ri = std::get_if<RegimeInit>(&r.initial)) {
        j["initial"] = {{"regime", scenario::regime_name(ri->regime)}, {"seed", ri->seed}};
    }
    else {
        auto states = json::array();
        for (const auto& s : std::get<std::vector<epi::CompartmentState>>(r.initial)) states.push_back(s.values);
        j["initial"] = {{"states", states}};
    }
    if (r.graph_id) j["graph_id"] = *r.graph_id;
    return j;
}

ScenarioService::ScenarioService(ServiceConfig config, std::ostream* log) : config_(std::move(config)), log_(log)
{
    const auto n = config_.mechanistic_workers ? config_.mechanistic_workers : hardware_workers();
    workers_ = std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(n));
}

void ScenarioService::log(const json& entry) const
{
    if (!log_) return;
    json e = entry;
    e["ts"] = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
    std::lock_guard lock(log_mutex_);
    *log_ << e.dump() << '\n' << std::flush;
}

void ScenarioService::start()
{
    auto d = std::make_shared<Deployment>();
    d->graph_config = config_.graph;
    d->graph = std::make_shared<const metapop::MetapopGraph>(metapop::build_graph(config_.graph));
    d->graph_id = graph_id(config_.graph);
    {
        std::lock_guard lock(mutex_);
        deployment_ = d;
    }
    log({{"event", "graph_loaded"}, {"graph_id", d->graph_id}, {"nodes", d->graph->size()}});
    if (!config_.checkpoint.empty()) {
        try {
            load_checkpoint(config_.checkpoint);
        }
        catch (const std::exception& e) {
            log({{"event", "checkpoint_failed"}, {"path", config_.checkpoint.string()}, {"error", e.what()}});
        }
    }
}

std::shared_ptr<const Deployment> ScenarioService::snapshot() const
{
    std::lock_guard lock(mutex_);
    return deployment_;
}

void ScenarioService::load_checkpoint(const std::filesystem::path& path)
{
    const auto current = snapshot();
    if (!current) throw Error("service has no graph; call start() first");
    auto ckpt = surrogate::load_checkpoint(path);
    const auto& spec = ckpt.network.spec();
    if (!spec.spatial || spec.input_width != scenario::kSpatialWidth) {
        throw EncodingMismatchError("checkpoint is not a spatial model with 354 input features");
    }
    if (ckpt.data.contains("graph")) {
        const auto trained_on = graph_id(metapop::graph_config_from_json(ckpt.data.at("graph")));
        if (trained_on != current->graph_id) {
            throw EncodingMismatchError("checkpoint was trained on graph " + trained_on + ", service runs " +
                                        current->graph_id);
        }
    }
    auto model = std::make_shared<const surrogate::Surrogate>(std::move(ckpt), &current->graph->adjacency());
    auto next = std::make_shared<Deployment>(*current);
    next->model = std::move(model);
    next->checkpoint_path = path;
    {
        std::lock_guard lock(mutex_);
        deployment_ = next;
    }
    log({{"event", "checkpoint_loaded"}, {"path", path.string()}, {"max_horizon", next->model->max_horizon()}});
}

bool ScenarioService::ready() const
{
    const auto d = snapshot();
    return d && d->graph && d->model;
}

HttpResponse ScenarioService::health() const
{
    const auto d = snapshot();
    if (!d || !d->graph) return json_response({{"status", "unavailable"}, {"reason", "graph not loaded"}}, 503);
    if (!d->model) return json_response({{"status", "unavailable"}, {"reason", "model not loaded"}}, 503);
    return json_response({{"status", "ok"}, {"graph_id", d->graph_id}, {"checkpoint", d->checkpoint_path.string()}});
}

HttpResponse ScenarioService::model_info() const
{
    const auto d = snapshot();
    if (!d || !d->model) return error_response(503, "model not loaded");
    const auto& ck = d->model->checkpoint();
    return json_response({{"checkpoint", d->checkpoint_path.string()},
                          {"spec", surrogate::to_json(ck.network.spec())},
                          {"meta", surrogate::to_json(ck.meta)},
                          {"data", ck.data},
                          {"parameters", ck.network.parameter_count()},
                          {"max_horizon", d->model->max_horizon()}});
}

HttpResponse ScenarioService::graph_info() const
{
    const auto d = snapshot();
    if (!d || !d->graph) return error_response(503, "graph not loaded");
    auto summary = d->graph->summary();
    return json_response({{"graph_id", d->graph_id},
                          {"config", metapop::to_json(d->graph_config)},
                          {"n", d->graph->size()},
                          {"density", d->graph->density()},
                          {"target_density", d->graph_config.density},
                          {"summary", summary}});
}

HttpResponse ScenarioService::load_model(const std::string& body)
{
    json j;
    try {
        j = json::parse(body);
    }
    catch (const json::exception& e) {
        return error_response(400, std::string("body is not valid JSON: ") + e.what(), "$");
    }
    if (!j.is_object() || !j.contains("path") || !j.at("path").is_string()) {
        return error_response(400, "path must be a string", "path");
    }
    try {
        load_checkpoint(j.at("path").get<std::string>());
    }
    catch (const EncodingMismatchError& e) {
        return error_response(409, e.what(), "path");
    }
    catch (const Error& e) {
        return error_response(400, e.what(), "path");
    }
    return model_info();
}

namespace {

constexpr std::size_t kInputDays = scenario::kInputDays;

std::vector<epi::CompartmentState> initial_states(const ScenarioRequest& r, const metapop::MetapopGraph& g)
{
    if (const auto* states = std::get_if<std::vector<epi::CompartmentState>>(&r.initial)) return *states;
    const auto& ri = std::get<RegimeInit>(r.initial);
    Rng rng(ri.seed);
    std::vector<epi::CompartmentState> out;
    out.reserve(g.size());
    for (const auto& node : g.nodes()) out.push_back(scenario::sample_init(ri.regime, rng, node.population, node.age_shares));
    return out;
}

} // namespace

std::vector<float> ScenarioService::simulate(const Deployment& d, const std::vector<epi::CompartmentState>& init,
                                             const epi::ContactPolicy& policy, int horizon)
{
    workers_->acquire();
    std::vector<epi::DailyTrajectory> runs;
    try {
        runs = metapop::simulate_metapopulation(*d.graph, init, epi::EpiParameters::wild_type(), policy,
                                                static_cast<int>(kInputDays) - 1 + horizon);
    }
    catch (...) {
        workers_->release();
        throw;
    }
    workers_->release();
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(horizon) * runs.size() * epi::kCompartments);
    for (std::size_t day = kInputDays; day < kInputDays + static_cast<std::size_t>(horizon); ++day) {
        for (const auto& run : runs) {
            for (double v : run.days[day].values) out.push_back(static_cast<float>(std::max(0.0, v)));
        }
    }
    return out;
}

std::vector<float> ScenarioService::infer(const Deployment& d, const std::vector<epi::CompartmentState>& init,
                                          const epi::ContactPolicy& policy, int horizon)
{
    const auto runs = metapop::simulate_metapopulation(*d.graph, init, epi::EpiParameters::wild_type(), policy,
                                                       static_cast<int>(kInputDays) - 1);
    std::vector<std::vector<epi::CompartmentState>> inputs;
    inputs.reserve(runs.size());
    for (const auto& run : runs) inputs.push_back(run.days);
    const auto features = scenario::encode_spatial(inputs, policy);
    return d.model->predict(features, static_cast<std::size_t>(horizon));
}

ScenarioService::RunResult ScenarioService::execute(const ScenarioRequest& request)
{
    const auto d = snapshot();
    if (!d || !d->graph) throw HttpError(503, "graph not loaded");
    if (request.graph_id && *request.graph_id != d->graph_id) {
        throw HttpError(409, "request targets graph " + *request.graph_id + ", service runs " + d->graph_id, "graph_id");
    }
    if (request.engine == Engine::surrogate) {
        if (!d->model) throw HttpError(503, "model not loaded");
        if (static_cast<std::size_t>(request.horizon) > d->model->max_horizon()) {
            throw HttpError(409, "checkpoint predicts at most " + std::to_string(d->model->max_horizon()) + " days",
                            "horizon");
        }
    }
    const auto init = initial_states(request, *d->graph);
    if (init.size() != d->graph->size()) throw RequestError("initial.states", "node count does not match the graph");
    epi::ContactPolicy policy;
    policy.change_points = request.change_points;
    try {
        policy.validate();
    }
    catch (const InvalidArgument& e) {
        throw RequestError("change_points", e.what());
    }

    const auto start = std::chrono::steady_clock::now();
    const auto values = request.engine == Engine::surrogate ? infer(*d, init, policy, request.horizon)
                                                            : simulate(*d, init, policy, request.horizon);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    const std::size_t n = d->graph->size();
    json out{{"schema_version", kSchemaVersion},
             {"engine", engine_name(request.engine)},
             {"horizon", request.horizon},
             {"nodes", n},
             {"first_day", kInputDays},
             {"latency_ms", ms},
             {"graph_id", d->graph_id},
             {"request", to_json(request)},
             {"shape", {request.horizon, n, epi::kAgeGroups, epi::kStates}},
             {"layout", "day, node, age, state"}};
    return {std::move(out), std::move(values)};
}

json ScenarioService::run_json(const ScenarioRequest& request)
{
    auto res = execute(request);
    const std::size_t n = res.header.at("nodes").get<std::size_t>();
    auto days = json::array();
    std::size_t k = 0;
    for (int day = 0; day < request.horizon; ++day) {
        auto nodes = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            auto ages = json::array();
            for (std::size_t a = 0; a < epi::kAgeGroups; ++a) {
                auto states = json::array();
                for (std::size_t s = 0; s < epi::kStates; ++s) states.push_back(res.values[k++]);
                ages.push_back(std::move(states));
            }
            nodes.push_back(std::move(ages));
        }
        days.push_back(std::move(nodes));
    }
    res.header["values"] = std::move(days);
    return std::move(res.header);
}

HttpResponse ScenarioService::run(const std::string& body, bool binary)
{
    const auto d = snapshot();
    json j;
    try {
        j = json::parse(body);
    }
    catch (const json::exception& e) {
        return error_response(400, std::string("body is not valid JSON: ") + e.what(), "$");
    }
    try {
        const auto request = parse_request(j, d && d->graph ? d->graph->size() : 0);
        if (!binary) {
            auto out = run_json(request);
            log({{"event", "run"}, {"engine", out.at("engine")}, {"horizon", request.horizon}, {"latency_ms", out.at("latency_ms")}});
            return json_response(out);
        }
        const auto res = execute(request);
        log({{"event", "run"}, {"engine", res.header.at("engine")}, {"horizon", request.horizon}, {"latency_ms", res.header.at("latency_ms")}, {"binary", true}});
        const std::string header = res.header.dump();
        std::string packed = "EGR1";
        const auto put_u32 = [&](std::uint32_t v) {
            for (int b = 0; b < 4; ++b) packed.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
        };
        put_u32(static_cast<std::uint32_t>(header.size()));
        packed += header;
        for (float v : res.values) put_u32(std::bit_cast<std::uint32_t>(v));
        return {200, "application/octet-stream", std::move(packed)};
    }
    catch (const RequestError& e) {
        return error_response(400, e.what(), e.field());
    }
    catch (const HttpError& e) {
        return error_response(e.status(), e.what(), e.field());
    }
    catch (const EncodingMismatchError& e) {
        return error_response(409, e.what());
    }
    catch (const InvalidArgument& e) {
        return error_response(400, e.what());
    }
    catch (const std::exception& e) {
        log({{"event", "run_failed"}, {"error", e.what()}});
        return error_response(500, e.what());
    }
}

} // namespace episurr::service
