#pragma once

#include "episurr/common/error.hpp"
#include "episurr/epi/compartments.hpp"
#include "episurr/epi/contact_policy.hpp"
#include "episurr/metapop/graph.hpp"
#include "episurr/scenario/sampling.hpp"
#include "episurr/surrogate/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <semaphore>
#include <string>
#include <variant>

namespace episurr::service {

inline constexpr const char* kSchemaVersion = "1.0";

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    /// Loaded at startup when set.
    std::filesystem::path checkpoint;
    metapop::GraphConfig graph{};
    /// Concurrent mechanistic runs; 0 = hardware concurrency.
    std::size_t mechanistic_workers = 0;
    /// Threads of the HTTP server.
    std::size_t http_threads = 8;
};

/// JSON file with the keys host, port, checkpoint, graph {nodes, density, seed,
/// mobility_csv, population_csv}, mechanistic_workers, http_threads.
ServiceConfig service_config_from_json(const nlohmann::json& j);
ServiceConfig load_service_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServiceConfig& c);

/// EPISURR_HOST, EPISURR_PORT, EPISURR_CHECKPOINT, EPISURR_GRAPH (a graph JSON file
/// or a mobility CSV), EPISURR_WORKERS. `getenv` is injectable for tests.
void apply_env_overrides(ServiceConfig& c,
                         const std::function<const char*(const char*)>& getenv = [](const char* k) {
                             return std::getenv(k);
                         });

enum class Engine { mechanistic, surrogate };

struct RegimeInit {
    scenario::Regime regime = scenario::Regime::outbreak;
    std::uint64_t seed = 1;
};

struct ScenarioRequest {
    Engine engine = Engine::surrogate;
    /// Either a regime draw or explicit day-0 states per node.
    std::variant<RegimeInit, std::vector<epi::CompartmentState>> initial = RegimeInit{};
    std::vector<epi::ContactChangePoint> change_points;
    int horizon = 30;
    std::optional<std::string> graph_id;
};

/// 400-class error with the JSON path of the offending field.
class RequestError : public InvalidArgument {
public:
    RequestError(std::string field, const std::string& message)
        : InvalidArgument(field + ": " + message), field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Throws RequestError. Node counts of explicit states are checked against `nodes`.
ScenarioRequest parse_request(const nlohmann::json& body, std::size_t nodes);
nlohmann::json to_json(const ScenarioRequest& r);
std::string_view engine_name(Engine e);

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Shared read-only state behind one loaded graph and at most one checkpoint.
struct Deployment {
    metapop::GraphConfig graph_config;
    std::shared_ptr<const metapop::MetapopGraph> graph;
    std::string graph_id;
    std::shared_ptr<const surrogate::Surrogate> model;
    std::filesystem::path checkpoint_path;
};

/// Transport-independent request handling; the HTTP server forwards to it.
class ScenarioService {
public:
    explicit ScenarioService(ServiceConfig config, std::ostream* log = nullptr);

    /// Builds the graph and loads the configured checkpoint. A failing checkpoint is
    /// logged and leaves the service unloaded.
    void start();

    /// Throws IoError, CorruptFileError, VersionMismatchError or EncodingMismatchError.
    void load_checkpoint(const std::filesystem::path& path);

    bool ready() const;

    HttpResponse health() const;
    HttpResponse model_info() const;
    HttpResponse graph_info() const;
    HttpResponse load_model(const std::string& body);
    /// `binary` selects the packed body: "EGR1", u32 header length, the JSON header
    /// (the JSON response without "values"), then f32 values, little-endian.
    HttpResponse run(const std::string& body, bool binary);

    struct RunResult {
        /// Response fields except "values".
        nlohmann::json header;
        /// Day-major, then node, then the 48 compartments.
        std::vector<float> values;
    };

    RunResult execute(const ScenarioRequest& request);
    /// Runs one parsed request; the JSON response including the nested "values".
    nlohmann::json run_json(const ScenarioRequest& request);

    const ServiceConfig& config() const { return config_; }

    void log(const nlohmann::json& entry) const;

private:
    std::shared_ptr<const Deployment> snapshot() const;
    std::vector<float> simulate(const Deployment& d, const std::vector<epi::CompartmentState>& init,
                                const epi::ContactPolicy& policy, int horizon);
    std::vector<float> infer(const Deployment& d, const std::vector<epi::CompartmentState>& init,
                             const epi::ContactPolicy& policy, int horizon);

    ServiceConfig config_;
    std::ostream* log_;
    mutable std::mutex mutex_;
    mutable std::mutex log_mutex_;
    std::shared_ptr<const Deployment> deployment_;
    std::unique_ptr<std::counting_semaphore<>> workers_;
};

std::string graph_id(const metapop::GraphConfig& c);

/// Blocking HTTP/1.1 server on top of ScenarioService.
class HttpServer {
public:
    explicit HttpServer(ScenarioService& service);
    ~HttpServer();

    /// Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace episurr::service
