#include "episurr/service/service.hpp"

#include <httplib.h>

#include <chrono>

namespace episurr::service {

struct HttpServer::Impl {
    explicit Impl(ScenarioService& s) : service(s) {}
    ScenarioService& service;
    httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const HttpResponse& r)
{
    res.status = r.status;
    res.set_content(r.body, r.content_type);
}

} // namespace

HttpServer::HttpServer(ScenarioService& service) : impl_(std::make_unique<Impl>(service))
{
    auto& svr = impl_->server;
    const auto threads = service.config().http_threads;
    svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    svr.set_payload_max_length(256u << 20);

    const auto route = [this](auto handler) {
        return [this, handler](const httplib::Request& req, httplib::Response& res) {
            const auto start = std::chrono::steady_clock::now();
            reply(res, handler(req));
            impl_->service.log({{"event", "request"},
                                {"method", req.method},
                                {"path", req.path},
                                {"status", res.status},
                                {"bytes", res.body.size()},
                                {"ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()}});
        };
    };
    svr.Get("/v1/health", route([this](const httplib::Request&) { return impl_->service.health(); }));
    svr.Get("/v1/model", route([this](const httplib::Request&) { return impl_->service.model_info(); }));
    svr.Get("/v1/graph", route([this](const httplib::Request&) { return impl_->service.graph_info(); }));
    svr.Post("/v1/model/load", route([this](const httplib::Request& req) { return impl_->service.load_model(req.body); }));
    svr.Post("/v1/run", route([this](const httplib::Request& req) {
        const bool binary = req.get_header_value("Accept").find("application/octet-stream") != std::string::npos;
        return impl_->service.run(req.body, binary);
    }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw IoError("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop()
{
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

} // namespace episurr::service
