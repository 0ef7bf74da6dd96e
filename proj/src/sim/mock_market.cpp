#include "dnmx/sim/mock_market.hpp"

#include <chrono>

#include <httplib.h>

#include "dnmx/core/error.hpp"
#include "dnmx/core/rng.hpp"

namespace dnmx::sim {

MockMarket::MockMarket(const std::vector<GroundTruthListing>& corpus, MockMarketConfig config)
    : config_(config) {
    if (corpus.empty()) throw ServiceError("mock market needs a non-empty corpus");
    if (config.failure_rate < 0.0 || config.failure_rate > 1.0) {
        throw ConfigError("failure rate must lie in [0, 1]");
    }
    if (config.latency.min_ms < 0 || config.latency.min_ms > config.latency.max_ms) {
        throw ConfigError("latency range must satisfy 0 <= min <= max");
    }
    for (const auto& p : corpus) pages_[p.url] = p.html;
    pages_[overview_url_] = render_overview(corpus);
}

bool MockMarket::fails_at(std::uint64_t seed, double failure_rate, std::uint64_t request_index) {
    return failure_rate > 0.0 && indexed_uniform(seed, request_index) < failure_rate;
}

MockMarket::Response MockMarket::get(std::string_view path) {
    const std::uint64_t k = requests_.fetch_add(1);
    const auto& lat = config_.latency;
    if (lat.max_ms > 0) {
        const double u = indexed_uniform(config_.seed ^ 0x1a7e11c7ULL, k);
        const int ms = lat.min_ms + static_cast<int>(u * (lat.max_ms - lat.min_ms + 1));
        std::this_thread::sleep_for(std::chrono::milliseconds(std::min(ms, lat.max_ms)));
    }
    if (fails_at(config_.seed, config_.failure_rate, k)) return {Status::transient_error, {}};
    const auto it = pages_.find(std::string(path));
    if (it == pages_.end()) return {Status::not_found, {}};
    return {Status::ok, it->second};
}

MockMarketServer::MockMarketServer(std::shared_ptr<MockMarket> market, const std::string& host, int port)
    : market_(std::move(market)), server_(std::make_unique<httplib::Server>()), host_(host) {
    // httplib defaults to SO_REUSEPORT, which would let a second server
    // silently share the port.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    server_->Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto r = market_->get(req.path);
        switch (r.status) {
        case MockMarket::Status::ok:
            res.set_content(r.body, "text/html; charset=utf-8");
            break;
        case MockMarket::Status::not_found:
            res.status = 404;
            res.set_content("not found", "text/plain");
            break;
        case MockMarket::Status::transient_error:
            res.status = 503;
            res.set_content("temporarily unavailable", "text/plain");
            break;
        }
    });
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) throw ServiceError("cannot bind mock market on " + host);
    } else {
        if (!server_->bind_to_port(host, port)) {
            throw ServiceError("cannot bind mock market on " + host + ":" + std::to_string(port));
        }
        port_ = port;
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

MockMarketServer::~MockMarketServer() { stop(); }

void MockMarketServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

void MockMarketServer::wait() {
    if (thread_.joinable()) thread_.join();
}

std::string MockMarketServer::base_url() const {
    return "http://" + host_ + ":" + std::to_string(port_);
}

std::unique_ptr<MockMarketServer> serve(const std::vector<GroundTruthListing>& corpus,
                                        const std::string& host, int port, MockMarketConfig config) {
    return std::make_unique<MockMarketServer>(std::make_shared<MockMarket>(corpus, config), host, port);
}

} // namespace dnmx::sim
