#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "dnmx/sim/market.hpp"

namespace httplib {
class Server;
}

namespace dnmx::sim {

/// Per-request delay; fixed when min_ms == max_ms.
struct LatencyModel {
    int min_ms = 0;
    int max_ms = 0;
};

struct MockMarketConfig {
    double failure_rate = 0.0;  ///< probability that a request fails transiently
    std::uint64_t seed = 0;
    LatencyModel latency;
};

/// Immutable page map plus a request counter. Request k (0-based, in arrival
/// order) fails transiently iff indexed_uniform(seed, k) < failure_rate.
class MockMarket {
public:
    enum class Status { ok, not_found, transient_error };
    struct Response {
        Status status;
        std::string body;
    };

    MockMarket(const std::vector<GroundTruthListing>& corpus, MockMarketConfig config = {});

    /// Thread-safe. Applies the latency model, then the failure model.
    Response get(std::string_view path);

    const std::string& overview_url() const { return overview_url_; }
    const std::map<std::string, std::string>& pages() const { return pages_; }
    std::uint64_t requests() const { return requests_.load(); }

    static bool fails_at(std::uint64_t seed, double failure_rate, std::uint64_t request_index);

private:
    std::map<std::string, std::string> pages_;
    std::string overview_url_ = kOverviewPath;
    MockMarketConfig config_;
    std::atomic<std::uint64_t> requests_{0};
};

/// Running HTTP front end for a MockMarket. 404 for unknown paths, 503 for
/// transient failures. Stops and joins on destruction.
class MockMarketServer {
public:
    /// port 0 picks a free port. Throws ServiceError when binding fails.
    MockMarketServer(std::shared_ptr<MockMarket> market, const std::string& host, int port);
    ~MockMarketServer();
    MockMarketServer(const MockMarketServer&) = delete;
    MockMarketServer& operator=(const MockMarketServer&) = delete;

    void stop();
    /// Blocks until stop() is called from elsewhere (signal handler, other thread).
    void wait();
    int port() const { return port_; }
    std::string base_url() const;
    MockMarket& market() { return *market_; }

private:
    std::shared_ptr<MockMarket> market_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_;
    int port_ = 0;
};

std::unique_ptr<MockMarketServer> serve(const std::vector<GroundTruthListing>& corpus,
                                        const std::string& host, int port,
                                        MockMarketConfig config = {});

} // namespace dnmx::sim
