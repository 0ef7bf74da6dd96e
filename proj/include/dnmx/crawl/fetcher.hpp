#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dnmx/sim/mock_market.hpp"

namespace dnmx::crawl {

enum class FetchStatus { ok, transient_error, permanent_error };

struct FetchResult {
    FetchStatus status = FetchStatus::ok;
    std::string body;
    std::string detail;
};

/// fetch(url) takes an absolute canonical url. Implementations must be safe
/// to call from several crawler workers at once.
class Fetcher {
public:
    virtual ~Fetcher() = default;
    virtual FetchResult fetch(const std::string& url) = 0;
};

/// In-process client of a MockMarket; only the url path is used.
class MockFetcher final : public Fetcher {
public:
    explicit MockFetcher(std::shared_ptr<sim::MockMarket> market) : market_(std::move(market)) {}
    FetchResult fetch(const std::string& url) override;

private:
    std::shared_ptr<sim::MockMarket> market_;
};

/// Plain HTTP/1.1 GET. 5xx and connection failures are transient, other
/// non-200 statuses permanent.
class HttpFetcher final : public Fetcher {
public:
    explicit HttpFetcher(int timeout_seconds = 10) : timeout_seconds_(timeout_seconds) {}
    FetchResult fetch(const std::string& url) override;

private:
    int timeout_seconds_;
};

/// Reads <root>/<url path> from disk; a missing file is a permanent error.
class DirectoryFetcher final : public Fetcher {
public:
    explicit DirectoryFetcher(std::filesystem::path root) : root_(std::move(root)) {}
    FetchResult fetch(const std::string& url) override;

private:
    std::filesystem::path root_;
};

/// Tags each request with the next identity of a fixed rotation and
/// forwards it. Stand-in for rotating proxies; no networking semantics.
class RotatingProxyFetcher final : public Fetcher {
public:
    RotatingProxyFetcher(std::shared_ptr<Fetcher> inner, std::vector<std::string> identities);
    FetchResult fetch(const std::string& url) override;

    struct Request {
        std::string url;
        std::string identity;
    };
    std::vector<Request> log() const;

private:
    std::shared_ptr<Fetcher> inner_;
    std::vector<std::string> identities_;
    std::atomic<std::size_t> next_{0};
    mutable std::mutex mu_;
    std::vector<Request> log_;
};

} // namespace dnmx::crawl
