#include "dnmx/crawl/fetcher.hpp"

#include <httplib.h>

#include "dnmx/core/error.hpp"
#include "dnmx/core/jsonl.hpp"
#include "dnmx/crawl/url.hpp"

namespace dnmx::crawl {

FetchResult MockFetcher::fetch(const std::string& url) {
    const auto u = parse_url(url);
    std::string path = u ? u->path : url;
    if (u && !u->query.empty()) path += "?" + u->query;
    const auto r = market_->get(path);
    switch (r.status) {
    case sim::MockMarket::Status::ok: return {FetchStatus::ok, r.body, ""};
    case sim::MockMarket::Status::not_found: return {FetchStatus::permanent_error, "", "not found"};
    case sim::MockMarket::Status::transient_error: return {FetchStatus::transient_error, "", "unavailable"};
    }
    return {FetchStatus::permanent_error, "", "unknown status"};
}

FetchResult HttpFetcher::fetch(const std::string& url) {
    const auto u = parse_url(url);
    if (!u) return {FetchStatus::permanent_error, "", "not an http url: " + url};
    httplib::Client client(u->scheme + "://" + u->host);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    const auto target = u->query.empty() ? u->path : u->path + "?" + u->query;
    auto res = client.Get(target);
    if (!res) return {FetchStatus::transient_error, "", httplib::to_string(res.error())};
    if (res->status == 200) return {FetchStatus::ok, res->body, ""};
    const auto detail = "http status " + std::to_string(res->status);
    if (res->status >= 500 || res->status == 429) return {FetchStatus::transient_error, "", detail};
    return {FetchStatus::permanent_error, "", detail};
}

FetchResult DirectoryFetcher::fetch(const std::string& url) {
    const auto u = parse_url(url);
    const std::string path = u ? u->path : url;
    const auto file = root_ / std::filesystem::path(path).relative_path();
    if (path.find("..") != std::string::npos || !std::filesystem::is_regular_file(file)) {
        return {FetchStatus::permanent_error, "", "no such file: " + file.string()};
    }
    try {
        return {FetchStatus::ok, read_file(file), ""};
    } catch (const Error& e) {
        return {FetchStatus::transient_error, "", e.what()};
    }
}

RotatingProxyFetcher::RotatingProxyFetcher(std::shared_ptr<Fetcher> inner, std::vector<std::string> identities)
    : inner_(std::move(inner)), identities_(std::move(identities)) {
    if (identities_.empty()) throw ConfigError("proxy rotation needs at least one identity");
}

FetchResult RotatingProxyFetcher::fetch(const std::string& url) {
    const auto& id = identities_[next_.fetch_add(1) % identities_.size()];
    {
        std::lock_guard lock(mu_);
        log_.push_back({url, id});
    }
    return inner_->fetch(url);
}

std::vector<RotatingProxyFetcher::Request> RotatingProxyFetcher::log() const {
    std::lock_guard lock(mu_);
    return log_;
}

} // namespace dnmx::crawl
