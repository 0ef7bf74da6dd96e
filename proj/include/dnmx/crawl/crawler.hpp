#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dnmx/core/entities.hpp"
#include "dnmx/core/jsonl.hpp"
#include "dnmx/crawl/fetcher.hpp"

namespace dnmx::crawl {

struct DelayRange {
    int min_ms = 0;
    int max_ms = 0;
};

struct CrawlConfig {
    std::string seed_url;
    std::size_t max_stored_links = 1'000'000;
    double max_seconds = 86'400;
    int rounds = 3;
    DelayRange delay;
    int max_retries = 3;
    int workers = 1;
    std::uint64_t seed = 0;  ///< drives the delay draws

    /// ConfigError on violated invariants.
    void validate() const;
};

struct RawPage {
    std::string url;
    std::optional<MarketId> market_id;
    std::string html;
    double fetched_at = 0;  ///< seconds since crawl start
    int round = 0;
};

struct CrawlState {
    std::deque<std::string> frontier;
    std::set<std::string> seen;
    std::map<std::string, RawPage> stored;
};

/// true iff url is unseen and the seen-set is below the link cap.
bool should_enqueue(const std::string& url, const CrawlState& state, const CrawlConfig& config);

/// Time source. The default is the steady clock; tests substitute a manual
/// clock whose sleeps advance virtual time.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now() = 0;  ///< seconds
    virtual void sleep_until(double t) = 0;
};

class SteadyClock final : public Clock {
public:
    SteadyClock();
    double now() override;
    void sleep_until(double t) override;

private:
    double origin_;
};

/// Virtual clock; every fetch can also charge a fixed cost.
class ManualClock final : public Clock {
public:
    double now() override;
    void sleep_until(double t) override;
    void advance(double dt);

private:
    std::mutex mu_;
    double t_ = 0;
};

struct CrawlReport {
    std::size_t fetched = 0;     ///< successful downloads
    std::size_t attempts = 0;    ///< every request issued, retries included
    std::size_t retries = 0;
    std::size_t deduped = 0;     ///< links dropped because already seen
    std::size_t errors = 0;      ///< urls that failed for good in a round
    std::size_t link_cap_rejections = 0;
    std::vector<std::size_t> new_pages_per_round;
    int rounds_completed = 0;
    bool frontier_empty = false;
    bool rounds_exhausted = false;
    bool link_cap_hit = false;
    bool time_cap_hit = false;
    std::string terminated_by;
    double duration_seconds = 0;

    Json to_json() const;
};

struct CrawlResult {
    std::map<std::string, RawPage> store;
    CrawlReport report;
    std::vector<std::string> fetch_log;   ///< urls of successful downloads, in order
    std::vector<double> request_times;    ///< clock time of every request
};

/// Bounded breadth-first crawl from config.seed_url. Round 1 walks the
/// frontier from the seed; later rounds restart from the seed with the
/// seen-set retained, re-walking stored pages without downloading them and
/// fetching only links never seen before (plus urls that failed earlier).
/// CrawlError when the seed cannot be fetched.
CrawlResult crawl(Fetcher& fetcher, const CrawlConfig& config, Clock* clock = nullptr);

/// Persists listing pages in the corpus directory layout (pages/*.html plus
/// manifest.jsonl) and every stored url in crawl_index.jsonl.
void write_store(const std::filesystem::path& dir, const std::map<std::string, RawPage>& store);

/// Page id for a stored url: the last path segment without ".html".
std::string page_id_of_url(const std::string& url);

} // namespace dnmx::crawl
