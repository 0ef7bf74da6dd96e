#include "dnmx/crawl/crawler.hpp"

#include <chrono>
#include <condition_variable>
#include <thread>

#include "dnmx/core/error.hpp"
#include "dnmx/core/rng.hpp"
#include "dnmx/crawl/url.hpp"
#include "dnmx/sim/market.hpp"

namespace dnmx::crawl {

void CrawlConfig::validate() const {
    if (seed_url.empty()) throw ConfigError("crawl needs a seed url");
    if (max_stored_links < 1) throw ConfigError("max_stored_links must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (delay.min_ms < 0 || delay.min_ms > delay.max_ms) throw ConfigError("delay must satisfy 0 <= min <= max");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(max_seconds > 0)) throw ConfigError("max_seconds must be positive");
}

bool should_enqueue(const std::string& url, const CrawlState& state, const CrawlConfig& config) {
    return state.seen.count(url) == 0 && state.seen.size() < config.max_stored_links;
}

SteadyClock::SteadyClock() : origin_(0) { origin_ = now(); }

double SteadyClock::now() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count() - origin_;
}

void SteadyClock::sleep_until(double t) {
    const double dt = t - now();
    if (dt > 0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
}

double ManualClock::now() {
    std::lock_guard lock(mu_);
    return t_;
}

void ManualClock::sleep_until(double t) {
    std::lock_guard lock(mu_);
    t_ = std::max(t_, t);
}

void ManualClock::advance(double dt) {
    std::lock_guard lock(mu_);
    t_ += dt;
}

Json CrawlReport::to_json() const {
    return {{"fetched", fetched},
            {"attempts", attempts},
            {"retries", retries},
            {"deduped", deduped},
            {"errors", errors},
            {"link_cap_rejections", link_cap_rejections},
            {"new_pages_per_round", new_pages_per_round},
            {"rounds_completed", rounds_completed},
            {"limits",
             {{"frontier_empty", frontier_empty},
              {"rounds_exhausted", rounds_exhausted},
              {"link_cap", link_cap_hit},
              {"time_cap", time_cap_hit}}},
            {"terminated_by", terminated_by},
            {"duration_seconds", duration_seconds}};
}

namespace {

class Crawl {
public:
    Crawl(Fetcher& fetcher, const CrawlConfig& config, Clock& clock)
        : fetcher_(fetcher), config_(config), clock_(clock),
          delay_rng_(derive_seed(config.seed, "crawl-delay")) {}

    CrawlResult run() {
        const double start = clock_.now();
        deadline_ = start + config_.max_seconds;
        next_slot_ = start;
        seed_ = canonicalize_url(config_.seed_url);
        auto& rep = result_.report;

        for (int round = 1; round <= config_.rounds && !stop_; ++round) {
            round_ = round;
            const std::size_t before = state_.stored.size();
            if (round == 1) state_.seen.insert(seed_);
            walked_.clear();
            walked_.insert(seed_);
            state_.frontier.assign(1, seed_);
            in_flight_ = 0;

            if (config_.workers == 1) {
                worker();
            } else {
                std::vector<std::thread> pool;
                for (int w = 0; w < config_.workers; ++w) pool.emplace_back([this] { worker(); });
                for (auto& t : pool) t.join();
            }
            if (seed_failed_) {
                throw CrawlError("seed " + seed_ + " could not be fetched: " + seed_detail_);
            }
            rep.new_pages_per_round.push_back(state_.stored.size() - before);
            if (!stop_) ++rep.rounds_completed;
            // Urls that failed this round get another chance next round.
            for (const auto& u : failed_) state_.seen.erase(u);
            failed_.clear();
        }

        rep.frontier_empty = !stop_;
        rep.rounds_exhausted = rep.rounds_completed == config_.rounds;
        if (rep.time_cap_hit) {
            rep.terminated_by = "time_cap";
        } else if (rep.link_cap_hit) {
            rep.terminated_by = "link_cap";
        } else if (config_.rounds > 1) {
            rep.terminated_by = "rounds_exhausted";
        } else {
            rep.terminated_by = "frontier_empty";
        }
        rep.duration_seconds = clock_.now() - start;
        result_.store = std::move(state_.stored);
        return std::move(result_);
    }

private:
    // Called with mu_ held. Reserves the next politeness slot.
    double reserve_slot() {
        const double t = std::max(clock_.now(), next_slot_);
        const auto ms = delay_rng_.range(config_.delay.min_ms, config_.delay.max_ms);
        next_slot_ = t + static_cast<double>(ms) / 1000.0;
        return t;
    }

    FetchResult fetch_with_retries(const std::string& url) {
        for (int attempt = 0;; ++attempt) {
            double t = 0;
            {
                std::lock_guard lock(mu_);
                if (stop_) return {FetchStatus::transient_error, "", "stopped"};
                t = reserve_slot();
                if (t > deadline_) {
                    result_.report.time_cap_hit = true;
                    stop_ = true;
                    return {FetchStatus::transient_error, "", "stopped"};
                }
            }
            clock_.sleep_until(t);
            {
                std::lock_guard lock(mu_);
                ++result_.report.attempts;
                if (attempt > 0) ++result_.report.retries;
                result_.request_times.push_back(clock_.now());
            }
            auto r = fetcher_.fetch(url);
            if (r.status == FetchStatus::ok && r.body.empty()) r = {FetchStatus::permanent_error, "", "empty body"};
            if (r.status != FetchStatus::transient_error || attempt >= config_.max_retries) return r;
        }
    }

    void worker() {
        for (;;) {
            std::string url;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [&] { return stop_ || !state_.frontier.empty() || in_flight_ == 0; });
                if (stop_ || state_.frontier.empty()) {
                    cv_.notify_all();
                    return;
                }
                url = std::move(state_.frontier.front());
                state_.frontier.pop_front();
                ++in_flight_;
            }
            process(url);
            {
                std::lock_guard lock(mu_);
                --in_flight_;
            }
            cv_.notify_all();
        }
    }

    void process(const std::string& url) {
        std::string html;
        bool have = false;
        {
            std::lock_guard lock(mu_);
            const auto it = state_.stored.find(url);
            if (it != state_.stored.end()) {
                html = it->second.html;
                have = true;
            }
        }
        if (!have) {
            auto r = fetch_with_retries(url);
            std::lock_guard lock(mu_);
            if (r.status == FetchStatus::ok) {
                RawPage page{url, market_of_url(url), std::move(r.body), clock_.now(), round_};
                html = page.html;
                state_.stored.emplace(url, std::move(page));
                result_.fetch_log.push_back(url);
                ++result_.report.fetched;
                have = true;
            } else if (r.detail != "stopped") {
                ++result_.report.errors;
                if (r.status == FetchStatus::transient_error) failed_.insert(url);
                if (url == seed_ && round_ == 1) {
                    seed_failed_ = true;
                    seed_detail_ = r.detail;
                    stop_ = true;
                }
            }
        }
        if (!have) return;
        const auto links = harvest_links(html, url);
        std::lock_guard lock(mu_);
        for (const auto& link : links) {
            if (round_ > 1 && state_.stored.count(link)) {
                if (walked_.insert(link).second) state_.frontier.push_back(link);
                continue;
            }
            if (should_enqueue(link, state_, config_)) {
                state_.seen.insert(link);
                walked_.insert(link);
                state_.frontier.push_back(link);
            } else if (state_.seen.count(link)) {
                ++result_.report.deduped;
            } else {
                ++result_.report.link_cap_rejections;
                result_.report.link_cap_hit = true;
            }
        }
    }

    Fetcher& fetcher_;
    const CrawlConfig& config_;
    Clock& clock_;
    Rng delay_rng_;

    std::mutex mu_;
    std::condition_variable cv_;
    CrawlState state_;
    std::set<std::string> walked_;
    std::set<std::string> failed_;
    CrawlResult result_;
    std::string seed_;
    double deadline_ = 0;
    double next_slot_ = 0;
    int round_ = 0;
    int in_flight_ = 0;
    bool stop_ = false;
    bool seed_failed_ = false;
    std::string seed_detail_;
};

} // namespace

CrawlResult crawl(Fetcher& fetcher, const CrawlConfig& config, Clock* clock) {
    config.validate();
    SteadyClock steady;
    Crawl c(fetcher, config, clock ? *clock : steady);
    return c.run();
}

std::string page_id_of_url(const std::string& url) {
    const auto u = parse_url(url);
    std::string path = u ? u->path : url;
    while (!path.empty() && path.back() == '/') path.pop_back();
    std::string id = path.substr(path.rfind('/') + 1);
    if (id.ends_with(".html")) id.resize(id.size() - 5);
    for (char& c : id) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    }
    return id.empty() ? "index" : id;
}

void write_store(const std::filesystem::path& dir, const std::map<std::string, RawPage>& store) {
    std::filesystem::create_directories(dir / "pages");
    std::vector<Json> manifest, index;
    std::set<std::string> used;
    for (const auto& [url, page] : store) {
        std::string id = page_id_of_url(url);
        for (int k = 2; !used.insert(id).second; ++k) id = page_id_of_url(url) + "~" + std::to_string(k);
        write_file(dir / "pages" / (id + ".html"), page.html);
        Json rec = {{"url", url}, {"page_id", id}, {"round", page.round}, {"fetched_at", page.fetched_at}};
        rec["market_id"] = page.market_id ? Json(to_string(*page.market_id)) : Json(nullptr);
        index.push_back(rec);
        if (page.market_id) {
            manifest.push_back({{"page_id", id},
                                {"url", url},
                                {"market_id", to_string(*page.market_id)},
                                {"language", to_string(sim::market_template(*page.market_id).language)}});
        }
    }
    write_jsonl(dir / "manifest.jsonl", manifest);
    write_jsonl(dir / "crawl_index.jsonl", index);
}

} // namespace dnmx::crawl
