#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "dnmx/core/error.hpp"
#include "dnmx/crawl/crawler.hpp"
#include "dnmx/crawl/url.hpp"
#include "dnmx/sim/market.hpp"
#include "dnmx/sim/mock_market.hpp"

using namespace dnmx;
using namespace dnmx::crawl;

namespace {

const std::string kBase = "http://market.local";

std::shared_ptr<sim::MockMarket> market_of(std::size_t pages, sim::MockMarketConfig mc = {}) {
    sim::CorpusConfig cfg;
    cfg.counts = {{MarketId::agartha_item, pages / 2}, {MarketId::cocorico, pages - pages / 2}};
    cfg.seed = 3;
    return std::make_shared<sim::MockMarket>(sim::generate_corpus(cfg).listings, mc);
}

CrawlConfig config_for(int rounds = 1) {
    CrawlConfig c;
    c.seed_url = kBase + sim::kOverviewPath;
    c.rounds = rounds;
    return c;
}

bool no_duplicates(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
}

// Independent count of anchors carrying an href.
std::size_t count_anchor_hrefs(const std::string& html) {
    std::size_t n = 0;
    for (auto at = html.find("<a "); at != std::string::npos; at = html.find("<a ", at + 1)) {
        const auto end = html.find('>', at);
        if (html.substr(at, end - at).find("href=") != std::string::npos) ++n;
    }
    return n;
}

} // namespace

TEST_CASE("url canonicalization and resolution") {
    CHECK(canonicalize_url("HTTP://Market.LOCAL:80/a/./b/../c.html?x=1#frag") == "http://market.local/a/c.html?x=1");
    CHECK(canonicalize_url("http://h") == "http://h/");
    CHECK(*resolve_url("http://h/a/b.html", "c.html") == "http://h/a/c.html");
    CHECK(*resolve_url("http://h/a/b.html", "/x/y.html#top") == "http://h/x/y.html");
    CHECK(*resolve_url("http://h/a/b.html", "../z.html") == "http://h/z.html");
    CHECK(*resolve_url("http://h/a/b.html", "//other/p") == "http://other/p");
    CHECK(*resolve_url("http://h/a/b.html", "?q=2") == "http://h/a/b.html?q=2");
    CHECK_FALSE(resolve_url("http://h/", "mailto:x@y").has_value());
    CHECK(market_of_url("http://h/cocorico/listing/cocorico-00001.html") == MarketId::cocorico);
    CHECK_FALSE(market_of_url("http://h/overview.html").has_value());
    CHECK(page_id_of_url("http://h/cocorico/listing/cocorico-00001.html") == "cocorico-00001");
}

TEST_CASE("harvest_links") {
    std::string ten = "<html><body><div>";
    for (int i = 0; i < 10; ++i) ten += "<a href=\"/p" + std::to_string(i) + ".html\">x</a>";
    ten += "</div></body></html>";
    CHECK(harvest_links(ten, kBase + "/").size() == 10);
    CHECK(harvest_links("<div>no anchors</div>", kBase).empty());
    const auto twice = harvest_links("<a href='/a'>1</a><A HREF=/a>2</A>", kBase);
    REQUIRE(twice.size() == 2);
    CHECK(twice[0] == twice[1]);
    CHECK(harvest_links("<a href=\"/x\" <<< <a", kBase).size() <= 1);

    auto m = market_of(30);
    const auto ov = m->get(sim::kOverviewPath).body;
    CHECK(harvest_links(ov, kBase + sim::kOverviewPath).size() == count_anchor_hrefs(ov));
    for (const auto& [url, html] : m->pages()) {
        CHECK(harvest_links(html, kBase + url).size() == count_anchor_hrefs(html));
    }
}

TEST_CASE("should_enqueue") {
    CrawlState s;
    CrawlConfig c = config_for();
    s.seen.insert("http://h/a");
    CHECK_FALSE(should_enqueue("http://h/a", s, c));
    CHECK(should_enqueue("http://h/b", s, c));
    for (std::size_t i = s.seen.size(); i < 1'000'000; ++i) s.seen.insert(std::to_string(i));
    REQUIRE(s.seen.size() == 1'000'000);
    CHECK_FALSE(should_enqueue("http://h/fresh", s, c));
}

TEST_CASE("crawl stores every page exactly once") {
    auto m = market_of(25);
    MockFetcher f(m);
    const auto r = crawl::crawl(f, config_for());
    CHECK(r.store.size() == 26);
    CHECK(no_duplicates(r.fetch_log));
    CHECK(r.fetch_log.size() == r.store.size());
    for (const auto& [path, _] : m->pages()) CHECK(r.store.count(kBase + path) == 1);
    CHECK(r.report.terminated_by == "frontier_empty");
    CHECK(r.report.deduped > 0);  // related links point at already-seen listings
}

TEST_CASE("rounds after the first add nothing on a static market") {
    auto m = market_of(40);
    MockFetcher f(m);
    const auto r = crawl::crawl(f, config_for(3));
    REQUIRE(r.report.new_pages_per_round.size() == 3);
    CHECK(r.report.new_pages_per_round[0] == 41);
    CHECK(r.report.new_pages_per_round[1] == 0);
    CHECK(r.report.new_pages_per_round[2] == 0);
    CHECK(r.report.rounds_exhausted);
    CHECK(r.report.terminated_by == "rounds_exhausted");
    CHECK(no_duplicates(r.fetch_log));
}

TEST_CASE("link cap bounds the store") {
    auto m = market_of(25);
    MockFetcher f(m);
    auto c = config_for();
    c.max_stored_links = 5;
    const auto r = crawl::crawl(f, c);
    CHECK(r.store.size() <= 5);
    CHECK(r.report.link_cap_hit);
    CHECK(r.report.terminated_by == "link_cap");
}

TEST_CASE("time cap yields a clean partial result") {
    auto m = market_of(200);
    MockFetcher f(m);
    auto c = config_for();
    c.delay = {100, 100};
    c.max_seconds = 2.05;
    ManualClock clock;
    const auto r = crawl::crawl(f, c, &clock);
    CHECK(r.report.time_cap_hit);
    CHECK(r.report.terminated_by == "time_cap");
    CHECK(r.store.size() == 21);  // requests at t = 0.0, 0.1, ..., 2.0
    CHECK(r.report.duration_seconds <= 2.05);
}

TEST_CASE("politeness delay separates consecutive requests") {
    auto m = market_of(30);
    MockFetcher f(m);
    auto c = config_for();
    c.delay = {50, 150};
    ManualClock clock;
    const auto r = crawl::crawl(f, c, &clock);
    REQUIRE(r.request_times.size() > 5);
    for (std::size_t i = 1; i < r.request_times.size(); ++i) {
        const double gap = r.request_times[i] - r.request_times[i - 1];
        CHECK(gap >= 0.05 - 1e-9);
        CHECK(gap <= 0.15 + 1e-9);
    }
}

TEST_CASE("concurrent workers respect dedup and the politeness bound") {
    auto m = market_of(60);
    MockFetcher f(m);
    auto c = config_for();
    c.workers = 4;
    c.delay = {2, 4};
    const auto r = crawl::crawl(f, c);
    CHECK(r.store.size() == 61);
    CHECK(no_duplicates(r.fetch_log));
    auto times = r.request_times;
    std::sort(times.begin(), times.end());
    const double w = 0.02;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto end = std::upper_bound(times.begin(), times.end(), times[i] + w);
        const auto in_window = static_cast<std::size_t>(end - (times.begin() + static_cast<long>(i)));
        CHECK(in_window <= static_cast<std::size_t>(std::ceil(w / 0.002)) + 4);
    }
}

TEST_CASE("transient errors are retried") {
    sim::MockMarketConfig mc;
    mc.failure_rate = 0.2;
    mc.seed = 5;
    auto m = market_of(40, mc);
    MockFetcher f(m);
    auto c = config_for(3);
    c.max_retries = 3;
    const auto r = crawl::crawl(f, c);
    CHECK(r.report.retries > 0);
    CHECK(r.store.size() == 41);
    CHECK(no_duplicates(r.fetch_log));
}

TEST_CASE("seed failure is a crawl error") {
    auto m = market_of(4);
    MockFetcher f(m);
    auto c = config_for();
    c.seed_url = kBase + "/missing.html";
    CHECK_THROWS_AS(crawl::crawl(f, c), CrawlError);
    c.rounds = 0;
    CHECK_THROWS_AS(crawl::crawl(f, c), ConfigError);
}

TEST_CASE("proxy rotation and http transport") {
    sim::CorpusConfig cfg;
    cfg.counts = {{MarketId::silkroad, 6}};
    const auto corpus = sim::generate_corpus(cfg);
    auto server = sim::serve(corpus.listings, "127.0.0.1", 0);
    auto http = std::make_shared<HttpFetcher>(5);
    RotatingProxyFetcher proxied(http, {"exit-a", "exit-b", "exit-c"});
    auto c = config_for();
    c.seed_url = server->base_url() + sim::kOverviewPath;
    const auto r = crawl::crawl(proxied, c);
    CHECK(r.store.size() == 7);
    const auto log = proxied.log();
    REQUIRE(log.size() == 7);
    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(log[i].identity == std::vector<std::string>{"exit-a", "exit-b", "exit-c"}[i % 3]);
    }
    server->stop();
}

TEST_CASE("stored pages persist in the corpus layout") {
    auto m = market_of(10);
    MockFetcher f(m);
    const auto r = crawl::crawl(f, config_for());
    const auto dir = std::filesystem::temp_directory_path() / "dnmx_crawl_store";
    std::filesystem::remove_all(dir);
    write_store(dir, r.store);
    const auto back = sim::read_corpus(dir);
    CHECK(back.listings.size() == 10);
    for (const auto& p : back.listings) CHECK(r.store.at(p.url).html == p.html);

    DirectoryFetcher disk(dir / "pages");
    CHECK(disk.fetch("http://x/" + back.listings[0].page_id + ".html").body == back.listings[0].html);
    CHECK(disk.fetch("http://x/none.html").status == FetchStatus::permanent_error);
    std::filesystem::remove_all(dir);
}
