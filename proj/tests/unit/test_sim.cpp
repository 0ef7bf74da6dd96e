#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include <httplib.h>

#include "dnmx/core/error.hpp"
#include "dnmx/core/rng.hpp"
#include "dnmx/extract/labeling.hpp"
#include "dnmx/extract/normalize.hpp"
#include "dnmx/sim/market.hpp"
#include "dnmx/sim/mock_market.hpp"

using namespace dnmx;
using namespace dnmx::sim;

namespace {

Corpus make(std::map<MarketId, std::size_t> counts, std::uint64_t seed, double noise = 0.2) {
    CorpusConfig cfg;
    cfg.counts = std::move(counts);
    cfg.seed = seed;
    cfg.noise_rate = noise;
    return generate_corpus(cfg);
}

std::size_t count_substr(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto at = hay.find(needle); at != std::string::npos; at = hay.find(needle, at + 1)) ++n;
    return n;
}

} // namespace

TEST_CASE("generate_corpus sizes, language and determinism") {
    const auto co = make({{MarketId::cocorico, 10}}, 42);
    REQUIRE(co.listings.size() == 10);
    for (const auto& p : co.listings) CHECK(p.language == Language::fr);

    const auto empty = make({}, 7);
    CHECK(empty.listings.empty());
    CHECK(empty.manifest.empty());

    const auto a = make({{MarketId::agartha_item, 100}}, 1);
    const auto b = make({{MarketId::agartha_item, 100}}, 1);
    REQUIRE(a.listings.size() == b.listings.size());
    for (std::size_t i = 0; i < a.listings.size(); ++i) {
        CHECK(a.listings[i].html == b.listings[i].html);
        CHECK(a.listings[i].entities == b.listings[i].entities);
    }
    CHECK(a.manifest == b.manifest);
    CHECK(make({{MarketId::agartha_item, 3}}, 2).listings[0].html != a.listings[0].html);

    // Per-page streams: growing one market leaves another untouched.
    const auto small = make({{MarketId::silkroad, 5}, {MarketId::cocorico, 5}}, 9);
    const auto big = make({{MarketId::silkroad, 5}, {MarketId::cocorico, 50}}, 9);
    REQUIRE(small.listings[5].market_id == MarketId::silkroad);
    CHECK(small.listings[5].html == big.listings[50].html);
    CHECK(small.listings[0].entities == big.listings[0].entities);
}

TEST_CASE("ground truth spans are consistent with the html") {
    const auto c = make({{MarketId::agartha_item, 20}, {MarketId::agartha_purchase, 20},
                         {MarketId::berlusconi, 20}, {MarketId::cannahome, 20},
                         {MarketId::cocorico, 20}, {MarketId::darkmarket, 20},
                         {MarketId::silkroad, 20}, {MarketId::palmetto, 20}},
                        5, 1.0);
    for (const auto& p : c.listings) {
        std::multiset<std::string> types;
        for (const auto& e : p.entities) {
            REQUIRE(e.char_end <= p.html.size());
            CHECK(e.char_start < e.char_end);
            CHECK(p.html.substr(e.char_start, e.char_end - e.char_start) == e.surface);
            types.insert(e.entity_type);
        }
        const auto& slots = market_template(p.market_id).entity_slots;
        CHECK(types == std::multiset<std::string>(slots.begin(), slots.end()));
        for (const char* tag : {"<p", "<li", "<ul", "<img", "<script", "<br"}) {
            CHECK(p.html.find(tag) == std::string::npos);
        }
    }
}

TEST_CASE("mean page length tracks the market token budget") {
    std::map<MarketId, std::size_t> counts;
    for (MarketId m : kAllMarkets) counts[m] = 30;
    const auto c = make(counts, 3);
    std::map<MarketId, double> sum;
    for (const auto& p : c.listings) {
        sum[p.market_id] += static_cast<double>(
            extract::make_doc(p.page_id, p.market_id, p.language, p.html).tokens.size());
    }
    for (MarketId m : kAllMarkets) {
        const double mean = sum[m] / 30.0;
        const double budget = market_template(m).token_budget;
        CHECK_MESSAGE(std::abs(mean - budget) <= 0.3 * budget, to_string(m), " mean ", mean);
    }
    CHECK(market_template(MarketId::cocorico).token_budget == 153);
    CHECK(market_template(MarketId::silkroad).token_budget == 267);
}

TEST_CASE("entity_inventory equals a brute-force scan") {
    const auto pm = make({{MarketId::palmetto, 1}}, 4);
    const auto inv = entity_inventory(pm.listings);
    CHECK(inv.at("sku") == 1);
    CHECK(inv.at("brand") == 1);
    CHECK(entity_inventory({}).empty());

    const auto ag = make({{MarketId::agartha_item, 10}}, 4);
    std::size_t products = 0;
    for (const auto& p : ag.listings) {
        products += count_substr(p.html, "<span class=\"product\">");
    }
    CHECK(products == 10);
    CHECK(entity_inventory(ag.listings).at("product") == products);
}

TEST_CASE("french vocabulary appears only on cocorico pages") {
    std::map<MarketId, std::size_t> counts;
    for (MarketId m : kAllMarkets) counts[m] = 25;
    const auto c = make(counts, 8, 0.5);
    const std::set<std::string> fr(french_only_vocabulary().begin(), french_only_vocabulary().end());
    REQUIRE(fr.count("disponibilité"));
    REQUIRE(!fr.count("price"));
    std::size_t seen_fr = 0;
    for (const auto& p : c.listings) {
        const auto d = extract::make_doc(p.page_id, p.market_id, p.language, p.html);
        for (const auto& t : d.tokens) {
            if (!fr.count(t.surface)) continue;
            CHECK_MESSAGE(p.market_id == MarketId::cocorico, p.page_id, " has ", t.surface);
            ++seen_fr;
        }
    }
    CHECK(seen_fr > 0);
}

TEST_CASE("regex labels recover at least 90% of noisy ground truth") {
    std::map<MarketId, std::size_t> counts;
    for (MarketId m : kAllMarkets) counts[m] = 60;
    const auto c = make(counts, 42, 0.2);
    const auto set = extract::PatternSet::defaults();
    std::vector<extract::PageLabels> labeled;
    std::vector<extract::PageTruth> truth;
    for (const auto& p : c.listings) {
        const auto d = extract::make_doc(p.page_id, p.market_id, p.language, p.html);
        labeled.push_back({p.page_id, p.market_id, extract::apply_patterns(d, set)});
        extract::PageTruth t{p.page_id, p.market_id, {}};
        for (const auto& e : p.entities) t.entities.push_back({e.entity_type, e.surface});
        truth.push_back(t);
    }
    const auto r = extract::verify_labels(labeled, truth);
    CHECK(r.overall_accuracy() >= 0.90);
    CHECK(r.overall_accuracy() < 1.0);  // noise must actually bite somewhere
}

TEST_CASE("parse_counts") {
    const auto m = CorpusConfig::parse_counts("cocorico:10,silkroad:0");
    CHECK(m.at(MarketId::cocorico) == 10);
    CHECK(m.at(MarketId::silkroad) == 0);
    CHECK_THROWS_AS(CorpusConfig::parse_counts("atlantis:3"), ConfigError);
    CHECK_THROWS_AS(CorpusConfig::parse_counts("cocorico:-1"), ConfigError);
    CHECK_THROWS_AS(CorpusConfig::parse_counts("cocorico"), ConfigError);
}

TEST_CASE("corpus directory round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "dnmx_sim_roundtrip";
    std::filesystem::remove_all(dir);
    const auto c = make({{MarketId::cocorico, 4}, {MarketId::palmetto, 2}}, 12);
    write_corpus(dir, c);
    const auto back = read_corpus(dir);
    REQUIRE(back.listings.size() == c.listings.size());
    for (std::size_t i = 0; i < c.listings.size(); ++i) {
        CHECK(back.listings[i].html == c.listings[i].html);
        CHECK(back.listings[i].entities == c.listings[i].entities);
        CHECK(back.listings[i].url == c.listings[i].url);
    }
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(read_corpus(dir), DataError);
}

TEST_CASE("mock market pages, overview and failures") {
    const auto c = make({{MarketId::darkmarket, 12}}, 21);
    MockMarket market(c.listings);
    const auto ov = market.get(market.overview_url());
    REQUIRE(ov.status == MockMarket::Status::ok);
    CHECK(count_substr(ov.body, "<a href=") == 12);
    for (const auto& p : c.listings) {
        CHECK(ov.body.find("\"" + p.url + "\"") != std::string::npos);
        const auto r = market.get(p.url);
        CHECK(r.status == MockMarket::Status::ok);
        CHECK(r.body == p.html);
    }
    CHECK(market.get("/nope.html").status == MockMarket::Status::not_found);

    MockMarketConfig fc;
    fc.failure_rate = 0.1;
    fc.seed = 77;
    MockMarket flaky(c.listings, fc);
    std::size_t failures = 0;
    for (std::uint64_t k = 0; k < 400; ++k) {
        const bool expect = indexed_uniform(77, k) < 0.1;
        const auto r = flaky.get(flaky.overview_url());
        CHECK((r.status == MockMarket::Status::transient_error) == expect);
        failures += expect;
    }
    CHECK(failures > 10);
    CHECK(failures < 80);
    CHECK_THROWS_AS(MockMarket({}, {}), ServiceError);
}

TEST_CASE("mock market over http") {
    const auto c = make({{MarketId::cannahome, 3}}, 2);
    auto server = serve(c.listings, "127.0.0.1", 0);
    httplib::Client cli("127.0.0.1", server->port());
    auto res = cli.Get(kOverviewPath);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(count_substr(res->body, "<a href=") == 3);
    auto page = cli.Get(c.listings[1].url);
    REQUIRE(page);
    CHECK(page->body == c.listings[1].html);
    auto missing = cli.Get("/missing.html");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    CHECK_THROWS_AS(serve(c.listings, "127.0.0.1", server->port()), ServiceError);
    server->stop();
}
