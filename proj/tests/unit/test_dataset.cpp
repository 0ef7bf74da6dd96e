#include <doctest.h>

#include <cmath>
#include <set>

#include "dnmx/core/error.hpp"
#include "dnmx/core/rng.hpp"
#include "dnmx/dataset/dataset.hpp"
#include "dnmx/extract/labeling.hpp"
#include "dnmx/sim/market.hpp"

using namespace dnmx;
using namespace dnmx::dataset;

namespace {

extract::LabeledEntity label(const std::string& type, std::size_t s, std::size_t e, const std::string& text) {
    return {"p", type, s, e, text.substr(s, e - s), extract::LabelSource::regex};
}

AnnotatedListing listing(const std::string& id, std::vector<std::string> tokens, std::vector<TokenSpan> spans) {
    AnnotatedListing l;
    l.page_id = id;
    l.tokens = std::move(tokens);
    l.spans = std::move(spans);
    return l;
}

} // namespace

TEST_CASE("align_spans examples") {
    const std::string text = "price 12.50 usd";
    const auto toks = extract::tokenize(text);
    auto spans = align_spans("p", toks, {label("product_price", 6, 11, text)});
    REQUIRE(spans.size() == 1);
    CHECK(spans[0].tok_start == 1);
    CHECK(spans[0].tok_end == 1);
    CHECK(spans[0].surface == "12.50");

    const std::string t2 = "alice sells 10g hash today";
    auto s2 = align_spans("p", extract::tokenize(t2), {label("product", 12, 20, t2)});
    CHECK(s2[0].tok_start == 2);
    CHECK(s2[0].tok_end == 3);
    CHECK(s2[0].surface == "10g hash");

    try {
        align_spans("page-7", extract::tokenize(text), {label("x", 15, 15, text)});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("page-7") != std::string::npos);
    }
}

TEST_CASE("generated corpus aligns without errors and round-trips surfaces") {
    sim::CorpusConfig cfg;
    for (auto m : kDefaultMarkets) cfg.counts[m] = 30;
    cfg.counts[MarketId::palmetto] = 30;
    const auto corpus = sim::generate_corpus(cfg);
    const auto patterns = extract::PatternSet::defaults();
    std::size_t spans = 0;
    for (const auto& page : corpus.listings) {
        const auto doc = extract::annotate_page(page.page_id, page.market_id, page.language, page.html, patterns);
        const auto l = to_listing(doc);
        REQUIRE(l.spans.size() == doc.entities.size());
        for (std::size_t i = 0; i < l.spans.size(); ++i) {
            // Labels sit on token boundaries, so the token span reproduces the label exactly.
            CHECK(l.spans[i].surface == doc.entities[i].surface);
            CHECK(detokenize(l.tokens, l.spans[i].tok_start, l.spans[i].tok_end) == doc.entities[i].surface);
            ++spans;
        }
        const auto ex = to_span_input(l, core_entity_types());
        for (const auto& g : ex.gold) {
            CHECK(detokenize(ex.text, g.start, g.end) ==
                  [&] {
                      for (const auto& s : l.spans)
                          if (s.tok_start == g.start && s.tok_end == g.end && s.entity_type == ex.types[g.type])
                              return s.surface;
                      return std::string("?");
                  }());
        }
    }
    CHECK(spans > 1000);
}

TEST_CASE("conversation template") {
    auto l = listing("a", {"alice", "sells", "10g", "hash"}, {{"product", 2, 3, "10g hash"}});
    auto ex = to_conversation(l, {"product", "vendor_name"});
    REQUIRE(ex.turns.size() == 2);
    CHECK(ex.turns[0].question == "What describes product in the text?");
    CHECK(ex.turns[0].answers == std::vector<std::string>{"10g hash"});
    CHECK(ex.turns[1].question == "What describes vendor_name in the text?");
    CHECK(ex.turns[1].answers.empty());
    for (const auto& t : ex.turns)
        for (const auto& a : t.answers) CHECK(ex.passage.find(a) != std::string::npos);
    const auto j = conversation_json(ex);
    CHECK(j["id"] == "a");
    CHECK(j["conversations"][0]["value"] == "Text: alice sells 10g hash");
    CHECK(j["conversations"][3]["value"] == "[\"10g hash\"]");
    CHECK(j["conversations"][5]["value"] == "[]");
    CHECK(conversation_json(ex, "sys")["conversations"][0]["from"] == "system");
}

TEST_CASE("span input format") {
    auto l = listing("a", {"alice", "sells", "10g", "hash"}, {{"product", 2, 3, "10g hash"}, {"vendor_name", 0, 0, "alice"}});
    auto ex = to_span_input(l, {"product", "vendor_name"});
    CHECK(ex.tokens() == std::vector<std::string>{"[ENT]", "product", "[ENT]", "vendor_name", "[SEP]", "alice",
                                                   "sells", "10g", "hash"});
    CHECK(ex.gold == std::vector<GoldSpan>{{0, 0, 1}, {2, 3, 0}});

    auto empty = to_span_input(l, {});
    CHECK(empty.tokens().front() == "[SEP]");
    CHECK(empty.gold.empty());

    CHECK_THROWS_AS(to_span_input(l, std::vector<std::string>(26, "t")), ConfigError);
    CHECK_NOTHROW(to_span_input(l, std::vector<std::string>(25, "t")));

    auto cut = to_span_input(l, {"product", "vendor_name"}, 25, 3);
    CHECK(cut.truncated);
    CHECK(cut.text.size() == 3);
    CHECK(cut.gold == std::vector<GoldSpan>{{0, 0, 1}});

    auto [types, text] = parse_span_tokens(ex.tokens());
    CHECK(types == ex.types);
    CHECK(text == ex.text);
    CHECK_THROWS_AS(parse_span_tokens({"[ENT]", "product", "alice"}), InputError);
    CHECK_THROWS_AS(parse_span_tokens({"[SEP]", "a", "[SEP]"}), InputError);
    CHECK_THROWS_AS(parse_span_tokens({"x", "product", "[SEP]"}), InputError);
}

TEST_CASE("split examples and properties") {
    std::vector<PageRef> ten;
    for (int i = 0; i < 10; ++i) ten.push_back({"p" + std::to_string(i), MarketId::agartha_item});
    auto s = split(ten, 0.8, 1);
    CHECK(s.train.size() == 8);
    CHECK(s.test.size() == 2);
    const auto again = split(ten, 0.8, 1);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        std::vector<PageRef> pages;
        for (auto m : kDefaultMarkets) {
            const auto n = 2 + rng.below(30);
            for (std::size_t i = 0; i < n; ++i) pages.push_back({std::string(to_string(m)) + std::to_string(i), m});
        }
        const auto sp = split(pages, 0.8, seed);
        std::set<std::string> tr(sp.train.begin(), sp.train.end()), te(sp.test.begin(), sp.test.end());
        for (const auto& id : tr) CHECK(te.count(id) == 0);
        CHECK(tr.size() + te.size() == pages.size());
        CHECK(std::abs(static_cast<double>(tr.size()) - 0.8 * static_cast<double>(pages.size())) <= 1.0 + 1e-9);
        std::map<MarketId, std::pair<int, int>> sides;
        for (const auto& p : pages) {
            if (tr.count(p.page_id)) ++sides[p.market_id].first;
            if (te.count(p.page_id)) ++sides[p.market_id].second;
        }
        for (const auto& [m, c] : sides) {
            CHECK(c.first >= 1);
            CHECK(c.second >= 1);
        }
    }
    const auto j = s.to_json();
    const auto back = SplitManifest::from_json(j);
    CHECK(back.train == s.train);
    CHECK(back.seed == 1);
}

TEST_CASE("pad_truncate") {
    auto p = pad_truncate({5, 6, 7, 8, 9}, 8, 0);
    CHECK(p.ids == std::vector<int>{5, 6, 7, 8, 9, 0, 0, 0});
    CHECK(p.mask == std::vector<int>{1, 1, 1, 1, 1, 0, 0, 0});
    CHECK_FALSE(p.truncated);
    CHECK_FALSE(pad_truncate(std::vector<int>(3000, 4)).truncated);
    auto t = pad_truncate(std::vector<int>(3500, 4));
    CHECK(t.truncated);
    CHECK(t.ids.size() == 3000);
    CHECK(t.length == 3000);
}

TEST_CASE("vocabulary") {
    auto v = Vocab::build({{"b", "a", "b"}, {"c"}});
    CHECK(v.id("[PAD]") == 0);
    CHECK(v.id("[ENT]") == Vocab::kEnt);
    CHECK(v.id("[SEP]") == Vocab::kSep);
    CHECK(v.id("b") == 4);
    CHECK(v.id("a") == 5);
    CHECK(v.id("zzz") == Vocab::kUnk);
    const auto back = Vocab::from_json(v.to_json());
    CHECK(back.id("c") == v.id("c"));
    CHECK(back.size() == v.size());
}

TEST_CASE("listing json round trip") {
    auto l = listing("a", {"alice", "sells", "10g", "hash"}, {{"product", 2, 3, "10g hash"}});
    l.market_id = MarketId::cocorico;
    l.language = Language::fr;
    const auto back = listing_from_json(listing_json(l));
    CHECK(back.tokens == l.tokens);
    CHECK(back.spans == l.spans);
    CHECK(back.market_id == MarketId::cocorico);
    auto bad = listing_json(l);
    bad["ner"][0][1] = 9;
    CHECK_THROWS_AS(listing_from_json(bad), DataError);
}
