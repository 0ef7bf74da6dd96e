#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "dnmx/core/error.hpp"
#include "dnmx/span/span_ner.hpp"
#include "grad_cases.hpp"

using namespace dnmx;
using namespace dnmx::span;

namespace {

dataset::SpanNerExample small_example() {
    dataset::SpanNerExample ex;
    ex.id = "p0";
    ex.types = {"product", "vendor_name", "product_price"};
    ex.text = {"alice", "sells", "10g", "hash", "for", "12", "eur"};
    ex.gold = {{0, 0, 1}, {2, 3, 0}, {5, 5, 2}};
    return ex;
}

SpanModelConfig tiny_config() {
    SpanModelConfig c;
    c.dim = 8;
    c.hidden = 6;
    c.buckets = 32;
    c.max_width = 4;
    return c;
}

dataset::Vocab vocab_for(const dataset::SpanNerExample& ex) {
    return dataset::Vocab::build({ex.text, ex.types});
}

void zero_span_head(SpanNerModel& m) {
    std::fill(m.span_out.w.value.data.begin(), m.span_out.w.value.data.end(), 0.0);
    std::fill(m.span_out.b.value.data.begin(), m.span_out.b.value.data.end(), 0.0);
}

std::vector<dataset::AnnotatedListing> toy_listings() {
    // Keyword-anchored pages shaped like the market layouts.
    std::vector<dataset::AnnotatedListing> out;
    const std::vector<std::string> vendors = {"bob", "carol", "dave", "erin"};
    const std::vector<std::string> prices = {"12", "40", "7", "99"};
    for (std::size_t i = 0; i < 4; ++i) {
        dataset::AnnotatedListing l;
        l.page_id = "toy-" + std::to_string(i);
        l.market_id = MarketId::agartha_item;
        l.language = Language::en;
        l.tokens = {"vendor", vendors[i], "price", prices[i], "eur", "thanks"};
        l.spans = {{"vendor_name", 1, 1, vendors[i]}, {"product_price", 3, 3, prices[i]}};
        out.push_back(l);
    }
    return out;
}

} // namespace

TEST_CASE("enumerate_spans examples") {
    CHECK(enumerate_spans(5, 3).size() == 12);
    CHECK(enumerate_spans(2, 10).size() == 3);
    CHECK(enumerate_spans(0, 4).empty());
    const auto s = enumerate_spans(3, 2);
    const std::vector<std::pair<int, int>> want = {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}};
    CHECK(s == want);
}

TEST_CASE("enumerate_spans matches brute force and the count formula") {
    for (std::size_t n = 0; n <= 50; ++n) {
        for (std::size_t k = 1; k <= 10; ++k) {
            std::vector<std::pair<int, int>> brute;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i; j < n; ++j) {
                    if (j - i < k) brute.emplace_back(static_cast<int>(i), static_cast<int>(j));
                }
            }
            std::size_t count = 0;
            for (std::size_t w = 1; w <= k; ++w) count += n + 1 > w ? n + 1 - w : 0;
            const auto got = enumerate_spans(n, k);
            REQUIRE(got == brute);
            REQUIRE(got.size() == count);
        }
    }
}

TEST_CASE("build_pairs marks gold cells and keeps type-contrast negatives") {
    const auto ex = small_example();
    const auto ps = build_pairs(ex, 4, 1.0);
    CHECK(ps.positives == 3);
    CHECK(ps.negatives == ps.spans.size() * 3 - 3);
    std::set<std::size_t> gold_rows;
    for (const auto& g : ex.gold) {
        std::size_t row = 0;
        while (ps.spans[row] != std::pair<int, int>(static_cast<int>(g.start), static_cast<int>(g.end))) ++row;
        gold_rows.insert(row);
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(ps.weights[row * 3 + t] == 1.0);
            CHECK(ps.targets[row * 3 + t] == (t == g.type ? 1.0 : 0.0));
        }
    }
    // 3 positives + 6 type-contrast negatives: the other cells share weight 9.
    const std::size_t rest = ps.spans.size() * 3 - 9;
    double rest_weight = 0.0;
    for (std::size_t c = 0; c < ps.weights.size(); ++c) {
        if (gold_rows.count(c / 3)) continue;
        CHECK(ps.weights[c] == doctest::Approx(9.0 / static_cast<double>(rest)).epsilon(1e-12));
        rest_weight += ps.weights[c];
    }
    CHECK(rest_weight == doctest::Approx(9.0).epsilon(1e-12));
}

TEST_CASE("build_pairs caps the spread weight at 1 and drops it at ratio 0") {
    const auto ex = small_example();
    for (double w : build_pairs(ex, 4, 1e6).weights) CHECK(w == 1.0);
    double total = 0.0;
    for (double w : build_pairs(ex, 4, 0.0).weights) total += w;
    CHECK(total == 9.0);
}

TEST_CASE("build_pairs skips gold wider than k") {
    auto ex = small_example();
    ex.gold = {{0, 4, 0}};
    CHECK(build_pairs(ex, 4, 1.0).positives == 0);
}

TEST_CASE("decode keeps the higher of two overlapping candidates") {
    const auto out = decode({{0, 2, 0, 0.8}, {1, 3, 1, 0.9}}, 0.5);
    REQUIRE(out.size() == 1);
    CHECK(out[0].start == 1);
    CHECK(out[0].score == 0.9);
}

TEST_CASE("decode drops everything below the threshold") {
    CHECK(decode({{0, 0, 0, 0.2}, {1, 1, 0, 0.49}}, 0.5).empty());
}

TEST_CASE("decode is flat and monotone in the threshold") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<SpanPrediction> c;
        const std::size_t n = rng.below(30);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t s = rng.below(20);
            c.push_back({s, s + rng.below(4), rng.below(3), rng.uniform()});
        }
        std::size_t last = SIZE_MAX;
        for (double th = 0.0; th <= 1.0; th += 0.1) {
            const auto out = decode(c, th);
            CHECK(out.size() <= last);
            last = out.size();
            for (std::size_t a = 0; a < out.size(); ++a) {
                CHECK(out[a].score >= th);
                for (std::size_t b = a + 1; b < out.size(); ++b) {
                    CHECK((out[a].end < out[b].start || out[b].end < out[a].start));
                }
            }
        }
    }
}

TEST_CASE("encode returns one p row per type and one h row per token") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 3);
    nn::Tape t(false);
    const auto e = m.encode(t, ex.tokens());
    CHECK(e.p.rows() == 3);
    CHECK(e.h.rows() == 7);
    CHECK(e.p.cols() == 8);
    CHECK(e.h.cols() == 8);
}

TEST_CASE("zero span-head output gives phi 0.5") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 3);
    zero_span_head(m);
    CHECK(m.score(ex, 0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.score(ex, 2, 5, 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("loss examples at phi 0.5") {
    auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 3);
    zero_span_head(m);
    auto pairs = build_pairs(ex, 4, 1.0);
    std::fill(pairs.weights.begin(), pairs.weights.end(), 0.0);
    const std::size_t pos = 0 * 3 + 1;  // span (0, 0), vendor_name
    pairs.weights[pos] = 1.0;
    {
        nn::Tape t(false);
        CHECK(m.loss(t, ex, pairs).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    pairs.weights[0] = 1.0;  // span (0, 0), product: a negative
    nn::Tape t(false);
    CHECK(m.loss(t, ex, pairs).item() == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("score rejects bad indices") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 3);
    CHECK_THROWS_AS(m.score(ex, 3, 2, 0), InputError);
    CHECK_THROWS_AS(m.score(ex, 0, 7, 0), InputError);
    CHECK_THROWS_AS(m.score(ex, 0, 0, 3), InputError);
}

TEST_CASE("scaling q by a positive constant keeps the span order for a type") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 4);
    const auto spans = enumerate_spans(ex.text.size(), 4);
    auto col = [&] {
        nn::Tape t(false);
        const auto e = m.encode(t, ex.tokens());
        const auto lg = m.span_logits(t, e, spans);
        std::vector<double> v;
        for (std::size_t r = 0; r < spans.size(); ++r) v.push_back(lg.at(r, 1));
        return v;
    };
    const auto a = col();
    // q is the type FFN's affine output, so scaling its last layer scales q.
    for (auto& v : m.type_ffn.l2.w.value.data) v *= 3.5;
    for (auto& v : m.type_ffn.l2.b.value.data) v *= 3.5;
    const auto b = col();
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) CHECK((a[i] < a[j]) == (b[i] < b[j]));
    }
}

TEST_CASE("fused span logits equal the literal FFN path") {
    const auto ex = small_example();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SpanNerModel m(vocab_for(ex), tiny_config(), seed);
        for (auto& v : m.span_b1.value.data) v = 0.3;
        for (auto& v : m.span_out.b.value.data) v = -0.2;
        nn::Tape t(false);
        const auto e = m.encode(t, ex.tokens());
        const auto spans = enumerate_spans(ex.text.size(), 4);
        const auto a = m.span_logits(t, e, spans);
        const auto b = m.span_logits_reference(t, e, spans);
        REQUIRE(a.rows() == b.rows());
        REQUIRE(a.cols() == b.cols());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data()[i] - b.data()[i]) < 1e-12);
    }
}

TEST_CASE("identity encoder: permuting types permutes p rows") {
    auto ex = small_example();
    auto cfg = tiny_config();
    cfg.encoder = "identity";
    SpanNerModel m(vocab_for(ex), cfg, 2);
    nn::Tape t(false);
    const auto e1 = m.encode(t, ex.tokens());
    std::vector<std::size_t> perm = {2, 0, 1};
    auto ex2 = ex;
    for (std::size_t i = 0; i < 3; ++i) ex2.types[i] = ex.types[perm[i]];
    const auto e2 = m.encode(t, ex2.tokens());
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t c = 0; c < 8; ++c) CHECK(e2.p.at(i, c) == e1.p.at(perm[i], c));
    }
}

TEST_CASE("bilstm encoder: type rows depend on the type name") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 2);
    nn::Tape t(false);
    const auto e = m.encode(t, ex.tokens());
    CHECK(e.p.at(0, 0) != e.p.at(1, 0));
}

TEST_CASE("empty text yields no h rows and no predictions") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 1);
    nn::Tape t(false);
    dataset::SpanNerExample empty = ex;
    empty.text.clear();
    empty.gold.clear();
    CHECK(m.encode(t, empty.tokens()).h.rows() == 0);
    CHECK(m.predict({}, ex.types, 0.0).empty());
}

TEST_CASE("predict rejects more than 25 types") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 1);
    std::vector<std::string> types(26, "product");
    CHECK_THROWS_AS(m.predict(ex.text, types), ConfigError);
}

TEST_CASE("predict at threshold 0 returns a non-empty flat result") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 1);
    const auto out = m.predict(ex.text, ex.types, 0.0);
    CHECK(!out.empty());
    for (std::size_t a = 0; a + 1 < out.size(); ++a) CHECK(out[a].end < out[a + 1].start);
}

TEST_CASE("full span loss passes the gradient check") {
    for (const auto& c : testing::model_grad_cases()) {
        if (c.name != "span_ner_loss") continue;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto r = c.run(seed);
            INFO("seed " << seed << " worst " << r.worst_param << "[" << r.worst_index << "]");
            CHECK(r.max_rel_error <= 1e-4);
        }
    }
}

TEST_CASE("train with zero steps leaves the model unchanged") {
    const auto data = toy_listings();
    const std::vector<std::string> types = {"vendor_name", "product_price"};
    SpanNerModel m(build_vocab(data, types), tiny_config(), 7);
    std::vector<nn::Matrix> before;
    for (auto* p : m.params()) before.push_back(p->value);
    SpanTrainConfig tc;
    tc.num_steps = 0;
    const auto r = train(m, data, types, tc);
    CHECK(r.log.empty());
    const auto ps = m.params();
    for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps[i]->value == before[i]);
}

TEST_CASE("train is deterministic for a seed") {
    const auto data = toy_listings();
    const std::vector<std::string> types = {"vendor_name", "product_price"};
    SpanTrainConfig tc;
    tc.num_steps = 20;
    tc.eval_every = 5;
    tc.seed = 11;
    auto run = [&] {
        SpanNerModel m(build_vocab(data, types), tiny_config(), 7);
        auto r = train(m, data, types, tc);
        return std::make_pair(r, m.predict(data[0].tokens, types, 0.3));
    };
    const auto [a, pa] = run();
    const auto [b, pb] = run();
    REQUIRE(a.log.size() == 4);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].step == b.log[i].step);
        CHECK(a.log[i].loss == b.log[i].loss);
        CHECK(a.log[i].lr_scale == b.log[i].lr_scale);
    }
    CHECK(pa == pb);
}

TEST_CASE("train config validation and json round trip") {
    SpanTrainConfig tc;
    tc.batch = 0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = SpanTrainConfig{};
    tc.neg_ratio = -1;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = SpanTrainConfig{};
    tc.seed = 99;
    tc.lr_others = 0.01;
    const auto back = SpanTrainConfig::from_json(tc.to_json());
    CHECK(back.to_json() == tc.to_json());
}

TEST_CASE("checkpoint round trip preserves scores") {
    const auto ex = small_example();
    SpanNerModel m(vocab_for(ex), tiny_config(), 9);
    const auto path = std::filesystem::temp_directory_path() / "dnmx_span_ckpt_test.bin";
    save_model(path, m, {{"note", "unit"}});
    auto back = load_model(path);
    std::filesystem::remove(path);
    CHECK(back.config().to_json() == m.config().to_json());
    for (std::size_t i = 0; i < ex.text.size(); ++i) {
        for (std::size_t t = 0; t < 3; ++t) CHECK(back.score(ex, i, i, t) == m.score(ex, i, i, t));
    }
}
