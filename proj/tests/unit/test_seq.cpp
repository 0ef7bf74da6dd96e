#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dnmx/core/error.hpp"
#include "dnmx/seq/seq_ner.hpp"
#include "grad_cases.hpp"

using namespace dnmx;
using namespace dnmx::seq;

namespace {

SeqModelConfig tiny_config() {
    SeqModelConfig c;
    c.dim = 6;
    c.state = 5;
    c.conv_channels = 4;
    c.buckets = 16;
    c.pad_len = 12;
    c.types = {"vendor_name", "product_price", "sku"};
    return c;
}

const std::vector<std::string> kTokens = {"vendor", "bob", "price", "12", "eur", "thanks", "bye"};

std::vector<dataset::AnnotatedListing> toy_listings() {
    std::vector<dataset::AnnotatedListing> out;
    const std::vector<std::string> vendors = {"bob", "carol", "dave", "erin", "fay", "gus"};
    const std::vector<std::string> prices = {"12", "40", "7", "99", "31", "5"};
    for (std::size_t i = 0; i < vendors.size(); ++i) {
        dataset::AnnotatedListing l;
        l.page_id = "toy-" + std::to_string(i);
        l.tokens = {"vendor", vendors[i], "price", prices[i], "eur"};
        if (i % 2) l.tokens.insert(l.tokens.begin(), "welcome");
        const std::size_t o = i % 2;
        l.spans = {{"vendor_name", 1 + o, 1 + o, vendors[i]}, {"product_price", 3 + o, 3 + o, prices[i]}};
        out.push_back(l);
    }
    return out;
}

void zero_all(SeqNerModel& m) {
    for (auto* p : m.params()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
}

} // namespace

TEST_CASE("head distributions sum to 1 over unpadded positions and are 0 on pads") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 1);
    const auto in = m.prepare(kTokens);
    const auto [s, e] = m.distributions(in);
    CHECK(s.rows == 3);
    CHECK(s.cols == 12);
    for (std::size_t k = 0; k < 3; ++k) {
        double ss = 0, se = 0;
        for (std::size_t i = 0; i < 12; ++i) {
            if (i >= kTokens.size()) {
                CHECK(s(k, i) == 0.0);
                CHECK(e(k, i) == 0.0);
            }
            ss += s(k, i);
            se += e(k, i);
        }
        CHECK(std::abs(ss - 1.0) <= 1e-9);
        CHECK(std::abs(se - 1.0) <= 1e-9);
    }
}

TEST_CASE("zero-initialized model gives uniform distributions") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 1);
    zero_all(m);
    const auto [s, e] = m.distributions(m.prepare(kTokens));
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < kTokens.size(); ++i) {
            CHECK(s(k, i) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
            CHECK(e(k, i) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("all-pad and wrongly sized inputs are input errors") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 1);
    nn::Tape t(false);
    CHECK_THROWS_AS(m.forward(t, m.prepare({})), InputError);
    auto in = m.prepare(kTokens);
    in.padded.ids.pop_back();
    CHECK_THROWS_AS(m.forward(t, in), InputError);
}

TEST_CASE("long input is truncated to pad_len") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 1);
    std::vector<std::string> tokens;
    for (int i = 0; i < 5; ++i) tokens.insert(tokens.end(), kTokens.begin(), kTokens.end());
    const auto in = m.prepare(tokens);
    CHECK(in.padded.length == 12);
    CHECK(in.padded.truncated);
    for (const auto& s : m.predict(tokens)) CHECK(s.end < 12);
}

TEST_CASE("residual link: zeroed BiLSTM-2 passes BiLSTM-1 output through") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 3);
    for (auto* lstm : {&m.lstm2.fwd, &m.lstm2.bwd}) {
        for (auto* p : {&lstm->wx, &lstm->wh, &lstm->b}) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    }
    const auto in = m.prepare(kTokens);
    nn::Tape t(false);
    const auto f = m.forward(t, in);
    const std::vector<int> ids(in.padded.ids.begin(), in.padded.ids.begin() + 7);
    const auto h1 = m.lstm1(t, m.emb(t, ids, in.grams));
    REQUIRE(f.conv_in.rows() == h1.rows());
    REQUIRE(f.conv_in.cols() == h1.cols());
    for (std::size_t i = 0; i < h1.size(); ++i) CHECK(f.conv_in.data()[i] == h1.data()[i]);
}

TEST_CASE("decode_pointer clamps an end before the start") {
    const std::vector<double> s = {0.1, 0.1, 0.7, 0.1};
    const std::vector<double> e = {0.6, 0.1, 0.2, 0.1};
    const auto sp = decode_pointer(s, e, 4, 12);
    CHECK(sp.start == 2);
    CHECK(sp.end == 2);
}

TEST_CASE("decode_pointer searches the end within max_span of the start") {
    const std::vector<double> s = {0.9, 0.02, 0.02, 0.02, 0.02, 0.02};
    const std::vector<double> e = {0.05, 0.1, 0.2, 0.05, 0.05, 0.55};
    const auto wide = decode_pointer(s, e, 6, 12);
    CHECK(wide.end == 5);
    const auto narrow = decode_pointer(s, e, 6, 3);
    CHECK(narrow.start == 0);
    CHECK(narrow.end == 2);
    CHECK(narrow.score == doctest::Approx(0.9 * 0.2));
}

TEST_CASE("untrained model predictions are valid spans, one per type") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), seed);
        const auto out = m.predict(kTokens);
        REQUIRE(out.size() == 3);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(out[k].type == tiny_config().types[k]);
            CHECK(out[k].start <= out[k].end);
            CHECK(out[k].end < kTokens.size());
            CHECK(out[k].end - out[k].start < 12);
        }
    }
}

TEST_CASE("predict_entities reports model-sourced labels with character offsets") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 2);
    const auto spans = m.predict(kTokens);
    const auto ents = m.predict_entities("p1", kTokens);
    REQUIRE(ents.size() == 3);
    std::string text;
    for (const auto& w : kTokens) text += (text.empty() ? "" : " ") + w;
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(ents[k].page_id == "p1");
        CHECK(ents[k].source == extract::LabelSource::model);
        CHECK(text.substr(ents[k].char_start, ents[k].char_end - ents[k].char_start) == ents[k].surface);
        CHECK(ents[k].surface == dataset::detokenize(kTokens, spans[k].start, spans[k].end));
    }
}

TEST_CASE("loss masks absent types") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 1);
    zero_all(m);
    const auto in = m.prepare(kTokens);
    nn::Tape t(false);
    const auto f = m.forward(t, in);
    CHECK(m.loss(t, f, {}).item() == 0.0);
    // One present type: two uniform heads over 7 positions.
    const std::vector<dataset::TokenSpan> gold = {{"vendor_name", 1, 1, "bob"}, {"brand", 0, 0, "x"}};
    CHECK(m.loss(t, f, gold).item() == doctest::Approx(2 * std::log(7.0)).epsilon(1e-12));
    // A gold span past the kept length is masked too.
    const std::vector<dataset::TokenSpan> beyond = {{"sku", 3, 20, "x"}};
    CHECK(m.loss(t, f, beyond).item() == 0.0);
}

TEST_CASE("full seq loss passes the gradient check") {
    for (const auto& c : testing::model_grad_cases()) {
        if (c.name != "seq_ner_loss") continue;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto r = c.run(seed);
            INFO("seed " << seed << " worst " << r.worst_param << "[" << r.worst_index << "]");
            CHECK(r.max_rel_error <= 1e-4);
        }
    }
}

TEST_CASE("seq train with zero epochs leaves the model unchanged") {
    const auto data = toy_listings();
    SeqNerModel m(build_vocab(data), tiny_config(), 5);
    std::vector<nn::Matrix> before;
    for (auto* p : m.params()) before.push_back(p->value);
    SeqTrainConfig tc;
    tc.epochs = 0;
    tc.pad_len = 12;
    CHECK(train(m, data, tc).log.empty());
    const auto ps = m.params();
    for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps[i]->value == before[i]);
}

TEST_CASE("seq train is deterministic and lowers the loss") {
    const auto data = toy_listings();
    SeqTrainConfig tc;
    tc.epochs = 6;
    tc.batch = 2;
    tc.lr = 1e-2;
    tc.pad_len = 12;
    tc.seed = 4;
    auto run = [&] {
        SeqNerModel m(build_vocab(data), tiny_config(), 5);
        return train(m, data, tc).log;
    };
    const auto a = run(), b = run();
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].epoch == i + 1);
        CHECK(a[i].loss == b[i].loss);
        for (const auto& [type, m] : a[i].metrics) {
            CHECK(m.tp == b[i].metrics.at(type).tp);
            CHECK(m.fp == b[i].metrics.at(type).fp);
        }
    }
    CHECK(a.back().loss < a.front().loss);
    // The closed head set never gets an sku gold span here, so no tp.
    CHECK(a.back().metrics.at("sku").tp == 0);
    CHECK(a.back().metrics.at("sku").recall() == 0.0);
}

TEST_CASE("type metrics arithmetic") {
    TypeMetrics m;
    m.tp = 3;
    m.fp = 1;
    m.fn = 2;
    CHECK(m.precision() == doctest::Approx(0.75));
    CHECK(m.recall() == doctest::Approx(0.6));
    CHECK(m.f1() == doctest::Approx(2 * 0.75 * 0.6 / 1.35));
    CHECK(TypeMetrics{}.f1() == 0.0);
}

TEST_CASE("seq configs round trip and validate") {
    SeqTrainConfig tc;
    tc.batch = 0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = SeqTrainConfig{};
    tc.dropout_embed = 1.0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = SeqTrainConfig{};
    tc.seed = 8;
    CHECK(SeqTrainConfig::from_json(tc.to_json()).to_json() == tc.to_json());
    const auto mc = tiny_config();
    CHECK(SeqModelConfig::from_json(mc.to_json()).to_json() == mc.to_json());
}

TEST_CASE("seq checkpoint round trip preserves predictions") {
    SeqNerModel m(dataset::Vocab::build({kTokens}), tiny_config(), 6);
    const auto path = std::filesystem::temp_directory_path() / "dnmx_seq_ckpt_test.bin";
    save_model(path, m);
    auto back = load_model(path);
    std::filesystem::remove(path);
    CHECK(back.predict(kTokens) == m.predict(kTokens));
}
