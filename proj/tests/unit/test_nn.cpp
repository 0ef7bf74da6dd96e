#include <doctest.h>

#include <cmath>

#include "dnmx/core/error.hpp"
#include "dnmx/nn/checkpoint.hpp"
#include "dnmx/nn/layers.hpp"
#include "dnmx/nn/optim.hpp"
#include "grad_cases.hpp"

using namespace dnmx;
using namespace dnmx::nn;

TEST_CASE("sigmoid, softmax and bce basics") {
    Tape t;
    CHECK(sigmoid(t.constant(1, 1, {0.0})).item() == 0.5);
    auto s = softmax_rows(t.constant(1, 4, {1.0, -2.0, 3.5, 700.0}));
    double total = 0;
    for (std::size_t i = 0; i < 4; ++i) total += s.at(0, i);
    CHECK(std::abs(total - 1.0) < 1e-12);
    auto masked = softmax_rows(t.constant(1, 4, {1.0, 2.0, 3.0, 4.0}), 2);
    CHECK(masked.at(0, 2) == 0.0);
    CHECK(masked.at(0, 3) == 0.0);
    CHECK(std::abs(masked.at(0, 0) + masked.at(0, 1) - 1.0) < 1e-12);
    CHECK(std::abs(bce_with_logits(t.constant(1, 1, {0.0}), {1.0}, {1.0}).item() - std::log(2.0)) < 1e-12);
    CHECK(std::abs(bce_loss(t.constant(1, 1, {0.5}), {1.0}).item() - std::log(2.0)) < 1e-12);
    // Large logits stay finite.
    CHECK(std::isfinite(bce_with_logits(t.constant(1, 2, {800.0, -800.0}), {0.0, 1.0}, {1.0, 1.0}).item()));
}

TEST_CASE("shape errors name the op") {
    Tape t;
    auto a = t.constant(2, 3, std::vector<double>(6, 1.0));
    auto b = t.constant(2, 3, std::vector<double>(6, 1.0));
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(e.op() == "matmul");
    }
    CHECK_THROWS_AS(add(a, t.constant(3, 3, std::vector<double>(9))), ShapeError);
    CHECK_THROWS_AS(t.backward(a), ShapeError);
}

TEST_CASE("gradient of a sum of losses is the sum of gradients") {
    Rng rng(3);
    Param a = testing::random_param("a", 3, 4, rng);
    auto grad_of = [&](int which) {
        a.zero_grad();
        Tape t;
        auto x = t.param(a);
        auto l1 = sum(tanh(x));
        auto l2 = sum(mul(x, x));
        t.backward(which == 0 ? l1 : which == 1 ? l2 : add(l1, l2));
        return a.grad.data;
    };
    const auto g1 = grad_of(0), g2 = grad_of(1), g12 = grad_of(2);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g12[i] - (g1[i] + g2[i])) < 1e-12);
}

TEST_CASE("grad_check on a quadratic") {
    Rng rng(11);
    Param th = testing::random_param("theta", 1, 6, rng);
    auto res = grad_check([&](Tape& t) { auto x = t.param(th); return sum(mul(x, x)); }, {&th});
    CHECK(res.max_rel_error < 1e-7);
    CHECK(res.checked == 6);
}

TEST_CASE("grad_check reports non-finite values") {
    Param p("p", 1, 1);
    p.value.data[0] = -1.0;
    CHECK_THROWS_AS(grad_check(
                        [&](Tape& t) {
                            auto x = t.param(p);
                            return bce_with_logits(scale(x, std::nan("")), {1.0}, {1.0});
                        },
                        {&p}),
                    DataError);
}

TEST_CASE("every primitive passes grad_check on a few seeds") {
    for (const auto& c : testing::primitive_grad_cases()) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto r = c.run(seed);
            INFO(c.name << " seed " << seed << " worst " << r.worst_param << "[" << r.worst_index << "]");
            CHECK(r.max_rel_error <= 1e-4);
        }
    }
}

TEST_CASE("lstm_step with zero weights") {
    Tape t;
    const std::size_t H = 3, D = 2;
    std::vector<double> bias(4 * H, 0.0);
    for (std::size_t j = H; j < 2 * H; ++j) bias[j] = 0.7;
    auto [h, c] = lstm_step(t.constant(1, D, {0.3, -0.2}), t.constant(1, H, std::vector<double>(H)),
                            t.constant(1, H, std::vector<double>(H)), t.constant(D, 4 * H, std::vector<double>(D * 4 * H)),
                            t.constant(H, 4 * H, std::vector<double>(H * 4 * H)), t.constant(1, 4 * H, bias));
    for (std::size_t j = 0; j < H; ++j) {
        CHECK(h.at(0, j) == 0.0);
        CHECK(c.at(0, j) == 0.0);
    }
    // Forget gate = σ(bias): with a unit cell state and zero candidate, c' = σ(0.7).
    auto [h2, c2] = lstm_step(t.constant(1, D, {0.3, -0.2}), t.constant(1, H, std::vector<double>(H)),
                              t.constant(1, H, std::vector<double>(H, 1.0)),
                              t.constant(D, 4 * H, std::vector<double>(D * 4 * H)),
                              t.constant(H, 4 * H, std::vector<double>(H * 4 * H)), t.constant(1, 4 * H, bias));
    CHECK(std::abs(c2.at(0, 0) - 1.0 / (1.0 + std::exp(-0.7))) < 1e-15);
}

TEST_CASE("lstm_sequence matches chained lstm_step") {
    Rng rng(5);
    const std::size_t N = 5, D = 3, H = 4;
    Param x = testing::random_param("x", N, D, rng), wx = testing::random_param("wx", D, 4 * H, rng),
          wh = testing::random_param("wh", H, 4 * H, rng), b = testing::random_param("b", 1, 4 * H, rng);
    for (const bool reverse : {false, true}) {
        Tape t;
        auto seq = lstm_sequence(t.param(x), t.param(wx), t.param(wh), t.param(b), reverse);
        auto h = t.constant(1, H, std::vector<double>(H)), c = h;
        for (std::size_t k = 0; k < N; ++k) {
            const std::size_t r = reverse ? N - 1 - k : k;
            std::tie(h, c) = lstm_step(slice_rows(t.param(x), r, 1), h, c, t.param(wx), t.param(wh), t.param(b));
            for (std::size_t j = 0; j < H; ++j) CHECK(std::abs(seq.at(r, j) - h.at(0, j)) < 1e-14);
        }
    }
}

TEST_CASE("conv1d on a constant signal with a symmetric kernel") {
    Tape t;
    const std::size_t N = 7;
    auto x = t.constant(N, 1, std::vector<double>(N, 2.0));
    auto y = conv1d(x, t.constant(3, 1, {0.25, 0.5, 0.25}), t.constant(1, 1, {0.1}), 3);
    for (std::size_t i = 1; i + 1 < N; ++i) CHECK(std::abs(y.at(i, 0) - 2.1) < 1e-15);
    CHECK(y.rows() == N);
    CHECK(std::abs(y.at(0, 0) - 1.6) < 1e-15);
}

TEST_CASE("dropout is the identity in eval mode and inverted in train mode") {
    Tape t;
    Rng rng(1);
    auto a = t.constant(1, 1000, std::vector<double>(1000, 1.0));
    auto e = dropout(a, 0.68, rng, false);
    CHECK(e.node() == a.node());
    auto d = dropout(a, 0.5, rng, true);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        CHECK((d.at(0, i) == 0.0 || d.at(0, i) == 2.0));
        kept += d.at(0, i) != 0.0;
    }
    CHECK(kept > 400);
    CHECK(kept < 600);
}

TEST_CASE("adam examples") {
    Param p("p", 1, 1);
    p.value.data[0] = 1.0;
    Adam opt({{"all", {&p}, 0.01}});
    p.grad.data[0] = 0.0;
    opt.step();
    CHECK(p.value.data[0] == 1.0);

    Param q("q", 1, 1);
    q.value.data[0] = 1.0;
    Adam opt2({{"all", {&q}, 0.01}});
    q.grad.data[0] = 3.0;
    opt2.step();
    CHECK(std::abs(q.value.data[0] - (1.0 - 0.01)) < 1e-8);

    auto trajectory = [] {
        Param r("r", 1, 2);
        r.value.data = {0.5, -0.5};
        Adam o({{"all", {&r}, 0.1}});
        std::vector<double> out;
        for (int s = 0; s < 20; ++s) {
            o.zero_grad();
            Tape t;
            auto x = t.param(r);
            t.backward(sum(mul(x, x)));
            o.step();
            out.insert(out.end(), r.value.data.begin(), r.value.data.end());
        }
        return out;
    };
    CHECK(trajectory() == trajectory());
}

TEST_CASE("warmup schedule") {
    CHECK(warmup_factor(1, 500, 0.1) == doctest::Approx(1.0 / 50));
    CHECK(warmup_factor(50, 500, 0.1) == 1.0);
    CHECK(warmup_factor(400, 500, 0.1) == 1.0);
    CHECK(warmup_factor(1, 500, 0.0) == 1.0);
}

TEST_CASE("hash embedding covers unseen strings deterministically") {
    HashEmbedding emb("emb", 4, 32, 8, 99);
    Rng rng(2);
    emb.init(rng);
    const auto g1 = emb.grams("zzzunseen"), g2 = emb.grams("zzzunseen");
    CHECK(g1 == g2);
    CHECK(g1.size() == 9);
    Tape t(false);
    auto v = emb(t, {1}, {g1});
    CHECK(v.cols() == 8);
    CHECK(char_gram_buckets("ab", 32, 1) != char_gram_buckets("ab", 32, 2));
}

TEST_CASE("checkpoint round trip") {
    Rng rng(4);
    Linear lin("lin", 3, 2);
    lin.init(rng);
    ParamList ps;
    lin.collect(ps);
    const Json header = {{"hash_seed", 7}, {"adam", {{"beta1", 0.9}}}};
    const auto bytes = encode_checkpoint(header, ps);
    CHECK(bytes.substr(0, 8) == "DNMXCKPT");
    const auto ck = decode_checkpoint(bytes);
    CHECK(ck.header == header);
    Linear other("lin", 3, 2);
    ParamList os;
    other.collect(os);
    restore_params(ck, os);
    CHECK(other.w.value == lin.w.value);
    CHECK(encode_checkpoint(header, os) == bytes);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
    Linear wrong("lin", 2, 2);
    ParamList ws;
    wrong.collect(ws);
    CHECK_THROWS_AS(restore_params(ck, ws), DataError);
}
