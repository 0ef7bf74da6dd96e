#include "dnmx/span/span_ner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dnmx/core/error.hpp"
#include "dnmx/nn/checkpoint.hpp"

namespace dnmx::span {

using namespace nn;

Json SpanModelConfig::to_json() const {
    return {{"dim", dim},         {"hidden", hidden},       {"buckets", buckets},
            {"max_width", max_width}, {"hash_seed", hash_seed}, {"encoder", encoder}};
}

SpanModelConfig SpanModelConfig::from_json(const Json& j) {
    SpanModelConfig c;
    c.dim = j.at("dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.buckets = j.at("buckets").get<std::size_t>();
    c.max_width = j.at("max_width").get<std::size_t>();
    c.hash_seed = j.at("hash_seed").get<std::uint64_t>();
    c.encoder = j.at("encoder").get<std::string>();
    return c;
}

std::vector<std::pair<int, int>> enumerate_spans(std::size_t n, std::size_t k) {
    std::vector<std::pair<int, int>> out;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n && j - i < k; ++j) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
    return out;
}

PairSets build_pairs(const dataset::SpanNerExample& ex, std::size_t k, double neg_ratio) {
    PairSets ps;
    ps.spans = enumerate_spans(ex.text.size(), k);
    ps.types = ex.types.size();
    const std::size_t cells = ps.spans.size() * ps.types;
    ps.targets.assign(cells, 0.0);
    ps.weights.assign(cells, 0.0);
    // Row of span (i, j) in lexicographic enumeration.
    const std::size_t n = ex.text.size();
    auto row_of = [&](std::size_t i, std::size_t j) {
        std::size_t before = 0;
        for (std::size_t a = 0; a < i; ++a) before += std::min(k, n - a);
        return before + (j - i);
    };
    for (const auto& g : ex.gold) {
        if (g.end - g.start >= k || g.type >= ps.types) continue;
        const std::size_t cell = row_of(g.start, g.end) * ps.types + g.type;
        if (ps.targets[cell] == 1.0) continue;
        ps.targets[cell] = 1.0;
        ps.weights[cell] = 1.0;
        ++ps.positives;
    }
    // Gold spans paired with every other type keep full weight: they are the
    // pairs that teach types apart. The other negatives share a total weight
    // of at most neg_ratio times that positive-augmented count, so every
    // span is pushed down a little on every step.
    std::vector<char> gold_row(ps.spans.size(), 0);
    for (std::size_t c = 0; c < cells; ++c) {
        if (ps.targets[c] == 1.0) gold_row[c / ps.types] = 1;
    }
    std::size_t forced = 0;
    std::vector<std::size_t> rest;
    for (std::size_t c = 0; c < cells; ++c) {
        if (ps.targets[c] == 1.0) continue;
        if (gold_row[c / ps.types]) {
            ps.weights[c] = 1.0;
            ++forced;
        } else {
            rest.push_back(c);
        }
    }
    const double budget = neg_ratio * static_cast<double>(forced + ps.positives);
    const double w = rest.empty() ? 0.0 : std::min(1.0, budget / static_cast<double>(rest.size()));
    for (auto c : rest) ps.weights[c] = w;
    ps.negatives = forced + rest.size();
    return ps;
}

std::vector<SpanPrediction> decode(std::vector<SpanPrediction> candidates, double threshold) {
    std::erase_if(candidates, [&](const SpanPrediction& p) { return !(p.score >= threshold); });
    std::stable_sort(candidates.begin(), candidates.end(), [](const SpanPrediction& a, const SpanPrediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.start != b.start) return a.start < b.start;
        if (a.end != b.end) return a.end < b.end;
        return a.type < b.type;
    });
    std::vector<SpanPrediction> out;
    for (const auto& c : candidates) {
        const bool clash = std::any_of(out.begin(), out.end(),
                                       [&](const SpanPrediction& o) { return c.start <= o.end && o.start <= c.end; });
        if (!clash) out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const SpanPrediction& a, const SpanPrediction& b) {
        return std::tie(a.start, a.end, a.type) < std::tie(b.start, b.end, b.type);
    });
    return out;
}

SpanNerModel::SpanNerModel(dataset::Vocab vocab, SpanModelConfig config, std::uint64_t init_seed)
    : emb("span.emb", vocab.size(), config.buckets, config.dim, config.hash_seed),
      enc("span.enc", 3 * config.dim, config.hidden),
      proj("span.proj", 2 * config.hidden, config.dim),
      type_ffn("span.type_ffn", config.dim, config.dim, config.dim),
      span_left("span.span_ffn.l1.w_left", config.dim, config.dim),
      span_right("span.span_ffn.l1.w_right", config.dim, config.dim),
      span_b1("span.span_ffn.l1.b", 1, config.dim),
      span_out("span.span_ffn.l2", config.dim, config.dim),
      vocab_(std::move(vocab)),
      config_(std::move(config)) {
    if (config_.encoder != "bilstm" && config_.encoder != "identity") {
        throw ConfigError("unknown span encoder '" + config_.encoder + "'");
    }
    if (config_.max_width < 1) throw ConfigError("max_width must be >= 1");
    Rng rng(init_seed);
    emb.init(rng);
    enc.init(rng);
    proj.init(rng);
    type_ffn.init(rng);
    // Glorot over the full 2D → D first layer.
    const double bound = std::sqrt(6.0 / static_cast<double>(3 * config_.dim));
    init_uniform(span_left, rng, bound);
    init_uniform(span_right, rng, bound);
    span_out.init(rng);
}

Var SpanNerModel::embed(Tape& t, const std::vector<std::string>& tokens) {
    std::vector<int> ids = vocab_.ids(tokens);
    std::vector<std::vector<int>> grams(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (ids[i] != dataset::Vocab::kEnt && ids[i] != dataset::Vocab::kSep) grams[i] = emb.grams(tokens[i]);
    }
    return emb(t, ids, grams);
}

SpanNerModel::Encoded SpanNerModel::encode(Tape& t, const std::vector<std::string>& tokens) {
    const auto [types, text] = dataset::parse_span_tokens(tokens);
    Var x = embed(t, tokens);
    // Each step sees its neighbours' embeddings too, so an [ENT] row carries
    // the type name that follows it and a token knows its anchor keywords.
    const std::size_t n = x.rows();
    const Var zero = t.constant(nn::Matrix(1, x.cols()));
    const Var prev = n > 1 ? concat_rows({zero, slice_rows(x, 0, n - 1)}) : zero;
    const Var next = n > 1 ? concat_rows({slice_rows(x, 1, n - 1), zero}) : zero;
    Var out = config_.encoder == "identity" ? x : proj(t, enc(t, concat_cols({prev, x, next})));
    std::vector<int> ent;
    for (std::size_t i = 0; i < types.size(); ++i) ent.push_back(static_cast<int>(2 * i));
    const std::size_t sep = 2 * types.size();
    return {gather_rows(out, ent), slice_rows(out, sep + 1, text.size())};
}

Var SpanNerModel::span_logits(Tape& t, const Encoded& e, const std::vector<std::pair<int, int>>& spans) {
    Var q = type_ffn(t, e.p);
    Var a = matmul(e.h, t.param(span_left));
    Var b = add(matmul(e.h, t.param(span_right)), t.param(span_b1));
    Var r = matmul_nt(q, t.param(span_out.w));
    Var c = matmul_nt(q, t.param(span_out.b));
    return pair_tanh_dot(a, b, spans, r, c);
}

Var SpanNerModel::span_logits_reference(Tape& t, const Encoded& e, const std::vector<std::pair<int, int>>& spans) {
    Var q = type_ffn(t, e.p);
    std::vector<int> is, js;
    for (const auto& [i, j] : spans) {
        is.push_back(i);
        js.push_back(j);
    }
    Var hij = concat_cols({gather_rows(e.h, is), gather_rows(e.h, js)});
    Var w1 = concat_rows({t.param(span_left), t.param(span_right)});
    Var s = span_out(t, tanh(add(matmul(hij, w1), t.param(span_b1))));
    return matmul_nt(s, q);
}

Var SpanNerModel::loss(Tape& t, const dataset::SpanNerExample& ex, const PairSets& pairs) {
    if (pairs.spans.empty() || pairs.types == 0) return t.constant(1, 1, {0.0});
    const auto e = encode(t, ex.tokens());
    return bce_with_logits(span_logits(t, e, pairs.spans), pairs.targets, pairs.weights);
}

double SpanNerModel::score(const dataset::SpanNerExample& ex, std::size_t i, std::size_t j, std::size_t type) {
    if (i > j || j >= ex.text.size() || type >= ex.types.size()) {
        throw InputError("span (" + std::to_string(i) + ", " + std::to_string(j) + ") type " + std::to_string(type) +
                         " out of range for " + std::to_string(ex.text.size()) + " tokens and " +
                         std::to_string(ex.types.size()) + " types");
    }
    Tape t(false);
    const auto e = encode(t, ex.tokens());
    const auto l = span_logits(t, e, {{static_cast<int>(i), static_cast<int>(j)}});
    return 1.0 / (1.0 + std::exp(-l.at(0, type)));
}

std::vector<SpanPrediction> SpanNerModel::predict(const std::vector<std::string>& text,
                                                  const std::vector<std::string>& types, double threshold) {
    if (types.size() > dataset::kMaxTypes) {
        throw ConfigError(std::to_string(types.size()) + " entity types requested, at most " +
                          std::to_string(dataset::kMaxTypes) + " allowed");
    }
    if (text.empty() || types.empty()) return {};
    dataset::SpanNerExample ex;
    ex.types = types;
    ex.text = text;
    Tape t(false);
    const auto e = encode(t, ex.tokens());
    const auto spans = enumerate_spans(text.size(), config_.max_width);
    const auto logits = span_logits(t, e, spans);
    std::vector<SpanPrediction> cands;
    for (std::size_t s = 0; s < spans.size(); ++s) {
        for (std::size_t k = 0; k < types.size(); ++k) {
            const double phi = 1.0 / (1.0 + std::exp(-logits.at(s, k)));
            if (phi >= threshold) {
                cands.push_back({static_cast<std::size_t>(spans[s].first), static_cast<std::size_t>(spans[s].second), k, phi});
            }
        }
    }
    return decode(std::move(cands), threshold);
}

ParamList SpanNerModel::encoder_params() {
    ParamList ps;
    emb.collect(ps);
    enc.collect(ps);
    proj.collect(ps);
    return ps;
}

ParamList SpanNerModel::other_params() {
    ParamList ps;
    type_ffn.collect(ps);
    ps.push_back(&span_left);
    ps.push_back(&span_right);
    ps.push_back(&span_b1);
    span_out.collect(ps);
    return ps;
}

ParamList SpanNerModel::params() {
    auto ps = encoder_params();
    const auto o = other_params();
    ps.insert(ps.end(), o.begin(), o.end());
    return ps;
}

void SpanTrainConfig::validate() const {
    if (!(lr_encoder > 0) || !(lr_others > 0)) throw ConfigError("learning rates must be positive");
    if (!(warmup_ratio >= 0 && warmup_ratio < 1)) throw ConfigError("warmup ratio must be in [0, 1)");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (!(drop_prob >= 0 && drop_prob <= 1)) throw ConfigError("drop probability must be in [0, 1]");
    if (!(neg_ratio >= 0)) throw ConfigError("negative ratio must be >= 0");
}

Json SpanTrainConfig::to_json() const {
    return {{"num_steps", num_steps},       {"batch", batch},           {"warmup_ratio", warmup_ratio},
            {"lr_encoder", lr_encoder},     {"lr_others", lr_others},   {"shuffle_types", shuffle_types},
            {"random_drop", random_drop},   {"drop_prob", drop_prob},   {"neg_ratio", neg_ratio},
            {"max_types", max_types},       {"max_len", max_len},       {"eval_every", eval_every},
            {"seed", seed}};
}

SpanTrainConfig SpanTrainConfig::from_json(const Json& j) {
    SpanTrainConfig c;
    c.num_steps = j.at("num_steps").get<std::size_t>();
    c.batch = j.at("batch").get<std::size_t>();
    c.warmup_ratio = j.at("warmup_ratio").get<double>();
    c.lr_encoder = j.at("lr_encoder").get<double>();
    c.lr_others = j.at("lr_others").get<double>();
    c.shuffle_types = j.at("shuffle_types").get<bool>();
    c.random_drop = j.at("random_drop").get<bool>();
    c.drop_prob = j.at("drop_prob").get<double>();
    c.neg_ratio = j.at("neg_ratio").get<double>();
    c.max_types = j.at("max_types").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.eval_every = j.at("eval_every").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

SpanTrainResult train(SpanNerModel& model, const std::vector<dataset::AnnotatedListing>& data,
                      const std::vector<std::string>& types, const SpanTrainConfig& config,
                      const std::function<void(const StepLog&)>& on_log) {
    config.validate();
    SpanTrainResult res;
    if (config.num_steps == 0) return res;
    if (data.empty()) throw DataError("span training set is empty");
    Adam opt({{"encoder", model.encoder_params(), config.lr_encoder}, {"others", model.other_params(), config.lr_others}});
    Rng rng(derive_seed(config.seed, "span-train"));
    std::vector<std::size_t> order(data.size());
    std::size_t cursor = order.size();
    for (std::size_t step = 1; step <= config.num_steps; ++step) {
        opt.zero_grad();
        double total = 0.0;
        for (std::size_t b = 0; b < config.batch; ++b) {
            if (cursor == order.size()) {
                std::iota(order.begin(), order.end(), 0);
                rng.shuffle(order);
                cursor = 0;
            }
            const auto& listing = data[order[cursor++]];
            std::set<std::string> present;
            for (const auto& s : listing.spans) present.insert(s.entity_type);
            std::vector<std::string> req;
            for (const auto& t : types) {
                const bool absent = present.count(t) == 0;
                if (config.random_drop && absent && rng.chance(config.drop_prob)) continue;
                req.push_back(t);
            }
            if (config.shuffle_types) rng.shuffle(req);
            const auto ex = dataset::to_span_input(listing, req, config.max_types, config.max_len);
            const auto pairs = build_pairs(ex, model.config().max_width, config.neg_ratio);
            Tape t;
            const Var l = model.loss(t, ex, pairs);
            t.backward(scale(l, 1.0 / static_cast<double>(config.batch)));
            total += l.item();
        }
        const double mean = total / static_cast<double>(config.batch);
        if (!std::isfinite(mean)) throw DivergenceError("span training loss is not finite at step " + std::to_string(step), step);
        const double factor = warmup_factor(step, config.num_steps, config.warmup_ratio);
        opt.step(factor);
        if (step % config.eval_every == 0 || step == config.num_steps) {
            res.log.push_back({step, mean, factor});
            if (on_log) on_log(res.log.back());
        }
    }
    return res;
}

dataset::Vocab build_vocab(const std::vector<dataset::AnnotatedListing>& data, const std::vector<std::string>& types) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(data.size() + 1);
    for (const auto& l : data) docs.push_back(l.tokens);
    docs.push_back(types);
    return dataset::Vocab::build(docs);
}

void save_model(const std::filesystem::path& path, SpanNerModel& model, const Json& extra) {
    Json header = {{"format", "dnmx-span-ner"},
                   {"config", model.config().to_json()},
                   {"vocab", model.vocab().to_json()},
                   {"adam", {{"beta1", AdamConfig{}.beta1}, {"beta2", AdamConfig{}.beta2}, {"eps", AdamConfig{}.eps}}},
                   {"extra", extra}};
    save_checkpoint(path, header, model.params());
}

SpanNerModel load_model(const std::filesystem::path& path) {
    const auto ck = load_checkpoint(path);
    if (ck.header.value("format", "") != "dnmx-span-ner") throw DataError(path.string() + " is not a span-ner checkpoint");
    SpanNerModel m(dataset::Vocab::from_json(ck.header.at("vocab")), SpanModelConfig::from_json(ck.header.at("config")), 0);
    restore_params(ck, m.params());
    return m;
}

} // namespace dnmx::span
