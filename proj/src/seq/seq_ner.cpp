#include "dnmx/seq/seq_ner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dnmx/core/error.hpp"
#include "dnmx/nn/checkpoint.hpp"
#include "dnmx/nn/optim.hpp"

namespace dnmx::seq {

using namespace nn;

Json SeqModelConfig::to_json() const {
    return {{"dim", dim},           {"state", state},       {"conv_channels", conv_channels},
            {"conv_kernel", conv_kernel}, {"buckets", buckets}, {"hash_seed", hash_seed},
            {"max_span", max_span}, {"pad_len", pad_len},   {"types", types}};
}

SeqModelConfig SeqModelConfig::from_json(const Json& j) {
    SeqModelConfig c;
    c.dim = j.at("dim").get<std::size_t>();
    c.state = j.at("state").get<std::size_t>();
    c.conv_channels = j.at("conv_channels").get<std::size_t>();
    c.conv_kernel = j.at("conv_kernel").get<std::size_t>();
    c.buckets = j.at("buckets").get<std::size_t>();
    c.hash_seed = j.at("hash_seed").get<std::uint64_t>();
    c.max_span = j.at("max_span").get<std::size_t>();
    c.pad_len = j.at("pad_len").get<std::size_t>();
    c.types = j.at("types").get<std::vector<std::string>>();
    return c;
}

SeqNerModel::SeqNerModel(dataset::Vocab vocab, SeqModelConfig config, std::uint64_t init_seed)
    : emb("seq.emb", vocab.size(), config.buckets, config.dim, config.hash_seed),
      lstm1("seq.lstm1", config.dim, config.state),
      lstm2("seq.lstm2", 2 * config.state, config.state),
      conv("seq.conv", 2 * config.state, config.conv_channels, config.conv_kernel),
      heads("seq.heads", 2 * config.conv_channels, 2 * config.types.size()),
      vocab_(std::move(vocab)),
      config_(std::move(config)) {
    if (config_.types.empty()) throw ConfigError("seq-ner needs at least one entity type");
    if (config_.max_span < 1) throw ConfigError("max_span must be >= 1");
    if (config_.pad_len < 1) throw ConfigError("pad_len must be >= 1");
    Rng rng(init_seed);
    emb.init(rng);
    lstm1.init(rng);
    lstm2.init(rng);
    conv.init(rng);
    heads.init(rng);
}

SeqInput SeqNerModel::prepare(const std::vector<std::string>& tokens) const {
    SeqInput in;
    in.padded = dataset::pad_truncate(vocab_.ids(tokens), config_.pad_len, dataset::Vocab::kPad);
    in.grams.reserve(in.padded.length);
    for (std::size_t i = 0; i < in.padded.length; ++i) in.grams.push_back(emb.grams(tokens[i]));
    return in;
}

SeqNerModel::Forward SeqNerModel::forward(Tape& t, const SeqInput& in, Rng* dropout_rng, double p_embed,
                                          double p_lstm) {
    const auto& p = in.padded;
    if (p.ids.size() != config_.pad_len || p.mask.size() != config_.pad_len) {
        throw InputError("seq-ner input must have " + std::to_string(config_.pad_len) + " positions, got " +
                         std::to_string(p.ids.size()));
    }
    const std::size_t len = p.length;
    if (len == 0) throw InputError("seq-ner input has no unpadded position");
    if (in.grams.size() != len) throw InputError("seq-ner input grams do not match its length");
    const bool train = dropout_rng != nullptr;
    Rng none(0);
    Rng& rng = train ? *dropout_rng : none;

    const std::vector<int> ids(p.ids.begin(), p.ids.begin() + static_cast<long>(len));
    Var x = dropout(emb(t, ids, in.grams), p_embed, rng, train);
    Var h1 = lstm1(t, x);
    Var h2 = add(lstm2(t, h1), h1);
    Var c = nn::tanh(conv(t, dropout(h2, p_lstm, rng, train)));
    Var pooled = mean_rows(c);
    Var ones = t.constant(len, 1, std::vector<double>(len, 1.0));
    Var feat = concat_cols({c, matmul(ones, pooled)});
    return {h2, transpose(heads(t, feat)), len};
}

Var SeqNerModel::loss(Tape&, const Forward& f, const std::vector<dataset::TokenSpan>& gold) {
    const std::size_t m = config_.types.size();
    std::vector<int> targets(2 * m, -1);
    for (std::size_t k = 0; k < m; ++k) {
        for (const auto& g : gold) {
            if (g.entity_type != config_.types[k]) continue;
            if (g.tok_end < f.length) {
                targets[k] = static_cast<int>(g.tok_start);
                targets[m + k] = static_cast<int>(g.tok_end);
            }
            break;
        }
    }
    return ce_loss(f.logits, targets, f.length);
}

std::pair<Matrix, Matrix> SeqNerModel::distributions(const SeqInput& in) {
    Tape t(false);
    const auto f = forward(t, in);
    const Var probs = softmax_rows(f.logits, f.length);
    const std::size_t m = config_.types.size();
    Matrix s(m, config_.pad_len), e(m, config_.pad_len);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < f.length; ++i) {
            s(k, i) = probs.at(k, i);
            e(k, i) = probs.at(m + k, i);
        }
    }
    return {s, e};
}

SeqSpan decode_pointer(const std::vector<double>& p_start, const std::vector<double>& p_end, std::size_t length,
                       std::size_t max_span) {
    auto argmax = [](const std::vector<double>& v, std::size_t lo, std::size_t hi) {
        std::size_t best = lo;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            if (v[i] > v[best]) best = i;
        }
        return best;
    };
    SeqSpan s;
    s.start = argmax(p_start, 0, length);
    const std::size_t global_end = argmax(p_end, 0, length);
    s.end = global_end < s.start ? s.start : argmax(p_end, s.start, std::min(length, s.start + max_span));
    s.score = p_start[s.start] * p_end[s.end];
    return s;
}

std::vector<SeqSpan> SeqNerModel::predict(const std::vector<std::string>& tokens) {
    const auto in = prepare(tokens);
    const auto [ps, pe] = distributions(in);
    std::vector<SeqSpan> out;
    for (std::size_t k = 0; k < config_.types.size(); ++k) {
        std::vector<double> s(in.padded.length), e(in.padded.length);
        for (std::size_t i = 0; i < in.padded.length; ++i) {
            s[i] = ps(k, i);
            e[i] = pe(k, i);
        }
        auto span = decode_pointer(s, e, in.padded.length, config_.max_span);
        span.type = config_.types[k];
        out.push_back(span);
    }
    return out;
}

std::vector<extract::LabeledEntity> SeqNerModel::predict_entities(const std::string& page_id,
                                                                  const std::vector<std::string>& tokens) {
    std::vector<std::size_t> offset(tokens.size() + 1, 0);
    for (std::size_t i = 0; i < tokens.size(); ++i) offset[i + 1] = offset[i] + tokens[i].size() + 1;
    std::vector<extract::LabeledEntity> out;
    for (const auto& s : predict(tokens)) {
        extract::LabeledEntity e;
        e.page_id = page_id;
        e.entity_type = s.type;
        e.char_start = offset[s.start];
        e.char_end = offset[s.end + 1] - 1;
        e.surface = dataset::detokenize(tokens, s.start, s.end);
        e.source = extract::LabelSource::model;
        out.push_back(std::move(e));
    }
    return out;
}

ParamList SeqNerModel::params() {
    ParamList ps;
    emb.collect(ps);
    lstm1.collect(ps);
    lstm2.collect(ps);
    conv.collect(ps);
    heads.collect(ps);
    return ps;
}

void SeqTrainConfig::validate() const {
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (!(lr > 0)) throw ConfigError("learning rate must be positive");
    if (!(dropout_embed >= 0 && dropout_embed < 1) || !(dropout_lstm >= 0 && dropout_lstm < 1)) {
        throw ConfigError("dropout must be in [0, 1)");
    }
    if (pad_len < 1) throw ConfigError("pad_len must be >= 1");
}

Json SeqTrainConfig::to_json() const {
    return {{"epochs", epochs},           {"batch", batch},       {"lr", lr},
            {"dropout_embed", dropout_embed}, {"dropout_lstm", dropout_lstm}, {"pad_len", pad_len},
            {"seed", seed},           {"log_metrics", log_metrics}};
}

SeqTrainConfig SeqTrainConfig::from_json(const Json& j) {
    SeqTrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch = j.at("batch").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.dropout_embed = j.at("dropout_embed").get<double>();
    c.dropout_lstm = j.at("dropout_lstm").get<double>();
    c.pad_len = j.at("pad_len").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.log_metrics = j.value("log_metrics", true);
    return c;
}

namespace {

double ratio(std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); }

} // namespace

double TypeMetrics::accuracy() const { return ratio(correct, with_gold); }
double TypeMetrics::precision() const { return ratio(tp, tp + fp); }
double TypeMetrics::recall() const { return ratio(tp, tp + fn); }
double TypeMetrics::f1() const {
    const double p = precision(), r = recall();
    return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

std::map<std::string, TypeMetrics> evaluate(SeqNerModel& model, const std::vector<dataset::AnnotatedListing>& data) {
    std::map<std::string, TypeMetrics> out;
    for (const auto& type : model.config().types) out[type];
    for (const auto& l : data) {
        if (l.tokens.empty()) continue;
        for (const auto& p : model.predict(l.tokens)) {
            auto& m = out[p.type];
            const auto g = std::find_if(l.spans.begin(), l.spans.end(),
                                        [&](const dataset::TokenSpan& s) { return s.entity_type == p.type; });
            const bool hit = g != l.spans.end() && g->tok_start == p.start && g->tok_end == p.end;
            if (g != l.spans.end()) ++m.with_gold;
            if (hit) {
                ++m.tp;
                ++m.correct;
            } else {
                ++m.fp;
                if (g != l.spans.end()) ++m.fn;
            }
        }
    }
    return out;
}

SeqTrainResult train(SeqNerModel& model, const std::vector<dataset::AnnotatedListing>& data,
                     const SeqTrainConfig& config, const std::vector<dataset::AnnotatedListing>& eval_data,
                     const std::function<void(const EpochLog&)>& on_epoch) {
    config.validate();
    if (config.pad_len != model.config().pad_len) throw ConfigError("train pad_len differs from the model's");
    SeqTrainResult res;
    if (config.epochs == 0) return res;
    std::vector<std::size_t> usable;
    std::vector<SeqInput> inputs(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].tokens.empty()) continue;
        inputs[i] = model.prepare(data[i].tokens);
        usable.push_back(i);
    }
    if (usable.empty()) throw DataError("seq-ner training set has no non-empty page");

    Adam opt({{"all", model.params(), config.lr}});
    Rng rng(derive_seed(config.seed, "seq-train"));
    Rng drop(derive_seed(config.seed, "seq-dropout"));
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        auto order = usable;
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t b = 0; b < order.size(); b += config.batch) {
            const std::size_t end = std::min(order.size(), b + config.batch);
            opt.zero_grad();
            for (std::size_t k = b; k < end; ++k) {
                const auto& l = data[order[k]];
                Tape t;
                const auto f = model.forward(t, inputs[order[k]], &drop, config.dropout_embed, config.dropout_lstm);
                const Var loss = model.loss(t, f, l.spans);
                if (!std::isfinite(loss.item())) {
                    throw DivergenceError("seq-ner training loss is not finite in epoch " + std::to_string(epoch),
                                          epoch);
                }
                t.backward(scale(loss, 1.0 / static_cast<double>(end - b)));
                total += loss.item();
            }
            opt.step();
        }
        EpochLog log;
        log.epoch = epoch;
        log.loss = total;
        if (config.log_metrics) log.metrics = evaluate(model, eval_data.empty() ? data : eval_data);
        res.log.push_back(log);
        if (on_epoch) on_epoch(res.log.back());
    }
    return res;
}

dataset::Vocab build_vocab(const std::vector<dataset::AnnotatedListing>& data) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(data.size());
    for (const auto& l : data) docs.push_back(l.tokens);
    return dataset::Vocab::build(docs);
}

void save_model(const std::filesystem::path& path, SeqNerModel& model, const Json& extra) {
    Json header = {{"format", "dnmx-seq-ner"},
                   {"config", model.config().to_json()},
                   {"vocab", model.vocab().to_json()},
                   {"adam", {{"beta1", AdamConfig{}.beta1}, {"beta2", AdamConfig{}.beta2}, {"eps", AdamConfig{}.eps}}},
                   {"extra", extra}};
    save_checkpoint(path, header, model.params());
}

SeqNerModel load_model(const std::filesystem::path& path) {
    const auto ck = load_checkpoint(path);
    if (ck.header.value("format", "") != "dnmx-seq-ner") throw DataError(path.string() + " is not a seq-ner checkpoint");
    SeqNerModel m(dataset::Vocab::from_json(ck.header.at("vocab")), SeqModelConfig::from_json(ck.header.at("config")), 0);
    restore_params(ck, m.params());
    return m;
}

} // namespace dnmx::seq
