#include <algorithm>
#include <memory>
#include <set>

#include "dnmx/core/rng.hpp"
#include "dnmx/eval/eval.hpp"

namespace dnmx::eval {

std::string_view to_string(Protocol p) noexcept {
    switch (p) {
    case Protocol::in_domain: return "in_domain";
    case Protocol::zero_shot: return "zero_shot";
    case Protocol::fine_tune: return "fine_tune";
    case Protocol::robustness: return "robustness";
    }
    return "?";
}

Protocol parse_protocol(std::string_view s) {
    if (s == "in_domain") return Protocol::in_domain;
    if (s == "zero_shot" || s == "zero_shot_analog") return Protocol::zero_shot;
    if (s == "fine_tune" || s == "fine_tune_analog") return Protocol::fine_tune;
    if (s == "robustness") return Protocol::robustness;
    throw ConfigError("unknown protocol '" + std::string(s) + "'");
}

Json ProtocolConfig::to_json() const {
    Json novel = Json::array();
    for (const auto& t : robustness.novel_types) novel.push_back(t);
    return {{"protocol", std::string(eval::to_string(protocol))},
            {"model", model},
            {"span_model", span_model.to_json()},
            {"span_train", span_train.to_json()},
            {"seq_model", seq_model.to_json()},
            {"seq_train", seq_train.to_json()},
            {"held_out", std::string(dnmx::to_string(held_out))},
            {"robustness_market", std::string(dnmx::to_string(robustness.market))},
            {"novel_types", novel},
            {"threshold", threshold},
            {"seed", seed}};
}

std::vector<PagePrediction> predict_span(span::SpanNerModel& model, const std::vector<dataset::AnnotatedListing>& pages,
                                         const std::vector<std::string>& types, double threshold) {
    std::vector<PagePrediction> out;
    out.reserve(pages.size());
    for (const auto& l : pages) {
        PagePrediction p{l.page_id, {}};
        const auto ex = dataset::to_span_input(l, types);
        for (const auto& s : model.predict(ex.text, types, threshold)) {
            p.spans.push_back({s.start, s.end, types[s.type], s.score});
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<PagePrediction> predict_seq(seq::SeqNerModel& model, const std::vector<dataset::AnnotatedListing>& pages) {
    std::vector<PagePrediction> out;
    out.reserve(pages.size());
    for (const auto& l : pages) {
        PagePrediction p{l.page_id, {}};
        if (!l.tokens.empty()) {
            for (const auto& s : model.predict(l.tokens)) p.spans.push_back({s.start, s.end, s.type, s.score});
        }
        out.push_back(std::move(p));
    }
    return out;
}

void check_leakage(const std::vector<std::string>& training_ids, const std::vector<std::string>& eval_ids) {
    const std::set<std::string> train(training_ids.begin(), training_ids.end());
    for (const auto& id : eval_ids) {
        if (train.count(id)) throw ProtocolError("evaluation page '" + id + "' is in the training manifest");
    }
}

namespace {

/// Core drug-market types first, the rest by name.
std::vector<std::string> ordered_types(const std::vector<dataset::AnnotatedListing>& pages) {
    std::set<std::string> seen;
    for (const auto& l : pages) {
        for (const auto& s : l.spans) seen.insert(s.entity_type);
    }
    std::vector<std::string> out;
    for (const auto& t : core_entity_types()) {
        if (seen.erase(t)) out.push_back(t);
    }
    out.insert(out.end(), seen.begin(), seen.end());
    return out;
}

std::vector<std::string> ids_of(const std::vector<dataset::AnnotatedListing>& pages) {
    std::vector<std::string> out;
    out.reserve(pages.size());
    for (const auto& l : pages) out.push_back(l.page_id);
    return out;
}

std::string market_scope(const std::vector<dataset::AnnotatedListing>& pages) {
    std::set<MarketId> ms;
    for (const auto& l : pages) ms.insert(l.market_id);
    std::string out;
    for (auto m : kAllMarkets) {
        if (!ms.count(m)) continue;
        if (!out.empty()) out += '+';
        out += dnmx::to_string(m);
    }
    return out;
}

std::vector<dataset::AnnotatedListing> of_market(const std::vector<dataset::AnnotatedListing>& pages, MarketId m,
                                                 bool keep) {
    std::vector<dataset::AnnotatedListing> out;
    for (const auto& l : pages) {
        if ((l.market_id == m) == keep) out.push_back(l);
    }
    return out;
}

void check_model_name(const ProtocolConfig& c) {
    if (c.model != "span" && c.model != "seq") throw ConfigError("model must be 'span' or 'seq', got '" + c.model + "'");
}

/// One model under test, trained in one or more stages.
class Subject {
public:
    explicit Subject(const ProtocolConfig& c) : c_(c) {
        check_model_name(c);
        m_.seed = c.seed;
    }
    Subject(const ProtocolConfig& c, TrainedModel m) : c_(c), m_(std::move(m)) {
        if (!m_.span == !m_.seq) throw ConfigError("a trained model holds exactly one of span-ner / seq-ner");
        stages_ = 1;
    }

    void train(const std::vector<dataset::AnnotatedListing>& pages, std::string_view stage) {
        if (pages.empty()) throw DataError("no training pages for the " + std::string(stage) + " stage");
        const auto ids = ids_of(pages);
        m_.manifest.insert(m_.manifest.end(), ids.begin(), ids.end());
        const std::uint64_t seed = stages_++ == 0 ? c_.seed : derive_seed(c_.seed, stage);
        if (c_.model == "span") {
            if (!m_.span) {
                m_.types = ordered_types(pages);
                m_.span = std::make_shared<span::SpanNerModel>(span::build_vocab(pages, m_.types), c_.span_model, c_.seed);
            }
            auto tc = c_.span_train;
            tc.seed = seed;
            span::train(*m_.span, pages, m_.types, tc);
        } else {
            if (!m_.seq) m_.seq = std::make_shared<seq::SeqNerModel>(seq::build_vocab(pages), c_.seq_model, c_.seed);
            auto tc = c_.seq_train;
            tc.seed = seed;
            tc.log_metrics = false;
            seq::train(*m_.seq, pages, tc);
        }
    }

    std::vector<PagePrediction> predict(const std::vector<dataset::AnnotatedListing>& pages,
                                        const std::vector<std::string>& types) {
        if (m_.span) return predict_span(*m_.span, pages, types, c_.threshold);
        auto preds = predict_seq(*m_.seq, pages);
        // The closed head set answers only for requested types.
        const std::set<std::string> keep(types.begin(), types.end());
        for (auto& p : preds) {
            std::erase_if(p.spans, [&](const ScoredSpan& s) { return !keep.count(s.type); });
        }
        return preds;
    }

    std::string id() const {
        return (m_.span ? "span-ner" : "seq-ner") + std::string(" seed=") + std::to_string(m_.seed);
    }
    const std::vector<std::string>& manifest() const { return m_.manifest; }
    TrainedModel release() { return std::move(m_); }

private:
    const ProtocolConfig& c_;
    TrainedModel m_;
    std::size_t stages_ = 0;
};

void evaluate_into(ProtocolResult& res, Subject& subject, std::string_view protocol, std::string split,
                   const std::vector<dataset::AnnotatedListing>& pages, const std::vector<std::string>& types) {
    if (pages.empty()) throw DataError("no evaluation pages for protocol " + std::string(protocol));
    check_leakage(subject.manifest(), ids_of(pages));
    auto preds = subject.predict(pages, types);
    EvalReport r;
    r.protocol = protocol;
    r.model_id = subject.id();
    r.split = std::move(split);
    r.market_scope = market_scope(pages);
    r.counts = exact_match(to_page_spans(preds), filter_types(gold_spans(pages), types));
    res.reports.push_back(std::move(r));
    res.predictions.push_back(std::move(preds));
}

} // namespace

TrainedModel train_model(const ProtocolConfig& config, const std::vector<dataset::AnnotatedListing>& pages) {
    Subject subject(config);
    subject.train(pages, "train");
    return subject.release();
}

std::vector<std::string> robustness_types(const std::vector<dataset::AnnotatedListing>& pages,
                                          const RobustnessConfig& config) {
    auto out = ordered_types(pages);
    for (const auto& t : config.novel_types) {
        if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
    return out;
}

ProtocolResult run_protocol(const ProtocolConfig& config, const std::vector<dataset::AnnotatedListing>& corpus,
                            const dataset::SplitManifest& split,
                            const std::vector<dataset::AnnotatedListing>& robustness_pages,
                            const TrainedModel* pretrained) {
    check_model_name(config);
    std::set<std::string> known;
    for (const auto& l : corpus) known.insert(l.page_id);
    for (const auto* side : {&split.train, &split.test}) {
        for (const auto& id : *side) {
            if (!known.count(id)) throw DataError("split manifest names page '" + id + "' missing from the corpus");
        }
    }
    check_leakage(split.train, split.test);
    const auto train = dataset::select(corpus, split.train);
    const auto test = dataset::select(corpus, split.test);

    if (pretrained && config.protocol != Protocol::in_domain && config.protocol != Protocol::robustness) {
        throw ConfigError("protocol " + std::string(eval::to_string(config.protocol)) +
                          " trains its own models and takes no checkpoint");
    }
    ProtocolResult res;
    Subject subject = pretrained ? Subject(config, *pretrained) : Subject(config);
    switch (config.protocol) {
    case Protocol::in_domain: {
        if (!pretrained) subject.train(train, "in_domain");
        evaluate_into(res, subject, "in_domain", "test", test, ordered_types(test));
        break;
    }
    case Protocol::zero_shot:
    case Protocol::fine_tune: {
        const auto source = of_market(train, config.held_out, false);
        const auto target_test = of_market(test, config.held_out, true);
        const auto types = ordered_types(target_test);
        subject.train(source, "zero_shot");
        evaluate_into(res, subject, "zero_shot", "test", target_test, types);
        if (config.protocol == Protocol::fine_tune) {
            subject.train(of_market(train, config.held_out, true), "fine_tune");
            evaluate_into(res, subject, "fine_tune", "test", target_test, types);
        }
        break;
    }
    case Protocol::robustness: {
        if (robustness_pages.empty()) throw ConfigError("robustness protocol needs the robustness market's pages");
        for (const auto& l : robustness_pages) {
            if (l.market_id != config.robustness.market) {
                throw DataError("robustness page '" + l.page_id + "' is not from " +
                                std::string(dnmx::to_string(config.robustness.market)));
            }
        }
        const auto trained_on = pretrained ? dataset::select(corpus, pretrained->manifest) : train;
        for (const auto& l : trained_on) {
            if (l.market_id == config.robustness.market) {
                throw ProtocolError("robustness market " + std::string(dnmx::to_string(config.robustness.market)) +
                                    " appears in the training manifest");
            }
        }
        if (!pretrained) subject.train(train, "robustness");
        evaluate_into(res, subject, "robustness", "all", robustness_pages,
                      robustness_types(robustness_pages, config.robustness));
        break;
    }
    }
    res.training_manifest = subject.manifest();
    return res;
}

} // namespace dnmx::eval
