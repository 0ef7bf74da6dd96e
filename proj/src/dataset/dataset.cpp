#include "dnmx/dataset/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dnmx/core/error.hpp"
#include "dnmx/core/hash.hpp"
#include "dnmx/core/rng.hpp"

namespace dnmx::dataset {

std::vector<TokenSpan> align_spans(const std::string& page_id, const std::vector<extract::Token>& tokens,
                                   const std::vector<extract::LabeledEntity>& entities) {
    std::vector<std::string> words;
    words.reserve(tokens.size());
    for (const auto& t : tokens) words.push_back(t.surface);
    std::vector<TokenSpan> out;
    for (const auto& e : entities) {
        // First token ending after char_start, last token starting before char_end.
        const auto first = std::find_if(tokens.begin(), tokens.end(),
                                         [&](const extract::Token& t) { return t.char_end > e.char_start; });
        const auto last = std::find_if(tokens.rbegin(), tokens.rend(),
                                       [&](const extract::Token& t) { return t.char_start < e.char_end; });
        if (e.char_end <= e.char_start || first == tokens.end() || last == tokens.rend()) {
            throw DataError("page " + page_id + ": " + e.entity_type + " span [" + std::to_string(e.char_start) +
                            ", " + std::to_string(e.char_end) + ") covers no token");
        }
        const auto s = static_cast<std::size_t>(first - tokens.begin());
        const auto en = static_cast<std::size_t>(tokens.rend() - last) - 1;
        if (s > en) {
            throw DataError("page " + page_id + ": " + e.entity_type + " span [" + std::to_string(e.char_start) +
                            ", " + std::to_string(e.char_end) + ") covers no token");
        }
        out.push_back({e.entity_type, s, en, detokenize(words, s, en)});
    }
    return out;
}

AnnotatedListing to_listing(const extract::AnnotatedDoc& doc) {
    AnnotatedListing l;
    l.page_id = doc.doc.page_id;
    l.market_id = doc.doc.market_id;
    l.language = doc.doc.language;
    for (const auto& t : doc.doc.tokens) l.tokens.push_back(t.surface);
    l.spans = align_spans(doc.doc.page_id, doc.doc.tokens, doc.entities);
    return l;
}

std::string detokenize(const std::vector<std::string>& tokens, std::size_t start, std::size_t end) {
    std::string s;
    for (std::size_t i = start; i <= end && i < tokens.size(); ++i) {
        if (i > start) s += ' ';
        s += tokens[i];
    }
    return s;
}

ConversationExample to_conversation(const AnnotatedListing& listing, const std::vector<std::string>& types) {
    ConversationExample ex;
    ex.id = listing.page_id;
    ex.passage = listing.tokens.empty() ? "" : detokenize(listing.tokens, 0, listing.tokens.size() - 1);
    for (const auto& t : types) {
        ConversationTurn turn{"What describes " + t + " in the text?", {}};
        for (const auto& s : listing.spans) {
            if (s.entity_type == t) turn.answers.push_back(s.surface);
        }
        ex.turns.push_back(std::move(turn));
    }
    return ex;
}

Json conversation_json(const ConversationExample& ex, const std::string& system_turn) {
    Json conv = Json::array();
    if (!system_turn.empty()) conv.push_back({{"from", "system"}, {"value", system_turn}});
    conv.push_back({{"from", "human"}, {"value", "Text: " + ex.passage}});
    conv.push_back({{"from", "gpt"}, {"value", "I've read this text."}});
    for (const auto& t : ex.turns) {
        conv.push_back({{"from", "human"}, {"value", t.question}});
        conv.push_back({{"from", "gpt"}, {"value", Json(t.answers).dump()}});
    }
    return {{"id", ex.id}, {"conversations", conv}};
}

std::vector<std::string> SpanNerExample::tokens() const {
    std::vector<std::string> out;
    for (const auto& t : types) {
        out.emplace_back(kEntToken);
        out.push_back(t);
    }
    out.emplace_back(kSepToken);
    out.insert(out.end(), text.begin(), text.end());
    return out;
}

SpanNerExample to_span_input(const AnnotatedListing& listing, const std::vector<std::string>& types,
                             std::size_t max_types, std::size_t max_len) {
    if (types.size() > max_types) {
        throw ConfigError(std::to_string(types.size()) + " entity types requested, at most " +
                          std::to_string(max_types) + " allowed");
    }
    SpanNerExample ex;
    ex.id = listing.page_id;
    ex.types = types;
    ex.truncated = listing.tokens.size() > max_len;
    const std::size_t n = std::min(listing.tokens.size(), max_len);
    ex.text.assign(listing.tokens.begin(), listing.tokens.begin() + static_cast<long>(n));
    for (const auto& s : listing.spans) {
        const auto it = std::find(types.begin(), types.end(), s.entity_type);
        if (it == types.end() || s.tok_end >= n) continue;
        ex.gold.push_back({s.tok_start, s.tok_end, static_cast<std::size_t>(it - types.begin())});
    }
    std::sort(ex.gold.begin(), ex.gold.end());
    ex.gold.erase(std::unique(ex.gold.begin(), ex.gold.end()), ex.gold.end());
    return ex;
}

std::pair<std::vector<std::string>, std::vector<std::string>> parse_span_tokens(const std::vector<std::string>& tokens) {
    const auto seps = std::count(tokens.begin(), tokens.end(), kSepToken);
    if (seps != 1) throw InputError("span input needs exactly one [SEP], found " + std::to_string(seps));
    const auto sep = std::find(tokens.begin(), tokens.end(), kSepToken);
    const auto prompt = static_cast<std::size_t>(sep - tokens.begin());
    if (prompt % 2 != 0) throw InputError("type prompt is not a sequence of [ENT] name pairs");
    std::vector<std::string> types;
    for (std::size_t i = 0; i < prompt; i += 2) {
        if (tokens[i] != kEntToken) throw InputError("type prompt position " + std::to_string(i) + " is not [ENT]");
        types.push_back(tokens[i + 1]);
    }
    return {types, std::vector<std::string>(sep + 1, tokens.end())};
}

Json SplitManifest::to_json() const {
    return {{"seed", seed}, {"ratio", ratio}, {"train", train}, {"test", test}};
}

SplitManifest SplitManifest::from_json(const Json& j) {
    try {
        SplitManifest m;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.ratio = j.at("ratio").get<double>();
        m.train = j.at("train").get<std::vector<std::string>>();
        m.test = j.at("test").get<std::vector<std::string>>();
        return m;
    } catch (const Json::exception& e) {
        throw DataError(std::string("bad split manifest: ") + e.what());
    }
}

SplitManifest split(const std::vector<PageRef>& pages, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("split ratio must be in [0, 1]");
    std::map<MarketId, std::vector<std::string>> by_market;
    for (const auto& p : pages) by_market[p.market_id].push_back(p.page_id);

    struct Quota {
        MarketId market;
        std::size_t n, take;
        double frac;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (auto& [m, ids] : by_market) {
        std::sort(ids.begin(), ids.end());
        Rng rng(derive_seed(seed, "split/" + std::string(to_string(m))));
        rng.shuffle(ids);
        const double exact = ratio * static_cast<double>(ids.size());
        const auto base = static_cast<std::size_t>(std::floor(exact));
        quotas.push_back({m, ids.size(), base, exact - static_cast<double>(base)});
        assigned += base;
    }
    const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pages.size())));
    std::vector<std::size_t> order(quotas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return quotas[a].frac > quotas[b].frac; });
    for (std::size_t k = 0; assigned < target && k < order.size(); ++k) {
        ++quotas[order[k]].take;
        ++assigned;
    }
    SplitManifest out;
    out.seed = seed;
    out.ratio = ratio;
    for (auto& q : quotas) {
        if (q.n >= 2 && ratio > 0.0 && ratio < 1.0) q.take = std::clamp<std::size_t>(q.take, 1, q.n - 1);
        const auto& ids = by_market[q.market];
        out.train.insert(out.train.end(), ids.begin(), ids.begin() + static_cast<long>(q.take));
        out.test.insert(out.test.end(), ids.begin() + static_cast<long>(q.take), ids.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

Padded pad_truncate(const std::vector<int>& ids, std::size_t target, int pad_id) {
    if (target < 1) throw ConfigError("pad target must be >= 1");
    Padded p;
    p.length = std::min(ids.size(), target);
    p.truncated = ids.size() > target;
    p.ids.assign(target, pad_id);
    p.mask.assign(target, 0);
    for (std::size_t i = 0; i < p.length; ++i) {
        p.ids[i] = ids[i];
        p.mask[i] = 1;
    }
    return p;
}

Vocab::Vocab() : tokens_{"[PAD]", "[UNK]", kEntToken, kSepToken} {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& docs, std::size_t min_count, std::size_t max_size) {
    std::map<std::string, std::size_t> counts;
    for (const auto& d : docs) {
        for (const auto& t : d) ++counts[t];
    }
    std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocab v;
    for (const auto& [tok, n] : sorted) {
        if (n < min_count) continue;
        if (max_size != 0 && v.size() >= max_size) break;
        if (v.index_.count(tok)) continue;
        v.index_[tok] = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back(tok);
    }
    return v;
}

int Vocab::id(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::ids(const std::vector<std::string>& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
}

Json Vocab::to_json() const { return tokens_; }

Vocab Vocab::from_json(const Json& j) {
    Vocab v;
    const auto toks = j.get<std::vector<std::string>>();
    if (toks.size() < 4 || toks[2] != kEntToken || toks[3] != kSepToken) throw DataError("vocabulary lacks reserved ids");
    v.tokens_ = toks;
    v.index_.clear();
    for (std::size_t i = 0; i < toks.size(); ++i) v.index_.emplace(toks[i], static_cast<int>(i));
    return v;
}

Json listing_json(const AnnotatedListing& l) {
    Json ner = Json::array();
    for (const auto& s : l.spans) ner.push_back({s.tok_start, s.tok_end, s.entity_type});
    return {{"id", l.page_id},
            {"market_id", to_string(l.market_id)},
            {"language", to_string(l.language)},
            {"tokens", l.tokens},
            {"ner", ner}};
}

AnnotatedListing listing_from_json(const Json& j) {
    AnnotatedListing l;
    l.page_id = j.at("id").get<std::string>();
    l.market_id = parse_market(j.at("market_id").get<std::string>());
    l.language = parse_language(j.at("language").get<std::string>());
    l.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (const auto& n : j.at("ner")) {
        const auto s = n.at(0).get<std::size_t>(), e = n.at(1).get<std::size_t>();
        if (s > e || e >= l.tokens.size()) {
            throw DataError("listing " + l.page_id + ": span [" + std::to_string(s) + ", " + std::to_string(e) +
                            "] out of range");
        }
        l.spans.push_back({n.at(2).get<std::string>(), s, e, detokenize(l.tokens, s, e)});
    }
    return l;
}

void write_listings(const std::filesystem::path& path, const std::vector<AnnotatedListing>& listings) {
    std::vector<Json> recs;
    recs.reserve(listings.size());
    for (const auto& l : listings) recs.push_back(listing_json(l));
    write_jsonl(path, recs);
}

std::vector<AnnotatedListing> read_listings(const std::filesystem::path& path) {
    std::vector<AnnotatedListing> out;
    read_jsonl(path, [&](const Json& j, std::size_t line) {
        try {
            out.push_back(listing_from_json(j));
        } catch (const Json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        } catch (const Error& e) {
            throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

std::vector<AnnotatedListing> select(const std::vector<AnnotatedListing>& listings,
                                     const std::vector<std::string>& ids) {
    const std::set<std::string> want(ids.begin(), ids.end());
    std::vector<AnnotatedListing> out;
    for (const auto& l : listings) {
        if (want.count(l.page_id)) out.push_back(l);
    }
    return out;
}

} // namespace dnmx::dataset
