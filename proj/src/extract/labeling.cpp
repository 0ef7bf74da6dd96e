#include "dnmx/extract/labeling.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "dnmx/core/error.hpp"

namespace dnmx::extract {

namespace {

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

AnnotatedDoc annotate_page(const std::string& page_id, MarketId market, Language lang, std::string_view html,
                           const PatternSet& patterns) {
    AnnotatedDoc a;
    a.doc = make_doc(page_id, market, lang, html);
    a.entities = apply_patterns(a.doc, patterns);
    return a;
}

Json to_json(const AnnotatedDoc& a) {
    Json ents = Json::array();
    for (const auto& e : a.entities) {
        ents.push_back({{"type", e.entity_type},
                        {"char_start", e.char_start},
                        {"char_end", e.char_end},
                        {"surface", e.surface}});
    }
    return {{"page_id", a.doc.page_id},
            {"market_id", std::string(to_string(a.doc.market_id))},
            {"language", std::string(to_string(a.doc.language))},
            {"text", a.doc.text},
            {"entities", ents}};
}

AnnotatedDoc annotated_from_json(const Json& j) {
    AnnotatedDoc a;
    try {
        a.doc.page_id = j.at("page_id").get<std::string>();
        a.doc.market_id = parse_market(j.at("market_id").get<std::string>());
        a.doc.language = parse_language(j.at("language").get<std::string>());
        a.doc.text = j.at("text").get<std::string>();
        a.doc.tokens = tokenize(a.doc.text);
        for (const auto& e : j.at("entities")) {
            LabeledEntity le;
            le.page_id = a.doc.page_id;
            le.entity_type = e.at("type").get<std::string>();
            le.char_start = e.at("char_start").get<std::size_t>();
            le.char_end = e.at("char_end").get<std::size_t>();
            le.surface = e.at("surface").get<std::string>();
            if (le.char_end <= le.char_start || le.char_end > a.doc.text.size() ||
                a.doc.text.compare(le.char_start, le.char_end - le.char_start, le.surface) != 0) {
                throw DataError("entity offsets do not match surface on page " + a.doc.page_id);
            }
            a.entities.push_back(std::move(le));
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed annotated record: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    return a;
}

void write_annotated(const std::filesystem::path& path, const std::vector<AnnotatedDoc>& docs) {
    std::vector<Json> records;
    records.reserve(docs.size());
    for (const auto& d : docs) records.push_back(to_json(d));
    write_jsonl(path, records);
}

std::vector<AnnotatedDoc> read_annotated(const std::filesystem::path& path) {
    std::vector<AnnotatedDoc> out;
    read_jsonl(path, [&](const Json& j, std::size_t line) {
        try {
            out.push_back(annotated_from_json(j));
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

LabelingRow& LabelingRow::operator+=(const LabelingRow& o) {
    attempted += o.attempted;
    matched += o.matched;
    exact_correct += o.exact_correct;
    spurious += o.spurious;
    return *this;
}

LabelingReport verify_labels(const std::vector<PageLabels>& labeled,
                             const std::vector<PageTruth>& truth) {
    std::map<std::string, const PageLabels*> by_page;
    for (const auto& p : labeled) by_page[p.page_id] = &p;
    std::set<std::string> truth_ids;
    for (const auto& t : truth) truth_ids.insert(t.page_id);
    if (by_page.size() != truth_ids.size() ||
        !std::all_of(truth_ids.begin(), truth_ids.end(),
                     [&](const std::string& id) { return by_page.count(id) != 0; })) {
        throw DataError("labeled pages and ground-truth pages differ");
    }

    LabelingReport report;
    for (const auto& page : truth) {
        const auto& labels = by_page.at(page.page_id)->labels;
        std::set<std::string> truth_types;
        for (const auto& e : page.entities) {
            truth_types.insert(e.entity_type);
            LabelingRow row;
            row.attempted = 1;
            const auto hit = std::find_if(labels.begin(), labels.end(), [&](const LabeledEntity& l) {
                return l.entity_type == e.entity_type;
            });
            if (hit != labels.end()) {
                row.matched = 1;
                row.exact_correct = hit->surface == e.surface ? 1 : 0;
            }
            report.rows[{page.market, e.entity_type}] += row;
        }
        for (const auto& l : labels) {
            if (truth_types.count(l.entity_type) == 0) {
                LabelingRow row;
                row.spurious = 1;
                report.rows[{page.market, l.entity_type}] += row;
            }
        }
    }
    for (const auto& [key, row] : report.rows) {
        report.per_market[key.first] += row;
        report.per_type[key.second] += row;
        report.overall += row;
    }
    return report;
}

std::string LabelingReport::to_csv() const {
    std::ostringstream out;
    out << "market,entity_type,attempted,matched,exact_correct,spurious,accuracy\n";
    auto line = [&](const std::string& m, const std::string& t, const LabelingRow& r) {
        out << m << ',' << t << ',' << r.attempted << ',' << r.matched << ',' << r.exact_correct
            << ',' << r.spurious << ',' << fmt3(r.accuracy()) << '\n';
    };
    for (const auto& [key, row] : rows) line(std::string(to_string(key.first)), key.second, row);
    for (const auto& [m, row] : per_market) line(std::string(to_string(m)), "*", row);
    for (const auto& [t, row] : per_type) line("*", t, row);
    line("*", "*", overall);
    return out.str();
}

std::string LabelingReport::summary() const {
    std::ostringstream out;
    out << "RegEx labeling accuracy: " << fmt3(overall_accuracy()) << " (" << overall.exact_correct
        << "/" << overall.attempted << " ground-truth entities exact)\n";
    for (const auto& [m, row] : per_market) {
        out << "  " << to_string(m) << ": " << fmt3(row.accuracy()) << " (" << row.exact_correct << "/"
            << row.attempted << ")\n";
    }
    for (const auto& [t, row] : per_type) {
        out << "  [" << t << "] " << fmt3(row.accuracy()) << " (" << row.exact_correct << "/"
            << row.attempted << ", spurious " << row.spurious << ")\n";
    }
    return out.str();
}

CorpusStats corpus_stats(const std::vector<AnnotatedDoc>& docs) {
    CorpusStats stats;
    std::map<std::pair<std::string, MarketId>, std::size_t> vendor_counts;
    std::map<std::string, std::size_t> model_counts;
    for (const auto& d : docs) {
        ++stats.listings[d.doc.market_id];
        for (const auto& e : d.entities) {
            if (e.entity_type == entity::vendor_name) ++vendor_counts[{e.surface, d.doc.market_id}];
            if (e.entity_type == entity::model) ++model_counts[e.surface];
        }
    }
    for (const auto& [key, n] : vendor_counts) stats.top_vendor_markets.push_back({key.first, key.second, n});
    std::stable_sort(stats.top_vendor_markets.begin(), stats.top_vendor_markets.end(),
                     [](const auto& a, const auto& b) { return a.count > b.count; });
    if (stats.top_vendor_markets.size() > 10) stats.top_vendor_markets.resize(10);

    for (const auto& [value, n] : model_counts) stats.top_models.push_back({value, n});
    std::stable_sort(stats.top_models.begin(), stats.top_models.end(),
                     [](const auto& a, const auto& b) { return a.count > b.count; });
    if (stats.top_models.size() > 10) stats.top_models.resize(10);

    for (const auto& [m, n] : stats.listings) {
        stats.share[m] = static_cast<double>(n) / static_cast<double>(docs.size());
    }
    return stats;
}

std::string CorpusStats::vendors_csv() const {
    std::ostringstream out;
    out << "vendor,market,listings\n";
    for (const auto& v : top_vendor_markets) out << csv_escape(v.vendor) << ',' << to_string(v.market) << ',' << v.count << '\n';
    return out.str();
}

std::string CorpusStats::models_csv() const {
    std::ostringstream out;
    out << "model,listings\n";
    for (const auto& v : top_models) out << csv_escape(v.value) << ',' << v.count << '\n';
    return out.str();
}

std::string CorpusStats::shares_csv() const {
    std::ostringstream out;
    out << "market,listings,share\n";
    for (const auto& [m, n] : listings) out << to_string(m) << ',' << n << ',' << fmt3(share.at(m)) << '\n';
    return out.str();
}

} // namespace dnmx::extract
