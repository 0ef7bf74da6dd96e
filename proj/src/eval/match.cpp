#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dnmx/eval/eval.hpp"

namespace dnmx::eval {

Counts& Counts::operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
}

MatchCounts exact_match(const PageSpans& predictions, const PageSpans& gold) {
    MatchCounts out;
    static const std::vector<Triple> kNone;
    std::set<std::string> pages;
    for (const auto& [id, _] : predictions) pages.insert(id);
    for (const auto& [id, _] : gold) pages.insert(id);
    for (const auto& id : pages) {
        const auto pit = predictions.find(id);
        const auto git = gold.find(id);
        const auto& pred = pit == predictions.end() ? kNone : pit->second;
        const auto& ref = git == gold.end() ? kNone : git->second;
        std::vector<bool> used(ref.size(), false);
        for (const auto& p : pred) {
            auto& c = out.per_type[p.type];
            bool hit = false;
            for (std::size_t g = 0; g < ref.size() && !hit; ++g) {
                if (!used[g] && ref[g] == p) used[g] = hit = true;
            }
            ++(hit ? c.tp : c.fp);
        }
        for (std::size_t g = 0; g < ref.size(); ++g) {
            if (!used[g]) ++out.per_type[ref[g].type].fn;
        }
    }
    for (const auto& [_, c] : out.per_type) out.micro += c;
    return out;
}

Metrics prf(const Counts& c) {
    Metrics m;
    m.precision_undefined = c.tp + c.fp == 0;
    m.recall_undefined = c.tp + c.fn == 0;
    if (!m.precision_undefined) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (!m.recall_undefined) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

namespace {

Json counts_json(const Counts& c) {
    const auto m = prf(c);
    return {{"tp", c.tp},
            {"fp", c.fp},
            {"fn", c.fn},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"precision_undefined", m.precision_undefined},
            {"recall_undefined", m.recall_undefined}};
}

} // namespace

Json EvalReport::to_json() const {
    Json per = Json::object();
    for (const auto& [type, c] : counts.per_type) per[type] = counts_json(c);
    return {{"protocol", protocol}, {"model_id", model_id},           {"split", split},
            {"market_scope", market_scope}, {"micro", counts_json(counts.micro)}, {"per_type", per}};
}

PageSpans gold_spans(const std::vector<dataset::AnnotatedListing>& listings) {
    PageSpans out;
    for (const auto& l : listings) {
        auto& v = out[l.page_id];
        for (const auto& s : l.spans) v.push_back({s.tok_start, s.tok_end, s.entity_type});
    }
    return out;
}

PageSpans filter_types(const PageSpans& spans, const std::vector<std::string>& types) {
    const std::set<std::string> keep(types.begin(), types.end());
    PageSpans out;
    for (const auto& [id, v] : spans) {
        auto& dst = out[id];
        for (const auto& t : v) {
            if (keep.count(t.type)) dst.push_back(t);
        }
    }
    return out;
}

Json prediction_json(const PagePrediction& p) {
    Json spans = Json::array();
    for (const auto& s : p.spans) {
        spans.push_back({{"start", s.start}, {"end", s.end}, {"type", s.type}, {"score", s.score}});
    }
    return {{"page_id", p.page_id}, {"spans", spans}};
}

void write_predictions(const std::filesystem::path& path, const std::vector<PagePrediction>& preds) {
    std::vector<Json> lines;
    lines.reserve(preds.size());
    for (const auto& p : preds) lines.push_back(prediction_json(p));
    write_jsonl(path, lines);
}

PageSpans to_page_spans(const std::vector<PagePrediction>& preds) {
    PageSpans out;
    for (const auto& p : preds) {
        auto& v = out[p.page_id];
        for (const auto& s : p.spans) v.push_back({s.start, s.end, s.type});
    }
    return out;
}

namespace {

std::size_t index_field(const Json& span, const char* key, std::size_t line) {
    const auto it = span.find(key);
    if (it == span.end() || !it->is_number_integer()) {
        throw ImportError(line, std::string("span field '") + key + "' must be an integer");
    }
    if (it->is_number_unsigned()) return it->get<std::size_t>();
    const auto v = it->get<std::int64_t>();
    if (v < 0) throw ImportError(line, std::string("span field '") + key + "' is negative");
    return static_cast<std::size_t>(v);
}

} // namespace

PageSpans import_predictions(std::istream& in, const std::map<std::string, std::size_t>& doc_lengths) {
    PageSpans out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json rec;
        try {
            rec = Json::parse(text);
        } catch (const Json::parse_error& e) {
            throw ImportError(line, std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) throw ImportError(line, "record must be an object");
        const auto pid = rec.find("page_id");
        if (pid == rec.end() || !pid->is_string()) throw ImportError(line, "missing string 'page_id'");
        const std::string id = pid->get<std::string>();
        const auto len = doc_lengths.find(id);
        if (len == doc_lengths.end()) throw ImportError(line, "unknown page_id '" + id + "'");
        if (out.count(id)) throw ImportError(line, "page_id '" + id + "' appears twice");
        const auto spans = rec.find("spans");
        if (spans == rec.end() || !spans->is_array()) throw ImportError(line, "missing array 'spans'");
        auto& dst = out[id];
        for (const auto& s : *spans) {
            if (!s.is_object()) throw ImportError(line, "span must be an object");
            const auto start = index_field(s, "start", line);
            const auto end = index_field(s, "end", line);
            const auto type = s.find("type");
            if (type == s.end() || !type->is_string() || type->get<std::string>().empty()) {
                throw ImportError(line, "span field 'type' must be a non-empty string");
            }
            const auto score = s.find("score");
            if (score == s.end() || !score->is_number()) throw ImportError(line, "span field 'score' must be a number");
            if (start > end) throw ImportError(line, "span start " + std::to_string(start) + " > end " + std::to_string(end));
            if (end >= len->second) {
                throw ImportError(line, "span end " + std::to_string(end) + " >= document length " +
                                            std::to_string(len->second) + " of '" + id + "'");
            }
            dst.push_back({start, end, type->get<std::string>()});
        }
    }
    return out;
}

PageSpans import_predictions(const std::filesystem::path& path, const std::map<std::string, std::size_t>& doc_lengths) {
    require_exists(path);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return import_predictions(in, doc_lengths);
    } catch (const ImportError& e) {
        throw ImportError(e.line(), e.detail() + " in " + path.string());
    }
}

const std::vector<ReferenceRow>& reference_table() {
    static const std::vector<ReferenceRow> rows = [] {
        static const char* kJson =
#include "dnmx/reference_results.inc"
            ;
        const Json doc = Json::parse(kJson);
        std::vector<ReferenceRow> out;
        for (const auto& r : doc.at("rows")) {
            ReferenceRow row;
            row.label = r.at("label").get<std::string>();
            row.setting = r.at("setting").get<std::string>();
            row.precision = r.value("precision", -1.0);
            row.recall = r.value("recall", -1.0);
            row.f1 = r.value("f1", -1.0);
            out.push_back(row);
        }
        return out;
    }();
    return rows;
}

namespace {

std::string fixed3(double v, bool flagged) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf) + (flagged ? "*" : "");
}

std::string published(double v) {
    if (v < 0) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_row(const EvalReport& r, const std::string& type, const Counts& c) {
    const auto m = prf(c);
    std::ostringstream o;
    o << csv_cell(r.protocol) << ',' << csv_cell(r.model_id) << ',' << csv_cell(r.split) << ','
      << csv_cell(r.market_scope) << ',' << csv_cell(type) << ',' << c.tp << ',' << c.fp << ',' << c.fn << ','
      << fixed3(m.precision, m.precision_undefined) << ',' << fixed3(m.recall, m.recall_undefined) << ','
      << fixed3(m.f1, m.flagged()) << '\n';
    return o.str();
}

} // namespace

RenderedReport render_report(const std::vector<EvalReport>& reports, const std::vector<ReferenceRow>& reference) {
    if (reports.empty()) throw ConfigError("render_report needs at least one report");
    RenderedReport out;
    out.csv = "protocol,model_id,split,market_scope,entity_type,tp,fp,fn,precision,recall,f1\n";
    for (const auto& r : reports) {
        out.csv += csv_row(r, "micro", r.counts.micro);
        for (const auto& [type, c] : r.counts.per_type) out.csv += csv_row(r, type, c);
    }

    std::ostringstream md;
    md << "# Evaluation report\n\n"
       << "| protocol | model | split | markets | TP | FP | FN | precision | recall | F1 |\n"
       << "|---|---|---|---|---:|---:|---:|---:|---:|---:|\n";
    bool any_flag = false;
    for (const auto& r : reports) {
        const auto& c = r.counts.micro;
        const auto m = prf(c);
        any_flag = any_flag || m.flagged();
        md << "| " << r.protocol << " | " << r.model_id << " | " << r.split << " | " << r.market_scope << " | " << c.tp
           << " | " << c.fp << " | " << c.fn << " | " << fixed3(m.precision, m.precision_undefined) << " | "
           << fixed3(m.recall, m.recall_undefined) << " | " << fixed3(m.f1, m.flagged()) << " |\n";
    }
    if (any_flag) md << "\n`*` zero denominator, reported as 0.\n";
    md << "\n## Published reference numbers\n\n"
       << "Percentages reported for the original systems on the real corpus. Context only, not targets.\n\n"
       << "| system | setting | precision | recall | F1 |\n"
       << "|---|---|---:|---:|---:|\n";
    for (const auto& row : reference) {
        md << "| " << row.label << " | " << row.setting << " | " << published(row.precision) << " | "
           << published(row.recall) << " | " << published(row.f1) << " |\n";
    }
    out.markdown = md.str();
    return out;
}

} // namespace dnmx::eval
