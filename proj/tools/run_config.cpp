#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "dnmx/core/error.hpp"
#include "dnmx/core/jsonl.hpp"
#include "dnmx/crawl/crawler.hpp"
#include "dnmx/eval/eval.hpp"
#include "dnmx/sim/mock_market.hpp"

namespace dnmx::cli {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

std::string num(std::size_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

std::string flag(bool v) { return v ? "true" : "false"; }

std::map<std::string, std::string> defaults() {
    const span::SpanModelConfig sm;
    const span::SpanTrainConfig st;
    const seq::SeqModelConfig qm;
    const seq::SeqTrainConfig qt;
    const crawl::CrawlConfig cc;
    const sim::CorpusConfig gc;
    const eval::ProtocolConfig pc;

    std::string counts;
    for (auto m : kDefaultMarkets) counts += std::string(to_string(m)) + ":100,";
    counts += std::string(to_string(pc.robustness.market)) + ":100";
    std::string novel;
    for (const auto& t : pc.robustness.novel_types) novel += (novel.empty() ? "" : ",") + t;

    return {
        {"run.seed", "0"},
        {"run.out", ""},
        {"run.workers", "1"},

        {"gen.counts", counts},
        {"gen.noise", num(gc.noise_rate)},
        {"gen.seed", std::to_string(gc.seed)},

        {"serve.host", "127.0.0.1"},
        {"serve.port", "8080"},
        {"serve.failure_rate", "0"},
        {"serve.latency_min_ms", "0"},
        {"serve.latency_max_ms", "0"},

        {"crawl.url", ""},
        {"crawl.failure_rate", "0"},
        {"crawl.max_stored_links", num(cc.max_stored_links)},
        {"crawl.max_seconds", num(cc.max_seconds)},
        {"crawl.rounds", num(cc.rounds)},
        {"crawl.delay_min_ms", num(cc.delay.min_ms)},
        {"crawl.delay_max_ms", num(cc.delay.max_ms)},
        {"crawl.max_retries", num(cc.max_retries)},

        {"dataset.ratio", "0.8"},
        {"dataset.split_seed", "0"},
        {"dataset.robustness_market", std::string(to_string(pc.robustness.market))},

        {"span.dim", num(sm.dim)},
        {"span.hidden", num(sm.hidden)},
        {"span.buckets", num(sm.buckets)},
        {"span.max_width", num(sm.max_width)},
        {"span.encoder", sm.encoder},
        {"span.num_steps", num(st.num_steps)},
        {"span.batch", num(st.batch)},
        {"span.warmup_ratio", num(st.warmup_ratio)},
        {"span.lr_encoder", num(st.lr_encoder)},
        {"span.lr_others", num(st.lr_others)},
        {"span.shuffle_types", flag(st.shuffle_types)},
        {"span.random_drop", flag(st.random_drop)},
        {"span.drop_prob", num(st.drop_prob)},
        {"span.neg_ratio", num(st.neg_ratio)},
        {"span.max_types", num(st.max_types)},
        {"span.max_len", num(st.max_len)},

        {"seq.dim", num(qm.dim)},
        {"seq.state", num(qm.state)},
        {"seq.conv_channels", num(qm.conv_channels)},
        {"seq.conv_kernel", num(qm.conv_kernel)},
        {"seq.buckets", num(qm.buckets)},
        {"seq.max_span", num(qm.max_span)},
        {"seq.pad_len", num(qm.pad_len)},
        {"seq.epochs", num(qt.epochs)},
        {"seq.batch", num(qt.batch)},
        {"seq.lr", num(qt.lr)},
        {"seq.dropout_embed", num(qt.dropout_embed)},
        {"seq.dropout_lstm", num(qt.dropout_lstm)},

        {"eval.protocol", std::string(eval::to_string(pc.protocol))},
        {"eval.model", pc.model},
        {"eval.held_out", std::string(to_string(pc.held_out))},
        {"eval.novel_types", novel},
        {"eval.threshold", num(pc.threshold)},
    };
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

} // namespace

RunConfig::RunConfig() : values_(defaults()) {}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> out = [] {
        std::vector<std::string> k;
        for (const auto& [key, _] : defaults()) k.push_back(key);
        return k;
    }();
    return out;
}

void RunConfig::load_file(const std::filesystem::path& path) {
    require_exists(path);
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            if (body.data().empty()) continue;  // empty [section]
            throw ConfigError("config " + path.string() + ": key '" + section + "' outside a [section]");
        }
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (!values_.count(full)) throw ConfigError("config " + path.string() + ": unknown key '" + full + "'");
            values_[full] = trim(value.data());
        }
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

std::int64_t RunConfig::integer(const std::string& key) const {
    const auto& s = get(key);
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) throw ConfigError(key + " must be an integer, got '" + s + "'");
    return v;
}

std::size_t RunConfig::count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError(key + " must be >= 0, got " + get(key));
    return static_cast<std::size_t>(v);
}

std::uint64_t RunConfig::seed(const std::string& key) const {
    const auto& s = get(key);
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || s[0] == '-' || used != s.size()) {
        throw ConfigError(key + " must be an unsigned integer, got '" + s + "'");
    }
    return v;
}

double RunConfig::real(const std::string& key) const {
    const auto& s = get(key);
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) throw ConfigError(key + " must be a number, got '" + s + "'");
    return v;
}

MarketId RunConfig::market(const std::string& key) const {
    const auto m = try_parse_market(get(key));
    if (!m) throw ConfigError(key + ": unknown market '" + get(key) + "'");
    return *m;
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::filesystem::path RunConfig::out_root() const {
    if (!get("run.out").empty()) return get("run.out");
    if (const char* home = std::getenv("EXTRACT_HOME"); home && *home) return home;
    return "extract_out";
}

std::string RunConfig::snapshot() const {
    std::ostringstream o;
    std::string section;
    for (const auto& [full, value] : values_) {
        const auto dot = full.find('.');
        const auto sec = full.substr(0, dot);
        if (sec != section) {
            o << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
            section = sec;
        }
        o << full.substr(dot + 1) << " = " << (full == "run.out" ? out_root().string() : value) << '\n';
    }
    return o.str();
}

void RunConfig::write_snapshot(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_file(dir / "config.ini", snapshot());
}

} // namespace dnmx::cli
