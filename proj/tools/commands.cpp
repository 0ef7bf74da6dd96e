#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "dnmx/core/error.hpp"
#include "dnmx/core/jsonl.hpp"
#include "dnmx/crawl/crawler.hpp"
#include "dnmx/crawl/fetcher.hpp"
#include "dnmx/dataset/dataset.hpp"
#include "dnmx/eval/eval.hpp"
#include "dnmx/extract/labeling.hpp"
#include "dnmx/nn/checkpoint.hpp"
#include "dnmx/sim/market.hpp"
#include "dnmx/sim/mock_market.hpp"

namespace dnmx::cli {

namespace fs = std::filesystem;

namespace {

Layout layout_of(const RunConfig& c) { return Layout{c.out_root()}; }

/// Stage outputs are replaced wholesale so a rerun leaves no stale files.
void fresh_dir(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
}

bool parse_bool(const RunConfig& c, const std::string& key) {
    const auto& v = c.get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + " must be true or false, got '" + v + "'");
}

eval::ProtocolConfig protocol_config(const RunConfig& c) {
    eval::ProtocolConfig p;
    p.protocol = eval::parse_protocol(c.get("eval.protocol"));
    p.model = c.get("eval.model");
    if (p.model != "span" && p.model != "seq") throw ConfigError("eval.model must be span or seq, got '" + p.model + "'");
    p.held_out = c.market("eval.held_out");
    p.robustness.market = c.market("dataset.robustness_market");
    p.robustness.novel_types = c.list("eval.novel_types");
    p.threshold = c.real("eval.threshold");
    p.seed = c.seed("run.seed");

    p.span_model.dim = c.count("span.dim");
    p.span_model.hidden = c.count("span.hidden");
    p.span_model.buckets = c.count("span.buckets");
    p.span_model.max_width = c.count("span.max_width");
    p.span_model.encoder = c.get("span.encoder");
    p.span_train.num_steps = c.count("span.num_steps");
    p.span_train.batch = c.count("span.batch");
    p.span_train.warmup_ratio = c.real("span.warmup_ratio");
    p.span_train.lr_encoder = c.real("span.lr_encoder");
    p.span_train.lr_others = c.real("span.lr_others");
    p.span_train.shuffle_types = parse_bool(c, "span.shuffle_types");
    p.span_train.random_drop = parse_bool(c, "span.random_drop");
    p.span_train.drop_prob = c.real("span.drop_prob");
    p.span_train.neg_ratio = c.real("span.neg_ratio");
    p.span_train.max_types = c.count("span.max_types");
    p.span_train.max_len = c.count("span.max_len");
    p.span_train.validate();

    p.seq_model.dim = c.count("seq.dim");
    p.seq_model.state = c.count("seq.state");
    p.seq_model.conv_channels = c.count("seq.conv_channels");
    p.seq_model.conv_kernel = c.count("seq.conv_kernel");
    p.seq_model.buckets = c.count("seq.buckets");
    p.seq_model.max_span = c.count("seq.max_span");
    p.seq_model.pad_len = c.count("seq.pad_len");
    p.seq_train.epochs = c.count("seq.epochs");
    p.seq_train.batch = c.count("seq.batch");
    p.seq_train.lr = c.real("seq.lr");
    p.seq_train.dropout_embed = c.real("seq.dropout_embed");
    p.seq_train.dropout_lstm = c.real("seq.dropout_lstm");
    p.seq_train.pad_len = p.seq_model.pad_len;
    p.seq_train.validate();
    return p;
}

struct DatasetFiles {
    std::vector<dataset::AnnotatedListing> listings;
    dataset::SplitManifest split;
    std::vector<dataset::AnnotatedListing> robustness;
};

DatasetFiles read_dataset(const Layout& l) {
    DatasetFiles d;
    d.listings = dataset::read_listings(l.dataset() / "listings.jsonl");
    d.split = dataset::SplitManifest::from_json(read_json(l.dataset() / "split.json"));
    d.robustness = dataset::read_listings(l.dataset() / "robustness.jsonl");
    return d;
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

} // namespace

void cmd_gen(const RunConfig& c, const Extras& x) {
    const Layout l = layout_of(c);
    sim::CorpusConfig gc;
    gc.counts = sim::CorpusConfig::parse_counts(c.get("gen.counts"));
    if (!x.markets.empty()) {
        std::map<MarketId, std::size_t> keep;
        for (const auto& name : x.markets) {
            const auto m = parse_market(name);
            const auto it = gc.counts.find(m);
            if (it == gc.counts.end()) throw ConfigError("market " + name + " has no count in gen.counts");
            keep[m] = it->second;
        }
        gc.counts = keep;
    }
    gc.seed = c.seed("gen.seed");
    gc.noise_rate = c.real("gen.noise");
    const auto corpus = sim::generate_corpus(gc);
    fresh_dir(l.corpus());
    sim::write_corpus(l.corpus(), corpus);
    c.write_snapshot(l.corpus());
    std::cout << "gen: " << corpus.listings.size() << " pages -> " << l.corpus().string() << '\n';
}

void cmd_serve(const RunConfig& c) {
    const Layout l = layout_of(c);
    const auto corpus = sim::read_corpus(l.corpus());
    sim::MockMarketConfig mc;
    mc.failure_rate = c.real("serve.failure_rate");
    mc.seed = c.seed("run.seed");
    mc.latency = {static_cast<int>(c.integer("serve.latency_min_ms")), static_cast<int>(c.integer("serve.latency_max_ms"))};
    const auto dir = l.root / "serve";
    fs::create_directories(dir);
    c.write_snapshot(dir);
    auto server = sim::serve(corpus.listings, c.get("serve.host"), static_cast<int>(c.integer("serve.port")), mc);
    std::cout << "serve: " << corpus.listings.size() << " pages at " << server->base_url() << sim::kOverviewPath
              << " (Ctrl-C to stop)" << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server->stop();
}

void cmd_crawl(const RunConfig& c) {
    const Layout l = layout_of(c);
    crawl::CrawlConfig cc;
    cc.max_stored_links = c.count("crawl.max_stored_links");
    cc.max_seconds = c.real("crawl.max_seconds");
    cc.rounds = static_cast<int>(c.integer("crawl.rounds"));
    cc.delay = {static_cast<int>(c.integer("crawl.delay_min_ms")), static_cast<int>(c.integer("crawl.delay_max_ms"))};
    cc.max_retries = static_cast<int>(c.integer("crawl.max_retries"));
    cc.workers = static_cast<int>(c.integer("run.workers"));
    cc.seed = c.seed("run.seed");

    std::unique_ptr<crawl::Fetcher> fetcher;
    const auto url = c.get("crawl.url");
    if (url.empty()) {
        // In-process market over the generated corpus.
        sim::MockMarketConfig mc;
        mc.failure_rate = c.real("crawl.failure_rate");
        mc.seed = c.seed("run.seed");
        auto market = std::make_shared<sim::MockMarket>(sim::read_corpus(l.corpus()).listings, mc);
        fetcher = std::make_unique<crawl::MockFetcher>(market);
        cc.seed_url = std::string("http://market.local") + sim::kOverviewPath;
    } else {
        fetcher = std::make_unique<crawl::HttpFetcher>();
        cc.seed_url = url.ends_with(".html") ? url : url + sim::kOverviewPath;
    }
    cc.validate();
    const auto res = crawl::crawl(*fetcher, cc);
    fresh_dir(l.crawl());
    crawl::write_store(l.crawl(), res.store);
    write_json(l.crawl() / "crawl_report.json", res.report.to_json());
    c.write_snapshot(l.crawl());
    std::cout << "crawl: " << res.store.size() << " pages stored, terminated by " << res.report.terminated_by
              << " -> " << l.crawl().string() << '\n';
}

void cmd_extract(const RunConfig& c) {
    const Layout l = layout_of(c);
    struct Item {
        std::string page_id;
        MarketId market;
        Language lang;
    };
    std::vector<Item> items;
    read_jsonl(l.crawl() / "manifest.jsonl", [&](const Json& r, std::size_t line) {
        try {
            items.push_back({r.at("page_id").get<std::string>(), parse_market(r.at("market_id").get<std::string>()),
                             parse_language(r.at("language").get<std::string>())});
        } catch (const std::exception& e) {
            throw DataError((l.crawl() / "manifest.jsonl").string() + ":" + std::to_string(line) + ": " + e.what());
        }
    });
    for (const auto& it : items) require_exists(l.crawl() / "pages" / (it.page_id + ".html"));

    // Per-page transforms are independent; each worker fills its own slots.
    const auto patterns = extract::PatternSet::defaults();
    std::vector<extract::AnnotatedDoc> docs(items.size());
    const auto workers = std::max<std::int64_t>(1, c.integer("run.workers"));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto work = [&] {
        for (std::size_t i; (i = next++) < items.size();) {
            try {
                const auto html = read_file(l.crawl() / "pages" / (items[i].page_id + ".html"));
                docs[i] = extract::annotate_page(items[i].page_id, items[i].market, items[i].lang, html, patterns);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::int64_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    fresh_dir(l.extract());
    extract::write_annotated(l.extract() / "annotated.jsonl", docs);
    const auto stats = extract::corpus_stats(docs);
    write_file(l.extract() / "top_vendors.csv", stats.vendors_csv());
    write_file(l.extract() / "top_models.csv", stats.models_csv());
    write_file(l.extract() / "market_shares.csv", stats.shares_csv());

    // Labeling accuracy against the generator's ground truth, when present.
    if (fs::exists(l.corpus() / "ground_truth.jsonl")) {
        const auto corpus = sim::read_corpus(l.corpus());
        std::map<std::string, const sim::GroundTruthListing*> truth_of;
        for (const auto& p : corpus.listings) truth_of[p.page_id] = &p;
        std::vector<extract::PageLabels> labeled;
        std::vector<extract::PageTruth> truth;
        for (const auto& d : docs) {
            const auto it = truth_of.find(d.doc.page_id);
            if (it == truth_of.end()) continue;
            labeled.push_back({d.doc.page_id, d.doc.market_id, d.entities});
            extract::PageTruth t{d.doc.page_id, d.doc.market_id, {}};
            for (const auto& e : it->second->entities) t.entities.push_back({e.entity_type, e.surface});
            truth.push_back(std::move(t));
        }
        const auto report = extract::verify_labels(labeled, truth);
        write_file(l.extract() / "labeling.csv", report.to_csv());
        write_file(l.extract() / "labeling_summary.txt", report.summary());
        std::cout << "extract: labeling accuracy " << report.overall_accuracy() << " over " << labeled.size()
                  << " pages\n";
    }
    c.write_snapshot(l.extract());
    std::cout << "extract: " << docs.size() << " pages -> " << l.extract().string() << '\n';
}

void cmd_build(const RunConfig& c) {
    const Layout l = layout_of(c);
    const auto docs = extract::read_annotated(l.extract() / "annotated.jsonl");
    const MarketId robust = c.market("dataset.robustness_market");
    std::vector<dataset::AnnotatedListing> listings, robustness;
    std::vector<dataset::PageRef> refs;
    for (const auto& d : docs) {
        auto listing = dataset::to_listing(d);
        if (listing.market_id == robust) {
            robustness.push_back(std::move(listing));
        } else {
            refs.push_back({listing.page_id, listing.market_id});
            listings.push_back(std::move(listing));
        }
    }
    if (listings.empty()) throw DataError("no in-domain pages in " + (l.extract() / "annotated.jsonl").string());
    const auto split = dataset::split(refs, c.real("dataset.ratio"), c.seed("dataset.split_seed"));

    fresh_dir(l.dataset());
    dataset::write_listings(l.dataset() / "listings.jsonl", listings);
    dataset::write_listings(l.dataset() / "robustness.jsonl", robustness);
    write_json(l.dataset() / "split.json", split.to_json());
    const auto core = core_entity_types();
    const std::vector<std::string> types(core.begin(), core.end());
    for (const auto& [name, ids] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
        std::vector<Json> lines;
        for (const auto& listing : dataset::select(listings, *ids)) {
            lines.push_back(dataset::conversation_json(dataset::to_conversation(listing, types)));
        }
        write_jsonl(l.dataset() / ("conversations_" + std::string(name) + ".jsonl"), lines);
    }
    c.write_snapshot(l.dataset());
    std::cout << "build: " << split.train.size() << " train, " << split.test.size() << " test, " << robustness.size()
              << " robustness pages -> " << l.dataset().string() << '\n';
}

void cmd_train(const RunConfig& c) {
    const Layout l = layout_of(c);
    const auto pc = protocol_config(c);
    const auto d = read_dataset(l);
    const auto train = dataset::select(d.listings, d.split.train);
    const auto model = eval::train_model(pc, train);
    const Json extra = {{"training_manifest", model.manifest},
                        {"types", model.types},
                        {"seed", model.seed},
                        {"train", pc.model == "span" ? pc.span_train.to_json() : pc.seq_train.to_json()}};
    fs::create_directories(l.models());
    const auto path = l.checkpoint(pc.model);
    if (model.span) span::save_model(path, *model.span, extra);
    else seq::save_model(path, *model.seq, extra);
    c.write_snapshot(l.models() / pc.model);
    std::cout << "train: " << pc.model << "-ner on " << train.size() << " pages -> " << path.string() << '\n';
}

namespace {

eval::TrainedModel load_trained(const fs::path& path, const std::string& model) {
    require_exists(path);
    eval::TrainedModel m;
    const auto header = nn::load_checkpoint(path).header;
    const auto extra = header.value("extra", Json::object());
    if (model == "span") m.span = std::make_shared<span::SpanNerModel>(span::load_model(path));
    else m.seq = std::make_shared<seq::SeqNerModel>(seq::load_model(path));
    try {
        m.manifest = extra.at("training_manifest").get<std::vector<std::string>>();
        m.types = extra.at("types").get<std::vector<std::string>>();
        m.seed = extra.at("seed").get<std::uint64_t>();
    } catch (const Json::exception& e) {
        throw DataError(path.string() + ": checkpoint lacks its training manifest (" + e.what() + ")");
    }
    return m;
}

void write_result(const fs::path& dir, const eval::ProtocolResult& res) {
    Json reports = Json::array();
    for (const auto& r : res.reports) reports.push_back(r.to_json());
    write_json(dir / "reports.json", reports);
    for (std::size_t i = 0; i < res.predictions.size(); ++i) {
        eval::write_predictions(dir / ("predictions_" + res.reports[i].protocol + ".jsonl"), res.predictions[i]);
    }
    write_json(dir / "training_manifest.json", res.training_manifest);
}

} // namespace

void cmd_eval(const RunConfig& c, const Extras& x) {
    const Layout l = layout_of(c);
    const auto pc = protocol_config(c);
    const auto d = read_dataset(l);

    if (!x.predictions.empty()) {
        // An external prediction dump, scored on the in-domain test split.
        const auto test = dataset::select(d.listings, d.split.test);
        std::map<std::string, std::size_t> lengths;
        for (const auto& p : test) lengths[p.page_id] = p.tokens.size();
        eval::EvalReport r;
        r.protocol = "import";
        r.model_id = x.predictions.filename().string();
        r.split = "test";
        std::set<std::string> markets;
        for (const auto& p : test) markets.insert(std::string(to_string(p.market_id)));
        for (auto m : kAllMarkets) {
            if (!markets.count(std::string(to_string(m)))) continue;
            r.market_scope += (r.market_scope.empty() ? "" : "+") + std::string(to_string(m));
        }
        r.counts = eval::exact_match(eval::import_predictions(x.predictions, lengths), eval::gold_spans(test));
        const auto dir = l.eval() / ("import_" + x.predictions.stem().string());
        fresh_dir(dir);
        write_json(dir / "reports.json", Json::array({r.to_json()}));
        c.write_snapshot(dir);
        std::cout << "eval: imported " << x.predictions.string() << " -> " << dir.string() << '\n';
        return;
    }

    const bool uses_checkpoint = pc.protocol == eval::Protocol::in_domain || pc.protocol == eval::Protocol::robustness;
    std::optional<eval::TrainedModel> trained;
    if (uses_checkpoint) trained = load_trained(l.checkpoint(pc.model), pc.model);
    const auto res = eval::run_protocol(pc, d.listings, d.split, d.robustness, trained ? &*trained : nullptr);

    const auto dir = l.eval() / (std::string(eval::to_string(pc.protocol)) + "_" + pc.model);
    fresh_dir(dir);
    write_result(dir, res);
    c.write_snapshot(dir);
    for (const auto& r : res.reports) {
        const auto m = eval::prf(r.counts.micro);
        std::cout << "eval: " << r.protocol << ' ' << r.model_id << " on " << r.market_scope << ": P=" << m.precision
                  << " R=" << m.recall << " F1=" << m.f1 << '\n';
    }
    std::cout << "eval: -> " << dir.string() << '\n';
}

namespace {

eval::EvalReport report_from_json(const Json& j, const fs::path& origin) {
    try {
        eval::EvalReport r;
        r.protocol = j.at("protocol").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.market_scope = j.at("market_scope").get<std::string>();
        for (const auto& [type, v] : j.at("per_type").items()) {
            eval::Counts k{v.at("tp").get<std::size_t>(), v.at("fp").get<std::size_t>(), v.at("fn").get<std::size_t>()};
            r.counts.per_type[type] = k;
            r.counts.micro += k;
        }
        return r;
    } catch (const Json::exception& e) {
        throw DataError(origin.string() + ": malformed report (" + e.what() + ")");
    }
}

} // namespace

void cmd_report(const RunConfig& c) {
    const Layout l = layout_of(c);
    if (!fs::is_directory(l.eval())) throw DataError("missing upstream artifact: " + l.eval().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(l.eval())) {
        if (fs::exists(e.path() / "reports.json")) files.push_back(e.path() / "reports.json");
    }
    if (files.empty()) throw DataError("no reports.json under " + l.eval().string());
    std::sort(files.begin(), files.end());
    std::vector<eval::EvalReport> reports;
    for (const auto& f : files) {
        for (const auto& r : read_json(f)) reports.push_back(report_from_json(r, f));
    }
    const auto rendered = eval::render_report(reports, eval::reference_table());
    fresh_dir(l.report());
    write_file(l.report() / "report.csv", rendered.csv);
    write_file(l.report() / "report.md", rendered.markdown);
    c.write_snapshot(l.report());
    std::cout << "report: " << reports.size() << " evaluations -> " << l.report().string() << '\n';
}

} // namespace dnmx::cli
