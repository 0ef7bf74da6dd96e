#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <sstream>

#include "commands.hpp"
#include "dnmx/core/error.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out, model, protocol, market;
    std::optional<int> workers;
    std::optional<double> threshold;
    std::optional<std::size_t> epochs, steps;
    std::vector<std::string> sets;
    std::string predictions;
};

/// File first, then flags. The environment only feeds out_root().
dnmx::cli::RunConfig resolve(const Flags& f, const std::string& command) {
    dnmx::cli::RunConfig c;
    if (!f.config.empty()) c.load_file(f.config);
    for (const auto& kv : f.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw dnmx::ConfigError("--set expects section.key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (f.seed) c.set("run.seed", std::to_string(*f.seed));
    if (f.out) c.set("run.out", *f.out);
    if (f.model) c.set("eval.model", *f.model);
    if (f.protocol) c.set("eval.protocol", *f.protocol);
    if (f.workers) c.set("run.workers", std::to_string(*f.workers));
    if (f.threshold) c.set("eval.threshold", std::to_string(*f.threshold));
    if (f.epochs) c.set("seq.epochs", std::to_string(*f.epochs));
    if (f.steps) c.set("span.num_steps", std::to_string(*f.steps));
    if (f.market && command == "eval") c.set("eval.held_out", *f.market);
    return c;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dark-web market listing extraction pipeline"};
    app.require_subcommand(1);
    Flags f;

    app.add_option("--config", f.config, "INI config file ([section] key = value)");
    app.add_option("--seed", f.seed, "global seed (run.seed)");
    app.add_option("--out", f.out, "output root (run.out; default $EXTRACT_HOME, else ./extract_out)");
    app.add_option("--market", f.market, "gen: comma list of markets to generate; eval: held-out market");
    app.add_option("--model", f.model, "model under train/eval")->check(CLI::IsMember({"span", "seq"}));
    app.add_option("--protocol", f.protocol, "evaluation protocol")
        ->check(CLI::IsMember({"in_domain", "zero_shot", "fine_tune", "robustness"}));
    app.add_option("--workers", f.workers, "crawler and per-page transform workers")->check(CLI::PositiveNumber);
    app.add_option("--threshold", f.threshold, "span-ner decode threshold")->check(CLI::Range(0.0, 1.0));
    app.add_option("--epochs", f.epochs, "seq-ner epochs (seq.epochs)");
    app.add_option("--steps", f.steps, "span-ner steps (span.num_steps)");
    app.add_option("--set", f.sets, "override one config key: section.key=value");

    const std::vector<std::pair<const char*, const char*>> commands = {
        {"gen", "generate the synthetic market corpus"},
        {"serve", "serve the corpus as an HTTP mock market until interrupted"},
        {"crawl", "crawl the market into a page store"},
        {"extract", "normalize and regex-label crawled pages"},
        {"build", "build listings, the train/test split and conversation files"},
        {"train", "train span-ner or seq-ner on the train split"},
        {"eval", "run an evaluation protocol"},
        {"report", "render every evaluation into CSV and Markdown"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        if (std::string(name) == "eval") {
            sub->add_option("--predictions", f.predictions, "score an external JSONL prediction dump");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const auto config = resolve(f, command);
        dnmx::cli::Extras extras;
        if (f.market && command == "gen") extras.markets = split_list(*f.market);
        extras.predictions = f.predictions;
        if (command == "gen") dnmx::cli::cmd_gen(config, extras);
        else if (command == "serve") dnmx::cli::cmd_serve(config);
        else if (command == "crawl") dnmx::cli::cmd_crawl(config);
        else if (command == "extract") dnmx::cli::cmd_extract(config);
        else if (command == "build") dnmx::cli::cmd_build(config);
        else if (command == "train") dnmx::cli::cmd_train(config);
        else if (command == "eval") dnmx::cli::cmd_eval(config, extras);
        else dnmx::cli::cmd_report(config);
    } catch (const dnmx::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const dnmx::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const dnmx::ProtocolError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const dnmx::CrawlError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const dnmx::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kOk;
}
