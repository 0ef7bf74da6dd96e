#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace dnmx::cli {

/// Flags that are not config keys.
struct Extras {
    std::vector<std::string> markets;       ///< gen: markets to generate (all configured when empty)
    std::filesystem::path predictions;      ///< eval: score this dump instead of a model
};

/// Output layout under the root.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path corpus() const { return root / "corpus"; }
    std::filesystem::path crawl() const { return root / "crawl"; }
    std::filesystem::path extract() const { return root / "extract"; }
    std::filesystem::path dataset() const { return root / "dataset"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path checkpoint(const std::string& model) const { return models() / (model + ".ckpt"); }
    std::filesystem::path eval() const { return root / "eval"; }
    std::filesystem::path report() const { return root / "report"; }
};

void cmd_gen(const RunConfig& c, const Extras& x);
void cmd_serve(const RunConfig& c);
void cmd_crawl(const RunConfig& c);
void cmd_extract(const RunConfig& c);
void cmd_build(const RunConfig& c);
void cmd_train(const RunConfig& c);
void cmd_eval(const RunConfig& c, const Extras& x);
void cmd_report(const RunConfig& c);

} // namespace dnmx::cli
