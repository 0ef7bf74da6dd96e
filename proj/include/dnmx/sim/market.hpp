#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dnmx/core/entities.hpp"
#include "dnmx/core/jsonl.hpp"

namespace dnmx::sim {

/// Page skeleton of one market: section order, keyword anchors, the entity
/// slots it renders and the mean page length it aims for.
struct MarketTemplate {
    MarketId market_id;
    Language language;
    std::vector<std::string> layout;    ///< section names, in page order
    std::vector<std::string> keywords;  ///< anchor words surrounding entities
    std::vector<std::string> entity_slots;
    int token_budget;                   ///< target mean whitespace tokens per page
};

const MarketTemplate& market_template(MarketId id);

struct GroundTruthEntity {
    std::string entity_type;
    std::size_t char_start = 0; ///< byte offset into html
    std::size_t char_end = 0;
    std::string surface;

    bool operator==(const GroundTruthEntity&) const = default;
};

struct GroundTruthListing {
    std::string page_id;
    std::string url;  ///< absolute path on the mock market, e.g. /cocorico/listing/cocorico-00001.html
    MarketId market_id;
    Language language;
    std::string html;
    std::vector<GroundTruthEntity> entities;
    std::vector<std::string> related;  ///< urls of other listings linked from this page
};

struct CorpusConfig {
    std::map<MarketId, std::size_t> counts;
    std::uint64_t seed = 42;
    double noise_rate = 0.2;

    /// Parses "market:count,market:count"; unknown market → ConfigError.
    static std::map<MarketId, std::size_t> parse_counts(const std::string& spec);
};

struct Corpus {
    std::vector<GroundTruthListing> listings;
    Json manifest = Json::array();  ///< one record per page: page_id, url, market_id, language
    Json config = Json::object();   ///< seed, noise rate and counts that produced it
};

/// Counts each whitespace-separated word that survives normalization, i.e.
/// contains something other than the stripped symbols.
std::size_t count_words(std::string_view text);

/// Deterministic in (config, seed). Each page draws from its own RNG stream
/// keyed by (seed, market, index), so adding pages to one market does not
/// perturb the others.
Corpus generate_corpus(const CorpusConfig& config);

/// entity_type → number of ground-truth instances.
std::map<std::string, std::size_t> entity_inventory(const std::vector<GroundTruthListing>& corpus);

/// Renders the seed page that links every listing.
std::string render_overview(const std::vector<GroundTruthListing>& corpus);
inline constexpr const char* kOverviewPath = "/overview.html";

/// Writes pages/<page_id>.html, manifest.jsonl, ground_truth.jsonl and corpus.json.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);

/// Reads a corpus directory back, including ground truth when present.
Corpus read_corpus(const std::filesystem::path& dir);

/// Words of the French page vocabulary that never occur in English templates.
const std::vector<std::string>& french_only_vocabulary();

} // namespace dnmx::sim
