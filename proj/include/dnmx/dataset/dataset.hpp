#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dnmx/core/entities.hpp"
#include "dnmx/core/jsonl.hpp"
#include "dnmx/extract/labeling.hpp"

namespace dnmx::dataset {

struct TokenSpan {
    std::string entity_type;
    std::size_t tok_start = 0;
    std::size_t tok_end = 0;  ///< inclusive
    std::string surface;

    bool operator==(const TokenSpan&) const = default;
};

struct AnnotatedListing {
    std::string page_id;
    MarketId market_id = MarketId::agartha_item;
    Language language = Language::en;
    std::vector<std::string> tokens;
    std::vector<TokenSpan> spans;
};

/// Maps character spans to the tokens containing their first and last byte.
/// A span that touches no token raises DataError naming the page.
std::vector<TokenSpan> align_spans(const std::string& page_id, const std::vector<extract::Token>& tokens,
                                   const std::vector<extract::LabeledEntity>& entities);

AnnotatedListing to_listing(const extract::AnnotatedDoc& doc);

/// Space-joined tokens [start, end].
std::string detokenize(const std::vector<std::string>& tokens, std::size_t start, std::size_t end);

struct ConversationTurn {
    std::string question;
    std::vector<std::string> answers;
};

struct ConversationExample {
    std::string id;
    std::string passage;
    std::vector<ConversationTurn> turns;
};

ConversationExample to_conversation(const AnnotatedListing& listing, const std::vector<std::string>& types);

/// {id, conversations:[{from, value}...]}: optional system turn, the passage,
/// an acknowledgement, then one question and one JSON-list answer per type.
Json conversation_json(const ConversationExample& ex, const std::string& system_turn = "");

inline constexpr const char* kEntToken = "[ENT]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr std::size_t kMaxTypes = 25;
inline constexpr std::size_t kMaxLen = 3000;

struct GoldSpan {
    std::size_t start = 0;
    std::size_t end = 0;  ///< inclusive, text-token coordinates
    std::size_t type = 0; ///< index into types

    bool operator==(const GoldSpan&) const = default;
    auto operator<=>(const GoldSpan&) const = default;
};

struct SpanNerExample {
    std::string id;
    std::vector<std::string> types;
    std::vector<std::string> text;
    std::vector<GoldSpan> gold;
    bool truncated = false;

    /// [ENT] t0 [ENT] t1 ... [SEP] followed by the text tokens.
    std::vector<std::string> tokens() const;
};

/// Gold spans keep only requested types; text beyond max_len is cut and
/// spans crossing the cut are dropped. More than max_types → ConfigError.
SpanNerExample to_span_input(const AnnotatedListing& listing, const std::vector<std::string>& types,
                             std::size_t max_types = kMaxTypes, std::size_t max_len = kMaxLen);

/// Splits a flat token list at its single [SEP]. InputError when there is
/// no [SEP], more than one, or a type slot without its [ENT] marker.
std::pair<std::vector<std::string>, std::vector<std::string>> parse_span_tokens(const std::vector<std::string>& tokens);

struct SplitManifest {
    std::uint64_t seed = 0;
    double ratio = 0.8;
    std::vector<std::string> train;
    std::vector<std::string> test;

    Json to_json() const;
    static SplitManifest from_json(const Json& j);
};

struct PageRef {
    std::string page_id;
    MarketId market_id;
};

/// Stratified by market: each market's pages are shuffled under the seed and
/// cut by largest-remainder quotas so the overall train size is
/// round(ratio·total); a market with ≥ 2 pages lands on both sides.
SplitManifest split(const std::vector<PageRef>& pages, double ratio = 0.8, std::uint64_t seed = 0);

struct Padded {
    std::vector<int> ids;
    std::vector<int> mask;
    std::size_t length = 0;  ///< real tokens kept
    bool truncated = false;
};

Padded pad_truncate(const std::vector<int>& ids, std::size_t target = kMaxLen, int pad_id = 0);

/// Token → id table built from training text. Reserved ids: PAD 0, UNK 1,
/// [ENT] 2, [SEP] 3; the rest ordered by descending count, then bytes.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kEnt = 2;
    static constexpr int kSep = 3;

    Vocab();
    static Vocab build(const std::vector<std::vector<std::string>>& docs, std::size_t min_count = 1,
                       std::size_t max_size = 0);

    int id(const std::string& token) const;
    std::vector<int> ids(const std::vector<std::string>& tokens) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return tokens_.size(); }

    Json to_json() const;
    static Vocab from_json(const Json& j);

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

/// {id, market_id, language, tokens, ner:[[start, end, type], ...]}
Json listing_json(const AnnotatedListing& l);
AnnotatedListing listing_from_json(const Json& j);
void write_listings(const std::filesystem::path& path, const std::vector<AnnotatedListing>& listings);
std::vector<AnnotatedListing> read_listings(const std::filesystem::path& path);

/// Listings whose page_id is in ids, in the order of `listings`.
std::vector<AnnotatedListing> select(const std::vector<AnnotatedListing>& listings,
                                     const std::vector<std::string>& ids);

} // namespace dnmx::dataset
