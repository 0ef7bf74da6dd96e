#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dnmx/core/entities.hpp"

namespace dnmx::extract {

struct Token {
    std::string surface;
    std::size_t char_start = 0; ///< byte offset into the normalized text
    std::size_t char_end = 0;   ///< one past the last byte

    bool operator==(const Token&) const = default;
};

/// Tokenized, whitespace-normalized page text. Token offsets index `text`.
struct NormalizedDoc {
    std::string page_id;
    MarketId market_id = MarketId::agartha_item;
    Language language = Language::en;
    std::string text;
    std::vector<Token> tokens;
};

/// Lowercases, drops the symbols `& * ; :`, collapses whitespace runs to a
/// single space and trims. Idempotent.
std::string normalize(std::string_view text);

/// Whitespace tokenization of already-normalized text.
std::vector<Token> tokenize(std::string_view normalized);

/// html_to_text + normalize + tokenize.
NormalizedDoc make_doc(std::string page_id, MarketId market, Language lang,
                       std::string_view html);

} // namespace dnmx::extract
