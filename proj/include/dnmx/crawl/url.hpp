#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnmx/core/entities.hpp"

namespace dnmx::crawl {

struct Url {
    std::string scheme;  ///< lowercase
    std::string host;    ///< lowercase, includes a non-default port
    std::string path;    ///< always starts with '/'
    std::string query;   ///< without the '?'; empty when absent

    std::string str() const;
};

/// Parses an absolute http(s) url; nullopt for anything else.
std::optional<Url> parse_url(std::string_view text);

/// Lowercases scheme and host, drops the default port and the fragment,
/// removes dot segments, keeps the query.
std::string canonicalize_url(std::string_view absolute);

/// Resolves `href` against `base` and canonicalizes. nullopt for hrefs that
/// cannot be fetched over http (mailto:, javascript:, ...).
std::optional<std::string> resolve_url(std::string_view base, std::string_view href);

/// href targets of <a> tags in document order, resolved against base_url.
/// Duplicates are kept. Malformed markup is skipped, never fatal.
std::vector<std::string> harvest_links(std::string_view html, std::string_view base_url);

/// Market of a listing url ("/<market>/listing/..."), if any.
std::optional<MarketId> market_of_url(std::string_view url);

} // namespace dnmx::crawl
