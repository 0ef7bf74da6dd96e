#include "dnmx/crawl/url.hpp"

#include <algorithm>
#include <cctype>

namespace dnmx::crawl {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string remove_dot_segments(std::string_view path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    const bool trailing = !path.empty() && (path.back() == '/' || path.ends_with("/.") || path.ends_with("/.."));
    while (i <= path.size()) {
        const auto j = std::min(path.find('/', i), path.size());
        const auto seg = path.substr(i, j - i);
        if (seg == "..") {
            if (!parts.empty()) parts.pop_back();
        } else if (!seg.empty() && seg != ".") {
            parts.emplace_back(seg);
        }
        i = j + 1;
    }
    std::string out;
    for (const auto& p : parts) out += "/" + p;
    if (out.empty() || trailing) out += "/";
    return out;
}

} // namespace

std::string Url::str() const {
    std::string s = scheme + "://" + host + path;
    if (!query.empty()) s += "?" + query;
    return s;
}

std::optional<Url> parse_url(std::string_view text) {
    const auto colon = text.find("://");
    if (colon == std::string_view::npos) return std::nullopt;
    Url u;
    u.scheme = lower(text.substr(0, colon));
    if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
    auto rest = text.substr(colon + 3);
    if (const auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
    const auto slash = rest.find_first_of("/?");
    u.host = lower(rest.substr(0, slash));
    if (u.host.empty()) return std::nullopt;
    if (u.scheme == "http" && u.host.ends_with(":80")) u.host.resize(u.host.size() - 3);
    if (u.scheme == "https" && u.host.ends_with(":443")) u.host.resize(u.host.size() - 4);
    rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash);
    const auto q = rest.find('?');
    u.path = remove_dot_segments(rest.substr(0, q));
    if (q != std::string_view::npos) u.query = std::string(rest.substr(q + 1));
    return u;
}

std::string canonicalize_url(std::string_view absolute) {
    const auto u = parse_url(absolute);
    return u ? u->str() : std::string(absolute);
}

std::optional<std::string> resolve_url(std::string_view base, std::string_view href) {
    while (!href.empty() && std::isspace(static_cast<unsigned char>(href.front()))) href.remove_prefix(1);
    while (!href.empty() && std::isspace(static_cast<unsigned char>(href.back()))) href.remove_suffix(1);
    const auto b = parse_url(base);
    if (href.find("://") != std::string_view::npos) {
        const auto u = parse_url(href);
        return u ? std::optional<std::string>(u->str()) : std::nullopt;
    }
    const auto scheme_end = href.find(':');
    const auto first_sep = href.find_first_of("/?#");
    if (scheme_end != std::string_view::npos && scheme_end < first_sep) return std::nullopt;  // mailto:, javascript:
    if (!b) return std::nullopt;
    if (href.starts_with("//")) return resolve_url(base, b->scheme + ":" + std::string(href));

    std::string_view frag_free = href.substr(0, href.find('#'));
    Url u = *b;
    if (frag_free.empty()) return u.str();
    if (frag_free.front() == '?') {
        u.query = std::string(frag_free.substr(1));
        return u.str();
    }
    const auto q = frag_free.find('?');
    std::string path(frag_free.substr(0, q));
    u.query = q == std::string_view::npos ? "" : std::string(frag_free.substr(q + 1));
    if (path.front() != '/') {
        path = b->path.substr(0, b->path.rfind('/') + 1) + path;
    }
    u.path = remove_dot_segments(path);
    return u.str();
}

std::vector<std::string> harvest_links(std::string_view html, std::string_view base_url) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while ((i = html.find('<', i)) != std::string_view::npos) {
        const auto close = html.find('>', i);
        if (close == std::string_view::npos) break;
        const auto tag = html.substr(i + 1, close - i - 1);
        i = close;
        if (tag.size() < 2 || std::tolower(static_cast<unsigned char>(tag[0])) != 'a' ||
            !std::isspace(static_cast<unsigned char>(tag[1]))) {
            continue;
        }
        const std::string low = lower(tag);
        std::size_t at = 0;
        while ((at = low.find("href", at)) != std::string::npos) {
            const bool boundary = std::isspace(static_cast<unsigned char>(low[at - 1]));
            at += 4;
            std::size_t k = at;
            while (k < low.size() && std::isspace(static_cast<unsigned char>(low[k]))) ++k;
            if (!boundary || k >= low.size() || low[k] != '=') continue;
            ++k;
            while (k < low.size() && std::isspace(static_cast<unsigned char>(low[k]))) ++k;
            if (k >= low.size()) break;
            std::string_view value;
            if (tag[k] == '"' || tag[k] == '\'') {
                const auto end = tag.find(tag[k], k + 1);
                if (end == std::string_view::npos) break;
                value = tag.substr(k + 1, end - k - 1);
            } else {
                auto end = k;
                while (end < tag.size() && !std::isspace(static_cast<unsigned char>(tag[end]))) ++end;
                value = tag.substr(k, end - k);
            }
            if (auto r = resolve_url(base_url, value)) out.push_back(std::move(*r));
            break;
        }
    }
    return out;
}

std::optional<MarketId> market_of_url(std::string_view url) {
    std::string path;
    if (const auto u = parse_url(url)) {
        path = u->path;
    } else {
        path = std::string(url);
    }
    if (path.empty() || path[0] != '/') return std::nullopt;
    const auto slash = path.find('/', 1);
    if (slash == std::string::npos || path.compare(slash, 9, "/listing/") != 0) return std::nullopt;
    return try_parse_market(std::string_view(path).substr(1, slash - 1));
}

} // namespace dnmx::crawl
