#include "dnmx/extract/normalize.hpp"

#include "dnmx/extract/html.hpp"

namespace dnmx::extract {

namespace {

bool is_dropped_symbol(char c) {
    return c == '&' || c == '*' || c == ';' || c == ':';
}

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

} // namespace

std::string normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        // U+00A0 no-break space counts as whitespace.
        const bool nbsp = c == 0xC2 && i + 1 < text.size() &&
                          static_cast<unsigned char>(text[i + 1]) == 0xA0;
        if (is_ascii_space(static_cast<char>(c)) || is_dropped_symbol(static_cast<char>(c)) || nbsp) {
            if (nbsp) ++i;
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        if (c >= 'A' && c <= 'Z') {
            out += static_cast<char>(c - 'A' + 'a');
        } else if (c == 0xC3 && i + 1 < text.size()) {
            // Latin-1 supplement capitals U+00C0..U+00DE (except U+00D7) sit
            // 0x20 below their lowercase forms.
            auto next = static_cast<unsigned char>(text[i + 1]);
            if (next >= 0x80 && next <= 0x9E && next != 0x97) next = static_cast<unsigned char>(next + 0x20);
            out += static_cast<char>(c);
            out += static_cast<char>(next);
            ++i;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::vector<Token> tokenize(std::string_view normalized) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < normalized.size()) {
        while (i < normalized.size() && normalized[i] == ' ') ++i;
        const std::size_t start = i;
        while (i < normalized.size() && normalized[i] != ' ') ++i;
        if (i > start) tokens.push_back({std::string(normalized.substr(start, i - start)), start, i});
    }
    return tokens;
}

NormalizedDoc make_doc(std::string page_id, MarketId market, Language lang, std::string_view html) {
    NormalizedDoc doc;
    doc.page_id = std::move(page_id);
    doc.market_id = market;
    doc.language = lang;
    doc.text = normalize(html_to_text(html));
    doc.tokens = tokenize(doc.text);
    return doc;
}

} // namespace dnmx::extract
