#include "dnmx/extract/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>

namespace dnmx::extract {

namespace {

constexpr std::array<std::string_view, 30> kBlockTags = {
    "html", "body", "head", "div", "p", "br", "hr", "table", "tbody", "thead",
    "tr", "td", "th", "ul", "ol", "li", "h1", "h2", "h3", "h4",
    "h5", "h6", "section", "article", "header", "footer", "nav", "title", "form", "main",
};

bool is_block(std::string_view name) {
    return std::find(kBlockTags.begin(), kBlockTags.end(), name) != kBlockTags.end();
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x110000) {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Decodes the entity starting at html[i] == '&'. Returns the number of bytes
// consumed, 0 when the text is not a recognised entity.
std::size_t decode_entity(std::string_view html, std::size_t i, std::string& out) {
    const auto semi = html.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) return 0;
    const std::string_view name = html.substr(i + 1, semi - i - 1);
    if (name.empty()) return 0;
    if (name[0] == '#') {
        std::uint32_t cp = 0;
        const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
        const std::string_view digits = name.substr(hex ? 2 : 1);
        if (digits.empty()) return 0;
        for (char c : digits) {
            const int v = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                          : hex && std::isxdigit(static_cast<unsigned char>(c))
                              ? 10 + std::tolower(static_cast<unsigned char>(c)) - 'a'
                              : -1;
            if (v < 0) return 0;
            cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
            if (cp > 0x10FFFF) return 0;
        }
        if (cp == '<' || cp == '>') cp = ' ';
        append_utf8(out, cp);
        return semi - i + 1;
    }
    if (name == "amp") out += '&';
    else if (name == "quot") out += '"';
    else if (name == "apos") out += '\'';
    else if (name == "nbsp") out += ' ';
    else if (name == "lt" || name == "gt") out += ' ';
    else if (name == "euro") append_utf8(out, 0x20AC);
    else return 0;
    return semi - i + 1;
}

class TextSink {
public:
    void boundary() {
        if (!out_.empty() && !is_space(out_.back())) out_ += ' ';
    }
    std::string& raw() { return out_; }
    std::string finish() {
        const auto first = std::find_if_not(out_.begin(), out_.end(), is_space);
        const auto last = std::find_if_not(out_.rbegin(), out_.rend(), is_space).base();
        return first < last ? std::string(first, last) : std::string();
    }

private:
    std::string out_;
};

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < needle.size() && ok; ++k) {
            ok = std::tolower(static_cast<unsigned char>(hay[i + k])) == needle[k];
        }
        if (ok) return i;
    }
    return std::string_view::npos;
}

} // namespace

std::string html_to_text(std::string_view html) {
    TextSink sink;
    std::size_t i = 0;
    while (i < html.size()) {
        const char c = html[i];
        if (c == '<') {
            if (html.substr(i, 4) == "<!--") {
                const auto end = html.find("-->", i + 4);
                i = end == std::string_view::npos ? html.size() : end + 3;
                continue;
            }
            std::size_t j = i + 1;
            const bool closing = j < html.size() && html[j] == '/';
            if (closing) ++j;
            std::string name;
            while (j < html.size() && std::isalnum(static_cast<unsigned char>(html[j]))) {
                name += static_cast<char>(std::tolower(static_cast<unsigned char>(html[j])));
                ++j;
            }
            const auto close = html.find('>', j);
            if (name.empty() && !(j < html.size() && html[j] == '!')) {
                // Not a tag: drop the bracket, keep the text.
                ++i;
                continue;
            }
            if (close == std::string_view::npos) {
                ++i;
                continue;
            }
            if (!closing && (name == "script" || name == "style")) {
                const auto end = find_ci(html, "</" + name, close + 1);
                if (end == std::string_view::npos) break;
                const auto end_close = html.find('>', end);
                i = end_close == std::string_view::npos ? html.size() : end_close + 1;
                sink.boundary();
                continue;
            }
            if (is_block(name)) sink.boundary();
            i = close + 1;
            continue;
        }
        if (c == '>') {
            ++i;
            continue;
        }
        if (c == '&') {
            if (const auto used = decode_entity(html, i, sink.raw())) {
                i += used;
                continue;
            }
        }
        sink.raw() += c;
        ++i;
    }
    return sink.finish();
}

} // namespace dnmx::extract
