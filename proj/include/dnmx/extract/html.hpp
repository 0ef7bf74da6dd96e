#pragma once

#include <string>
#include <string_view>

namespace dnmx::extract {

/// Strips markup and returns the text nodes in document order.
///
/// Block-level tags (div, table, p, br, ...) contribute one space boundary;
/// inline tags (span, a, b, ...) contribute nothing. Script and style bodies
/// and comments are dropped. Character entities are decoded. Malformed markup
/// never throws: an unterminated `<` is discarded and scanning continues.
/// The result never contains `<` or `>` and has no leading/trailing blanks.
std::string html_to_text(std::string_view html);

} // namespace dnmx::extract
