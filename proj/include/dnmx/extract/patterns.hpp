#pragma once

#include <map>
#include <string>
#include <vector>

#include <boost/regex.hpp>

#include "dnmx/core/entities.hpp"
#include "dnmx/extract/normalize.hpp"

namespace dnmx::extract {

struct EntityPattern {
    std::string entity_type;
    std::string regex;
    int group = 1;         ///< capture group holding the label; 0 = whole match
    std::string original;  ///< source form before correction, empty if unchanged
};

struct CompiledPattern {
    EntityPattern spec;
    boost::regex re;
};

/// Per-market regex registry. Patterns run against lowercased normalized text.
class PatternSet {
public:
    /// The shipped registry covering every market template.
    static PatternSet defaults();

    /// Throws ConfigError when the expression does not compile.
    void add(MarketId market, EntityPattern pattern);

    bool has(MarketId market) const { return by_market_.count(market) != 0; }
    /// Throws ConfigError for a market with no entry.
    const std::vector<CompiledPattern>& patterns(MarketId market) const;
    const CompiledPattern* find(MarketId market, const std::string& entity_type) const;
    std::vector<MarketId> markets() const;

private:
    std::map<MarketId, std::vector<CompiledPattern>> by_market_;
};

enum class LabelSource { regex, ground_truth, model };

std::string_view to_string(LabelSource s) noexcept;

struct LabeledEntity {
    std::string page_id;
    std::string entity_type;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::string surface;
    LabelSource source = LabelSource::regex;
};

/// First match of each entity pattern becomes the label; patterns that do
/// not match (or match an empty group) yield no label. Offsets index doc.text.
std::vector<LabeledEntity> apply_patterns(const NormalizedDoc& doc, const PatternSet& patterns);

} // namespace dnmx::extract
