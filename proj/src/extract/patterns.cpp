#include "dnmx/extract/patterns.hpp"

#include <algorithm>

#include "dnmx/core/error.hpp"

namespace dnmx::extract {

namespace {

// Product views are rendered as a view counter followed by a euro amount on
// every market except cannahome (orders) and palmetto (no counter).
constexpr const char* kViews = R"((\d+)\s+\d+,\d+\s?€)";

void add_agartha_common(PatternSet& set, MarketId m) {
    set.add(m, {"market_name", R"((\w+)\s+purchase)", 1, ""});
    set.add(m, {"model", R"(category\s+(\w+))", 1, ""});
    set.add(m, {"quantity_in_stock", R"(availability (\d+))", 1, ""});
    set.add(m, {"product_description", R"(listings (.+?) purchase)", 1, ""});
    set.add(m, {"product_views", kViews, 1, ""});
    set.add(m, {"vendor_name", R"(vendor\s+(\w+))", 1, ""});
}

} // namespace

std::string_view to_string(LabelSource s) noexcept {
    switch (s) {
    case LabelSource::regex: return "regex";
    case LabelSource::ground_truth: return "ground_truth";
    case LabelSource::model: return "model";
    }
    return "regex";
}

void PatternSet::add(MarketId market, EntityPattern pattern) {
    CompiledPattern compiled{pattern, boost::regex()};
    try {
        compiled.re.assign(pattern.regex, boost::regex::perl);
    } catch (const boost::regex_error& e) {
        throw ConfigError("pattern for " + std::string(to_string(market)) + "/" +
                          pattern.entity_type + " does not compile: " + e.what());
    }
    if (pattern.group < 0 || static_cast<std::size_t>(pattern.group) > compiled.re.mark_count()) {
        throw ConfigError("pattern for " + std::string(to_string(market)) + "/" +
                          pattern.entity_type + " has no capture group " +
                          std::to_string(pattern.group));
    }
    auto& list = by_market_[market];
    auto same = std::find_if(list.begin(), list.end(), [&](const CompiledPattern& p) {
        return p.spec.entity_type == pattern.entity_type;
    });
    if (same != list.end()) {
        *same = std::move(compiled);
    } else {
        list.push_back(std::move(compiled));
    }
}

const std::vector<CompiledPattern>& PatternSet::patterns(MarketId market) const {
    const auto it = by_market_.find(market);
    if (it == by_market_.end()) {
        throw ConfigError("no patterns registered for market " + std::string(to_string(market)));
    }
    return it->second;
}

const CompiledPattern* PatternSet::find(MarketId market, const std::string& entity_type) const {
    const auto it = by_market_.find(market);
    if (it == by_market_.end()) return nullptr;
    for (const auto& p : it->second) {
        if (p.spec.entity_type == entity_type) return &p;
    }
    return nullptr;
}

std::vector<MarketId> PatternSet::markets() const {
    std::vector<MarketId> out;
    for (const auto& [m, _] : by_market_) out.push_back(m);
    return out;
}

PatternSet PatternSet::defaults() {
    PatternSet set;

    add_agartha_common(set, MarketId::agartha_item);
    set.add(MarketId::agartha_item, {"product", R"((?:listings.*?)1listings\s+(.+?)\s+message)", 1, ""});
    set.add(MarketId::agartha_item, {"product_price", R"(price (\d+\.\d+))", 1, ""});

    add_agartha_common(set, MarketId::agartha_purchase);
    set.add(MarketId::agartha_purchase, {"product", R"((?:purchase.*?)1purchase\s+(.+?)\s+category)", 1, ""});
    set.add(MarketId::agartha_purchase, {"product_price", R"((\d+\.\d+)\s+(usd|btc))", 1, ""});

    const auto b = MarketId::berlusconi;
    set.add(b, {"market_name", R"(\bberlusconi\b)", 0, R"(\berlusconi\b)"});
    set.add(b, {"product", R"(^(.+?)\s\d+(?:\.\d+)?\s*eur)", 1, ""});
    set.add(b, {"model", R"(class\s+(\w+))", 1, ""});
    set.add(b, {"quantity_in_stock", R"((\d+)\s+in stock)", 1, R"((\d+) s+in stock)"});
    set.add(b, {"product_price", R"((\d+(?:\.\d+)?)(?=\s+eur))", 1, ""});
    set.add(b, {"product_description", R"(avis (.+?) modèle)", 1, ""});
    set.add(b, {"product_views", kViews, 1, ""});
    set.add(b, {"vendor_name", R"(vendor\s+(\w+))", 1, ""});

    const auto ch = MarketId::cannahome;
    set.add(ch, {"market_name", R"((\w+)\s+purchase)", 1, ""});
    set.add(ch, {"product", R"(details (.+?) availability)", 1, ""});
    set.add(ch, {"model", R"(category\s+(\w+))", 1, ""});
    set.add(ch, {"quantity_in_stock", R"(availability (\d+))", 1, ""});
    set.add(ch, {"product_price", R"(escrow (\d+\.\d+))", 1, R"(escrow (\d+.\d+))"});
    set.add(ch, {"product_description", R"(avis (.+?) modèle)", 1, ""});
    set.add(ch, {"product_views", R"((\w+)\s+orders)", 1, ""});
    set.add(ch, {"vendor_name", R"(vendor\s+(\w+))", 1, ""});

    const auto co = MarketId::cocorico;
    set.add(co, {"market_name", R"(\bcocorico\s+market\b)", 0, R"(\bcocorico\s market\b)"});
    set.add(co, {"product", R"(recherche (.+?) description)", 1, ""});
    set.add(co, {"model", R"(modèle\s+(.+?)\s+disponibilité)", 1, ""});
    // The colon is stripped by normalization, so it has to be optional.
    set.add(co, {"quantity_in_stock", R"(disponibilité :?(\d+))", 1, R"(disponibilité :(\d+))"});
    set.add(co, {"product_price", R"((\d+,\d+)\s?€)", 1, R"((\d+, d+)\s?€)"});
    set.add(co, {"product_description", R"(avis (.+?) modèle)", 1, ""});
    set.add(co, {"product_views", kViews, 1, ""});
    set.add(co, {"vendor_name", R"((\b\w+\b)\s+rating)", 1, ""});

    const auto dm = MarketId::darkmarket;
    set.add(dm, {"market_name", R"((\w+)\s+purchase)", 1, ""});
    set.add(dm, {"product", R"(1 (.+?) quality)", 1, ""});
    set.add(dm, {"model", R"(type\s+(\w+))", 1, ""});
    set.add(dm, {"quantity_in_stock", R"(leftsold (\d+))", 1, ""});
    set.add(dm, {"product_price", R"(offers (\d+\.+\d+))", 1, ""});
    set.add(dm, {"product_description", R"(listings (.+?) quality)", 1, ""});
    set.add(dm, {"product_views", kViews, 1, ""});
    set.add(dm, {"vendor_name", R"(information\s+(\w+))", 1, ""});

    const auto sr = MarketId::silkroad;
    set.add(sr, {"market_name", R"(\bsilk\s+road\b)", 0, R"(\bsilk\s road\b)"});
    set.add(sr, {"product", R"(usd\s+(.+?)\s+price)", 1, R"(usd+(.+?)\s+price)"});
    set.add(sr, {"model", R"(category\s+(.+?)\s+stock)", 1, R"(category+(.+?)\s+stock)"});
    set.add(sr, {"quantity_in_stock", R"(remaining\s*(\d+))", 1, ""});
    set.add(sr, {"product_price", R"(price\s*(\d+))", 1, R"(price s*(\d+))"});
    set.add(sr, {"product_description", R"(avis (.+?) modèle)", 1, ""});
    set.add(sr, {"product_views", kViews, 1, ""});
    set.add(sr, {"vendor_name", R"(listings\s+(\w+))", 1, ""});

    // Robustness market: not in the published tables, same keyword-anchor style.
    const auto pm = MarketId::palmetto;
    set.add(pm, {"market_name", R"(\bpalmetto\s+state\s+armory\b)", 0, ""});
    set.add(pm, {"product", R"(item\s+(.+?)\s+brand\b)", 1, ""});
    set.add(pm, {"brand", R"(brand\s+(\w+))", 1, ""});
    set.add(pm, {"sku", R"(sku\s+(\w+))", 1, ""});
    set.add(pm, {"model", R"(category\s+(\w+))", 1, ""});
    set.add(pm, {"quantity_in_stock", R"(availability (\d+))", 1, ""});
    set.add(pm, {"product_price", R"(price (\d+\.\d+))", 1, ""});
    set.add(pm, {"vendor_name", R"(vendor\s+(\w+))", 1, ""});

    return set;
}

std::vector<LabeledEntity> apply_patterns(const NormalizedDoc& doc, const PatternSet& patterns) {
    const auto& list = patterns.patterns(doc.market_id);
    std::vector<LabeledEntity> out;
    for (const auto& p : list) {
        boost::smatch m;
        if (!boost::regex_search(doc.text, m, p.re)) continue;
        const auto& g = m[p.spec.group];
        if (!g.matched || g.length() == 0) continue;
        LabeledEntity e;
        e.page_id = doc.page_id;
        e.entity_type = p.spec.entity_type;
        e.char_start = static_cast<std::size_t>(g.first - doc.text.begin());
        e.char_end = static_cast<std::size_t>(g.second - doc.text.begin());
        e.surface = g.str();
        e.source = LabelSource::regex;
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace dnmx::extract
