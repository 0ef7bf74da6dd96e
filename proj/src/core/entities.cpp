#include "dnmx/core/entities.hpp"

#include "dnmx/core/error.hpp"

namespace dnmx {

std::string_view to_string(MarketId id) noexcept {
    switch (id) {
    case MarketId::agartha_item: return "agartha_item";
    case MarketId::agartha_purchase: return "agartha_purchase";
    case MarketId::berlusconi: return "berlusconi";
    case MarketId::cannahome: return "cannahome";
    case MarketId::cocorico: return "cocorico";
    case MarketId::darkmarket: return "darkmarket";
    case MarketId::silkroad: return "silkroad";
    case MarketId::palmetto: return "palmetto";
    }
    return "unknown";
}

std::string_view to_string(Language lang) noexcept {
    return lang == Language::fr ? "fr" : "en";
}

std::optional<MarketId> try_parse_market(std::string_view name) noexcept {
    for (MarketId id : kAllMarkets) {
        if (to_string(id) == name) return id;
    }
    return std::nullopt;
}

MarketId parse_market(std::string_view name) {
    if (auto id = try_parse_market(name)) return *id;
    throw ConfigError("unknown market_id '" + std::string(name) + "'");
}

Language parse_language(std::string_view name) {
    if (name == "en") return Language::en;
    if (name == "fr") return Language::fr;
    throw DataError("unknown language '" + std::string(name) + "'");
}

std::vector<std::string> core_entity_types() {
    return {
        std::string(entity::product),
        std::string(entity::market_name),
        std::string(entity::product_price),
        std::string(entity::model),
        std::string(entity::quantity_in_stock),
        std::string(entity::product_description),
        std::string(entity::product_views),
        std::string(entity::vendor_name),
    };
}

} // namespace dnmx
