#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dnmx {

enum class MarketId : std::uint8_t {
    agartha_item,
    agartha_purchase,
    berlusconi,
    cannahome,
    cocorico,
    darkmarket,
    silkroad,
    palmetto,
};

inline constexpr std::array<MarketId, 8> kAllMarkets = {
    MarketId::agartha_item, MarketId::agartha_purchase, MarketId::berlusconi,
    MarketId::cannahome,    MarketId::cocorico,         MarketId::darkmarket,
    MarketId::silkroad,     MarketId::palmetto,
};

/// The six markets that make up the default training corpus.
inline constexpr std::array<MarketId, 6> kDefaultMarkets = {
    MarketId::agartha_item, MarketId::berlusconi, MarketId::cannahome,
    MarketId::cocorico,     MarketId::darkmarket, MarketId::silkroad,
};

enum class Language : std::uint8_t { en, fr };

std::string_view to_string(MarketId id) noexcept;
std::string_view to_string(Language lang) noexcept;

/// Throws ConfigError for unknown names.
MarketId parse_market(std::string_view name);
std::optional<MarketId> try_parse_market(std::string_view name) noexcept;
Language parse_language(std::string_view name);

namespace entity {
inline constexpr std::string_view product = "product";
inline constexpr std::string_view market_name = "market_name";
inline constexpr std::string_view product_price = "product_price";
inline constexpr std::string_view model = "model";
inline constexpr std::string_view quantity_in_stock = "quantity_in_stock";
inline constexpr std::string_view product_description = "product_description";
inline constexpr std::string_view product_views = "product_views";
inline constexpr std::string_view vendor_name = "vendor_name";
inline constexpr std::string_view sku = "sku";
inline constexpr std::string_view brand = "brand";
} // namespace entity

/// Entity types exposed by the drug markets, in canonical order.
std::vector<std::string> core_entity_types();

} // namespace dnmx
