#include "dnmx/sim/market.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "dnmx/core/error.hpp"
#include "dnmx/core/rng.hpp"

namespace dnmx::sim {

namespace {

using Words = std::vector<std::string>;

// Filler vocabularies stay clear of every anchor keyword the pattern sets
// key on, so the first match of each pattern is always the rendered slot.
const Words kEnFiller = {
    "the", "and", "with", "for", "fast", "shipping", "stealth", "packaging", "tracking",
    "worldwide", "discreet", "feedback", "positive", "reviews", "support", "contact",
    "rules", "terms", "refund", "policy", "dispute", "resolution", "buyer", "protection",
    "secure", "wallet", "deposit", "withdraw", "account", "settings", "profile", "logout",
    "forum", "news", "help", "faq", "guide", "pgp", "key", "verified", "trusted", "since",
    "member", "level", "trust", "recent", "activity", "shipped", "received", "thanks",
    "great", "smooth", "would", "again", "recommend", "arrived", "days", "week", "excellent",
    "communication", "responsive", "package", "weight", "accurate", "service", "always",
    "careful", "please", "read", "before", "buying", "we", "ship", "from", "to", "no",
    "questions", "asked", "on", "time", "every", "batch", "tested", "results", "upon",
    "request", "our", "team", "is", "online", "daily", "do", "not", "finalize", "early",
    "encrypt", "your", "address", "reship", "lost", "parcels", "only", "after", "proof",
    "weekend", "holidays", "delays", "possible", "thank", "you", "patience",
};

const Words kFrFiller = {
    "livraison", "rapide", "discrète", "emballage", "suivi", "colis", "envoi", "soigné",
    "vendeur", "sérieux", "merci", "commande", "reçue", "très", "bien", "je", "recommande",
    "règles", "conditions", "remboursement", "litige", "portefeuille", "dépôt", "retrait",
    "compte", "profil", "déconnexion", "aide", "clé", "vérifiée", "confiance", "membre",
    "depuis", "niveau", "jours", "semaine", "toujours", "parfait", "arrivé", "rapidement",
    "nous", "expédions", "depuis", "la", "le", "les", "des", "une", "pour", "avec", "sans",
    "chiffrez", "votre", "adresse", "avant", "paiement", "finalisez", "après", "réception",
    "délai", "possible", "pendant", "fêtes", "équipe", "disponible", "chaque", "lot",
    "testé", "excellente", "communication", "encore", "bravo", "nickel", "top",
};

const Words kEnDescription = {
    "top", "shelf", "smooth", "smoke", "strong", "effects", "fresh", "batch", "sealed",
    "vacuum", "packed", "hand", "picked", "grown", "clean", "potent", "long", "lasting",
    "relaxing", "euphoric", "best", "seller", "cured", "slowly", "lab", "tested", "pure",
    "uncut", "straight", "from", "source", "grade", "a", "sticky", "buds", "rich", "aroma",
    "heavy", "body", "high", "perfect", "for", "evening", "use",
};

const Words kFrDescription = {
    "produit", "de", "haute", "pureté", "envoi", "rapide", "et", "discret", "sous", "vide",
    "fraîche", "récolte", "très", "puissant", "effet", "durable", "odeur", "intense",
    "qualité", "supérieure", "directement", "du", "producteur", "idéal", "pour", "la",
    "soirée", "goût", "agréable", "texture", "collante", "cultivé", "en", "intérieur",
};

struct Substance {
    std::string name;
    std::string category;
};

const std::vector<Substance> kEnSubstances = {
    {"hash", "cannabis"},      {"kush", "cannabis"},           {"haze", "cannabis"},
    {"skunk", "cannabis"},     {"shatter", "concentrates"},    {"wax", "concentrates"},
    {"cocaine", "stimulants"}, {"amphetamine", "stimulants"},  {"speed", "stimulants"},
    {"mdma", "ecstasy"},       {"pills", "ecstasy"},           {"lsd", "psychedelics"},
    {"psilocybin", "psychedelics"}, {"dmt", "psychedelics"},   {"ketamine", "dissociatives"},
    {"xanax", "benzos"},       {"diazepam", "benzos"},         {"alprazolam", "benzos"},
    {"oxycodone", "opioids"},  {"heroin", "opioids"},          {"tramadol", "opioids"},
    {"modafinil", "prescription"}, {"adderall", "prescription"},
    {"testosterone", "steroids"}, {"gummies", "edibles"},
};

const Words kEnDescriptors = {
    "premium", "moroccan", "afghan", "pure", "uncut", "organic", "indoor", "outdoor",
    "crystal", "pharma", "blue", "gold", "white", "purple", "lemon", "dutch", "peruvian",
    "bolivian", "swiss", "fishscale", "high grade", "lab tested",
};

const Words kAmounts = {
    "1g", "2g", "3.5g", "5g", "7g", "10g", "14g", "28g", "1oz", "100mg", "250mg", "500mg",
    "10x", "25x", "50x", "100x",
};

const Words kSilkroadSub = {"buds", "powder", "tabs", "blotters", "resin", "crystals", "liquid"};

const std::vector<Substance> kFrSubstances = {
    {"haschich", "cannabis"},   {"herbe", "cannabis"},          {"résine", "cannabis"},
    {"cocaïne", "stimulants"},  {"amphétamine", "stimulants"},  {"mdma", "ecstasy"},
    {"lsd", "psychédéliques"},  {"champignons", "psychédéliques"}, {"kétamine", "dissociatifs"},
    {"xanax", "benzodiazépines"}, {"héroïne", "opioïdes"},      {"oxycodone", "opioïdes"},
};

const Words kFrDescriptors = {
    "marocain", "afghan", "pure", "premium", "bio", "cristal", "extra", "fraîche", "suisse",
    "colombienne", "péruvienne", "hollandaise",
};

const Words kVendorHead = {
    "dark", "green", "silent", "golden", "royal", "happy", "north", "frozen", "lucky",
    "urban", "cosmic", "white", "black", "blue", "red", "wild", "crazy", "prime", "noble",
    "swift",
};
const Words kVendorTail = {
    "panda", "wizard", "dragon", "fox", "owl", "tiger", "shop", "labs", "pharma", "garden",
    "express", "connect", "dutch", "bear", "eagle", "wolf", "ghost", "king", "farm", "chem",
};

// Robustness market vocabulary: firearms parts and accessories.
const Words kGunCategories = {
    "handguns", "rifles", "shotguns", "optics", "ammunition", "magazines", "holsters",
    "suppressors", "uppers", "lowers", "barrels", "triggers", "slides", "sights", "lights",
    "handguards", "grips", "muzzle", "cleaning",
};
const Words kGunBrands = {
    "psa", "glock", "sig", "ruger", "smith", "colt", "beretta", "remington", "mossberg",
    "springfield", "taurus", "kimber", "savage", "winchester", "henry", "aero", "faxon",
    "magpul", "vortex", "holosun",
};
const Words kGunModels = {"pa-15", "jakl", "dagger", "rock", "ar-10", "sabre", "ak-v", "kp-9", "pa-9", "ar-15"};
const Words kGunSizes = {"16 inch", "18 inch", "10.5 inch", "9mm", "5.56 nato", ".308 win", "7.62x39", "300 blk"};
const Words kGunKinds = {"rifle", "pistol", "upper", "barrel", "complete lower", "handguard", "magazine", "kit"};
const Words kGunFiller = {
    "ffl", "transfer", "required", "for", "all", "firearms", "ships", "within", "business",
    "days", "caliber", "length", "twist", "rate", "finish", "nitride", "phosphate", "gas",
    "system", "mid", "mlok", "rail", "device", "grip", "free", "float", "lifetime",
    "warranty", "check", "local", "laws", "before", "ordering", "customer", "reviews",
    "rated", "stars", "accurate", "reliable", "range", "day", "build", "kit", "includes",
    "bolt", "carrier", "group", "charging", "handle", "buffer", "tube", "spring", "the",
    "and", "with", "this", "is", "a", "great", "value", "our", "team", "tested", "every",
    "unit", "compliant", "states", "excluded", "restrictions", "apply", "sign", "up",
    "newsletter", "deals", "weekly",
};

const std::map<MarketId, MarketTemplate>& templates() {
    static const std::map<MarketId, MarketTemplate> t = [] {
        std::map<MarketId, MarketTemplate> m;
        const Words core = {"product", "market_name", "product_price", "model",
                            "quantity_in_stock", "product_description", "product_views",
                            "vendor_name"};
        const Words no_desc = {"product", "market_name", "product_price", "model",
                               "quantity_in_stock", "product_views", "vendor_name"};
        const Words sections = {"header", "listing", "vendor", "footer"};
        m[MarketId::agartha_item] = {MarketId::agartha_item, Language::en, sections,
                                     {"purchase", "listings", "1listings", "message", "vendor", "category",
                                      "availability", "price", "usd", "views", "€"},
                                     core, 230};
        m[MarketId::agartha_purchase] = {MarketId::agartha_purchase, Language::en, sections,
                                         {"purchase", "listings", "1purchase", "category", "availability",
                                          "usd", "vendor", "views", "€"},
                                         core, 230};
        m[MarketId::berlusconi] = {MarketId::berlusconi, Language::en, {"listing", "header", "vendor", "footer"},
                                   {"eur", "market", "class", "in", "stock", "vendor", "views", "€"},
                                   no_desc, 184};
        m[MarketId::cannahome] = {MarketId::cannahome, Language::en, sections,
                                  {"purchase", "details", "availability", "category", "escrow", "usd",
                                   "vendor", "orders"},
                                  no_desc, 1385};
        m[MarketId::cocorico] = {MarketId::cocorico, Language::fr, sections,
                                 {"market", "accueil", "recherche", "description", "avis", "modèle",
                                  "disponibilité", "vues", "€", "rating"},
                                 core, 153};
        m[MarketId::darkmarket] = {MarketId::darkmarket, Language::en, sections,
                                   {"purchase", "1", "quality", "listings", "type", "leftsold", "offers",
                                    "usd", "vendor", "information", "views", "€"},
                                   core, 175};
        m[MarketId::silkroad] = {MarketId::silkroad, Language::en, sections,
                                 {"currency", "usd", "price", "category", "stock", "remaining", "vendor",
                                  "listings", "views", "€"},
                                 no_desc, 267};
        m[MarketId::palmetto] = {MarketId::palmetto, Language::en, sections,
                                 {"shop", "item", "brand", "sku", "category", "availability", "price",
                                  "usd", "vendor"},
                                 {"product", "market_name", "product_price", "model", "quantity_in_stock",
                                  "vendor_name", "sku", "brand"},
                                 1246};
        return m;
    }();
    return t;
}

std::string fmt_decimal(Rng& rng, int lo, int hi) {
    const long long cents = rng.range(lo * 100LL, hi * 100LL);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", cents / 100, cents % 100);
    return buf;
}

std::string fmt_euro(Rng& rng, int lo, int hi) {
    const long long cents = rng.range(lo * 100LL, hi * 100LL);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld,%02lld", cents / 100, cents % 100);
    return buf;
}

std::string page_id_for(MarketId m, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    return std::string(to_string(m)) + "-" + buf;
}

std::string url_for(MarketId m, const std::string& page_id) {
    return "/" + std::string(to_string(m)) + "/listing/" + page_id + ".html";
}

// Vendor pools depend on the market only, so the same vendors recur across
// seeds and some of them trade on several markets.
Words vendor_pool(MarketId m) {
    Rng rng(derive_seed(0x5eed, to_string(m)));
    const std::size_t n = m == MarketId::palmetto ? 49 : 40;
    std::set<std::string> seen;
    Words pool;
    while (pool.size() < n) {
        std::string v = rng.pick(kVendorHead) + rng.pick(kVendorTail);
        if (rng.chance(0.3)) v += std::to_string(rng.range(1, 99));
        if (seen.insert(v).second) pool.push_back(v);
    }
    return pool;
}

// Zipf-like: rank r drawn with weight 1/(r+1).
const std::string& pick_vendor(Rng& rng, const Words& pool) {
    double total = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) total += 1.0 / static_cast<double>(i + 1);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        u -= 1.0 / static_cast<double>(i + 1);
        if (u <= 0) return pool[i];
    }
    return pool.back();
}

std::string sentence(Rng& rng, const Words& vocab, int lo, int hi) {
    const auto n = rng.range(lo, hi);
    std::string s;
    for (long long i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += rng.pick(vocab);
    }
    return s;
}

class PageBuilder {
public:
    PageBuilder(Rng& rng, bool noisy) : rng_(rng), noisy_(noisy) { html_ = "<html><body>\n"; }

    void open(std::string_view cls, std::string_view tag = "div") {
        tags_.emplace_back(tag);
        html_ += "<";
        html_ += tag;
        html_ += " class=\"";
        html_ += cls;
        html_ += "\">";
        fresh_ = true;
    }

    void close() {
        html_ += "</" + tags_.back() + ">\n";
        tags_.pop_back();
    }

    void text(std::string_view s) {
        join();
        html_ += s;
        words_ += count_words(s);
    }

    void entity(std::string_view type, const std::string& value, bool glue = false) {
        if (glue) {
            fresh_ = false;
        } else {
            join();
        }
        html_ += "<span class=\"";
        html_ += type;
        html_ += "\">";
        GroundTruthEntity e;
        e.entity_type = std::string(type);
        e.char_start = html_.size();
        html_ += value;
        e.char_end = html_.size();
        e.surface = value;
        html_ += "</span>";
        entities_.push_back(std::move(e));
        words_ += count_words(value);
    }

    void link(const std::string& href, std::string_view label) {
        join();
        html_ += "<a href=\"" + href + "\">";
        html_ += label;
        html_ += "</a>";
        words_ += count_words(label);
    }

    std::size_t words() const { return words_; }

    std::string finish() {
        html_ += "</body></html>\n";
        return std::move(html_);
    }

    std::vector<GroundTruthEntity> take_entities() { return std::move(entities_); }

private:
    void join() {
        if (fresh_) {
            fresh_ = false;
            return;
        }
        if (!noisy_) {
            html_ += ' ';
            return;
        }
        static const char* kRuns[] = {"  ", " \t ", "\n  ", "   \n "};
        static const char* kStray[] = {" & ", " * ", " ; ", " : "};
        const double r = rng_.uniform();
        if (r < 0.10) {
            html_ += kRuns[rng_.below(4)];
        } else if (r < 0.20) {
            html_ += kStray[rng_.below(4)];
        } else if (r < 0.24) {
            html_ += " " + std::to_string(rng_.range(2, 999)) + " ";
            ++words_;
        } else {
            html_ += ' ';
        }
    }

    Rng& rng_;
    bool noisy_;
    bool fresh_ = true;
    std::string html_;
    std::vector<std::string> tags_;
    std::vector<GroundTruthEntity> entities_;
    std::size_t words_ = 0;
};

struct Draw {
    std::string product, model, price, qty, desc, views, euro, vendor, sku, brand;
};

Draw draw_drug_listing(Rng& rng, MarketId m, const Words& vendors) {
    Draw d;
    if (m == MarketId::cocorico) {
        const auto& s = rng.pick(kFrSubstances);
        d.product = rng.pick(kAmounts) + " " + s.name;
        if (rng.chance(0.7)) d.product += " " + rng.pick(kFrDescriptors);
        d.model = s.category;
        d.desc = sentence(rng, kFrDescription, 4, 10);
        d.price = fmt_euro(rng, 5, 900);
    } else {
        const auto& s = rng.pick(kEnSubstances);
        d.product = rng.pick(kAmounts) + " ";
        if (rng.chance(0.7)) d.product += rng.pick(kEnDescriptors) + " ";
        d.product += s.name;
        d.model = s.category;
        if (m == MarketId::silkroad && rng.chance(0.5)) d.model += " " + rng.pick(kSilkroadSub);
        d.desc = sentence(rng, kEnDescription, 4, 10);
        d.price = m == MarketId::silkroad ? std::to_string(rng.range(5, 900)) : fmt_decimal(rng, 5, 900);
    }
    d.qty = std::to_string(rng.range(1, 500));
    d.views = std::to_string(rng.range(0, 4999));
    d.euro = fmt_euro(rng, 5, 900);
    d.vendor = pick_vendor(rng, vendors);
    return d;
}

Draw draw_gun_listing(Rng& rng, const Words& vendors) {
    Draw d;
    d.brand = rng.pick(kGunBrands);
    d.product = rng.pick(kGunModels) + " " + rng.pick(kGunSizes) + " " + rng.pick(kGunKinds);
    d.model = rng.pick(kGunCategories);
    d.sku = "psa" + std::to_string(rng.range(100000, 9999999));
    d.qty = std::to_string(rng.range(0, 250));
    d.price = fmt_decimal(rng, 19, 2400);
    d.vendor = pick_vendor(rng, vendors);
    return d;
}

// Entity region of each market. Anchor keywords sit exactly where the
// market's patterns expect them; views always come as "<count> <euro> €".
void render_listing(PageBuilder& b, MarketId m, const Draw& d) {
    namespace e = entity;
    auto views_line = [&](std::string_view word) {
        b.open("stats");
        b.text(word);
        b.entity(e::product_views, d.views);
        b.text(d.euro);
        b.text("€");
        b.close();
    };
    switch (m) {
    case MarketId::agartha_item:
        b.open("header");
        b.entity(e::market_name, "agartha");
        b.text("Purchase");
        b.close();
        b.open("listing");
        b.text("Listings");
        b.entity(e::product_description, d.desc);
        b.text("Purchase");
        b.close();
        b.open("listing");
        b.text("1listings");
        b.entity(e::product, d.product);
        b.text("Message Vendor");
        b.entity(e::vendor_name, d.vendor);
        b.close();
        b.open("vendor", "table");
        b.text("Category");
        b.entity(e::model, d.model);
        b.text("Availability");
        b.entity(e::quantity_in_stock, d.qty);
        b.text("Price");
        b.entity(e::product_price, d.price);
        b.text("USD");
        b.close();
        views_line("Views");
        break;
    case MarketId::agartha_purchase:
        b.open("header");
        b.entity(e::market_name, "agartha");
        b.text("Purchase");
        b.close();
        b.open("listing");
        b.text("Listings");
        b.entity(e::product_description, d.desc);
        b.text("Purchase");
        b.close();
        b.open("listing");
        b.text("1purchase");
        b.entity(e::product, d.product);
        b.text("Category");
        b.entity(e::model, d.model);
        b.close();
        b.open("vendor", "table");
        b.text("Availability");
        b.entity(e::quantity_in_stock, d.qty);
        b.entity(e::product_price, d.price);
        b.text("USD Vendor");
        b.entity(e::vendor_name, d.vendor);
        b.close();
        views_line("Views");
        break;
    case MarketId::berlusconi:
        b.open("listing");
        b.entity(e::product, d.product);
        b.entity(e::product_price, d.price);
        b.text("EUR");
        b.close();
        b.open("header");
        b.entity(e::market_name, "berlusconi");
        b.text("Market");
        b.close();
        b.open("vendor", "table");
        b.text("Class");
        b.entity(e::model, d.model);
        b.entity(e::quantity_in_stock, d.qty);
        b.text("in stock Vendor");
        b.entity(e::vendor_name, d.vendor);
        b.close();
        views_line("Views");
        break;
    case MarketId::cannahome:
        b.open("header");
        b.entity(e::market_name, "cannahome");
        b.text("Purchase");
        b.close();
        b.open("listing");
        b.text("Details");
        b.entity(e::product, d.product);
        b.text("Availability");
        b.entity(e::quantity_in_stock, d.qty);
        b.close();
        b.open("listing");
        b.text("Category");
        b.entity(e::model, d.model);
        b.text("Escrow");
        b.entity(e::product_price, d.price);
        b.text("USD");
        b.close();
        b.open("vendor", "table");
        b.text("Vendor");
        b.entity(e::vendor_name, d.vendor);
        b.entity(e::product_views, d.views);
        b.text("orders");
        b.close();
        break;
    case MarketId::cocorico:
        b.open("header");
        b.entity(e::market_name, "cocorico market");
        b.text("Accueil");
        b.close();
        b.open("listing");
        b.text("Recherche");
        b.entity(e::product, d.product);
        b.text("Description");
        b.close();
        b.open("listing");
        b.text("Avis");
        b.entity(e::product_description, d.desc);
        b.text("Modèle");
        b.entity(e::model, d.model);
        b.text("Disponibilité :");
        b.entity(e::quantity_in_stock, d.qty, true);
        b.close();
        b.open("stats");
        b.text("Vues");
        b.entity(e::product_views, d.views);
        b.entity(e::product_price, d.price);
        b.text("€");
        b.close();
        b.open("vendor", "table");
        b.entity(e::vendor_name, d.vendor);
        b.text("rating");
        b.text(std::to_string(3 + static_cast<int>(d.views.size() % 3)) + "/5");
        b.close();
        break;
    case MarketId::darkmarket:
        b.open("header");
        b.entity(e::market_name, "darkmarket");
        b.text("Purchase");
        b.close();
        b.open("listing");
        b.text("1");
        b.entity(e::product, d.product);
        b.text("Quality");
        b.close();
        b.open("listing");
        b.text("Listings");
        b.entity(e::product_description, d.desc);
        b.text("Quality");
        b.close();
        b.open("listing");
        b.text("Type");
        b.entity(e::model, d.model);
        b.text("Leftsold");
        b.entity(e::quantity_in_stock, d.qty);
        b.text("Offers");
        b.entity(e::product_price, d.price);
        b.text("USD");
        b.close();
        b.open("vendor", "table");
        b.text("Vendor Information");
        b.entity(e::vendor_name, d.vendor);
        b.close();
        views_line("Views");
        break;
    case MarketId::silkroad:
        b.open("header");
        b.entity(e::market_name, "silk road");
        b.close();
        b.open("header");
        b.text("Currency USD");
        b.close();
        b.open("listing");
        b.entity(e::product, d.product);
        b.text("Price");
        b.entity(e::product_price, d.price);
        b.close();
        b.open("listing");
        b.text("Category");
        b.entity(e::model, d.model);
        b.text("Stock remaining");
        b.entity(e::quantity_in_stock, d.qty);
        b.close();
        b.open("vendor", "table");
        b.text("Vendor Listings");
        b.entity(e::vendor_name, d.vendor);
        b.close();
        views_line("Views");
        break;
    case MarketId::palmetto:
        b.open("header");
        b.entity(e::market_name, "palmetto state armory");
        b.close();
        b.open("listing");
        b.text("Shop Firearms Item");
        b.entity(e::product, d.product);
        b.text("Brand");
        b.entity(e::brand, d.brand);
        b.close();
        b.open("listing");
        b.text("SKU");
        b.entity(e::sku, d.sku);
        b.text("Category");
        b.entity(e::model, d.model);
        b.close();
        b.open("listing");
        b.text("Availability");
        b.entity(e::quantity_in_stock, d.qty);
        b.text("Price");
        b.entity(e::product_price, d.price);
        b.text("USD");
        b.close();
        b.open("vendor", "table");
        b.text("Vendor");
        b.entity(e::vendor_name, d.vendor);
        b.close();
        break;
    }
}

const Words& filler_vocab(MarketId m) {
    if (m == MarketId::cocorico) return kFrFiller;
    if (m == MarketId::palmetto) return kGunFiller;
    return kEnFiller;
}

void render_filler(PageBuilder& b, Rng& rng, MarketId m, std::size_t target) {
    static const char* kBlocks[] = {"reviews", "shipping", "terms", "about", "news"};
    const auto& vocab = filler_vocab(m);
    while (b.words() < target) {
        b.open(kBlocks[rng.below(5)], rng.chance(0.3) ? "table" : "div");
        const std::size_t block = static_cast<std::size_t>(rng.range(20, 45));
        const std::size_t stop = std::min(target, b.words() + block);
        while (b.words() < stop) {
            const long long room = static_cast<long long>(stop - b.words());
            b.text(sentence(rng, vocab, std::min<long long>(6, room), std::min<long long>(14, room)));
        }
        b.close();
    }
}

GroundTruthListing render_page(MarketId m, std::size_t index, std::size_t count,
                               const CorpusConfig& config, const Words& vendors) {
    const auto& tpl = market_template(m);
    Rng rng(derive_seed(config.seed, std::string(to_string(m)) + "#" + std::to_string(index)));
    const bool noisy = rng.chance(config.noise_rate);
    const Draw d = m == MarketId::palmetto ? draw_gun_listing(rng, vendors) : draw_drug_listing(rng, m, vendors);

    GroundTruthListing page;
    page.market_id = m;
    page.language = tpl.language;
    page.page_id = page_id_for(m, index);
    page.url = url_for(m, page.page_id);

    if (count > 1) {
        // Own stream: link targets depend on the market size, page content does not.
        Rng link_rng(derive_seed(config.seed, "links/" + page.page_id));
        for (int k = 0; k < 2; ++k) {
            std::size_t other = link_rng.below(count - 1);
            if (other >= index) ++other;
            page.related.push_back(url_for(m, page_id_for(m, other)));
        }
    }

    PageBuilder b(rng, noisy);
    render_listing(b, m, d);
    const double target = tpl.token_budget * rng.uniform(0.8, 1.2);
    const std::size_t footer = page.related.size() * 2;
    const std::size_t want = static_cast<std::size_t>(target) > b.words() + footer
                                 ? static_cast<std::size_t>(target) - footer
                                 : b.words();
    render_filler(b, rng, m, want);
    b.open("footer");
    for (const auto& r : page.related) b.link(r, tpl.language == Language::fr ? "voir aussi" : "see also");
    b.close();
    page.html = b.finish();
    page.entities = b.take_entities();
    return page;
}

} // namespace

const MarketTemplate& market_template(MarketId id) { return templates().at(id); }

std::size_t count_words(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    bool real = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (space) {
            if (in_word && real) ++n;
            in_word = real = false;
        } else {
            in_word = true;
            if (c != '&' && c != '*' && c != ';' && c != ':') real = true;
        }
    }
    if (in_word && real) ++n;
    return n;
}

std::map<MarketId, std::size_t> CorpusConfig::parse_counts(const std::string& spec) {
    std::map<MarketId, std::size_t> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("expected market:count, got '" + item + "'");
        const MarketId m = parse_market(item.substr(0, colon));
        long long n = 0;
        try {
            std::size_t used = 0;
            n = std::stoll(item.substr(colon + 1), &used);
            if (used != item.size() - colon - 1) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("bad page count in '" + item + "'");
        }
        if (n < 0) throw ConfigError("negative page count in '" + item + "'");
        out[m] = static_cast<std::size_t>(n);
    }
    return out;
}

Corpus generate_corpus(const CorpusConfig& config) {
    if (config.noise_rate < 0.0 || config.noise_rate > 1.0) {
        throw ConfigError("noise rate must lie in [0, 1]");
    }
    Corpus corpus;
    Json counts = Json::object();
    for (const auto& [m, n] : config.counts) {
        counts[std::string(to_string(m))] = n;
        const Words vendors = vendor_pool(m);
        for (std::size_t i = 0; i < n; ++i) {
            corpus.listings.push_back(render_page(m, i, n, config, vendors));
            const auto& p = corpus.listings.back();
            corpus.manifest.push_back({{"page_id", p.page_id},
                                       {"url", p.url},
                                       {"market_id", to_string(p.market_id)},
                                       {"language", to_string(p.language)}});
        }
    }
    corpus.config = {{"seed", config.seed}, {"noise_rate", config.noise_rate}, {"counts", counts}};
    return corpus;
}

std::map<std::string, std::size_t> entity_inventory(const std::vector<GroundTruthListing>& corpus) {
    std::map<std::string, std::size_t> out;
    for (const auto& page : corpus) {
        for (const auto& e : page.entities) ++out[e.entity_type];
    }
    return out;
}

std::string render_overview(const std::vector<GroundTruthListing>& corpus) {
    std::string html = "<html><body>\n<div class=\"header\">Listings overview</div>\n<div class=\"listing\">\n";
    for (const auto& p : corpus) {
        html += "<a href=\"" + p.url + "\">" + p.page_id + "</a>\n";
    }
    html += "</div>\n</body></html>\n";
    return html;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
    std::filesystem::create_directories(dir / "pages");
    std::vector<Json> truth;
    for (const auto& p : corpus.listings) {
        write_file(dir / "pages" / (p.page_id + ".html"), p.html);
        for (const auto& e : p.entities) {
            truth.push_back({{"page_id", p.page_id},
                             {"entity_type", e.entity_type},
                             {"char_start", e.char_start},
                             {"char_end", e.char_end},
                             {"surface", e.surface}});
        }
    }
    write_jsonl(dir / "manifest.jsonl", std::vector<Json>(corpus.manifest.begin(), corpus.manifest.end()));
    write_jsonl(dir / "ground_truth.jsonl", truth);
    write_json(dir / "corpus.json", corpus.config);
}

Corpus read_corpus(const std::filesystem::path& dir) {
    require_exists(dir / "manifest.jsonl");
    Corpus corpus;
    std::map<std::string, std::size_t> index;
    read_jsonl(dir / "manifest.jsonl", [&](const Json& r, std::size_t line) {
        GroundTruthListing p;
        try {
            p.page_id = r.at("page_id").get<std::string>();
            p.url = r.at("url").get<std::string>();
            p.market_id = parse_market(r.at("market_id").get<std::string>());
            p.language = parse_language(r.at("language").get<std::string>());
        } catch (const Json::exception& e) {
            throw DataError((dir / "manifest.jsonl").string() + ":" + std::to_string(line) + ": " + e.what());
        } catch (const ConfigError& e) {
            throw DataError((dir / "manifest.jsonl").string() + ":" + std::to_string(line) + ": " + e.what());
        }
        const auto page_path = dir / "pages" / (p.page_id + ".html");
        require_exists(page_path);
        p.html = read_file(page_path);
        index[p.page_id] = corpus.listings.size();
        corpus.manifest.push_back(r);
        corpus.listings.push_back(std::move(p));
    });
    const auto truth_path = dir / "ground_truth.jsonl";
    if (std::filesystem::exists(truth_path)) {
        read_jsonl(truth_path, [&](const Json& r, std::size_t line) {
            const auto where = truth_path.string() + ":" + std::to_string(line);
            try {
                const auto id = r.at("page_id").get<std::string>();
                const auto it = index.find(id);
                if (it == index.end()) throw DataError(where + ": unknown page_id " + id);
                auto& page = corpus.listings[it->second];
                GroundTruthEntity e{r.at("entity_type").get<std::string>(),
                                    r.at("char_start").get<std::size_t>(),
                                    r.at("char_end").get<std::size_t>(),
                                    r.at("surface").get<std::string>()};
                if (e.char_start > e.char_end || e.char_end > page.html.size() ||
                    page.html.compare(e.char_start, e.char_end - e.char_start, e.surface) != 0) {
                    throw DataError(where + ": entity offsets do not match the page");
                }
                page.entities.push_back(std::move(e));
            } catch (const Json::exception& e) {
                throw DataError(where + ": " + e.what());
            }
        });
    }
    if (std::filesystem::exists(dir / "corpus.json")) corpus.config = read_json(dir / "corpus.json");
    return corpus;
}

const std::vector<std::string>& french_only_vocabulary() {
    static const std::vector<std::string> v = [] {
        std::set<std::string> en;
        auto add_words = [](std::set<std::string>& s, const std::string& text) {
            std::stringstream ss(text);
            std::string w;
            while (ss >> w) s.insert(w);
        };
        for (const auto* list : {&kEnFiller, &kEnDescription, &kEnDescriptors, &kAmounts, &kSilkroadSub,
                                 &kGunCategories, &kGunBrands, &kGunModels, &kGunSizes, &kGunKinds,
                                 &kGunFiller, &kVendorHead, &kVendorTail}) {
            for (const auto& w : *list) add_words(en, w);
        }
        for (const auto& s : kEnSubstances) {
            add_words(en, s.name);
            add_words(en, s.category);
        }
        for (MarketId m : kAllMarkets) {
            if (market_template(m).language == Language::en) {
                for (const auto& k : market_template(m).keywords) add_words(en, k);
            }
        }
        for (const char* w : {"1listings", "message", "see", "also", "silk", "road", "agartha",
                              "berlusconi", "cannahome", "darkmarket", "palmetto", "state", "armory",
                              "shop", "firearms", "listings", "overview"}) {
            en.insert(w);
        }
        std::set<std::string> fr;
        for (const auto* list : {&kFrFiller, &kFrDescription, &kFrDescriptors}) {
            for (const auto& w : *list) add_words(fr, w);
        }
        for (const auto& s : kFrSubstances) {
            add_words(fr, s.name);
            add_words(fr, s.category);
        }
        for (const auto& k : market_template(MarketId::cocorico).keywords) add_words(fr, k);
        add_words(fr, "voir aussi");
        std::vector<std::string> out;
        for (const auto& w : fr) {
            if (!en.count(w)) out.push_back(w);
        }
        return out;
    }();
    return v;
}

} // namespace dnmx::sim
