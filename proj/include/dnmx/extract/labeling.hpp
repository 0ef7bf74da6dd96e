#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dnmx/core/entities.hpp"
#include "dnmx/core/jsonl.hpp"
#include "dnmx/extract/normalize.hpp"
#include "dnmx/extract/patterns.hpp"

namespace dnmx::extract {

/// One page of the annotated corpus: normalized text plus its labels.
struct AnnotatedDoc {
    NormalizedDoc doc;
    std::vector<LabeledEntity> entities;
};

/// make_doc followed by apply_patterns.
AnnotatedDoc annotate_page(const std::string& page_id, MarketId market, Language lang, std::string_view html,
                           const PatternSet& patterns);

Json to_json(const AnnotatedDoc& a);
/// Validates offsets against the text; DataError on violation.
AnnotatedDoc annotated_from_json(const Json& j);
void write_annotated(const std::filesystem::path& path, const std::vector<AnnotatedDoc>& docs);
std::vector<AnnotatedDoc> read_annotated(const std::filesystem::path& path);

struct TruthEntity {
    std::string entity_type;
    std::string surface;
};

struct PageTruth {
    std::string page_id;
    MarketId market = MarketId::agartha_item;
    std::vector<TruthEntity> entities;
};

struct PageLabels {
    std::string page_id;
    MarketId market = MarketId::agartha_item;
    std::vector<LabeledEntity> labels;
};

struct LabelingRow {
    std::size_t attempted = 0;     ///< ground-truth entities of this type
    std::size_t matched = 0;       ///< of those, pages where the type got a label
    std::size_t exact_correct = 0; ///< labels whose surface equals ground truth
    std::size_t spurious = 0;      ///< labels for a type absent from ground truth

    double accuracy() const {
        return attempted == 0 ? 0.0 : static_cast<double>(exact_correct) / static_cast<double>(attempted);
    }
    LabelingRow& operator+=(const LabelingRow& o);
};

struct LabelingReport {
    std::map<std::pair<MarketId, std::string>, LabelingRow> rows;
    std::map<MarketId, LabelingRow> per_market;
    std::map<std::string, LabelingRow> per_type;
    LabelingRow overall;

    double overall_accuracy() const { return overall.accuracy(); }
    std::string to_csv() const;
    std::string summary() const;
};

/// Scores regex labels against ground truth by (type, surface). The two
/// inputs must cover the same page ids (DataError otherwise).
LabelingReport verify_labels(const std::vector<PageLabels>& labeled,
                             const std::vector<PageTruth>& truth);

struct VendorMarketCount {
    std::string vendor;
    MarketId market;
    std::size_t count;
    bool operator==(const VendorMarketCount&) const = default;
};

struct ValueCount {
    std::string value;
    std::size_t count;
    bool operator==(const ValueCount&) const = default;
};

struct CorpusStats {
    std::vector<VendorMarketCount> top_vendor_markets; ///< at most 10
    std::vector<ValueCount> top_models;                ///< at most 10
    std::map<MarketId, std::size_t> listings;
    std::map<MarketId, double> share;                  ///< sums to 1 when non-empty

    std::string vendors_csv() const;
    std::string models_csv() const;
    std::string shares_csv() const;
};

/// Ties are broken by name so the tables are deterministic.
CorpusStats corpus_stats(const std::vector<AnnotatedDoc>& docs);

} // namespace dnmx::extract
