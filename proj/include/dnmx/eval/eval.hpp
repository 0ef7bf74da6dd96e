#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dnmx/core/error.hpp"
#include "dnmx/core/jsonl.hpp"
#include "dnmx/dataset/dataset.hpp"
#include "dnmx/seq/seq_ner.hpp"
#include "dnmx/span/span_ner.hpp"

namespace dnmx::eval {

/// A typed token span, end inclusive.
struct Triple {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string type;

    bool operator==(const Triple&) const = default;
    auto operator<=>(const Triple&) const = default;
};

/// Spans keyed by page_id.
using PageSpans = std::map<std::string, std::vector<Triple>>;

struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0;

    Counts& operator+=(const Counts& o);
    bool operator==(const Counts&) const = default;
};

struct MatchCounts {
    std::map<std::string, Counts> per_type;
    Counts micro;  ///< sums over per_type
};

/// Greedy one-to-one matching on identical (start, end, type) triples per
/// page. Unmatched predictions are FP, unmatched gold FN; a duplicated
/// prediction matches at most once.
MatchCounts exact_match(const PageSpans& predictions, const PageSpans& gold);

struct Metrics {
    double precision = 0, recall = 0, f1 = 0;
    bool precision_undefined = false;  ///< TP + FP = 0, reported as 0
    bool recall_undefined = false;     ///< TP + FN = 0, reported as 0

    bool flagged() const { return precision_undefined || recall_undefined; }
};

Metrics prf(const Counts& c);

struct EvalReport {
    std::string protocol;
    std::string model_id;
    std::string split;
    std::string market_scope;
    MatchCounts counts;

    Metrics micro() const { return prf(counts.micro); }
    Json to_json() const;
};

/// Gold spans of annotated listings.
PageSpans gold_spans(const std::vector<dataset::AnnotatedListing>& listings);
/// Gold restricted to the given types.
PageSpans filter_types(const PageSpans& spans, const std::vector<std::string>& types);

/// One line of a prediction dump: {page_id, spans: [{start, end, type, score}]}.
struct ScoredSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string type;
    double score = 0.0;
};

struct PagePrediction {
    std::string page_id;
    std::vector<ScoredSpan> spans;
};

Json prediction_json(const PagePrediction& p);
void write_predictions(const std::filesystem::path& path, const std::vector<PagePrediction>& preds);
PageSpans to_page_spans(const std::vector<PagePrediction>& preds);

/// Schema violations, unknown pages and out-of-range spans raise ImportError.
class ImportError : public DataError {
public:
    ImportError(std::size_t line, const std::string& detail)
        : DataError("line " + std::to_string(line) + ": " + detail), line_(line), detail_(detail) {}
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::size_t line_;
    std::string detail_;
};

/// doc_lengths: token count per known page_id.
PageSpans import_predictions(const std::filesystem::path& path, const std::map<std::string, std::size_t>& doc_lengths);
PageSpans import_predictions(std::istream& in, const std::map<std::string, std::size_t>& doc_lengths);

/// Span-ner predictions for every listing, requesting `types` on each page.
std::vector<PagePrediction> predict_span(span::SpanNerModel& model, const std::vector<dataset::AnnotatedListing>& pages,
                                         const std::vector<std::string>& types, double threshold);
/// Seq-ner predictions: one span per head type on every non-empty page.
std::vector<PagePrediction> predict_seq(seq::SeqNerModel& model, const std::vector<dataset::AnnotatedListing>& pages);

enum class Protocol { in_domain, zero_shot, fine_tune, robustness };
std::string_view to_string(Protocol p) noexcept;
Protocol parse_protocol(std::string_view s);

struct RobustnessConfig {
    MarketId market = MarketId::palmetto;
    std::vector<std::string> novel_types = {"sku", "brand"};
};

struct ProtocolConfig {
    Protocol protocol = Protocol::in_domain;
    std::string model = "span";  ///< "span" or "seq"
    span::SpanModelConfig span_model;
    span::SpanTrainConfig span_train;
    seq::SeqModelConfig seq_model;
    seq::SeqTrainConfig seq_train;
    MarketId held_out = MarketId::cocorico;  ///< zero_shot / fine_tune target market
    RobustnessConfig robustness;
    double threshold = 0.5;
    std::uint64_t seed = 0;

    Json to_json() const;
};

struct ProtocolResult {
    std::vector<EvalReport> reports;
    /// Predictions behind each report, same order.
    std::vector<std::vector<PagePrediction>> predictions;
    /// page_ids each evaluated model was trained on.
    std::vector<std::string> training_manifest;
};

/// A trained model under test and the page ids it saw. Exactly one of
/// span / seq is set; types are span-ner's training types.
struct TrainedModel {
    std::shared_ptr<span::SpanNerModel> span;
    std::shared_ptr<seq::SeqNerModel> seq;
    std::vector<std::string> types;
    std::vector<std::string> manifest;
    std::uint64_t seed = 0;
};

/// Builds the vocabulary from `pages`, initializes the configured model with
/// config.seed and trains it one stage.
TrainedModel train_model(const ProtocolConfig& config, const std::vector<dataset::AnnotatedListing>& pages);

/// Fails with ProtocolError when any evaluation page is in the training manifest.
void check_leakage(const std::vector<std::string>& training_ids, const std::vector<std::string>& eval_ids);

/// in_domain: train on split.train, evaluate split.test.
/// zero_shot: train on split.train minus the held-out market, evaluate the
///   held-out market's test pages.
/// fine_tune: the zero_shot model, trained further on the held-out market's
///   train pages; reports both the zero_shot and the fine_tune evaluation.
/// robustness: train on split.train, evaluate every page of `robustness_pages`
///   requesting the robustness market's types (novel ones included).
/// With `pretrained`, in_domain and robustness evaluate that model instead of
/// training one (its manifest is checked for leakage); the other protocols
/// reject it with ConfigError.
ProtocolResult run_protocol(const ProtocolConfig& config, const std::vector<dataset::AnnotatedListing>& corpus,
                            const dataset::SplitManifest& split,
                            const std::vector<dataset::AnnotatedListing>& robustness_pages = {},
                            const TrainedModel* pretrained = nullptr);

/// Entity types requested on the robustness market: its labeled types in
/// corpus order, with the novel types appended when missing.
std::vector<std::string> robustness_types(const std::vector<dataset::AnnotatedListing>& pages,
                                          const RobustnessConfig& config);

/// Published numbers shown as context only.
struct ReferenceRow {
    std::string label;
    std::string setting;
    double precision = -1, recall = -1, f1 = -1;  ///< percent; −1 when not published
};

const std::vector<ReferenceRow>& reference_table();

struct RenderedReport {
    std::string csv;
    std::string markdown;
};

/// CSV: a micro row per report followed by its per-type rows. Markdown: one
/// row per report, then the reference numbers as a labeled footer.
/// Zero-denominator cells carry a '*'.
RenderedReport render_report(const std::vector<EvalReport>& reports, const std::vector<ReferenceRow>& reference);

} // namespace dnmx::eval
