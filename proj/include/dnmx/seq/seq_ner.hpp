#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dnmx/core/jsonl.hpp"
#include "dnmx/dataset/dataset.hpp"
#include "dnmx/extract/patterns.hpp"
#include "dnmx/nn/layers.hpp"

namespace dnmx::seq {

struct SeqModelConfig {
    std::size_t dim = 64;            ///< embedding width
    std::size_t state = 100;         ///< LSTM state per direction, both layers
    std::size_t conv_channels = 64;
    std::size_t conv_kernel = 3;
    std::size_t buckets = 4096;      ///< character-trigram hash buckets
    std::uint64_t hash_seed = 0x5eed;
    std::size_t max_span = 12;       ///< K_seq: end is searched in [start, start + K_seq)
    std::size_t pad_len = dataset::kMaxLen;
    std::vector<std::string> types = core_entity_types();  ///< one head pair per type

    Json to_json() const;
    static SeqModelConfig from_json(const Json& j);
};

/// A padded page: ids/mask of length pad_len plus trigram buckets for the
/// real tokens.
struct SeqInput {
    dataset::Padded padded;
    std::vector<std::vector<int>> grams;
};

/// Token span predicted for one type; end inclusive.
struct SeqSpan {
    std::string type;
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0.0;  ///< p_start(start) · p_end(end)

    bool operator==(const SeqSpan&) const = default;
};

class SeqNerModel {
public:
    SeqNerModel(dataset::Vocab vocab, SeqModelConfig config, std::uint64_t init_seed);

    SeqInput prepare(const std::vector<std::string>& tokens) const;

    struct Forward {
        nn::Var conv_in;  ///< BiLSTM-2 output plus the residual BiLSTM-1 output, len×2·state
        nn::Var logits;   ///< 2M×len: rows [0, M) start heads, [M, 2M) end heads
        std::size_t length = 0;
    };

    /// With a dropout rng the pass is in training mode (dropout p_embed after
    /// the embedding, p_lstm after the residual BiLSTM). InputError when the
    /// input has no real token or its ids/mask do not have pad_len entries.
    Forward forward(nn::Tape& t, const SeqInput& in, Rng* dropout_rng = nullptr, double p_embed = 0.68,
                    double p_lstm = 0.5);

    /// Σ over types of CE(start) + CE(end). Types without a gold span inside
    /// the kept length are masked out.
    nn::Var loss(nn::Tape& t, const Forward& f, const std::vector<dataset::TokenSpan>& gold);

    /// Start and end distributions, each M×pad_len, zero on padded positions.
    std::pair<nn::Matrix, nn::Matrix> distributions(const SeqInput& in);

    /// One span per type: argmax start; end is the argmax over
    /// [start, start + K_seq) unless the global end argmax lies before
    /// start, in which case it is clamped to start.
    std::vector<SeqSpan> predict(const std::vector<std::string>& tokens);
    /// predict() as labels with character offsets into the space-joined tokens.
    std::vector<extract::LabeledEntity> predict_entities(const std::string& page_id,
                                                         const std::vector<std::string>& tokens);

    nn::ParamList params();
    const dataset::Vocab& vocab() const { return vocab_; }
    const SeqModelConfig& config() const { return config_; }

    nn::HashEmbedding emb;
    nn::BiLstm lstm1, lstm2;
    nn::Conv1d conv;
    nn::Linear heads;  ///< [conv_i, pooled] → 2M logits

private:
    dataset::Vocab vocab_;
    SeqModelConfig config_;
};

/// Decoding rule on one head pair's distributions over `length` positions.
SeqSpan decode_pointer(const std::vector<double>& p_start, const std::vector<double>& p_end, std::size_t length,
                       std::size_t max_span);

struct SeqTrainConfig {
    std::size_t epochs = 10;
    std::size_t batch = 8;
    double lr = 1e-3;
    double dropout_embed = 0.68;
    double dropout_lstm = 0.5;
    std::size_t pad_len = dataset::kMaxLen;
    std::uint64_t seed = 0;
    bool log_metrics = true;  ///< evaluate after every epoch

    void validate() const;
    Json to_json() const;
    static SeqTrainConfig from_json(const Json& j);
};

struct TypeMetrics {
    std::size_t tp = 0, fp = 0, fn = 0;
    std::size_t correct = 0, with_gold = 0;
    double accuracy() const;  ///< exact span on pages that have a gold span
    double precision() const;
    double recall() const;
    double f1() const;
};

struct EpochLog {
    std::size_t epoch = 0;  ///< 1-based
    double loss = 0.0;      ///< summed training loss over the epoch
    std::map<std::string, TypeMetrics> metrics;
};

/// Exact-match metrics of predict() on `data`: every page yields one span
/// per head type; a span counts as tp when it equals the page's gold span.
std::map<std::string, TypeMetrics> evaluate(SeqNerModel& model, const std::vector<dataset::AnnotatedListing>& data);

struct SeqTrainResult {
    std::vector<EpochLog> log;
};

/// Per-epoch metrics are computed on `eval_data` (the training data when
/// empty) unless log_metrics is off.
SeqTrainResult train(SeqNerModel& model, const std::vector<dataset::AnnotatedListing>& data,
                     const SeqTrainConfig& config, const std::vector<dataset::AnnotatedListing>& eval_data = {},
                     const std::function<void(const EpochLog&)>& on_epoch = {});

/// Training tokens only.
dataset::Vocab build_vocab(const std::vector<dataset::AnnotatedListing>& data);

void save_model(const std::filesystem::path& path, SeqNerModel& model, const Json& extra = Json::object());
SeqNerModel load_model(const std::filesystem::path& path);

} // namespace dnmx::seq
