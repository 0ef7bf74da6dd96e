#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dnmx/dataset/dataset.hpp"
#include "dnmx/nn/layers.hpp"
#include "dnmx/nn/optim.hpp"

namespace dnmx::span {

struct SpanModelConfig {
    std::size_t dim = 64;         ///< D: embedding, encoder output, q and S_ij width
    std::size_t hidden = 64;      ///< recurrent state per direction
    std::size_t buckets = 4096;   ///< character-trigram hash buckets
    std::size_t max_width = 12;   ///< K
    std::uint64_t hash_seed = 0x5eed;
    /// "bilstm" (a BiLSTM over each token's [previous, own, next] embeddings),
    /// or "identity" (each position keeps its own embedding; a diagnostic
    /// encoder).
    std::string encoder = "bilstm";

    Json to_json() const;
    static SpanModelConfig from_json(const Json& j);
};

struct SpanPrediction {
    std::size_t start = 0;
    std::size_t end = 0;  ///< inclusive
    std::size_t type = 0;
    double score = 0.0;

    bool operator==(const SpanPrediction&) const = default;
};

/// All (i, j) with 0 ≤ i ≤ j < n and j − i < k, in lexicographic order.
std::vector<std::pair<int, int>> enumerate_spans(std::size_t n, std::size_t k);

/// Positive and negative (span, type) pairs of one example.
struct PairSets {
    std::vector<std::pair<int, int>> spans;  ///< candidate spans, rows of the logit matrix
    std::size_t types = 0;
    std::vector<double> targets;  ///< spans × types, 1 on positives
    std::vector<double> weights;  ///< per-pair BCE weight
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// Every gold pair no wider than k is positive, weight 1. Gold spans paired
/// with their other types are negatives of weight 1. Every other pair is a
/// negative of weight min(1, neg_ratio × (positives + those negatives) / count),
/// so together they weigh at most neg_ratio times the rest.
PairSets build_pairs(const dataset::SpanNerExample& ex, std::size_t k, double neg_ratio);

/// Greedy flat decoding: keep φ ≥ threshold, take by descending φ, skip any
/// span overlapping one already taken.
std::vector<SpanPrediction> decode(std::vector<SpanPrediction> candidates, double threshold);

class SpanNerModel {
public:
    SpanNerModel(dataset::Vocab vocab, SpanModelConfig config, std::uint64_t init_seed);

    struct Encoded {
        nn::Var p;  ///< M×D, one row per [ENT]
        nn::Var h;  ///< N×D, one row per text token
    };

    /// tokens: [ENT] t0 ... [SEP] text. InputError without exactly one [SEP].
    Encoded encode(nn::Tape& t, const std::vector<std::string>& tokens);

    /// S×M logits S_ijᵀ q_t, fused: the span FFN's first layer is split into
    /// left/right halves applied once per token, and the output layer is
    /// folded into the type vectors.
    nn::Var span_logits(nn::Tape& t, const Encoded& e, const std::vector<std::pair<int, int>>& spans);
    /// Same quantity through the literal FFN(h_i ⊗ h_j) path; kept for checking.
    nn::Var span_logits_reference(nn::Tape& t, const Encoded& e, const std::vector<std::pair<int, int>>& spans);

    /// Σ BCE over the pairs.
    nn::Var loss(nn::Tape& t, const dataset::SpanNerExample& ex, const PairSets& pairs);

    /// φ(i, j, t) for one span, recomputed from scratch. InputError on a bad index.
    double score(const dataset::SpanNerExample& ex, std::size_t i, std::size_t j, std::size_t type);

    std::vector<SpanPrediction> predict(const std::vector<std::string>& text, const std::vector<std::string>& types,
                                        double threshold = 0.5);

    nn::ParamList encoder_params();
    nn::ParamList other_params();
    nn::ParamList params();

    const dataset::Vocab& vocab() const { return vocab_; }
    const SpanModelConfig& config() const { return config_; }

    nn::HashEmbedding emb;
    nn::BiLstm enc;
    nn::Linear proj;     ///< 2·hidden → D
    nn::Ffn2 type_ffn;   ///< D → D → D
    nn::Param span_left, span_right, span_b1;  ///< first span layer, 2D → D, split by half
    nn::Linear span_out; ///< D → D

private:
    nn::Var embed(nn::Tape& t, const std::vector<std::string>& tokens);
    dataset::Vocab vocab_;
    SpanModelConfig config_;
};

struct SpanTrainConfig {
    std::size_t num_steps = 500;
    std::size_t batch = 2;
    double warmup_ratio = 0.1;
    double lr_encoder = 3e-3;
    double lr_others = 3e-3;
    bool shuffle_types = true;
    bool random_drop = true;
    double drop_prob = 0.5;
    double neg_ratio = 8.0;
    std::size_t max_types = dataset::kMaxTypes;
    std::size_t max_len = dataset::kMaxLen;
    std::size_t eval_every = 10;
    std::uint64_t seed = 0;

    void validate() const;
    Json to_json() const;
    static SpanTrainConfig from_json(const Json& j);
};

struct StepLog {
    std::size_t step;
    double loss;  ///< mean summed-BCE over the step's batch
    double lr_scale;
};

struct SpanTrainResult {
    std::vector<StepLog> log;
};

/// Types requested from every example: the given list in order. Absent
/// types are dropped (with drop_prob) and the rest shuffled per example.
/// Throws DivergenceError with the step index on a non-finite loss.
SpanTrainResult train(SpanNerModel& model, const std::vector<dataset::AnnotatedListing>& data,
                      const std::vector<std::string>& types, const SpanTrainConfig& config,
                      const std::function<void(const StepLog&)>& on_log = {});

/// Vocabulary over the training tokens plus the type names.
dataset::Vocab build_vocab(const std::vector<dataset::AnnotatedListing>& data, const std::vector<std::string>& types);

void save_model(const std::filesystem::path& path, SpanNerModel& model, const Json& extra = Json::object());
SpanNerModel load_model(const std::filesystem::path& path);

} // namespace dnmx::span
