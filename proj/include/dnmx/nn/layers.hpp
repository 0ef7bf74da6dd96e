#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dnmx/core/rng.hpp"
#include "dnmx/nn/ops.hpp"

namespace dnmx::nn {

using ParamList = std::vector<Param*>;

/// Uniform in [-bound, bound].
void init_uniform(Param& p, Rng& rng, double bound);
/// Glorot uniform with fan_in = rows, fan_out = cols.
void init_xavier(Param& p, Rng& rng);

/// y = x·W + b. W: in×out, b: 1×out.
struct Linear {
    Param w, b;

    Linear() = default;
    Linear(const std::string& name, std::size_t in, std::size_t out);
    void init(Rng& rng);
    Var operator()(Tape& t, Var x);
    void collect(ParamList& out);
};

/// Two linear layers with tanh between them.
struct Ffn2 {
    Linear l1, l2;

    Ffn2() = default;
    Ffn2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out);
    void init(Rng& rng);
    Var operator()(Tape& t, Var x);
    void collect(ParamList& out);
};

/// Gate order [input, forget, candidate, output]; the forget bias starts at 1.
struct Lstm {
    Param wx, wh, b;

    Lstm() = default;
    Lstm(const std::string& name, std::size_t in, std::size_t hidden);
    std::size_t hidden() const { return wh.value.rows; }
    void init(Rng& rng);
    Var operator()(Tape& t, Var x, bool reverse);
    void collect(ParamList& out);
};

/// Forward and backward passes concatenated: N×in → N×2H.
struct BiLstm {
    Lstm fwd, bwd;

    BiLstm() = default;
    BiLstm(const std::string& name, std::size_t in, std::size_t hidden);
    void init(Rng& rng);
    Var operator()(Tape& t, Var x);
    void collect(ParamList& out);
};

struct Conv1d {
    Param w, b;
    std::size_t kernel = 3;

    Conv1d() = default;
    Conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel);
    void init(Rng& rng);
    Var operator()(Tape& t, Var x);
    void collect(ParamList& out);
};

/// Character trigram buckets of "<word>", hashed with FNV-1a under `seed`.
std::vector<int> char_gram_buckets(std::string_view word, std::size_t buckets, std::uint64_t seed);

/// Vocabulary table plus hashed character-trigram buckets, so any string
/// (seen or not) gets a vector.
struct HashEmbedding {
    Param table, buckets;
    std::uint64_t hash_seed = 0;

    HashEmbedding() = default;
    HashEmbedding(const std::string& name, std::size_t vocab, std::size_t n_buckets, std::size_t dim,
                  std::uint64_t hash_seed);
    std::size_t dim() const { return table.value.cols; }
    void init(Rng& rng);
    /// grams[i] are bucket indices for token i (see char_gram_buckets).
    Var operator()(Tape& t, const std::vector<int>& ids, const std::vector<std::vector<int>>& grams);
    std::vector<int> grams(std::string_view word) const;
    void collect(ParamList& out);
};

} // namespace dnmx::nn
