#pragma once

#include <utility>
#include <vector>

#include "dnmx/core/rng.hpp"
#include "dnmx/nn/tensor.hpp"

namespace dnmx::nn {

// Every op records its backward pass on the tape of its first operand and
// throws ShapeError (naming the op) on incompatible operands.

Var matmul(Var a, Var b);       ///< a·b
Var matmul_nt(Var a, Var b);    ///< a·bᵀ
Var transpose(Var a);
/// Elementwise sum. b may also be a 1×n row broadcast over a's rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);          ///< elementwise
Var scale(Var a, double s);
Var sum(Var a);                 ///< 1×1
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var gather_rows(Var a, const std::vector<int>& rows);

Var sigmoid(Var a);
Var tanh(Var a);
/// Row-wise softmax over the first `valid` columns; the rest are exactly 0.
Var softmax_rows(Var a, std::size_t valid);
inline Var softmax_rows(Var a) { return softmax_rows(a, a.cols()); }
/// Mean of the first `valid` rows → 1×cols.
Var mean_rows(Var a, std::size_t valid);
inline Var mean_rows(Var a) { return mean_rows(a, a.rows()); }

/// Same-padded 1-D convolution over rows. x: N×Cin, w: (k·Cin)×Cout with
/// tap j occupying rows [j·Cin, (j+1)·Cin), b: 1×Cout. Output N×Cout.
Var conv1d(Var x, Var w, Var b, std::size_t kernel);

/// One LSTM cell step, gate order [input, forget, candidate, output].
/// x: 1×Din, h, c: 1×H, wx: Din×4H, wh: H×4H, b: 1×4H. Returns (h', c').
std::pair<Var, Var> lstm_step(Var x, Var h, Var c, Var wx, Var wh, Var b);

/// A whole unidirectional LSTM pass from zero state, fused for speed.
/// x: N×Din → N×H. With reverse the sequence is consumed from the end and
/// outputs stay aligned with their input rows.
Var lstm_sequence(Var x, Var wx, Var wh, Var b, bool reverse);

/// Inverted dropout: kept entries are scaled by 1/(1-p). Identity when
/// !train or p == 0.
Var dropout(Var a, double p, Rng& rng, bool train);

/// Σ w·BCE(σ(logit), y), computed from logits. targets and weights have the
/// size of logits; weight 0 excludes an entry.
Var bce_with_logits(Var logits, const std::vector<double>& targets, const std::vector<double>& weights);
/// BCE on probabilities, Σ −[y log p + (1−y) log(1−p)], with p clamped away from 0/1.
Var bce_loss(Var probs, const std::vector<double>& targets);

/// Σ over rows of −log softmax(row[0..valid))[target]; rows with target < 0
/// are skipped.
Var ce_loss(Var logits, const std::vector<int>& targets, std::size_t valid);

/// Hash embedding lookup: out[i] = table[ids[i]] + mean of buckets[grams[i]].
/// An empty gram list contributes nothing.
Var hash_embed(Var table, Var buckets, const std::vector<int>& ids,
               const std::vector<std::vector<int>>& grams);

/// Fused span scoring: logit(s, t) = tanh(a[i_s] + b[j_s]) · r[t] + c[t].
/// a, b: N×D, r: M×D, c: M×1. Output S×M.
Var pair_tanh_dot(Var a, Var b, const std::vector<std::pair<int, int>>& spans, Var r, Var c);

} // namespace dnmx::nn
