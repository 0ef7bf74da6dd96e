#include "dnmx/nn/layers.hpp"

#include <cmath>

#include "dnmx/core/hash.hpp"

namespace dnmx::nn {

void init_uniform(Param& p, Rng& rng, double bound) {
    for (auto& v : p.value.data) v = rng.uniform(-bound, bound);
}

void init_xavier(Param& p, Rng& rng) {
    const double fan = static_cast<double>(p.value.rows + p.value.cols);
    init_uniform(p, rng, std::sqrt(6.0 / fan));
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out)
    : w(name + ".w", in, out), b(name + ".b", 1, out) {}

void Linear::init(Rng& rng) {
    init_xavier(w, rng);
    std::fill(b.value.data.begin(), b.value.data.end(), 0.0);
}

Var Linear::operator()(Tape& t, Var x) { return add(matmul(x, t.param(w)), t.param(b)); }

void Linear::collect(ParamList& out) {
    out.push_back(&w);
    out.push_back(&b);
}

Ffn2::Ffn2(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out)
    : l1(name + ".l1", in, hidden), l2(name + ".l2", hidden, out) {}

void Ffn2::init(Rng& rng) {
    l1.init(rng);
    l2.init(rng);
}

Var Ffn2::operator()(Tape& t, Var x) { return l2(t, tanh(l1(t, x))); }

void Ffn2::collect(ParamList& out) {
    l1.collect(out);
    l2.collect(out);
}

Lstm::Lstm(const std::string& name, std::size_t in, std::size_t hidden)
    : wx(name + ".wx", in, 4 * hidden), wh(name + ".wh", hidden, 4 * hidden), b(name + ".b", 1, 4 * hidden) {}

void Lstm::init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden()));
    init_uniform(wx, rng, bound);
    init_uniform(wh, rng, bound);
    const std::size_t H = hidden();
    for (std::size_t j = 0; j < 4 * H; ++j) b.value.data[j] = (j >= H && j < 2 * H) ? 1.0 : 0.0;
}

Var Lstm::operator()(Tape& t, Var x, bool reverse) {
    return lstm_sequence(x, t.param(wx), t.param(wh), t.param(b), reverse);
}

void Lstm::collect(ParamList& out) {
    out.push_back(&wx);
    out.push_back(&wh);
    out.push_back(&b);
}

BiLstm::BiLstm(const std::string& name, std::size_t in, std::size_t hidden)
    : fwd(name + ".fwd", in, hidden), bwd(name + ".bwd", in, hidden) {}

void BiLstm::init(Rng& rng) {
    fwd.init(rng);
    bwd.init(rng);
}

Var BiLstm::operator()(Tape& t, Var x) { return concat_cols({fwd(t, x, false), bwd(t, x, true)}); }

void BiLstm::collect(ParamList& out) {
    fwd.collect(out);
    bwd.collect(out);
}

Conv1d::Conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t k)
    : w(name + ".w", k * in, out), b(name + ".b", 1, out), kernel(k) {}

void Conv1d::init(Rng& rng) {
    init_xavier(w, rng);
    std::fill(b.value.data.begin(), b.value.data.end(), 0.0);
}

Var Conv1d::operator()(Tape& t, Var x) { return conv1d(x, t.param(w), t.param(b), kernel); }

void Conv1d::collect(ParamList& out) {
    out.push_back(&w);
    out.push_back(&b);
}

std::vector<int> char_gram_buckets(std::string_view word, std::size_t buckets, std::uint64_t seed) {
    std::vector<int> out;
    if (buckets == 0) return out;
    const std::string padded = "<" + std::string(word) + ">";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        out.push_back(static_cast<int>(fnv1a(std::string_view(padded).substr(i, 3), seed) % buckets));
    }
    return out;
}

HashEmbedding::HashEmbedding(const std::string& name, std::size_t vocab, std::size_t n_buckets, std::size_t dim,
                             std::uint64_t seed)
    : table(name + ".table", vocab, dim), buckets(name + ".buckets", n_buckets, dim), hash_seed(seed) {}

void HashEmbedding::init(Rng& rng) {
    for (auto& v : table.value.data) v = rng.normal();
    for (auto& v : buckets.value.data) v = rng.normal();
    // Row 0 is padding. Row 1 (UNK) starts at zero too: no training token maps
    // to it, so an unseen word is carried by its trigram buckets alone rather
    // than by a random vector shared by every unseen word.
    for (std::size_t j = 0; j < dim(); ++j) table.value(0, j) = table.value(1, j) = 0.0;
}

Var HashEmbedding::operator()(Tape& t, const std::vector<int>& ids, const std::vector<std::vector<int>>& grams) {
    return hash_embed(t.param(table), t.param(buckets), ids, grams);
}

std::vector<int> HashEmbedding::grams(std::string_view word) const {
    return char_gram_buckets(word, buckets.value.rows, hash_seed);
}

void HashEmbedding::collect(ParamList& out) {
    out.push_back(&table);
    out.push_back(&buckets);
}

} // namespace dnmx::nn
