#include "dnmx/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "dnmx/core/error.hpp"

namespace dnmx::nn {

namespace {

std::string dims(Var v) { return std::to_string(v.rows()) + "x" + std::to_string(v.cols()); }

void require(bool ok, const char* op, const std::string& detail) {
    if (!ok) throw ShapeError(op, detail);
}

long L(std::size_t n) { return static_cast<long>(n); }

constexpr double kProbEps = 1e-12;

// Neumaier compensated sum, so loss totals carry no more rounding than a
// single term does.
struct Accumulator {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

double sigm(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

} // namespace

Var matmul(Var a, Var b) {
    require(a.cols() == b.rows(), "matmul", dims(a) + " · " + dims(b));
    auto out = a.tape().make(a.rows(), b.cols(), {a, b});
    out.val().noalias() = a.val() * b.val();
    if (out.needs_grad()) {
        out.node()->backward = [a, b, out] {
            if (a.needs_grad()) a.gmat().noalias() += out.gmat() * b.val().transpose();
            if (b.needs_grad()) b.gmat().noalias() += a.val().transpose() * out.gmat();
        };
    }
    return out;
}

Var matmul_nt(Var a, Var b) {
    require(a.cols() == b.cols(), "matmul_nt", dims(a) + " · " + dims(b) + "ᵀ");
    auto out = a.tape().make(a.rows(), b.rows(), {a, b});
    out.val().noalias() = a.val() * b.val().transpose();
    if (out.needs_grad()) {
        out.node()->backward = [a, b, out] {
            if (a.needs_grad()) a.gmat().noalias() += out.gmat() * b.val();
            if (b.needs_grad()) b.gmat().noalias() += out.gmat().transpose() * a.val();
        };
    }
    return out;
}

Var transpose(Var a) {
    auto out = a.tape().make(a.cols(), a.rows(), {a});
    out.val() = a.val().transpose();
    if (out.needs_grad()) {
        out.node()->backward = [a, out] { a.gmat() += out.gmat().transpose(); };
    }
    return out;
}

Var add(Var a, Var b) {
    const bool same = a.rows() == b.rows() && a.cols() == b.cols();
    const bool row = b.rows() == 1 && b.cols() == a.cols();
    require(same || row, "add", dims(a) + " + " + dims(b));
    auto out = a.tape().make(a.rows(), a.cols(), {a, b});
    if (same) {
        out.val() = a.val() + b.val();
    } else {
        out.val() = a.val().rowwise() + b.val().row(0);
    }
    if (out.needs_grad()) {
        out.node()->backward = [a, b, out, same] {
            if (a.needs_grad()) a.gmat() += out.gmat();
            if (b.needs_grad()) {
                if (same) {
                    b.gmat() += out.gmat();
                } else {
                    b.gmat().row(0) += out.gmat().colwise().sum();
                }
            }
        };
    }
    return out;
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "mul", dims(a) + " ⊙ " + dims(b));
    auto out = a.tape().make(a.rows(), a.cols(), {a, b});
    out.val() = a.val().cwiseProduct(b.val());
    if (out.needs_grad()) {
        out.node()->backward = [a, b, out] {
            if (a.needs_grad()) a.gmat() += out.gmat().cwiseProduct(b.val());
            if (b.needs_grad()) b.gmat() += out.gmat().cwiseProduct(a.val());
        };
    }
    return out;
}

Var scale(Var a, double s) {
    auto out = a.tape().make(a.rows(), a.cols(), {a});
    out.val() = a.val() * s;
    if (out.needs_grad()) {
        out.node()->backward = [a, out, s] { a.gmat() += out.gmat() * s; };
    }
    return out;
}

Var sum(Var a) {
    auto out = a.tape().make(1, 1, {a});
    Accumulator acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a.data()[i]);
    out.data()[0] = acc.value();
    if (out.needs_grad()) {
        out.node()->backward = [a, out] { a.gmat().array() += out.grad()[0]; };
    }
    return out;
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols", "no operands");
    std::size_t cols = 0;
    for (const auto& p : parts) {
        require(p.rows() == parts[0].rows(), "concat_cols", dims(parts[0]) + " | " + dims(p));
        cols += p.cols();
    }
    auto out = parts[0].tape().make(parts[0].rows(), cols, parts);
    long off = 0;
    for (const auto& p : parts) {
        out.val().middleCols(off, L(p.cols())) = p.val();
        off += L(p.cols());
    }
    if (out.needs_grad()) {
        out.node()->backward = [parts, out] {
            long o = 0;
            for (const auto& p : parts) {
                if (p.needs_grad()) p.gmat() += out.gmat().middleCols(o, L(p.cols()));
                o += L(p.cols());
            }
        };
    }
    return out;
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows", "no operands");
    std::size_t rows = 0;
    for (const auto& p : parts) {
        require(p.cols() == parts[0].cols(), "concat_rows", dims(parts[0]) + " / " + dims(p));
        rows += p.rows();
    }
    auto out = parts[0].tape().make(rows, parts[0].cols(), parts);
    long off = 0;
    for (const auto& p : parts) {
        out.val().middleRows(off, L(p.rows())) = p.val();
        off += L(p.rows());
    }
    if (out.needs_grad()) {
        out.node()->backward = [parts, out] {
            long o = 0;
            for (const auto& p : parts) {
                if (p.needs_grad()) p.gmat() += out.gmat().middleRows(o, L(p.rows()));
                o += L(p.rows());
            }
        };
    }
    return out;
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
    require(begin + count <= a.rows(), "slice_rows",
            "rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") of " + dims(a));
    auto out = a.tape().make(count, a.cols(), {a});
    out.val() = a.val().middleRows(L(begin), L(count));
    if (out.needs_grad()) {
        out.node()->backward = [a, out, begin, count] {
            a.gmat().middleRows(L(begin), L(count)) += out.gmat();
        };
    }
    return out;
}

Var gather_rows(Var a, const std::vector<int>& rows) {
    for (int r : rows) {
        require(r >= 0 && static_cast<std::size_t>(r) < a.rows(), "gather_rows",
                "row " + std::to_string(r) + " of " + dims(a));
    }
    auto out = a.tape().make(rows.size(), a.cols(), {a});
    for (std::size_t i = 0; i < rows.size(); ++i) out.val().row(L(i)) = a.val().row(rows[i]);
    if (out.needs_grad()) {
        out.node()->backward = [a, out, rows] {
            for (std::size_t i = 0; i < rows.size(); ++i) a.gmat().row(rows[i]) += out.gmat().row(L(i));
        };
    }
    return out;
}

Var sigmoid(Var a) {
    auto out = a.tape().make(a.rows(), a.cols(), {a});
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = sigm(a.data()[i]);
    if (out.needs_grad()) {
        out.node()->backward = [a, out, n] {
            for (std::size_t i = 0; i < n; ++i) {
                const double y = out.data()[i];
                a.grad()[i] += out.grad()[i] * y * (1.0 - y);
            }
        };
    }
    return out;
}

Var tanh(Var a) {
    auto out = a.tape().make(a.rows(), a.cols(), {a});
    out.val() = a.val().array().tanh();
    if (out.needs_grad()) {
        out.node()->backward = [a, out] {
            a.gmat().array() += out.gmat().array() * (1.0 - out.val().array().square());
        };
    }
    return out;
}

Var softmax_rows(Var a, std::size_t valid) {
    require(valid >= 1 && valid <= a.cols(), "softmax_rows",
            "valid " + std::to_string(valid) + " of " + dims(a));
    auto out = a.tape().make(a.rows(), a.cols(), {a});
    const long V = L(valid);
    for (long r = 0; r < L(a.rows()); ++r) {
        auto x = a.val().row(r).head(V).array();
        auto y = out.val().row(r).head(V).array();
        y = (x - x.maxCoeff()).exp();
        y /= y.sum();
    }
    if (out.needs_grad()) {
        out.node()->backward = [a, out, V] {
            for (long r = 0; r < L(a.rows()); ++r) {
                auto y = out.val().row(r).head(V).array();
                auto dy = out.gmat().row(r).head(V).array();
                const double dot = (y * dy).sum();
                a.gmat().row(r).head(V).array() += y * (dy - dot);
            }
        };
    }
    return out;
}

Var mean_rows(Var a, std::size_t valid) {
    require(valid >= 1 && valid <= a.rows(), "mean_rows",
            "valid " + std::to_string(valid) + " of " + dims(a));
    auto out = a.tape().make(1, a.cols(), {a});
    out.val() = a.val().topRows(L(valid)).colwise().mean();
    if (out.needs_grad()) {
        out.node()->backward = [a, out, valid] {
            a.gmat().topRows(L(valid)).rowwise() += out.gmat().row(0) / static_cast<double>(valid);
        };
    }
    return out;
}

Var conv1d(Var x, Var w, Var b, std::size_t kernel) {
    const std::size_t N = x.rows(), Cin = x.cols(), Cout = w.cols();
    require(kernel >= 1 && kernel % 2 == 1, "conv1d", "kernel must be odd");
    require(w.rows() == kernel * Cin, "conv1d", "weights " + dims(w) + " for input " + dims(x));
    require(b.rows() == 1 && b.cols() == Cout, "conv1d", "bias " + dims(b));
    const long half = L(kernel / 2);
    // im2col: row t holds taps x[t-half .. t+half], zero outside the sequence.
    RowMat cols = RowMat::Zero(L(N), L(kernel * Cin));
    for (long t = 0; t < L(N); ++t) {
        for (long j = 0; j < L(kernel); ++j) {
            const long s = t + j - half;
            if (s >= 0 && s < L(N)) cols.row(t).segment(j * L(Cin), L(Cin)) = x.val().row(s);
        }
    }
    auto out = x.tape().make(N, Cout, {x, w, b});
    out.val().noalias() = cols * w.val();
    out.val().rowwise() += b.val().row(0);
    if (out.needs_grad()) {
        out.node()->backward = [x, w, b, out, cols = std::move(cols), N, Cin, kernel, half] {
            if (w.needs_grad()) w.gmat().noalias() += cols.transpose() * out.gmat();
            if (b.needs_grad()) b.gmat().row(0) += out.gmat().colwise().sum();
            if (x.needs_grad()) {
                RowMat dcols = out.gmat() * w.val().transpose();
                for (long t = 0; t < L(N); ++t) {
                    for (long j = 0; j < L(kernel); ++j) {
                        const long s = t + j - half;
                        if (s >= 0 && s < L(N)) x.gmat().row(s) += dcols.row(t).segment(j * L(Cin), L(Cin));
                    }
                }
            }
        };
    }
    return out;
}

namespace {

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    auto out = a.tape().make(a.rows(), count, {a});
    out.val() = a.val().middleCols(L(begin), L(count));
    if (out.needs_grad()) {
        out.node()->backward = [a, out, begin, count] {
            a.gmat().middleCols(L(begin), L(count)) += out.gmat();
        };
    }
    return out;
}

} // namespace

std::pair<Var, Var> lstm_step(Var x, Var h, Var c, Var wx, Var wh, Var b) {
    const std::size_t H = h.cols();
    require(x.rows() == 1 && h.rows() == 1 && c.rows() == 1 && c.cols() == H, "lstm_step",
            "x " + dims(x) + ", h " + dims(h) + ", c " + dims(c));
    require(wx.rows() == x.cols() && wx.cols() == 4 * H, "lstm_step", "wx " + dims(wx));
    require(wh.rows() == H && wh.cols() == 4 * H, "lstm_step", "wh " + dims(wh));
    require(b.rows() == 1 && b.cols() == 4 * H, "lstm_step", "b " + dims(b));
    auto pre = add(add(matmul(x, wx), matmul(h, wh)), b);
    auto i = sigmoid(slice_cols(pre, 0, H));
    auto f = sigmoid(slice_cols(pre, H, H));
    auto g = tanh(slice_cols(pre, 2 * H, H));
    auto o = sigmoid(slice_cols(pre, 3 * H, H));
    auto c2 = add(mul(f, c), mul(i, g));
    auto h2 = mul(o, tanh(c2));
    return {h2, c2};
}

Var lstm_sequence(Var x, Var wx, Var wh, Var b, bool reverse) {
    const std::size_t N = x.rows(), H = wh.rows();
    require(wx.rows() == x.cols() && wx.cols() == 4 * H, "lstm_sequence", "wx " + dims(wx) + " for x " + dims(x));
    require(wh.cols() == 4 * H, "lstm_sequence", "wh " + dims(wh));
    require(b.rows() == 1 && b.cols() == 4 * H, "lstm_sequence", "b " + dims(b));
    const long n = L(N), h4 = L(4 * H), hh = L(H);

    // gates holds activated [i f g o]; cs the cell state, tcs tanh(cell).
    RowMat gates(n, h4);
    gates.noalias() = x.val() * wx.val();
    gates.rowwise() += b.val().row(0);
    RowMat cs(n, hh), tcs(n, hh);
    auto out = x.tape().make(N, H, {x, wx, wh, b});
    Eigen::RowVectorXd hprev = Eigen::RowVectorXd::Zero(hh), cprev = Eigen::RowVectorXd::Zero(hh);
    for (long k = 0; k < n; ++k) {
        const long t = reverse ? n - 1 - k : k;
        auto row = gates.row(t);
        row.noalias() += hprev * wh.val();
        for (long j = 0; j < hh; ++j) {
            row[j] = sigm(row[j]);
            row[hh + j] = sigm(row[hh + j]);
            row[2 * hh + j] = std::tanh(row[2 * hh + j]);
            row[3 * hh + j] = sigm(row[3 * hh + j]);
        }
        cs.row(t) = row.segment(hh, hh).cwiseProduct(cprev) + row.segment(0, hh).cwiseProduct(row.segment(2 * hh, hh));
        tcs.row(t) = cs.row(t).array().tanh().matrix();
        out.val().row(t) = row.segment(3 * hh, hh).cwiseProduct(tcs.row(t));
        hprev = out.val().row(t);
        cprev = cs.row(t);
    }
    if (out.needs_grad()) {
        out.node()->backward = [x, wx, wh, b, out, gates = std::move(gates), cs = std::move(cs),
                                tcs = std::move(tcs), n, hh, h4, reverse] {
            RowMat dpre(n, h4);
            RowMat hprev = RowMat::Zero(n, hh);
            Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(hh), dc_next = Eigen::RowVectorXd::Zero(hh);
            for (long k = n - 1; k >= 0; --k) {
                const long t = reverse ? n - 1 - k : k;
                const long tp = reverse ? t + 1 : t - 1;
                const bool first = k == 0;
                if (!first) hprev.row(t) = out.val().row(tp);
                const auto gr = gates.row(t);
                Eigen::RowVectorXd dh = out.gmat().row(t) + dh_next;
                for (long j = 0; j < hh; ++j) {
                    const double i = gr[j], f = gr[hh + j], g = gr[2 * hh + j], o = gr[3 * hh + j];
                    const double tc = tcs(t, j);
                    const double cp = first ? 0.0 : cs(tp, j);
                    const double dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
                    dpre(t, j) = dc * g * i * (1.0 - i);
                    dpre(t, hh + j) = dc * cp * f * (1.0 - f);
                    dpre(t, 2 * hh + j) = dc * i * (1.0 - g * g);
                    dpre(t, 3 * hh + j) = dh[j] * tc * o * (1.0 - o);
                    dc_next[j] = dc * f;
                }
                dh_next.noalias() = dpre.row(t) * wh.val().transpose();
            }
            if (wx.needs_grad()) wx.gmat().noalias() += x.val().transpose() * dpre;
            if (wh.needs_grad()) wh.gmat().noalias() += hprev.transpose() * dpre;
            if (b.needs_grad()) b.gmat().row(0) += dpre.colwise().sum();
            if (x.needs_grad()) x.gmat().noalias() += dpre * wx.val().transpose();
        };
    }
    return out;
}

Var dropout(Var a, double p, Rng& rng, bool train) {
    if (!(p >= 0.0 && p < 1.0)) throw ShapeError("dropout", "p must be in [0, 1)");
    if (!train || p == 0.0) return a;
    const std::size_t n = a.size();
    std::vector<double> mask(n);
    const double keep = 1.0 / (1.0 - p);
    for (auto& m : mask) m = rng.chance(p) ? 0.0 : keep;
    auto out = a.tape().make(a.rows(), a.cols(), {a});
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * mask[i];
    if (out.needs_grad()) {
        out.node()->backward = [a, out, mask = std::move(mask), n] {
            for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i] * mask[i];
        };
    }
    return out;
}

Var bce_with_logits(Var logits, const std::vector<double>& targets, const std::vector<double>& weights) {
    const std::size_t n = logits.size();
    require(targets.size() == n && weights.size() == n, "bce_with_logits",
            "logits " + dims(logits) + " with " + std::to_string(targets.size()) + " targets, " +
                std::to_string(weights.size()) + " weights");
    auto out = logits.tape().make(1, 1, {logits});
    Accumulator total;
    for (std::size_t i = 0; i < n; ++i) {
        if (weights[i] == 0.0) continue;
        const double x = logits.data()[i];
        total.add(weights[i] * (softplus(x) - targets[i] * x));
    }
    out.data()[0] = total.value();
    if (out.needs_grad()) {
        out.node()->backward = [logits, out, targets, weights, n] {
            const double g = out.grad()[0];
            for (std::size_t i = 0; i < n; ++i) {
                if (weights[i] == 0.0) continue;
                logits.grad()[i] += g * weights[i] * (sigm(logits.data()[i]) - targets[i]);
            }
        };
    }
    return out;
}

Var bce_loss(Var probs, const std::vector<double>& targets) {
    const std::size_t n = probs.size();
    require(targets.size() == n, "bce_loss", "probs " + dims(probs) + " with " + std::to_string(n) + " targets");
    auto out = probs.tape().make(1, 1, {probs});
    Accumulator total;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(probs.data()[i], kProbEps, 1.0 - kProbEps);
        total.add(-(targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p)));
    }
    out.data()[0] = total.value();
    if (out.needs_grad()) {
        out.node()->backward = [probs, out, targets, n] {
            const double g = out.grad()[0];
            for (std::size_t i = 0; i < n; ++i) {
                const double p = std::clamp(probs.data()[i], kProbEps, 1.0 - kProbEps);
                probs.grad()[i] += g * (-targets[i] / p + (1.0 - targets[i]) / (1.0 - p));
            }
        };
    }
    return out;
}

Var ce_loss(Var logits, const std::vector<int>& targets, std::size_t valid) {
    require(targets.size() == logits.rows(), "ce_loss",
            "logits " + dims(logits) + " with " + std::to_string(targets.size()) + " targets");
    require(valid >= 1 && valid <= logits.cols(), "ce_loss", "valid " + std::to_string(valid) + " of " + dims(logits));
    for (int t : targets) {
        require(t < static_cast<int>(valid), "ce_loss", "target " + std::to_string(t) + " beyond valid " + std::to_string(valid));
    }
    const long V = L(valid);
    auto out = logits.tape().make(1, 1, {logits});
    RowMat probs = RowMat::Zero(L(logits.rows()), V);
    Accumulator total;
    for (long r = 0; r < L(logits.rows()); ++r) {
        if (targets[r] < 0) continue;
        auto x = logits.val().row(r).head(V);
        const double m = x.maxCoeff();
        probs.row(r) = (x.array() - m).exp().matrix();
        const double z = probs.row(r).sum();
        probs.row(r) /= z;
        total.add(m + std::log(z) - x[targets[r]]);
    }
    out.data()[0] = total.value();
    if (out.needs_grad()) {
        out.node()->backward = [logits, out, targets, probs = std::move(probs), V] {
            const double g = out.grad()[0];
            for (long r = 0; r < L(logits.rows()); ++r) {
                if (targets[r] < 0) continue;
                auto d = logits.gmat().row(r).head(V);
                d += g * probs.row(r);
                d[targets[r]] -= g;
            }
        };
    }
    return out;
}

Var hash_embed(Var table, Var buckets, const std::vector<int>& ids, const std::vector<std::vector<int>>& grams) {
    require(table.cols() == buckets.cols(), "hash_embed", "table " + dims(table) + ", buckets " + dims(buckets));
    require(grams.size() == ids.size(), "hash_embed",
            std::to_string(ids.size()) + " ids with " + std::to_string(grams.size()) + " gram lists");
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < table.rows(), "hash_embed",
                "id " + std::to_string(ids[i]) + " of " + dims(table));
        for (int g : grams[i]) {
            require(g >= 0 && static_cast<std::size_t>(g) < buckets.rows(), "hash_embed",
                    "bucket " + std::to_string(g) + " of " + dims(buckets));
        }
    }
    auto out = table.tape().make(ids.size(), table.cols(), {table, buckets});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto row = out.val().row(L(i));
        row = table.val().row(ids[i]);
        if (grams[i].empty()) continue;
        const double w = 1.0 / static_cast<double>(grams[i].size());
        for (int g : grams[i]) row += w * buckets.val().row(g);
    }
    if (out.needs_grad()) {
        out.node()->backward = [table, buckets, out, ids, grams] {
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const auto d = out.gmat().row(L(i));
                if (table.needs_grad()) table.gmat().row(ids[i]) += d;
                if (!buckets.needs_grad() || grams[i].empty()) continue;
                const double w = 1.0 / static_cast<double>(grams[i].size());
                for (int g : grams[i]) buckets.gmat().row(g) += w * d;
            }
        };
    }
    return out;
}

Var pair_tanh_dot(Var a, Var b, const std::vector<std::pair<int, int>>& spans, Var r, Var c) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "pair_tanh_dot", "a " + dims(a) + ", b " + dims(b));
    require(r.cols() == a.cols(), "pair_tanh_dot", "r " + dims(r) + " for a " + dims(a));
    require(c.rows() == r.rows() && c.cols() == 1, "pair_tanh_dot", "c " + dims(c) + " for r " + dims(r));
    for (const auto& [i, j] : spans) {
        require(i >= 0 && j >= 0 && static_cast<std::size_t>(std::max(i, j)) < a.rows(), "pair_tanh_dot",
                "span (" + std::to_string(i) + ", " + std::to_string(j) + ") of " + dims(a));
    }
    const long S = L(spans.size()), D = L(a.cols());
    RowMat u(S, D);
    for (long s = 0; s < S; ++s) {
        u.row(s) = (a.val().row(spans[s].first) + b.val().row(spans[s].second)).array().tanh().matrix();
    }
    auto out = a.tape().make(spans.size(), r.rows(), {a, b, r, c});
    out.val().noalias() = u * r.val().transpose();
    out.val().rowwise() += c.val().col(0).transpose();
    if (out.needs_grad()) {
        out.node()->backward = [a, b, r, c, out, spans, u = std::move(u), S] {
            if (r.needs_grad()) r.gmat().noalias() += out.gmat().transpose() * u;
            if (c.needs_grad()) c.gmat().col(0) += out.gmat().colwise().sum().transpose();
            if (!a.needs_grad() && !b.needs_grad()) return;
            RowMat dpre = out.gmat() * r.val();
            dpre.array() *= 1.0 - u.array().square();
            for (long s = 0; s < S; ++s) {
                if (a.needs_grad()) a.gmat().row(spans[s].first) += dpre.row(s);
                if (b.needs_grad()) b.gmat().row(spans[s].second) += dpre.row(s);
            }
        };
    }
    return out;
}

} // namespace dnmx::nn
