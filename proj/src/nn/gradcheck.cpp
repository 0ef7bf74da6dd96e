#include "dnmx/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dnmx/core/error.hpp"

namespace dnmx::nn {

namespace {

double eval(const std::function<Var(Tape&)>& f) {
    Tape t(false);
    return f(t).item();
}

void require_finite(double v, const Param& p, std::size_t k, const char* what) {
    if (!std::isfinite(v)) {
        throw DataError(std::string("grad_check: non-finite ") + what + " at " + p.name + "[" + std::to_string(k) + "]");
    }
}

} // namespace

GradCheckResult grad_check(const std::function<Var(Tape&)>& f, const std::vector<Param*>& params, double eps) {
    for (Param* p : params) p->zero_grad();
    {
        Tape t;
        auto loss = f(t);
        t.backward(loss);
    }
    GradCheckResult res;
    for (Param* p : params) {
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const double orig = p->value.data[k];
            p->value.data[k] = orig + eps;
            const double fp = eval(f);
            p->value.data[k] = orig - eps;
            const double fm = eval(f);
            p->value.data[k] = orig;
            require_finite(fp, *p, k, "loss");
            require_finite(fm, *p, k, "loss");
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = p->grad.data[k];
            require_finite(analytic, *p, k, "gradient");
            const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
            const double rel = std::abs(analytic - numeric) / denom;
            ++res.checked;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = p->name;
                res.worst_index = k;
            }
        }
    }
    return res;
}

} // namespace dnmx::nn
