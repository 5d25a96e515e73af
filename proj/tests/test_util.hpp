#pragma once

#include <functional>

#include "hicom/nn.hpp"
#include "hicom/rng.hpp"

namespace hicom::testutil {

// Directional finite-difference check: runs `loss(true)` once to collect
// analytic gradients, then compares <g, d> against central differences
// along `k` random unit directions. Returns the worst relative error.
inline double grad_check(nn::ParamSet& params,
                         const std::function<double(bool with_grad)>& loss,
                         int k, double eps, Rng& rng) {
    params.zero_grad();
    loss(true);
    nn::Vec g = params.gather_grads();
    nn::Vec theta0 = params.gather_values();

    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
        nn::Vec d(theta0.size());
        for (long j = 0; j < d.size(); ++j) d[j] = rng.normal();
        d /= d.norm();

        params.scatter_values(theta0 + eps * d);
        double lp = loss(false);
        params.scatter_values(theta0 - eps * d);
        double lm = loss(false);
        params.scatter_values(theta0);

        double fd = (lp - lm) / (2.0 * eps);
        double an = g.dot(d);
        double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace hicom::testutil
