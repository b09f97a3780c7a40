#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "disrbm/rbm.hpp"
#include "disrbm/rng.hpp"
#include "disrbm/types.hpp"

namespace disrbm::test {

// Regularized upper incomplete gamma Q(a, x), series + continued fraction.
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q domain");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // series for P(a,x), return 1 - P
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-14) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // continued fraction for Q
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi_square_pvalue(double chi2, int dof) {
    return gamma_q(0.5 * dof, 0.5 * chi2);
}

/// Goodness-of-fit p-value of observed counts against expected probabilities.
/// Bins with tiny expectation are pooled into their neighbor.
inline double chi_square_gof(const std::vector<double>& counts,
                             const std::vector<double>& probs) {
    if (counts.size() != probs.size())
        throw std::invalid_argument("chi_square_gof: size mismatch");
    double n = 0.0;
    for (double c : counts) n += c;
    double chi2 = 0.0, pooled_count = 0.0, pooled_prob = 0.0;
    int bins = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        pooled_count += counts[k];
        pooled_prob += probs[k];
        if (pooled_prob * n >= 5.0) {
            const double expected = pooled_prob * n;
            chi2 += (pooled_count - expected) * (pooled_count - expected) / expected;
            pooled_count = pooled_prob = 0.0;
            ++bins;
        }
    }
    if (pooled_prob > 0.0 && pooled_count + pooled_prob > 0.0 && bins > 0) {
        const double expected = pooled_prob * n;
        if (expected > 0.0) {
            chi2 += (pooled_count - expected) * (pooled_count - expected) / expected;
            ++bins;
        }
    }
    if (bins < 2) return 1.0;
    return chi_square_pvalue(chi2, bins - 1);
}

inline RbmModel random_rbm(Index n_visible, Index n_hidden, UnitKind vkind,
                           UnitKind hkind, double weight_scale, Rng& rng,
                           bool with_fields = true) {
    RbmModel m = make_rbm(n_visible, n_hidden, vkind, hkind);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index i = 0; i < n_visible; ++i)
        for (Index mu = 0; mu < n_hidden; ++mu)
            m.weights(i, mu) = weight_scale * gauss(rng);
    if (with_fields) {
        for (Index i = 0; i < n_visible; ++i)
            m.visible_fields[i] = 0.3 * gauss(rng);
        for (Index mu = 0; mu < n_hidden; ++mu)
            m.hidden_fields[mu] = 0.3 * gauss(rng);
    }
    return m;
}

/// Index of a binary/spin configuration in enumeration order (bit i set when
/// unit i is "up").
inline std::size_t state_index(const VectorXd& v) {
    std::size_t idx = 0;
    for (Index i = 0; i < v.size(); ++i)
        if (v[i] > 0.0) idx |= std::size_t(1) << i;
    return idx;
}

}  // namespace disrbm::test
