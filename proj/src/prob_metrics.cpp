#include "ttm/prob_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ttm/error.hpp"

namespace ttm {

namespace {

void require_same_size(const ProbVector& p, const ProbVector& q) {
    if (p.size() != q.size()) {
        throw DomainError("probability vectors have different lengths");
    }
}

} // namespace

void validate_simplex(const ProbVector& p) {
    if (p.size() < 2) throw DomainError("probability vector needs at least 2 classes");
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < -1e-12 || v > 1.0 + 1e-12) {
            throw DomainError("probability entry outside [0, 1]");
        }
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
        throw DomainError("probabilities sum to " + std::to_string(sum) + ", expected 1");
    }
}

ProbVector softmax(const LogitVector& logits) {
    if (logits.size() < 2) throw DomainError("softmax needs at least 2 logits");
    double max_z = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw DomainError("softmax: non-finite logit");
        max_z = std::max(max_z, z);
    }
    ProbVector p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - max_z);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double entropy(const ProbVector& p, double eps) {
    validate_simplex(p);
    double h = 0.0;
    for (double v : p) h -= v * std::log(v + eps);
    // The eps inside the log can push a one-hot entropy to ~-eps; clamp it.
    return std::max(h, 0.0);
}

double kl_divergence(const ProbVector& p, const ProbVector& q, double eps) {
    validate_simplex(p);
    validate_simplex(q);
    require_same_size(p, q);
    double d = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        d += p[i] * std::log((p[i] + eps) / (q[i] + eps));
    }
    return d;
}

double js_divergence(const ProbVector& p, const ProbVector& q, double eps) {
    validate_simplex(p);
    validate_simplex(q);
    require_same_size(p, q);
    ProbVector m(p.size());
    for (size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    return 0.5 * (kl_divergence(p, m, eps) + kl_divergence(q, m, eps));
}

double js_via_entropy(const ProbVector& p, const ProbVector& q, double eps) {
    validate_simplex(p);
    validate_simplex(q);
    require_same_size(p, q);
    ProbVector m(p.size());
    for (size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    return entropy(m, eps) - 0.5 * (entropy(p, eps) + entropy(q, eps));
}

double entropy_ratio(const ProbVector& p_pt, const ProbVector& p_ft, double eps) {
    const double h_pt = entropy(p_pt, eps);
    const double h_ft = entropy(p_ft, eps);
    if (h_pt < 1e-12 && h_ft < 1e-12) return 0.5;
    return std::clamp(h_ft / (h_pt + h_ft), 0.0, 1.0);
}

double xentropy_ratio(const ProbVector& p_pt, const ProbVector& p_ft, int64_t label,
                      double eps) {
    validate_simplex(p_pt);
    validate_simplex(p_ft);
    require_same_size(p_pt, p_ft);
    if (label < 0 || label >= static_cast<int64_t>(p_pt.size())) {
        throw DomainError("xentropy_ratio: label out of range");
    }
    // -ln(1 + eps) is a hair below zero; clamp both losses at 0.
    const double l_pt = std::max(-std::log(p_pt[static_cast<size_t>(label)] + eps), 0.0);
    const double l_ft = std::max(-std::log(p_ft[static_cast<size_t>(label)] + eps), 0.0);
    if (l_pt < 1e-12 && l_ft < 1e-12) return 0.5;
    return std::clamp(l_ft / (l_pt + l_ft), 0.0, 1.0);
}

double confidence_ratio(const ProbVector& p_pt, const ProbVector& p_ft) {
    validate_simplex(p_pt);
    validate_simplex(p_ft);
    require_same_size(p_pt, p_ft);
    const double c_pt = *std::max_element(p_pt.begin(), p_pt.end());
    const double c_ft = *std::max_element(p_ft.begin(), p_ft.end());
    return c_ft / (c_pt + c_ft);
}

} // namespace ttm
