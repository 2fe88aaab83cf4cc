#pragma once

#include <cstdint>
#include <vector>

namespace ttm {

// Probability-space metrics. All vectors are double precision, all logarithms
// are natural (results in nats), and every log takes the same kLogEps
// stabilizer so the two Jensen-Shannon forms agree to float-noise level.
using LogitVector = std::vector<double>;
using ProbVector = std::vector<double>;

inline constexpr double kLogEps = 1e-12;

// At least two entries, each in [0, 1] (within 1e-12), summing to 1 within 1e-6.
void validate_simplex(const ProbVector& p);

// Numerically stable softmax (max-subtraction); output is a valid simplex.
ProbVector softmax(const LogitVector& logits);

// Shannon entropy -sum p ln(p + eps), clamped to be non-negative.
double entropy(const ProbVector& p, double eps = kLogEps);

// sum p ln((p + eps) / (q + eps)).
double kl_divergence(const ProbVector& p, const ProbVector& q, double eps = kLogEps);

// Jensen-Shannon divergence via the two-KL form against the mixture.
double js_divergence(const ProbVector& p, const ProbVector& q, double eps = kLogEps);

// Jensen-Shannon divergence via H(mixture) - mean of entropies.
double js_via_entropy(const ProbVector& p, const ProbVector& q, double eps = kLogEps);

// H(p_ft) / (H(p_pt) + H(p_ft)), clamped to [0, 1]; 0.5 when both entropies
// are below 1e-12.
double entropy_ratio(const ProbVector& p_pt, const ProbVector& p_ft, double eps = kLogEps);

// Cross-entropy ratio against the true label: l_ft / (l_pt + l_ft) with
// l = -ln(p[label] + eps); 0.5 when both losses vanish.
double xentropy_ratio(const ProbVector& p_pt, const ProbVector& p_ft, int64_t label,
                      double eps = kLogEps);

// max(p_ft) / (max(p_pt) + max(p_ft)).
double confidence_ratio(const ProbVector& p_pt, const ProbVector& p_ft);

} // namespace ttm
