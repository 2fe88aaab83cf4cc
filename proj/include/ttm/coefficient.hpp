#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttm/prob_metrics.hpp"

namespace ttm {

// How the per-sample interpolation coefficient is produced from the two
// predictive distributions.
enum class Policy {
    js_sigmoid,       // sigmoid of the Jensen-Shannon divergence
    entropy_ratio,    // DaWin-style entropy ratio
    confidence_ratio, // ratio of max probabilities
    fixed,            // constant coefficient (fixed_alpha)
};

// js_sigmoid maps larger divergence to larger coefficient (expert weight);
// inverted flips the final coefficient to 1 - lambda.
enum class Direction {
    per_eq10,
    inverted,
};

struct CoefficientConfig {
    double lambda_min = 0.0;
    double lambda_max = 1.0;
    double delta = 0.5;     // extrapolation step
    double tau_pt = 0.05;   // entropy threshold for the pretrained branch, nats
    double tau_ft = 0.05;   // entropy threshold for the finetuned branch, nats
    Policy policy = Policy::js_sigmoid;
    double fixed_alpha = 0.5; // only read when policy == fixed
    Direction direction = Direction::per_eq10;

    // Optional reshaping of the sigmoid input: sigmoid(gain * (I - center)).
    // Defaults leave the mapping untouched.
    double sigmoid_gain = 1.0;
    double sigmoid_center = 0.0;

    // lambda_min <= lambda_max, both in [0, 1]; delta in [0, 1]; taus >= 0;
    // gain > 0. Throws DomainError otherwise.
    void validate() const;

    // JSON block with exactly the keys lambda_min, lambda_max, delta, tau_pt,
    // tau_ft, policy, direction (policy "fixed:<alpha>" carries its constant).
    std::string to_json() const;
    static CoefficientConfig from_json(const std::string& text);

    // Hex digest over every field (including the sigmoid hooks), used to
    // detect stale caches.
    std::string digest() const;
};

std::string policy_to_string(Policy policy, double fixed_alpha);
Policy policy_from_string(const std::string& text, double* fixed_alpha);
std::string direction_to_string(Direction direction);
Direction direction_from_string(const std::string& text);

// 1 / (1 + e^-v), computed to avoid overflow for large |v|.
double sigmoid(double v);

// Base coefficient from a divergence value:
// lambda_min + (lambda_max - lambda_min) * sigmoid(gain * (I - center)).
double lambda_from_mi(double mi, const CoefficientConfig& cfg);

// Confidence-gated extrapolation. The finetuned branch wins when both
// entropies sit below their thresholds:
//   H_ft < tau_ft -> min(lambda + delta, 1)
//   else H_pt < tau_pt -> max(lambda - delta, 0)
//   else -> lambda unchanged.
double extrapolate(double lambda, double entropy_pt, double entropy_ft,
                   const CoefficientConfig& cfg);

// Mean of per-sample coefficients via pairwise summation; order-stable to
// ~1e-12 under permutation.
double batch_lambda(const std::vector<double>& lambdas);

// DaWin coefficient: the entropy ratio itself (no sigmoid, no extrapolation).
double dawin_lambda(const ProbVector& p_pt, const ProbVector& p_ft);

// Everything computed for one sample on the way to its final coefficient.
struct LambdaRecord {
    int64_t sample_index = 0;
    double js = 0.0;         // Jensen-Shannon divergence between the two outputs
    double entropy_pt = 0.0;
    double entropy_ft = 0.0;
    double lambda_raw = 0.0;   // before extrapolation / inversion
    double lambda_prime = 0.0; // final coefficient in [0, 1]
};

// Full per-sample pipeline: policy -> extrapolation (js_sigmoid only) ->
// direction. Inputs are the two predictive distributions for one sample.
LambdaRecord coefficient_for(const ProbVector& p_pt, const ProbVector& p_ft,
                             const CoefficientConfig& cfg, int64_t sample_index = 0);

} // namespace ttm
