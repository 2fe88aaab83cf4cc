#include "ttm/coefficient.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "ttm/error.hpp"

namespace ttm {

using nlohmann::json;

// ---------- enum <-> string ----------

std::string policy_to_string(Policy policy, double fixed_alpha) {
    switch (policy) {
        case Policy::js_sigmoid: return "js_sigmoid";
        case Policy::entropy_ratio: return "entropy_ratio";
        case Policy::confidence_ratio: return "confidence_ratio";
        case Policy::fixed: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "fixed:%.17g", fixed_alpha);
            return buf;
        }
    }
    throw DomainError("unknown policy value");
}

Policy policy_from_string(const std::string& text, double* fixed_alpha) {
    if (text == "js_sigmoid") return Policy::js_sigmoid;
    if (text == "entropy_ratio") return Policy::entropy_ratio;
    if (text == "confidence_ratio") return Policy::confidence_ratio;
    if (text == "fixed") {
        if (fixed_alpha != nullptr) *fixed_alpha = 0.5;
        return Policy::fixed;
    }
    if (text.rfind("fixed:", 0) == 0) {
        const std::string num = text.substr(6);
        char* end = nullptr;
        const double alpha = std::strtod(num.c_str(), &end);
        if (end == num.c_str() || *end != '\0' || !std::isfinite(alpha)) {
            throw DomainError("bad fixed policy constant: " + text);
        }
        if (fixed_alpha != nullptr) *fixed_alpha = alpha;
        return Policy::fixed;
    }
    throw DomainError("unknown policy: " + text);
}

std::string direction_to_string(Direction direction) {
    return direction == Direction::inverted ? "inverted" : "per_eq10";
}

Direction direction_from_string(const std::string& text) {
    if (text == "per_eq10") return Direction::per_eq10;
    if (text == "inverted") return Direction::inverted;
    throw DomainError("unknown direction: " + text);
}

// ---------- CoefficientConfig ----------

void CoefficientConfig::validate() const {
    if (!(lambda_min >= 0.0 && lambda_min <= 1.0) ||
        !(lambda_max >= 0.0 && lambda_max <= 1.0) || !(lambda_min <= lambda_max)) {
        throw DomainError("coefficient band must satisfy 0 <= lambda_min <= lambda_max <= 1");
    }
    if (!(delta >= 0.0 && delta <= 1.0)) throw DomainError("delta must be in [0, 1]");
    if (!(tau_pt >= 0.0) || !(tau_ft >= 0.0)) throw DomainError("taus must be >= 0");
    if (policy == Policy::fixed && !(fixed_alpha >= 0.0 && fixed_alpha <= 1.0)) {
        throw DomainError("fixed policy constant must be in [0, 1]");
    }
    if (!(sigmoid_gain > 0.0) || !std::isfinite(sigmoid_gain) || !std::isfinite(sigmoid_center)) {
        throw DomainError("sigmoid gain must be positive and center finite");
    }
}

std::string CoefficientConfig::to_json() const {
    validate();
    json j;
    j["lambda_min"] = lambda_min;
    j["lambda_max"] = lambda_max;
    j["delta"] = delta;
    j["tau_pt"] = tau_pt;
    j["tau_ft"] = tau_ft;
    j["policy"] = policy_to_string(policy, fixed_alpha);
    j["direction"] = direction_to_string(direction);
    return j.dump();
}

CoefficientConfig CoefficientConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("coefficient config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("coefficient config must be a JSON object");

    static const char* kKeys[] = {"lambda_min", "lambda_max", "delta", "tau_pt",
                                  "tau_ft",     "policy",     "direction"};
    for (const char* key : kKeys) {
        if (!j.contains(key)) throw DomainError(std::string("missing config key: ") + key);
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : kKeys) known = known || key == k;
        if (!known) throw DomainError("unknown config key: " + key);
    }

    CoefficientConfig cfg;
    try {
        cfg.lambda_min = j["lambda_min"].get<double>();
        cfg.lambda_max = j["lambda_max"].get<double>();
        cfg.delta = j["delta"].get<double>();
        cfg.tau_pt = j["tau_pt"].get<double>();
        cfg.tau_ft = j["tau_ft"].get<double>();
        cfg.policy = policy_from_string(j["policy"].get<std::string>(), &cfg.fixed_alpha);
        cfg.direction = direction_from_string(j["direction"].get<std::string>());
    } catch (const json::exception& e) {
        throw DomainError(std::string("bad coefficient config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string CoefficientConfig::digest() const {
    validate();
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "lambda_min=%.17g;lambda_max=%.17g;delta=%.17g;tau_pt=%.17g;tau_ft=%.17g;"
                  "policy=%s;direction=%s;sigmoid_gain=%.17g;sigmoid_center=%.17g",
                  lambda_min, lambda_max, delta, tau_pt, tau_ft,
                  policy_to_string(policy, fixed_alpha).c_str(),
                  direction_to_string(direction).c_str(), sigmoid_gain, sigmoid_center);

    // FNV-1a 64-bit over the canonical field dump.
    uint64_t h = 1469598103934665603ull;
    for (const char* c = buf; *c != '\0'; ++c) {
        h ^= static_cast<unsigned char>(*c);
        h *= 1099511628211ull;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

// ---------- coefficient pipeline ----------

double sigmoid(double v) {
    if (v >= 0.0) {
        return 1.0 / (1.0 + std::exp(-v));
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
}

double lambda_from_mi(double mi, const CoefficientConfig& cfg) {
    cfg.validate();
    if (!std::isfinite(mi)) throw DomainError("lambda_from_mi: divergence must be finite");
    const double s = sigmoid(cfg.sigmoid_gain * (mi - cfg.sigmoid_center));
    return cfg.lambda_min + (cfg.lambda_max - cfg.lambda_min) * s;
}

double extrapolate(double lambda, double entropy_pt, double entropy_ft,
                   const CoefficientConfig& cfg) {
    cfg.validate();
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw DomainError("extrapolate: lambda must be in [0, 1]");
    }
    if (!std::isfinite(entropy_pt) || !std::isfinite(entropy_ft)) {
        throw DomainError("extrapolate: entropies must be finite");
    }
    // The finetuned branch takes precedence when both models are confident.
    if (entropy_ft < cfg.tau_ft) return std::min(lambda + cfg.delta, 1.0);
    if (entropy_pt < cfg.tau_pt) return std::max(lambda - cfg.delta, 0.0);
    return lambda;
}

namespace {

double pairwise_sum(const double* v, size_t n) {
    if (n <= 16) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

} // namespace

double batch_lambda(const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw DomainError("batch_lambda: empty batch");
    for (double v : lambdas) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("batch_lambda: coefficient outside [0, 1]");
        }
    }
    return pairwise_sum(lambdas.data(), lambdas.size()) / static_cast<double>(lambdas.size());
}

double dawin_lambda(const ProbVector& p_pt, const ProbVector& p_ft) {
    return entropy_ratio(p_pt, p_ft);
}

LambdaRecord coefficient_for(const ProbVector& p_pt, const ProbVector& p_ft,
                             const CoefficientConfig& cfg, int64_t sample_index) {
    cfg.validate();

    LambdaRecord rec;
    rec.sample_index = sample_index;
    rec.js = js_divergence(p_pt, p_ft);
    rec.entropy_pt = entropy(p_pt);
    rec.entropy_ft = entropy(p_ft);

    switch (cfg.policy) {
        case Policy::js_sigmoid:
            rec.lambda_raw = lambda_from_mi(rec.js, cfg);
            rec.lambda_prime = extrapolate(rec.lambda_raw, rec.entropy_pt, rec.entropy_ft, cfg);
            break;
        case Policy::entropy_ratio:
            rec.lambda_raw = entropy_ratio(p_pt, p_ft);
            rec.lambda_prime = rec.lambda_raw;
            break;
        case Policy::confidence_ratio:
            rec.lambda_raw = confidence_ratio(p_pt, p_ft);
            rec.lambda_prime = rec.lambda_raw;
            break;
        case Policy::fixed:
            rec.lambda_raw = cfg.fixed_alpha;
            rec.lambda_prime = rec.lambda_raw;
            break;
    }
    if (cfg.direction == Direction::inverted) {
        rec.lambda_prime = 1.0 - rec.lambda_prime;
    }
    rec.lambda_prime = std::clamp(rec.lambda_prime, 0.0, 1.0);
    return rec;
}

} // namespace ttm
