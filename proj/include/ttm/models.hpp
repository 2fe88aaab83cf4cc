#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttm/param_store.hpp"
#include "ttm/prob_metrics.hpp"

namespace ttm {

// ---------- datasets ----------

// Row-major feature matrix plus integer labels, fully in memory.
struct Dataset {
    int64_t num_samples = 0;
    int64_t num_features = 0;
    int64_t num_classes = 0;
    std::vector<float> features; // [num_samples, num_features]
    std::vector<uint32_t> labels;

    std::span<const float> row(int64_t i) const;

    // Sizes agree, features finite, labels < num_classes.
    void validate() const;
};

// Byte layout: "TTDS" | u32 version=1 | u64 header length | JSON header
// {"n","d","c"} | features f32 LE row-major | labels u32 LE.
std::string encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::string_view bytes);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// ---------- classifiers ----------

enum class Arch { linear, mlp };

// Parameter names: linear uses "linear.W" [C,D] and "linear.b" [C]; the
// one-hidden-layer ReLU net uses "mlp.W1" [H,D], "mlp.b1" [H], "mlp.W2" [C,H],
// "mlp.b2" [C].
ParameterMap init_params(Arch arch, int64_t num_features, int64_t num_classes,
                         int64_t hidden, SplitMix64& rng);

Arch detect_arch(const ParameterMap& params);
int64_t model_features(const ParameterMap& params);
int64_t model_classes(const ParameterMap& params);

// Logits for one sample; math in double regardless of storage precision.
LogitVector forward(const ParameterMap& params, std::span<const float> x);
ProbVector predict_proba(const ParameterMap& params, std::span<const float> x);

// Argmax with ties resolved to the lowest class index.
uint32_t argmax_class(const LogitVector& logits);

struct TrainConfig {
    Arch arch = Arch::linear;
    int64_t hidden = 16; // ignored for linear
    double learning_rate = 0.1;
    int64_t epochs = 40;
    int64_t batch_size = 32;
    double l2 = 0.0;

    void validate() const;
};

// Plain deterministic mini-batch gradient descent on mean cross-entropy plus
// (l2 / 2) * ||params||^2. Training state is double precision and is cast to
// f32 once at the end; epochs = 0 returns the starting point unchanged.
ParameterMap train(const Dataset& ds, const TrainConfig& cfg, SplitMix64& rng);
ParameterMap finetune(const ParameterMap& start, const Dataset& ds, const TrainConfig& cfg,
                      SplitMix64& rng);

// ---------- double-precision parameter view ----------

// Flattened training workspace; also the surface the finite-difference
// gradient check probes, so loss and gradient see the same precision.
struct FlatParams {
    std::vector<std::string> names;
    std::vector<std::vector<int64_t>> shapes;
    std::vector<size_t> offsets; // into values, one per name
    std::vector<double> values;

    size_t size() const { return values.size(); }
};

FlatParams flatten(const ParameterMap& params);
ParameterMap unflatten(const FlatParams& fp);

// Same as forward() but over an already-flattened view, for callers that
// evaluate many samples against one model.
LogitVector forward_flat(const FlatParams& fp, std::span<const float> x);

// Mean cross-entropy over the index set plus the l2 term.
double batch_loss(const FlatParams& fp, const Dataset& ds, std::span<const int64_t> idx,
                  double l2);

// Analytic gradient of batch_loss with respect to every entry of fp.values.
std::vector<double> batch_gradient(const FlatParams& fp, const Dataset& ds,
                                   std::span<const int64_t> idx, double l2);

} // namespace ttm
