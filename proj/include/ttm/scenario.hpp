#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "ttm/models.hpp"
#include "ttm/param_store.hpp"
#include "ttm/prng.hpp"

namespace ttm {

// ---------- corruptions ----------

enum class CorruptionKind { noise, quantize };

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::noise;
    int severity = 1; // 1..5

    void validate() const;
};

std::string corruption_kind_name(CorruptionKind kind);

// noise: X + N(0, sigma_s^2) with sigma_s = 0.25 * severity.
// quantize: round(X * q) / q with q = 2^(3 - severity) levels per unit.
std::vector<float> corrupt(const std::vector<float>& features, const CorruptionSpec& spec,
                           SplitMix64& rng);

// ---------- synthetic distribution-shift scenario ----------

// Gaussian class-cluster universe. Classes sit on disjoint coordinate axes;
// the broad pretraining source spans every class with several loose
// sub-clusters per class, while the expert site sees only the base classes,
// tightly clustered and shifted by a fixed site-offset vector. Test material:
// in-domain (expert site), novel classes (never in the expert data), and
// corrupted copies of the in-domain set.
struct ScenarioParams {
    int64_t d = 16;       // feature dimension
    int64_t c_base = 5;   // classes present in the expert data
    int64_t c_novel = 3;  // classes only the pretraining source covers
    int64_t n_pretrain = 4096;
    int64_t n_expert = 2048;
    int64_t n_test_in_domain = 2048;
    int64_t n_test_novel = 1024;

    double base_radius = 1.4;     // class-mean distance from origin, base classes
    double novel_radius = 1.7;    // same for novel classes
    double narrow_sigma = 0.28;   // within-class spread at the expert site
    double broad_sigma = 0.50;    // within-class spread of the pretraining source
    int64_t pretrain_clusters = 3; // loose sub-clusters per class in the source
    double cluster_spread = 0.45;  // sub-cluster center spread
    double site_offset = 0.9;      // magnitude of the expert-site shift

    int64_t total_classes() const { return c_base + c_novel; }
    void validate() const;
};

struct ShiftScenario {
    uint64_t seed = 0;
    ScenarioParams params;
    Dataset pretrain_data;
    Dataset expert_data;
    Dataset test_in_domain;
    Dataset test_novel;
    std::map<std::pair<CorruptionKind, int>, Dataset> test_corrupted;
};

// Deterministic from seed: identical seeds yield byte-identical datasets.
ShiftScenario gen_scenario(uint64_t seed, const ScenarioParams& params = {});

// Training recipes pinned for the shipped scenario: a broad pretraining run
// and an l2-regularized fine-tune on the expert data.
TrainConfig scenario_pretrain_config();
TrainConfig scenario_finetune_config();

// Trains the scenario's model pair (pretrained, expert) with seeds derived
// from the scenario seed.
std::pair<ParameterMap, ParameterMap> train_scenario_models(const ShiftScenario& scenario);

} // namespace ttm
