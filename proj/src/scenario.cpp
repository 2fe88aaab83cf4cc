#include "ttm/scenario.hpp"

#include <cmath>

#include "ttm/error.hpp"

namespace ttm {

// ---------- corruptions ----------

void CorruptionSpec::validate() const {
    if (severity < 1 || severity > 5) throw DomainError("corruption severity must be 1..5");
}

std::string corruption_kind_name(CorruptionKind kind) {
    return kind == CorruptionKind::noise ? "noise" : "quantize";
}

std::vector<float> corrupt(const std::vector<float>& features, const CorruptionSpec& spec,
                           SplitMix64& rng) {
    spec.validate();
    std::vector<float> out(features.size());
    if (spec.kind == CorruptionKind::noise) {
        const double sigma = 0.25 * spec.severity;
        for (size_t i = 0; i < features.size(); ++i) {
            out[i] = static_cast<float>(static_cast<double>(features[i]) +
                                        rng.gaussian(0.0, sigma));
        }
        return out;
    }
    const double q = std::pow(2.0, 3 - spec.severity); // levels per unit
    for (size_t i = 0; i < features.size(); ++i) {
        out[i] = static_cast<float>(std::round(static_cast<double>(features[i]) * q) / q);
    }
    return out;
}

// ---------- scenario generation ----------

void ScenarioParams::validate() const {
    if (c_base < 2) throw DomainError("scenario needs c_base >= 2");
    if (c_novel < 1) throw DomainError("scenario needs c_novel >= 1");
    if (d < total_classes()) {
        throw DomainError("scenario needs d >= c_base + c_novel (one axis per class)");
    }
    if (n_pretrain < 1 || n_expert < 1 || n_test_in_domain < 1 || n_test_novel < 1) {
        throw DomainError("scenario split sizes must be >= 1");
    }
    if (!(base_radius > 0.0) || !(novel_radius > 0.0)) {
        throw DomainError("scenario radii must be positive");
    }
    if (!(narrow_sigma > 0.0) || !(broad_sigma > 0.0)) {
        throw DomainError("scenario sigmas must be positive");
    }
    if (pretrain_clusters < 1) throw DomainError("scenario needs >= 1 pretrain cluster");
    if (!(cluster_spread >= 0.0) || !(site_offset >= 0.0)) {
        throw DomainError("scenario spreads must be >= 0");
    }
}

namespace {

// Class mean: radius along the class's own coordinate axis.
std::vector<double> class_mean(const ScenarioParams& p, int64_t k) {
    std::vector<double> mu(static_cast<size_t>(p.d), 0.0);
    const bool base = k < p.c_base;
    mu[static_cast<size_t>(k)] = base ? p.base_radius : p.novel_radius;
    return mu;
}

uint64_t corruption_stream_seed(uint64_t seed, const CorruptionSpec& spec) {
    const uint64_t tag =
        static_cast<uint64_t>(spec.kind == CorruptionKind::noise ? 0 : 1) * 8 +
        static_cast<uint64_t>(spec.severity);
    return seed ^ (tag * 0x9e3779b97f4a7c15ull);
}

} // namespace

ShiftScenario gen_scenario(uint64_t seed, const ScenarioParams& params) {
    params.validate();
    const int64_t c_total = params.total_classes();

    ShiftScenario s;
    s.seed = seed;
    s.params = params;
    SplitMix64 rng(seed);

    // Expert-site offset: a fixed random direction scaled to site_offset.
    std::vector<double> offset(static_cast<size_t>(params.d), 0.0);
    {
        double norm2 = 0.0;
        for (auto& v : offset) {
            v = rng.gaussian();
            norm2 += v * v;
        }
        const double scale = params.site_offset / std::sqrt(norm2);
        for (auto& v : offset) v *= scale;
    }

    // Loose sub-cluster centers for the pretraining source, per class.
    std::vector<std::vector<std::vector<double>>> subcenters(static_cast<size_t>(c_total));
    for (int64_t k = 0; k < c_total; ++k) {
        subcenters[static_cast<size_t>(k)].resize(static_cast<size_t>(params.pretrain_clusters));
        for (int64_t j = 0; j < params.pretrain_clusters; ++j) {
            auto& c = subcenters[static_cast<size_t>(k)][static_cast<size_t>(j)];
            c.resize(static_cast<size_t>(params.d));
            for (auto& v : c) v = rng.gaussian() * params.cluster_spread;
        }
    }

    auto make_dataset = [&params, c_total](int64_t n) {
        Dataset ds;
        ds.num_samples = n;
        ds.num_features = params.d;
        ds.num_classes = c_total;
        ds.features.resize(static_cast<size_t>(n) * static_cast<size_t>(params.d));
        ds.labels.resize(static_cast<size_t>(n));
        return ds;
    };

    // Pretraining source: every class, broad spread, several sub-clusters.
    s.pretrain_data = make_dataset(params.n_pretrain);
    for (int64_t i = 0; i < params.n_pretrain; ++i) {
        const int64_t k = static_cast<int64_t>(rng.below(static_cast<uint64_t>(c_total)));
        const auto mu = class_mean(params, k);
        const auto& sub = subcenters[static_cast<size_t>(k)][static_cast<size_t>(
            rng.below(static_cast<uint64_t>(params.pretrain_clusters)))];
        float* row = s.pretrain_data.features.data() +
                     static_cast<size_t>(i) * static_cast<size_t>(params.d);
        for (int64_t dim = 0; dim < params.d; ++dim) {
            row[dim] = static_cast<float>(mu[static_cast<size_t>(dim)] +
                                          sub[static_cast<size_t>(dim)] +
                                          rng.gaussian(0.0, params.broad_sigma));
        }
        s.pretrain_data.labels[static_cast<size_t>(i)] = static_cast<uint32_t>(k);
    }

    // Expert site: base classes only, tight clusters, shifted by the offset.
    auto fill_site = [&](Dataset& ds, int64_t n) {
        for (int64_t i = 0; i < n; ++i) {
            const int64_t k = i % params.c_base;
            const auto mu = class_mean(params, k);
            float* row =
                ds.features.data() + static_cast<size_t>(i) * static_cast<size_t>(params.d);
            for (int64_t dim = 0; dim < params.d; ++dim) {
                row[dim] = static_cast<float>(mu[static_cast<size_t>(dim)] +
                                              offset[static_cast<size_t>(dim)] +
                                              rng.gaussian(0.0, params.narrow_sigma));
            }
            ds.labels[static_cast<size_t>(i)] = static_cast<uint32_t>(k);
        }
    };
    s.expert_data = make_dataset(params.n_expert);
    fill_site(s.expert_data, params.n_expert);
    s.test_in_domain = make_dataset(params.n_test_in_domain);
    fill_site(s.test_in_domain, params.n_test_in_domain);

    // Novel classes: tight clusters at the original (un-shifted) site.
    s.test_novel = make_dataset(params.n_test_novel);
    for (int64_t i = 0; i < params.n_test_novel; ++i) {
        const int64_t k = params.c_base + (i % params.c_novel);
        const auto mu = class_mean(params, k);
        float* row = s.test_novel.features.data() +
                     static_cast<size_t>(i) * static_cast<size_t>(params.d);
        for (int64_t dim = 0; dim < params.d; ++dim) {
            row[dim] = static_cast<float>(mu[static_cast<size_t>(dim)] +
                                          rng.gaussian(0.0, params.narrow_sigma));
        }
        s.test_novel.labels[static_cast<size_t>(i)] = static_cast<uint32_t>(k);
    }

    // Corrupted copies of the in-domain set, one independent stream per
    // (kind, severity) so each set is a pure function of (seed, spec).
    for (CorruptionKind kind : {CorruptionKind::noise, CorruptionKind::quantize}) {
        for (int severity = 1; severity <= 5; ++severity) {
            const CorruptionSpec spec{kind, severity};
            SplitMix64 sub(corruption_stream_seed(seed, spec));
            Dataset ds = s.test_in_domain;
            ds.features = corrupt(s.test_in_domain.features, spec, sub);
            s.test_corrupted.emplace(std::make_pair(kind, severity), std::move(ds));
        }
    }

    s.pretrain_data.validate();
    s.expert_data.validate();
    s.test_in_domain.validate();
    s.test_novel.validate();
    return s;
}

// ---------- pinned training recipes ----------

TrainConfig scenario_pretrain_config() {
    TrainConfig cfg;
    cfg.arch = Arch::linear;
    cfg.learning_rate = 0.7;
    cfg.epochs = 500;
    cfg.batch_size = 64;
    cfg.l2 = 0.0;
    return cfg;
}

TrainConfig scenario_finetune_config() {
    TrainConfig cfg;
    cfg.arch = Arch::linear;
    cfg.learning_rate = 0.4;
    cfg.epochs = 150;
    cfg.batch_size = 32;
    cfg.l2 = 0.0005;
    return cfg;
}

std::pair<ParameterMap, ParameterMap> train_scenario_models(const ShiftScenario& scenario) {
    SplitMix64 rng_pt(scenario.seed ^ 0x7072657472616964ull);
    SplitMix64 rng_ft(scenario.seed ^ 0x66696e6574756e65ull);
    ParameterMap pt = train(scenario.pretrain_data, scenario_pretrain_config(), rng_pt);
    ParameterMap ft =
        finetune(pt, scenario.expert_data, scenario_finetune_config(), rng_ft);
    return {std::move(pt), std::move(ft)};
}

} // namespace ttm
