#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ttm/coefficient.hpp"
#include "ttm/models.hpp"
#include "ttm/param_store.hpp"

namespace ttm {

// Forward-pass cost accounting. sample_forwards counts single-sample model
// evaluations, batch_forwards whole-batch evaluations, merges every
// parameter-interpolation event.
struct ForwardCounter {
    int64_t sample_forwards = 0;
    int64_t batch_forwards = 0;
    int64_t merges = 0;

    void add(const ForwardCounter& other) {
        sample_forwards += other.sample_forwards;
        batch_forwards += other.batch_forwards;
        merges += other.merges;
    }
};

// Precomputed per-sample coefficients plus per-batch means for one
// (model pair, dataset, config) triple.
struct LambdaCache {
    std::vector<LambdaRecord> per_sample;
    std::vector<double> per_batch_means;
    int64_t batch_size = 0;
    std::string config_digest;

    // Sizes consistent, batch means reproduce batch_lambda within 1e-12.
    void validate() const;
};

enum class CacheMode { sample, batch };

// ---------- online drivers ----------

// Sample-wise adaptive merge: two single forwards for the coefficient, one
// merge, one merged forward. Costs: sample_forwards += 3, merges += 1.
std::pair<uint32_t, LambdaRecord> t3_sample_predict(const ParameterMap& pt,
                                                    const ParameterMap& ft,
                                                    std::span<const float> x,
                                                    const CoefficientConfig& cfg,
                                                    ForwardCounter& counter);

// Batch-wise adaptive merge over data rows [begin, end): two batch forwards,
// coefficients averaged into one merge, one merged batch forward. Costs:
// batch_forwards += 3, merges += 1. Per-sample records (indexed by absolute
// row) are appended to *records when given.
std::pair<std::vector<uint32_t>, double> t3_batch_predict(
    const ParameterMap& pt, const ParameterMap& ft, const Dataset& data, int64_t begin,
    int64_t end, const CoefficientConfig& cfg, ForwardCounter& counter,
    std::vector<LambdaRecord>* records = nullptr);

// Logit ensemble on one sample: argmax of (z_pt + z_ft) / 2.
// Costs: sample_forwards += 2.
uint32_t ensemble_predict(const ParameterMap& pt, const ParameterMap& ft,
                          std::span<const float> x, ForwardCounter& counter);

// ---------- batched whole-set drivers ----------

std::vector<uint32_t> single_model_predict_batched(const ParameterMap& params,
                                                   const Dataset& data, int64_t batch_size,
                                                   ForwardCounter& counter);

std::vector<uint32_t> ensemble_predict_batched(const ParameterMap& pt, const ParameterMap& ft,
                                               const Dataset& data, int64_t batch_size,
                                               ForwardCounter& counter);

// ---------- precomputation ----------

// One offline scan over the dataset: all LambdaRecords plus per-batch means.
LambdaCache precompute_lambdas(const ParameterMap& pt, const ParameterMap& ft,
                               const Dataset& data, const CoefficientConfig& cfg,
                               int64_t batch_size);

// Byte layout: "TTLC" | u32 version=1 | u64 header length | JSON header
// {batch_size, n, config_digest} | per-sample f64 LE quintuples
// (I, H_pt, H_ft, lambda_raw, lambda_prime) in index order | batch means f64 LE.
std::string encode_cache(const LambdaCache& cache);
LambdaCache decode_cache(std::string_view bytes);

void save_cache(const LambdaCache& cache, const std::filesystem::path& path);
LambdaCache load_cache(const std::filesystem::path& path);

// Replays a cache instead of recomputing coefficients. Predictions are
// bitwise-identical to the matching online path. sample mode: one merge and
// one forward per sample; batch mode: one merge and one batch forward per
// batch (batches may run in parallel, capped by TTMC_THREADS).
// Throws StalenessError when the cache digest or sample count disagrees.
std::vector<uint32_t> predict_with_cache(const ParameterMap& pt, const ParameterMap& ft,
                                         const Dataset& data, const LambdaCache& cache,
                                         const CoefficientConfig& cfg, CacheMode mode,
                                         ForwardCounter& counter);

// Parallelism cap: TTMC_THREADS when set (minimum 1), else the hardware
// concurrency.
int max_threads();

} // namespace ttm
