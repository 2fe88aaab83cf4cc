#include "ttm/dynamic_merge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>

#include <nlohmann/json.hpp>

#include "ttm/binio.hpp"
#include "ttm/error.hpp"

namespace ttm {

using nlohmann::json;

int max_threads() {
    const char* env = std::getenv("TTMC_THREADS");
    if (env != nullptr) {
        const long v = std::strtol(env, nullptr, 10);
        return v >= 1 ? static_cast<int>(v) : 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 1 ? static_cast<int>(hw) : 1;
}

namespace {

// Runs fn(i) for i in [0, n); pure tasks, so the schedule cannot change results.
template <typename Fn>
void parallel_for(int64_t n, Fn&& fn) {
    const int threads =
        static_cast<int>(std::min<int64_t>(max_threads(), std::max<int64_t>(n, 1)));
    if (threads <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        futures.push_back(std::async(std::launch::async, [&fn, t, threads, n] {
            for (int64_t i = t; i < n; i += threads) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

void check_pair(const ParameterMap& pt, const ParameterMap& ft) {
    require_aligned(pt, ft);
    detect_arch(pt); // rejects non-classifier maps
}

int64_t batch_count(int64_t n, int64_t batch_size) {
    return (n + batch_size - 1) / batch_size;
}

// One whole-batch evaluation: probabilities for rows [begin, end).
std::vector<ProbVector> batch_proba(const FlatParams& fp, const Dataset& data, int64_t begin,
                                    int64_t end) {
    std::vector<ProbVector> out(static_cast<size_t>(end - begin));
    for (int64_t i = begin; i < end; ++i) {
        out[static_cast<size_t>(i - begin)] = softmax(forward_flat(fp, data.row(i)));
    }
    return out;
}

} // namespace

// ---------- online drivers ----------

std::pair<uint32_t, LambdaRecord> t3_sample_predict(const ParameterMap& pt,
                                                    const ParameterMap& ft,
                                                    std::span<const float> x,
                                                    const CoefficientConfig& cfg,
                                                    ForwardCounter& counter) {
    check_pair(pt, ft);
    const ProbVector p_pt = predict_proba(pt, x);
    const ProbVector p_ft = predict_proba(ft, x);
    counter.sample_forwards += 2;

    const LambdaRecord rec = coefficient_for(p_pt, p_ft, cfg);
    const ParameterMap merged = lerp_params(pt, ft, rec.lambda_prime);
    counter.merges += 1;

    const uint32_t pred = argmax_class(forward(merged, x));
    counter.sample_forwards += 1;
    return {pred, rec};
}

std::pair<std::vector<uint32_t>, double> t3_batch_predict(
    const ParameterMap& pt, const ParameterMap& ft, const Dataset& data, int64_t begin,
    int64_t end, const CoefficientConfig& cfg, ForwardCounter& counter,
    std::vector<LambdaRecord>* records) {
    check_pair(pt, ft);
    if (begin < 0 || end > data.num_samples || begin >= end) {
        throw DomainError("t3_batch_predict: empty or out-of-range batch");
    }

    const FlatParams fpt = flatten(pt);
    const FlatParams fft = flatten(ft);
    const auto probs_pt = batch_proba(fpt, data, begin, end);
    const auto probs_ft = batch_proba(fft, data, begin, end);
    counter.batch_forwards += 2;

    std::vector<double> lambdas(static_cast<size_t>(end - begin));
    for (int64_t i = begin; i < end; ++i) {
        const size_t k = static_cast<size_t>(i - begin);
        LambdaRecord rec = coefficient_for(probs_pt[k], probs_ft[k], cfg, i);
        lambdas[k] = rec.lambda_prime;
        if (records != nullptr) records->push_back(rec);
    }
    const double mean_lambda = batch_lambda(lambdas);

    const ParameterMap merged = lerp_params(pt, ft, mean_lambda);
    counter.merges += 1;

    const FlatParams fm = flatten(merged);
    std::vector<uint32_t> preds(static_cast<size_t>(end - begin));
    for (int64_t i = begin; i < end; ++i) {
        preds[static_cast<size_t>(i - begin)] = argmax_class(forward_flat(fm, data.row(i)));
    }
    counter.batch_forwards += 1;
    return {std::move(preds), mean_lambda};
}

uint32_t ensemble_predict(const ParameterMap& pt, const ParameterMap& ft,
                          std::span<const float> x, ForwardCounter& counter) {
    check_pair(pt, ft);
    const LogitVector z_pt = forward(pt, x);
    const LogitVector z_ft = forward(ft, x);
    counter.sample_forwards += 2;

    LogitVector z(z_pt.size());
    for (size_t i = 0; i < z.size(); ++i) z[i] = 0.5 * (z_pt[i] + z_ft[i]);
    return argmax_class(z);
}

// ---------- batched whole-set drivers ----------

std::vector<uint32_t> single_model_predict_batched(const ParameterMap& params,
                                                   const Dataset& data, int64_t batch_size,
                                                   ForwardCounter& counter) {
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    const FlatParams fp = flatten(params);
    std::vector<uint32_t> preds(static_cast<size_t>(data.num_samples));
    for (int64_t begin = 0; begin < data.num_samples; begin += batch_size) {
        const int64_t end = std::min(data.num_samples, begin + batch_size);
        for (int64_t i = begin; i < end; ++i) {
            preds[static_cast<size_t>(i)] = argmax_class(forward_flat(fp, data.row(i)));
        }
        counter.batch_forwards += 1;
    }
    return preds;
}

std::vector<uint32_t> ensemble_predict_batched(const ParameterMap& pt, const ParameterMap& ft,
                                               const Dataset& data, int64_t batch_size,
                                               ForwardCounter& counter) {
    check_pair(pt, ft);
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    const FlatParams fpt = flatten(pt);
    const FlatParams fft = flatten(ft);
    std::vector<uint32_t> preds(static_cast<size_t>(data.num_samples));
    for (int64_t begin = 0; begin < data.num_samples; begin += batch_size) {
        const int64_t end = std::min(data.num_samples, begin + batch_size);
        for (int64_t i = begin; i < end; ++i) {
            const LogitVector z_pt = forward_flat(fpt, data.row(i));
            const LogitVector z_ft = forward_flat(fft, data.row(i));
            LogitVector z(z_pt.size());
            for (size_t k = 0; k < z.size(); ++k) z[k] = 0.5 * (z_pt[k] + z_ft[k]);
            preds[static_cast<size_t>(i)] = argmax_class(z);
        }
        counter.batch_forwards += 2;
    }
    return preds;
}

// ---------- precomputation ----------

void LambdaCache::validate() const {
    if (batch_size < 1) throw ValidationError("cache batch_size must be >= 1");
    const int64_t n = static_cast<int64_t>(per_sample.size());
    if (static_cast<int64_t>(per_batch_means.size()) != batch_count(n, batch_size)) {
        throw ValidationError("cache batch-mean count does not match n and batch_size");
    }
    for (int64_t b = 0; b < static_cast<int64_t>(per_batch_means.size()); ++b) {
        const int64_t begin = b * batch_size;
        const int64_t end = std::min(n, begin + batch_size);
        std::vector<double> lambdas;
        lambdas.reserve(static_cast<size_t>(end - begin));
        for (int64_t i = begin; i < end; ++i) {
            lambdas.push_back(per_sample[static_cast<size_t>(i)].lambda_prime);
        }
        if (std::fabs(batch_lambda(lambdas) - per_batch_means[static_cast<size_t>(b)]) >
            1e-12) {
            throw ValidationError("cache batch mean disagrees with per-sample records");
        }
    }
}

LambdaCache precompute_lambdas(const ParameterMap& pt, const ParameterMap& ft,
                               const Dataset& data, const CoefficientConfig& cfg,
                               int64_t batch_size) {
    check_pair(pt, ft);
    data.validate();
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (data.num_samples < 1) throw DomainError("precompute_lambdas: empty dataset");

    const FlatParams fpt = flatten(pt);
    const FlatParams fft = flatten(ft);

    LambdaCache cache;
    cache.batch_size = batch_size;
    cache.config_digest = cfg.digest();
    cache.per_sample.resize(static_cast<size_t>(data.num_samples));

    for (int64_t i = 0; i < data.num_samples; ++i) {
        const ProbVector p_pt = softmax(forward_flat(fpt, data.row(i)));
        const ProbVector p_ft = softmax(forward_flat(fft, data.row(i)));
        cache.per_sample[static_cast<size_t>(i)] = coefficient_for(p_pt, p_ft, cfg, i);
    }

    const int64_t batches = batch_count(data.num_samples, batch_size);
    cache.per_batch_means.resize(static_cast<size_t>(batches));
    for (int64_t b = 0; b < batches; ++b) {
        const int64_t begin = b * batch_size;
        const int64_t end = std::min(data.num_samples, begin + batch_size);
        std::vector<double> lambdas;
        lambdas.reserve(static_cast<size_t>(end - begin));
        for (int64_t i = begin; i < end; ++i) {
            lambdas.push_back(cache.per_sample[static_cast<size_t>(i)].lambda_prime);
        }
        cache.per_batch_means[static_cast<size_t>(b)] = batch_lambda(lambdas);
    }
    return cache;
}

namespace {

constexpr std::string_view kCacheMagic = "TTLC";
constexpr uint32_t kCacheVersion = 1;

} // namespace

std::string encode_cache(const LambdaCache& cache) {
    cache.validate();
    json header;
    header["batch_size"] = cache.batch_size;
    header["n"] = cache.per_sample.size();
    header["config_digest"] = cache.config_digest;
    const std::string header_str = header.dump();

    std::string out;
    out.append(kCacheMagic);
    io::put_u32(out, kCacheVersion);
    io::put_u64(out, header_str.size());
    out.append(header_str);
    for (const LambdaRecord& rec : cache.per_sample) {
        io::put_f64(out, rec.js);
        io::put_f64(out, rec.entropy_pt);
        io::put_f64(out, rec.entropy_ft);
        io::put_f64(out, rec.lambda_raw);
        io::put_f64(out, rec.lambda_prime);
    }
    for (double m : cache.per_batch_means) io::put_f64(out, m);
    return out;
}

LambdaCache decode_cache(std::string_view bytes) {
    io::Reader r(bytes);
    if (r.remaining() < 4 || r.take(4) != kCacheMagic) {
        throw FormatError("not a lambda cache (bad magic)");
    }
    const uint32_t version = r.u32();
    if (version != kCacheVersion) {
        throw FormatError("unsupported cache version " + std::to_string(version));
    }
    const uint64_t header_len = r.u64();
    if (header_len > r.remaining()) throw CorruptionError("cache header exceeds file size");

    json header;
    try {
        header = json::parse(r.take(static_cast<size_t>(header_len)));
    } catch (const json::exception& e) {
        throw FormatError(std::string("cache header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("batch_size") || !header.contains("n") ||
        !header.contains("config_digest")) {
        throw FormatError("cache header must carry batch_size, n, config_digest");
    }

    LambdaCache cache;
    cache.batch_size = header["batch_size"].get<int64_t>();
    cache.config_digest = header["config_digest"].get<std::string>();
    const int64_t n = header["n"].get<int64_t>();
    if (n < 0 || cache.batch_size < 1) {
        throw CorruptionError("cache header dimensions out of range");
    }

    const int64_t batches = batch_count(n, cache.batch_size);
    if (r.remaining() !=
        static_cast<uint64_t>(n) * 40 + static_cast<uint64_t>(batches) * 8) {
        throw CorruptionError("cache payload does not match header dimensions");
    }

    cache.per_sample.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        LambdaRecord& rec = cache.per_sample[static_cast<size_t>(i)];
        rec.sample_index = i;
        rec.js = r.f64();
        rec.entropy_pt = r.f64();
        rec.entropy_ft = r.f64();
        rec.lambda_raw = r.f64();
        rec.lambda_prime = r.f64();
    }
    cache.per_batch_means.resize(static_cast<size_t>(batches));
    for (auto& m : cache.per_batch_means) m = r.f64();
    cache.validate();
    return cache;
}

void save_cache(const LambdaCache& cache, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_cache(cache));
}

LambdaCache load_cache(const std::filesystem::path& path) {
    return decode_cache(io::read_file(path));
}

std::vector<uint32_t> predict_with_cache(const ParameterMap& pt, const ParameterMap& ft,
                                         const Dataset& data, const LambdaCache& cache,
                                         const CoefficientConfig& cfg, CacheMode mode,
                                         ForwardCounter& counter) {
    check_pair(pt, ft);
    if (cache.config_digest != cfg.digest()) {
        throw StalenessError("lambda cache was built with a different configuration");
    }
    if (static_cast<int64_t>(cache.per_sample.size()) != data.num_samples) {
        throw StalenessError("lambda cache was built for a different sample count");
    }

    std::vector<uint32_t> preds(static_cast<size_t>(data.num_samples));
    if (mode == CacheMode::sample) {
        for (int64_t i = 0; i < data.num_samples; ++i) {
            const double lambda = cache.per_sample[static_cast<size_t>(i)].lambda_prime;
            const ParameterMap merged = lerp_params(pt, ft, lambda);
            counter.merges += 1;
            preds[static_cast<size_t>(i)] = argmax_class(forward(merged, data.row(i)));
            counter.sample_forwards += 1;
        }
        return preds;
    }

    const int64_t batches = batch_count(data.num_samples, cache.batch_size);
    parallel_for(batches, [&](int64_t b) {
        const int64_t begin = b * cache.batch_size;
        const int64_t end = std::min(data.num_samples, begin + cache.batch_size);
        const ParameterMap merged =
            lerp_params(pt, ft, cache.per_batch_means[static_cast<size_t>(b)]);
        const FlatParams fm = flatten(merged);
        for (int64_t i = begin; i < end; ++i) {
            preds[static_cast<size_t>(i)] = argmax_class(forward_flat(fm, data.row(i)));
        }
    });
    counter.merges += batches;
    counter.batch_forwards += batches;
    return preds;
}

} // namespace ttm
