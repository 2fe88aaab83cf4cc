#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "ttm/dynamic_merge.hpp"
#include "ttm/error.hpp"
#include "ttm/prng.hpp"
#include "ttm/scenario.hpp"

using namespace ttm;

namespace {

struct Fixture {
    Dataset data;
    ParameterMap pt;
    ParameterMap ft;
};

// Small scenario pair: genuinely different models over a shared test set.
Fixture make_fixture() {
    ScenarioParams p;
    p.d = 6;
    p.c_base = 3;
    p.c_novel = 2;
    p.n_pretrain = 192;
    p.n_expert = 96;
    p.n_test_in_domain = 70; // deliberately not a batch multiple
    p.n_test_novel = 32;
    const ShiftScenario s = gen_scenario(77, p);

    TrainConfig cfg;
    cfg.arch = Arch::linear;
    cfg.learning_rate = 0.3;
    cfg.epochs = 30;
    cfg.batch_size = 32;

    Fixture f;
    f.data = s.test_in_domain;
    SplitMix64 rng_pt(1), rng_ft(2);
    f.pt = train(s.pretrain_data, cfg, rng_pt);
    cfg.epochs = 15;
    f.ft = finetune(f.pt, s.expert_data, cfg, rng_ft);
    return f;
}

const Fixture& fixture() {
    static const Fixture f = make_fixture();
    return f;
}

} // namespace

TEST_CASE("t3_sample_predict equals the hand-built pipeline") {
    const Fixture& f = fixture();
    const CoefficientConfig cfg;
    ForwardCounter counter;

    for (int64_t i = 0; i < 8; ++i) {
        const auto x = f.data.row(i);
        const auto [cls, rec] = t3_sample_predict(f.pt, f.ft, x, cfg, counter);

        const ProbVector p_pt = predict_proba(f.pt, x);
        const ProbVector p_ft = predict_proba(f.ft, x);
        const LambdaRecord want = coefficient_for(p_pt, p_ft, cfg, i);
        CHECK(rec.js == want.js);
        CHECK(rec.lambda_prime == want.lambda_prime);

        const ParameterMap merged = lerp_params(f.pt, f.ft, rec.lambda_prime);
        CHECK(cls == argmax_class(forward(merged, x)));
    }
    CHECK(counter.sample_forwards == 3 * 8);
    CHECK(counter.merges == 8);
    CHECK(counter.batch_forwards == 0);
}

TEST_CASE("t3_batch_predict averages coefficients into one merge") {
    const Fixture& f = fixture();
    const CoefficientConfig cfg;
    ForwardCounter counter;
    std::vector<LambdaRecord> records;

    const auto [classes, mean_lambda] =
        t3_batch_predict(f.pt, f.ft, f.data, 0, 32, cfg, counter, &records);
    REQUIRE(classes.size() == 32);
    REQUIRE(records.size() == 32);
    CHECK(counter.batch_forwards == 3);
    CHECK(counter.merges == 1);
    CHECK(counter.sample_forwards == 0);

    std::vector<double> ls;
    for (int64_t i = 0; i < 32; ++i) {
        const LambdaRecord want =
            coefficient_for(predict_proba(f.pt, f.data.row(i)),
                            predict_proba(f.ft, f.data.row(i)), cfg, i);
        CHECK(records[size_t(i)].sample_index == i);
        CHECK(records[size_t(i)].lambda_prime == want.lambda_prime);
        ls.push_back(want.lambda_prime);
    }
    CHECK(mean_lambda == batch_lambda(ls));

    const ParameterMap merged = lerp_params(f.pt, f.ft, mean_lambda);
    for (int64_t i = 0; i < 32; ++i) {
        CHECK(classes[size_t(i)] == argmax_class(forward(merged, f.data.row(i))));
    }

    CHECK_THROWS_AS(t3_batch_predict(f.pt, f.ft, f.data, 5, 5, cfg, counter), DomainError);
}

TEST_CASE("ensemble averages logits and counts two forwards") {
    const Fixture& f = fixture();
    ForwardCounter counter;
    const auto x = f.data.row(0);
    const uint32_t cls = ensemble_predict(f.pt, f.ft, x, counter);
    CHECK(counter.sample_forwards == 2);

    const LogitVector z_pt = forward(f.pt, x);
    const LogitVector z_ft = forward(f.ft, x);
    LogitVector avg(z_pt.size());
    for (size_t k = 0; k < avg.size(); ++k) avg[k] = 0.5 * (z_pt[k] + z_ft[k]);
    CHECK(cls == argmax_class(avg));

    SUBCASE("linear models: ensemble argmax equals the midpoint soup") {
        const ParameterMap soup = lerp_params(f.pt, f.ft, 0.5);
        ForwardCounter c2;
        for (int64_t i = 0; i < f.data.num_samples; ++i) {
            CHECK(ensemble_predict(f.pt, f.ft, f.data.row(i), c2) ==
                  argmax_class(forward(soup, f.data.row(i))));
        }
    }
}

TEST_CASE("batched whole-set drivers count batch forwards") {
    const Fixture& f = fixture();
    ForwardCounter c_single;
    const auto preds = single_model_predict_batched(f.pt, f.data, 32, c_single);
    REQUIRE(int64_t(preds.size()) == f.data.num_samples);
    CHECK(c_single.batch_forwards == 3); // 70 rows / 32 -> 3 batches
    CHECK(c_single.sample_forwards == 0);
    for (int64_t i = 0; i < f.data.num_samples; ++i) {
        CHECK(preds[size_t(i)] == argmax_class(forward(f.pt, f.data.row(i))));
    }

    ForwardCounter c_ens;
    const auto ens = ensemble_predict_batched(f.pt, f.ft, f.data, 32, c_ens);
    CHECK(c_ens.batch_forwards == 6); // two models per batch
    ForwardCounter c_one;
    for (int64_t i = 0; i < f.data.num_samples; ++i) {
        CHECK(ens[size_t(i)] == ensemble_predict(f.pt, f.ft, f.data.row(i), c_one));
    }

    CHECK_THROWS_AS(single_model_predict_batched(f.pt, f.data, 0, c_single), DomainError);
}

TEST_CASE("precompute_lambdas matches the online coefficients") {
    const Fixture& f = fixture();
    const CoefficientConfig cfg;
    const LambdaCache cache = precompute_lambdas(f.pt, f.ft, f.data, cfg, 32);
    CHECK_NOTHROW(cache.validate());
    REQUIRE(int64_t(cache.per_sample.size()) == f.data.num_samples);
    CHECK(cache.per_batch_means.size() == 3); // ceil(70 / 32)
    CHECK(cache.batch_size == 32);
    CHECK(cache.config_digest == cfg.digest());

    for (int64_t i = 0; i < f.data.num_samples; ++i) {
        const LambdaRecord want =
            coefficient_for(predict_proba(f.pt, f.data.row(i)),
                            predict_proba(f.ft, f.data.row(i)), cfg, i);
        CHECK(cache.per_sample[size_t(i)].lambda_prime == want.lambda_prime);
        CHECK(cache.per_sample[size_t(i)].js == want.js);
    }

    // final ragged batch: rows 64..69
    std::vector<double> tail;
    for (int64_t i = 64; i < 70; ++i) tail.push_back(cache.per_sample[size_t(i)].lambda_prime);
    CHECK(cache.per_batch_means[2] == batch_lambda(tail));
}

TEST_CASE("cache container round-trips bit-exactly and rejects damage") {
    const Fixture& f = fixture();
    const CoefficientConfig cfg;
    const LambdaCache cache = precompute_lambdas(f.pt, f.ft, f.data, cfg, 16);
    const std::string bytes = encode_cache(cache);

    const LambdaCache back = decode_cache(bytes);
    CHECK(encode_cache(back) == bytes);
    CHECK(back.batch_size == cache.batch_size);
    CHECK(back.config_digest == cache.config_digest);
    REQUIRE(back.per_sample.size() == cache.per_sample.size());
    for (size_t i = 0; i < cache.per_sample.size(); ++i) {
        CHECK(std::memcmp(&back.per_sample[i], &cache.per_sample[i], sizeof(LambdaRecord)) ==
              0);
    }

    SUBCASE("bad magic") {
        std::string b = bytes;
        b[0] = 'Z';
        CHECK_THROWS_AS(decode_cache(b), FormatError);
    }
    SUBCASE("truncation") {
        std::string b = bytes;
        b.resize(b.size() - 5);
        CHECK_THROWS_AS(decode_cache(b), CorruptionError);
    }
    SUBCASE("trailing bytes") {
        std::string b = bytes + "!!";
        CHECK_THROWS_AS(decode_cache(b), CorruptionError);
    }
    SUBCASE("disk round-trip") {
        const auto dir = std::filesystem::temp_directory_path() / "ttm_cache_test";
        std::filesystem::create_directories(dir);
        const auto path = dir / "c.ttlc";
        save_cache(cache, path);
        CHECK(encode_cache(load_cache(path)) == bytes);
        std::filesystem::remove_all(dir);
    }
    SUBCASE("validate flags inconsistent batch means") {
        LambdaCache broken = cache;
        broken.per_batch_means[0] += 0.25;
        CHECK_THROWS_AS(broken.validate(), ValidationError);
    }
}

TEST_CASE("cached prediction is bitwise-identical to the online paths") {
    const Fixture& f = fixture();
    CoefficientConfig cfg;
    for (Policy policy : {Policy::js_sigmoid, Policy::entropy_ratio}) {
        cfg.policy = policy;
        const LambdaCache cache = precompute_lambdas(f.pt, f.ft, f.data, cfg, 32);

        ForwardCounter c_cache;
        const auto cached =
            predict_with_cache(f.pt, f.ft, f.data, cache, cfg, CacheMode::sample, c_cache);
        CHECK(c_cache.sample_forwards == f.data.num_samples);
        CHECK(c_cache.merges == f.data.num_samples);
        CHECK(c_cache.batch_forwards == 0);

        ForwardCounter c_online;
        for (int64_t i = 0; i < f.data.num_samples; ++i) {
            const auto [cls, rec] = t3_sample_predict(f.pt, f.ft, f.data.row(i), cfg, c_online);
            CHECK(cached[size_t(i)] == cls);
        }

        ForwardCounter c_bcache;
        const auto bcached =
            predict_with_cache(f.pt, f.ft, f.data, cache, cfg, CacheMode::batch, c_bcache);
        CHECK(c_bcache.batch_forwards == 3);
        CHECK(c_bcache.merges == 3);
        ForwardCounter c_bonline;
        std::vector<uint32_t> bonline;
        for (int64_t b = 0; b < f.data.num_samples; b += 32) {
            const int64_t end = std::min<int64_t>(b + 32, f.data.num_samples);
            const auto [classes, mean_l] =
                t3_batch_predict(f.pt, f.ft, f.data, b, end, cfg, c_bonline);
            bonline.insert(bonline.end(), classes.begin(), classes.end());
        }
        CHECK(bcached == bonline);
    }
}

TEST_CASE("stale caches are refused") {
    const Fixture& f = fixture();
    CoefficientConfig cfg;
    const LambdaCache cache = precompute_lambdas(f.pt, f.ft, f.data, cfg, 32);
    ForwardCounter counter;

    SUBCASE("different config digest") {
        CoefficientConfig other = cfg;
        other.tau_pt = 0.2;
        CHECK_THROWS_AS(
            predict_with_cache(f.pt, f.ft, f.data, cache, other, CacheMode::sample, counter),
            StalenessError);
    }
    SUBCASE("different sample count") {
        Dataset shorter = f.data;
        shorter.num_samples -= 1;
        shorter.features.resize(size_t(shorter.num_samples * shorter.num_features));
        shorter.labels.resize(size_t(shorter.num_samples));
        CHECK_THROWS_AS(
            predict_with_cache(f.pt, f.ft, shorter, cache, cfg, CacheMode::batch, counter),
            StalenessError);
    }
}

TEST_CASE("thread cap honors TTMC_THREADS and does not change results") {
    const Fixture& f = fixture();
    const CoefficientConfig cfg;
    const LambdaCache cache = precompute_lambdas(f.pt, f.ft, f.data, cfg, 16);

    char* prev = std::getenv("TTMC_THREADS");
    const std::string saved = prev ? prev : "";

    setenv("TTMC_THREADS", "1", 1);
    CHECK(max_threads() == 1);
    ForwardCounter c1;
    const auto serial = predict_with_cache(f.pt, f.ft, f.data, cache, cfg, CacheMode::batch, c1);

    setenv("TTMC_THREADS", "8", 1);
    CHECK(max_threads() == 8);
    ForwardCounter c8;
    const auto parallel =
        predict_with_cache(f.pt, f.ft, f.data, cache, cfg, CacheMode::batch, c8);

    CHECK(serial == parallel);
    CHECK(c1.batch_forwards == c8.batch_forwards);

    setenv("TTMC_THREADS", "0", 1);
    CHECK(max_threads() == 1); // clamped

    if (prev) {
        setenv("TTMC_THREADS", saved.c_str(), 1);
    } else {
        unsetenv("TTMC_THREADS");
    }
}
