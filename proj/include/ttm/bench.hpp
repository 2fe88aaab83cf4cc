#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ttm/coefficient.hpp"
#include "ttm/dynamic_merge.hpp"
#include "ttm/scenario.hpp"

namespace ttm {

// ---------- metrics ----------

// Fraction of positions where preds == y.
double top1_accuracy(const std::vector<uint32_t>& preds, const std::vector<uint32_t>& y);

// Err = 100 * (1 - acc_method) / (1 - acc_base); both accuracies in [0, 1],
// acc_base < 1.
double corruption_error(double acc_method, double acc_base);

// Arithmetic mean of the three shift-setting values (in-domain excluded).
double mean_over_shifts(double b2n, double noise, double digital);

// Standard sample correlation with 64-bit accumulation; a constant series
// (zero variance on either side) yields 0.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Counts of lambda_prime over `bins` equal-width bins spanning [0, 1];
// the right edge lands in the last bin, so counts always sum to N.
std::vector<int64_t> lambda_histogram(const std::vector<LambdaRecord>& records, int bins);

// ---------- method specs ----------

enum class MethodKind {
    pretrained,
    expert,
    ensemble,
    soup,
    task_arith,
    slerp,
    ties,
    mixup,
    dawin,
    t3,
    t3_batch,
};

// Parsed "name[:param[:param]]" form: soup:<alpha>, task_arith:<scale>,
// slerp:<t>, ties:<trim>:<scale>, mixup:<alpha>.
struct MethodSpec {
    MethodKind kind = MethodKind::pretrained;
    double alpha = 0.5; // soup / slerp / mixup parameter
    double trim = 0.2;  // ties trim fraction
    double scale = 1.0; // task_arith / ties scale
    std::string text;   // the spec string as given

    bool is_dynamic() const {
        return kind == MethodKind::dawin || kind == MethodKind::t3 ||
               kind == MethodKind::t3_batch;
    }
};

MethodSpec parse_method_spec(const std::string& text);
std::vector<MethodSpec> parse_method_list(const std::string& comma_separated);

// ---------- reports ----------

// Setting keys used throughout reports.
inline constexpr const char* kSettingInDomain = "in_domain";
inline constexpr const char* kSettingNovel = "novel";
inline constexpr const char* kSettingNoise = "noise";
inline constexpr const char* kSettingQuantize = "quantize";

struct LambdaStats {
    bool present = false; // false for merge-free / pure-static methods
    double mean = 0.0;
    double stddev = 0.0; // population standard deviation
    int bins = 10;
    std::vector<int64_t> histogram;
    int64_t count = 0;
};

struct EvalReport {
    std::string method;
    std::map<std::string, double> accuracy; // setting -> [0, 1]
    std::map<std::string, double> err;      // setting -> percent
    double mean_shift_acc = 0.0;            // mean accuracy over the three shifts
    double mce = 0.0;                       // mean Err over the three shifts
    LambdaStats lambda_stats;
    ForwardCounter counter;
};

struct QuadrantGroup {
    int64_t count = 0;
    bool has_stats = false; // false when the group is empty
    double mean_i = 0.0;
    double mean_r = 0.0;
    double pearson_ir = 0.0;
};

// Groups are (pretrained correct?, expert correct?): TrueTrue, TrueFalse,
// FalseTrue, FalseFalse, plus the pooled "overall" row.
struct QuadrantReport {
    static constexpr std::array<const char*, 4> kGroupNames = {
        "TrueTrue", "TrueFalse", "FalseTrue", "FalseFalse"};
    std::array<QuadrantGroup, 4> groups;
    QuadrantGroup overall;
};

QuadrantReport quadrant_analysis(const ParameterMap& pt, const ParameterMap& ft,
                                 const Dataset& data);

// ---------- benchmark driver ----------

struct BenchConfig {
    CoefficientConfig coef;
    int64_t batch_size = 32;
    int histogram_bins = 10;
};

// Optional precomputed caches keyed by dataset id ("in_domain", "novel",
// "noise_s1".."noise_s5", "quantize_s1".."quantize_s5"). When present, t3 and
// t3_batch replay them instead of recomputing coefficients.
using CacheSet = std::map<std::string, LambdaCache>;

// Evaluates every method on {in_domain, novel, noise, quantize}; corruption
// settings aggregate severities 1..5 by mean. Err normalizes against the
// pretrained model. Deterministic for fixed inputs.
std::vector<EvalReport> run_benchmark(const ShiftScenario& scenario, const ParameterMap& pt,
                                      const ParameterMap& ft,
                                      const std::vector<MethodSpec>& methods,
                                      const BenchConfig& cfg,
                                      const CacheSet* caches = nullptr);

// Dataset ids in evaluation order, paired with their setting key.
std::vector<std::pair<std::string, std::string>> scenario_dataset_ids();

std::string reports_to_json(const std::vector<EvalReport>& reports, const BenchConfig& cfg);
std::string reports_to_csv(const std::vector<EvalReport>& reports);

std::string quadrants_to_json(const QuadrantReport& report);

} // namespace ttm
