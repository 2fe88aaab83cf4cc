#include "ttm/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "ttm/error.hpp"

namespace ttm {

using nlohmann::json;

// ---------- metrics ----------

double top1_accuracy(const std::vector<uint32_t>& preds, const std::vector<uint32_t>& y) {
    if (preds.size() != y.size()) throw DomainError("top1_accuracy: length mismatch");
    if (preds.empty()) throw DomainError("top1_accuracy: empty input");
    int64_t hits = 0;
    for (size_t i = 0; i < preds.size(); ++i) hits += preds[i] == y[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double corruption_error(double acc_method, double acc_base) {
    if (!(acc_method >= 0.0 && acc_method <= 1.0) || !(acc_base >= 0.0 && acc_base <= 1.0)) {
        throw DomainError("corruption_error: accuracies must be in [0, 1]");
    }
    if (acc_base == 1.0) {
        throw DomainError("corruption_error: base accuracy of 1 leaves Err undefined");
    }
    return 100.0 * (1.0 - acc_method) / (1.0 - acc_base);
}

double mean_over_shifts(double b2n, double noise, double digital) {
    return (b2n + noise + digital) / 3.0;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DomainError("pearson: length mismatch");
    if (xs.empty()) throw DomainError("pearson: empty input");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0; // constant series
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<int64_t> lambda_histogram(const std::vector<LambdaRecord>& records, int bins) {
    if (bins < 1) throw DomainError("lambda_histogram: bins must be >= 1");
    std::vector<int64_t> counts(static_cast<size_t>(bins), 0);
    for (const LambdaRecord& rec : records) {
        const double v = std::clamp(rec.lambda_prime, 0.0, 1.0);
        const int bin = std::min(static_cast<int>(v * bins), bins - 1);
        counts[static_cast<size_t>(bin)] += 1;
    }
    return counts;
}

// ---------- method specs ----------

namespace {

double parse_number(const std::string& text, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0' || !std::isfinite(v)) {
        throw DomainError("bad numeric parameter in method spec: " + context);
    }
    return v;
}

std::string strip(const std::string& s) {
    size_t a = 0;
    size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

} // namespace

MethodSpec parse_method_spec(const std::string& raw) {
    const std::string text = strip(raw);
    std::vector<std::string> parts;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t colon = text.find(':', pos);
        if (colon == std::string::npos) {
            parts.push_back(text.substr(pos));
            break;
        }
        parts.push_back(text.substr(pos, colon - pos));
        pos = colon + 1;
    }
    if (parts.empty() || parts[0].empty()) throw DomainError("empty method spec");

    MethodSpec spec;
    spec.text = text;
    const std::string& name = parts[0];
    const size_t extra = parts.size() - 1;

    auto want_params = [&](size_t max_extra) {
        if (extra > max_extra) throw DomainError("too many parameters in method spec: " + text);
    };

    if (name == "pretrained" || name == "expert" || name == "ensemble" || name == "dawin" ||
        name == "t3" || name == "t3_batch") {
        want_params(0);
        if (name == "pretrained") spec.kind = MethodKind::pretrained;
        else if (name == "expert") spec.kind = MethodKind::expert;
        else if (name == "ensemble") spec.kind = MethodKind::ensemble;
        else if (name == "dawin") spec.kind = MethodKind::dawin;
        else if (name == "t3") spec.kind = MethodKind::t3;
        else spec.kind = MethodKind::t3_batch;
        return spec;
    }
    if (name == "soup" || name == "fixed") {
        want_params(1);
        spec.kind = MethodKind::soup;
        if (extra == 1) spec.alpha = parse_number(parts[1], text);
        if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
            throw DomainError("soup coefficient must be in [0, 1]: " + text);
        }
        return spec;
    }
    if (name == "slerp") {
        want_params(1);
        spec.kind = MethodKind::slerp;
        if (extra == 1) spec.alpha = parse_number(parts[1], text);
        if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
            throw DomainError("slerp parameter must be in [0, 1]: " + text);
        }
        return spec;
    }
    if (name == "task_arith") {
        want_params(1);
        spec.kind = MethodKind::task_arith;
        if (extra == 1) spec.scale = parse_number(parts[1], text);
        return spec;
    }
    if (name == "ties") {
        want_params(2);
        spec.kind = MethodKind::ties;
        if (extra >= 1) spec.trim = parse_number(parts[1], text);
        if (extra == 2) spec.scale = parse_number(parts[2], text);
        if (!(spec.trim > 0.0 && spec.trim <= 1.0)) {
            throw DomainError("ties trim fraction must be in (0, 1]: " + text);
        }
        return spec;
    }
    if (name == "mixup") {
        want_params(1);
        spec.kind = MethodKind::mixup;
        if (extra == 1) spec.alpha = parse_number(parts[1], text);
        if (!(spec.alpha > 0.0)) throw DomainError("mixup alpha must be positive: " + text);
        return spec;
    }
    throw DomainError("unknown method: " + name);
}

std::vector<MethodSpec> parse_method_list(const std::string& comma_separated) {
    std::vector<MethodSpec> specs;
    size_t pos = 0;
    while (pos <= comma_separated.size()) {
        const size_t comma = comma_separated.find(',', pos);
        const std::string item = comma == std::string::npos
                                     ? comma_separated.substr(pos)
                                     : comma_separated.substr(pos, comma - pos);
        if (!strip(item).empty()) specs.push_back(parse_method_spec(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (specs.empty()) throw DomainError("no methods requested");
    return specs;
}

// ---------- quadrant analysis ----------

QuadrantReport quadrant_analysis(const ParameterMap& pt, const ParameterMap& ft,
                                 const Dataset& data) {
    require_aligned(pt, ft);
    data.validate();
    if (data.num_samples < 1) throw DomainError("quadrant_analysis: empty dataset");

    const FlatParams fpt = flatten(pt);
    const FlatParams fft = flatten(ft);

    std::array<std::vector<double>, 4> group_i;
    std::array<std::vector<double>, 4> group_r;
    std::vector<double> all_i;
    std::vector<double> all_r;
    all_i.reserve(static_cast<size_t>(data.num_samples));
    all_r.reserve(static_cast<size_t>(data.num_samples));

    for (int64_t n = 0; n < data.num_samples; ++n) {
        const auto x = data.row(n);
        const LogitVector z_pt = forward_flat(fpt, x);
        const LogitVector z_ft = forward_flat(fft, x);
        const ProbVector p_pt = softmax(z_pt);
        const ProbVector p_ft = softmax(z_ft);
        const uint32_t y = data.labels[static_cast<size_t>(n)];
        const bool pt_ok = argmax_class(z_pt) == y;
        const bool ft_ok = argmax_class(z_ft) == y;
        const double i_val = js_divergence(p_pt, p_ft);
        const double r_val = entropy_ratio(p_pt, p_ft);

        const size_t g = (pt_ok ? 0u : 2u) + (ft_ok ? 0u : 1u);
        group_i[g].push_back(i_val);
        group_r[g].push_back(r_val);
        all_i.push_back(i_val);
        all_r.push_back(r_val);
    }

    auto make_group = [](const std::vector<double>& is, const std::vector<double>& rs) {
        QuadrantGroup g;
        g.count = static_cast<int64_t>(is.size());
        if (g.count == 0) return g;
        g.has_stats = true;
        double si = 0.0;
        double sr = 0.0;
        for (size_t k = 0; k < is.size(); ++k) {
            si += is[k];
            sr += rs[k];
        }
        g.mean_i = si / static_cast<double>(is.size());
        g.mean_r = sr / static_cast<double>(rs.size());
        g.pearson_ir = pearson(is, rs);
        return g;
    };

    QuadrantReport report;
    for (size_t g = 0; g < 4; ++g) report.groups[g] = make_group(group_i[g], group_r[g]);
    report.overall = make_group(all_i, all_r);
    return report;
}

// ---------- benchmark driver ----------

namespace {

constexpr uint64_t kMixupSeedSalt = 0x6d69787570ull;

struct EvalSet {
    std::string id;
    std::string setting;
    const Dataset* data;
};

std::vector<EvalSet> collect_sets(const ShiftScenario& s) {
    std::vector<EvalSet> sets;
    sets.push_back({"in_domain", kSettingInDomain, &s.test_in_domain});
    sets.push_back({"novel", kSettingNovel, &s.test_novel});
    for (CorruptionKind kind : {CorruptionKind::noise, CorruptionKind::quantize}) {
        for (int severity = 1; severity <= 5; ++severity) {
            const auto it = s.test_corrupted.find({kind, severity});
            if (it == s.test_corrupted.end()) {
                throw DomainError("scenario is missing a corrupted test set");
            }
            sets.push_back({corruption_kind_name(kind) + "_s" + std::to_string(severity),
                            kind == CorruptionKind::noise ? kSettingNoise : kSettingQuantize,
                            &it->second});
        }
    }
    return sets;
}

// Mean per-setting accuracy from per-dataset accuracies.
std::map<std::string, double> settle(const std::map<std::string, std::vector<double>>& accs) {
    std::map<std::string, double> out;
    for (const auto& [setting, values] : accs) {
        double sum = 0.0;
        for (double v : values) sum += v;
        out[setting] = sum / static_cast<double>(values.size());
    }
    return out;
}

LambdaStats make_lambda_stats(const std::vector<LambdaRecord>& records, int bins) {
    LambdaStats stats;
    stats.present = true;
    stats.bins = bins;
    stats.count = static_cast<int64_t>(records.size());
    stats.histogram = lambda_histogram(records, bins);
    if (records.empty()) return stats;
    double sum = 0.0;
    for (const auto& rec : records) sum += rec.lambda_prime;
    stats.mean = sum / static_cast<double>(records.size());
    double var = 0.0;
    for (const auto& rec : records) {
        const double d = rec.lambda_prime - stats.mean;
        var += d * d;
    }
    stats.stddev = std::sqrt(var / static_cast<double>(records.size()));
    return stats;
}

const LambdaCache* find_cache(const CacheSet* caches, const std::string& id) {
    if (caches == nullptr) return nullptr;
    const auto it = caches->find(id);
    return it == caches->end() ? nullptr : &it->second;
}

} // namespace

std::vector<std::pair<std::string, std::string>> scenario_dataset_ids() {
    std::vector<std::pair<std::string, std::string>> ids;
    ids.emplace_back("in_domain", kSettingInDomain);
    ids.emplace_back("novel", kSettingNovel);
    for (CorruptionKind kind : {CorruptionKind::noise, CorruptionKind::quantize}) {
        for (int severity = 1; severity <= 5; ++severity) {
            ids.emplace_back(corruption_kind_name(kind) + "_s" + std::to_string(severity),
                             kind == CorruptionKind::noise ? kSettingNoise
                                                           : kSettingQuantize);
        }
    }
    return ids;
}

std::vector<EvalReport> run_benchmark(const ShiftScenario& scenario, const ParameterMap& pt,
                                      const ParameterMap& ft,
                                      const std::vector<MethodSpec>& methods,
                                      const BenchConfig& cfg, const CacheSet* caches) {
    cfg.coef.validate();
    if (cfg.batch_size < 1) throw DomainError("run_benchmark: batch_size must be >= 1");
    if (cfg.histogram_bins < 1) throw DomainError("run_benchmark: bins must be >= 1");
    if (methods.empty()) throw DomainError("run_benchmark: no methods requested");
    require_aligned(pt, ft);
    if (model_features(pt) != scenario.params.d ||
        model_classes(pt) != scenario.params.total_classes()) {
        throw AlignmentError("models do not match the scenario dimensions");
    }

    const std::vector<EvalSet> sets = collect_sets(scenario);

    // Base (pretrained) accuracy per setting, used by every Err column.
    std::map<std::string, double> base_acc;
    {
        std::map<std::string, std::vector<double>> accs;
        ForwardCounter scratch;
        for (const EvalSet& set : sets) {
            const auto preds =
                single_model_predict_batched(pt, *set.data, cfg.batch_size, scratch);
            accs[set.setting].push_back(top1_accuracy(preds, set.data->labels));
        }
        base_acc = settle(accs);
    }

    CoefficientConfig dawin_cfg;
    dawin_cfg.policy = Policy::entropy_ratio;

    std::vector<EvalReport> reports;
    reports.reserve(methods.size());

    for (const MethodSpec& spec : methods) {
        EvalReport report;
        report.method = spec.text;

        // Static merges build their model once per run.
        ParameterMap merged;
        bool merged_ready = false;
        std::vector<LambdaRecord> records;

        switch (spec.kind) {
            case MethodKind::soup:
                merged = lerp_params(pt, ft, spec.alpha);
                merged_ready = true;
                report.counter.merges += 1;
                break;
            case MethodKind::task_arith:
                merged = task_arithmetic(pt, ft, spec.scale);
                merged_ready = true;
                report.counter.merges += 1;
                break;
            case MethodKind::slerp:
                merged = slerp_params(pt, ft, spec.alpha);
                merged_ready = true;
                report.counter.merges += 1;
                break;
            case MethodKind::ties:
                merged = ties_merge(pt, ft, spec.trim, spec.scale);
                merged_ready = true;
                report.counter.merges += 1;
                break;
            case MethodKind::mixup: {
                SplitMix64 rng(scenario.seed ^ kMixupSeedSalt);
                auto [m, lambda] = mixup_merge(pt, ft, rng, spec.alpha);
                merged = std::move(m);
                merged_ready = true;
                report.counter.merges += 1;
                LambdaRecord rec;
                rec.lambda_raw = lambda;
                rec.lambda_prime = lambda;
                records.push_back(rec);
                break;
            }
            default:
                break;
        }

        std::map<std::string, std::vector<double>> accs;
        for (const EvalSet& set : sets) {
            std::vector<uint32_t> preds;
            const Dataset& data = *set.data;

            switch (spec.kind) {
                case MethodKind::pretrained:
                    preds = single_model_predict_batched(pt, data, cfg.batch_size,
                                                         report.counter);
                    break;
                case MethodKind::expert:
                    preds = single_model_predict_batched(ft, data, cfg.batch_size,
                                                         report.counter);
                    break;
                case MethodKind::ensemble:
                    preds = ensemble_predict_batched(pt, ft, data, cfg.batch_size,
                                                     report.counter);
                    break;
                case MethodKind::dawin: {
                    preds.resize(static_cast<size_t>(data.num_samples));
                    for (int64_t i = 0; i < data.num_samples; ++i) {
                        auto [p, rec] =
                            t3_sample_predict(pt, ft, data.row(i), dawin_cfg, report.counter);
                        rec.sample_index = i;
                        preds[static_cast<size_t>(i)] = p;
                        records.push_back(rec);
                    }
                    break;
                }
                case MethodKind::t3: {
                    if (const LambdaCache* cache = find_cache(caches, set.id)) {
                        preds = predict_with_cache(pt, ft, data, *cache, cfg.coef,
                                                   CacheMode::sample, report.counter);
                        records.insert(records.end(), cache->per_sample.begin(),
                                       cache->per_sample.end());
                        break;
                    }
                    preds.resize(static_cast<size_t>(data.num_samples));
                    for (int64_t i = 0; i < data.num_samples; ++i) {
                        auto [p, rec] =
                            t3_sample_predict(pt, ft, data.row(i), cfg.coef, report.counter);
                        rec.sample_index = i;
                        preds[static_cast<size_t>(i)] = p;
                        records.push_back(rec);
                    }
                    break;
                }
                case MethodKind::t3_batch: {
                    if (const LambdaCache* cache = find_cache(caches, set.id)) {
                        preds = predict_with_cache(pt, ft, data, *cache, cfg.coef,
                                                   CacheMode::batch, report.counter);
                        records.insert(records.end(), cache->per_sample.begin(),
                                       cache->per_sample.end());
                        break;
                    }
                    preds.reserve(static_cast<size_t>(data.num_samples));
                    for (int64_t begin = 0; begin < data.num_samples;
                         begin += cfg.batch_size) {
                        const int64_t end = std::min(data.num_samples, begin + cfg.batch_size);
                        auto [batch_preds, mean_lambda] = t3_batch_predict(
                            pt, ft, data, begin, end, cfg.coef, report.counter, &records);
                        (void)mean_lambda;
                        preds.insert(preds.end(), batch_preds.begin(), batch_preds.end());
                    }
                    break;
                }
                default:
                    preds = single_model_predict_batched(merged_ready ? merged : pt, data,
                                                         cfg.batch_size, report.counter);
                    break;
            }
            accs[set.setting].push_back(top1_accuracy(preds, data.labels));
        }

        report.accuracy = settle(accs);
        for (const auto& [setting, acc] : report.accuracy) {
            report.err[setting] = corruption_error(acc, base_acc.at(setting));
        }
        report.mean_shift_acc = mean_over_shifts(report.accuracy.at(kSettingNovel),
                                                 report.accuracy.at(kSettingNoise),
                                                 report.accuracy.at(kSettingQuantize));
        report.mce = mean_over_shifts(report.err.at(kSettingNovel),
                                      report.err.at(kSettingNoise),
                                      report.err.at(kSettingQuantize));

        if (spec.is_dynamic() || spec.kind == MethodKind::mixup) {
            report.lambda_stats = make_lambda_stats(records, cfg.histogram_bins);
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

// ---------- emitters ----------

namespace {

json lambda_stats_to_json(const LambdaStats& stats) {
    if (!stats.present) return nullptr;
    json j;
    j["mean"] = stats.mean;
    j["std"] = stats.stddev;
    j["bins"] = stats.bins;
    j["histogram"] = stats.histogram;
    j["count"] = stats.count;
    return j;
}

json counter_to_json(const ForwardCounter& counter) {
    json j;
    j["sample_forwards"] = counter.sample_forwards;
    j["batch_forwards"] = counter.batch_forwards;
    j["merges"] = counter.merges;
    return j;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string reports_to_json(const std::vector<EvalReport>& reports, const BenchConfig& cfg) {
    json root;
    root["batch_size"] = cfg.batch_size;
    root["coefficient"] = json::parse(cfg.coef.to_json());
    json methods = json::array();
    for (const EvalReport& report : reports) {
        json m;
        m["method"] = report.method;
        m["accuracy"] = report.accuracy;
        m["err"] = report.err;
        m["mean_shift_acc"] = report.mean_shift_acc;
        m["mce"] = report.mce;
        m["lambda_stats"] = lambda_stats_to_json(report.lambda_stats);
        m["counter"] = counter_to_json(report.counter);
        methods.push_back(std::move(m));
    }
    root["methods"] = std::move(methods);
    return root.dump(2) + "\n";
}

std::string reports_to_csv(const std::vector<EvalReport>& reports) {
    std::string out = "method,setting,accuracy,err\n";
    for (const EvalReport& report : reports) {
        for (const char* setting :
             {kSettingInDomain, kSettingNovel, kSettingNoise, kSettingQuantize}) {
            out += report.method;
            out += ',';
            out += setting;
            out += ',';
            out += format_number(report.accuracy.at(setting));
            out += ',';
            out += format_number(report.err.at(setting));
            out += '\n';
        }
        out += report.method;
        out += ",mean_shift,";
        out += format_number(report.mean_shift_acc);
        out += ',';
        out += format_number(report.mce);
        out += '\n';
    }
    return out;
}

std::string quadrants_to_json(const QuadrantReport& report) {
    auto group_to_json = [](const QuadrantGroup& g) {
        json j;
        j["count"] = g.count;
        if (g.has_stats) {
            j["mean_i"] = g.mean_i;
            j["mean_r"] = g.mean_r;
            j["pearson_ir"] = g.pearson_ir;
        } else {
            j["mean_i"] = nullptr;
            j["mean_r"] = nullptr;
            j["pearson_ir"] = nullptr;
        }
        return j;
    };
    json root;
    json groups;
    for (size_t g = 0; g < 4; ++g) {
        groups[QuadrantReport::kGroupNames[g]] = group_to_json(report.groups[g]);
    }
    root["groups"] = std::move(groups);
    root["overall"] = group_to_json(report.overall);
    return root.dump(2) + "\n";
}

} // namespace ttm
