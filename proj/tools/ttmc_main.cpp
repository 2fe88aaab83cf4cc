// ttmc: generate shift scenarios, precompute merge coefficients, run the
// benchmark, and dump diagnostics. Exit codes: 0 success, 1 I/O,
// 2 usage/validation, 3 stale cache.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ttm/bench.hpp"
#include "ttm/binio.hpp"
#include "ttm/coefficient.hpp"
#include "ttm/dynamic_merge.hpp"
#include "ttm/error.hpp"
#include "ttm/models.hpp"
#include "ttm/param_store.hpp"
#include "ttm/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "scenario.json";
constexpr int kManifestVersion = 1;

// ---------- shared flag bundles ----------

struct CoefOpts {
    ttm::CoefficientConfig cfg;
    std::string policy = "js_sigmoid";
    std::string direction = "per_eq10";
};

void add_coef_flags(CLI::App* cmd, CoefOpts& o) {
    cmd->add_option("--lambda-min", o.cfg.lambda_min, "lower coefficient bound")
        ->capture_default_str();
    cmd->add_option("--lambda-max", o.cfg.lambda_max, "upper coefficient bound")
        ->capture_default_str();
    cmd->add_option("--delta", o.cfg.delta, "extrapolation step")->capture_default_str();
    cmd->add_option("--tau-pt", o.cfg.tau_pt, "pretrained entropy threshold, nats")
        ->capture_default_str();
    cmd->add_option("--tau-ft", o.cfg.tau_ft, "finetuned entropy threshold, nats")
        ->capture_default_str();
    cmd->add_option("--policy", o.policy,
                    "js_sigmoid | entropy_ratio | confidence_ratio | fixed:<alpha>")
        ->capture_default_str();
    cmd->add_option("--direction", o.direction, "per_eq10 | inverted")->capture_default_str();
}

ttm::CoefficientConfig resolve_coef(const CoefOpts& o) {
    ttm::CoefficientConfig cfg = o.cfg;
    cfg.policy = ttm::policy_from_string(o.policy, &cfg.fixed_alpha);
    cfg.direction = ttm::direction_from_string(o.direction);
    cfg.validate();
    return cfg;
}

// ---------- scenario manifest ----------

std::string corrupted_id(ttm::CorruptionKind kind, int severity) {
    return ttm::corruption_kind_name(kind) + "_s" + std::to_string(severity);
}

json params_to_json(const ttm::ScenarioParams& p) {
    return json{{"dim", p.d},
                {"base_classes", p.c_base},
                {"novel_classes", p.c_novel},
                {"n_pretrain", p.n_pretrain},
                {"n_expert", p.n_expert},
                {"n_test_in_domain", p.n_test_in_domain},
                {"n_test_novel", p.n_test_novel},
                {"base_radius", p.base_radius},
                {"novel_radius", p.novel_radius},
                {"narrow_sigma", p.narrow_sigma},
                {"broad_sigma", p.broad_sigma},
                {"pretrain_clusters", p.pretrain_clusters},
                {"cluster_spread", p.cluster_spread},
                {"site_offset", p.site_offset}};
}

ttm::ScenarioParams params_from_json(const json& j) {
    ttm::ScenarioParams p;
    p.d = j.at("dim").get<int64_t>();
    p.c_base = j.at("base_classes").get<int64_t>();
    p.c_novel = j.at("novel_classes").get<int64_t>();
    p.n_pretrain = j.at("n_pretrain").get<int64_t>();
    p.n_expert = j.at("n_expert").get<int64_t>();
    p.n_test_in_domain = j.at("n_test_in_domain").get<int64_t>();
    p.n_test_novel = j.at("n_test_novel").get<int64_t>();
    p.base_radius = j.at("base_radius").get<double>();
    p.novel_radius = j.at("novel_radius").get<double>();
    p.narrow_sigma = j.at("narrow_sigma").get<double>();
    p.broad_sigma = j.at("broad_sigma").get<double>();
    p.pretrain_clusters = j.at("pretrain_clusters").get<int64_t>();
    p.cluster_spread = j.at("cluster_spread").get<double>();
    p.site_offset = j.at("site_offset").get<double>();
    return p;
}

struct ScenarioOnDisk {
    ttm::ShiftScenario scenario;
    fs::path pretrained_path;
    fs::path expert_path;
};

ScenarioOnDisk load_scenario_dir(const fs::path& dir) {
    const fs::path manifest_path = dir / kManifestName;
    json manifest;
    try {
        manifest = json::parse(ttm::io::read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ttm::FormatError(manifest_path.string() + ": bad manifest: " + e.what());
    }
    try {
        if (manifest.at("format").get<std::string>() != "ttmc-scenario" ||
            manifest.at("version").get<int>() != kManifestVersion) {
            throw ttm::FormatError(manifest_path.string() + ": unsupported manifest");
        }
        ScenarioOnDisk out;
        out.scenario.seed = manifest.at("seed").get<uint64_t>();
        out.scenario.params = params_from_json(manifest.at("params"));
        out.scenario.params.validate();
        const json& cks = manifest.at("checkpoints");
        out.pretrained_path = dir / cks.at("pretrained").get<std::string>();
        out.expert_path = dir / cks.at("expert").get<std::string>();
        const json& sets = manifest.at("datasets");
        auto load = [&](const std::string& key) {
            return ttm::load_dataset(dir / sets.at(key).get<std::string>());
        };
        out.scenario.pretrain_data = load("pretrain");
        out.scenario.expert_data = load("expert");
        out.scenario.test_in_domain = load("in_domain");
        out.scenario.test_novel = load("novel");
        for (ttm::CorruptionKind kind : {ttm::CorruptionKind::noise, ttm::CorruptionKind::quantize}) {
            for (int sev = 1; sev <= 5; ++sev) {
                out.scenario.test_corrupted[{kind, sev}] = load(corrupted_id(kind, sev));
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw ttm::FormatError(manifest_path.string() + ": bad manifest: " + e.what());
    }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    ttm::io::write_file_atomic(path, text);
}

// ---------- gen ----------

struct GenOpts {
    uint64_t seed = 42;
    std::string out_dir;
    ttm::ScenarioParams params;
};

int cmd_gen(const GenOpts& o) {
    o.params.validate();
    ttm::ShiftScenario scenario = ttm::gen_scenario(o.seed, o.params);
    auto [pt, ft] = ttm::train_scenario_models(scenario);

    const fs::path dir(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir / "data", ec);
    if (ec) {
        throw ttm::IoError(o.out_dir + ": cannot create output directory: " + ec.message());
    }

    json datasets;
    auto put = [&](const std::string& id, const ttm::Dataset& ds) {
        const std::string rel = "data/" + id + ".ttds";
        ttm::save_dataset(ds, dir / rel);
        datasets[id] = rel;
    };
    put("pretrain", scenario.pretrain_data);
    put("expert", scenario.expert_data);
    put("in_domain", scenario.test_in_domain);
    put("novel", scenario.test_novel);
    for (const auto& [key, ds] : scenario.test_corrupted) {
        put(corrupted_id(key.first, key.second), ds);
    }

    ttm::save_checkpoint(pt, dir / "pretrained.ttmc");
    ttm::save_checkpoint(ft, dir / "expert.ttmc");

    json manifest{{"format", "ttmc-scenario"},
                  {"version", kManifestVersion},
                  {"seed", o.seed},
                  {"params", params_to_json(o.params)},
                  {"checkpoints", json{{"pretrained", "pretrained.ttmc"}, {"expert", "expert.ttmc"}}},
                  {"datasets", datasets}};
    write_text_atomic(dir / kManifestName, manifest.dump(2) + "\n");

    std::printf("wrote scenario seed=%llu to %s (%zu datasets, 2 checkpoints)\n",
                static_cast<unsigned long long>(o.seed), o.out_dir.c_str(), datasets.size());
    return 0;
}

// ---------- precompute ----------

struct PrecomputeOpts {
    std::string scenario_dir;
    std::string pt_path, ft_path, data_path;
    std::string out_path;
    int64_t batch_size = 32;
    CoefOpts coef;
};

int cmd_precompute(const PrecomputeOpts& o) {
    const ttm::CoefficientConfig cfg = resolve_coef(o.coef);
    if (o.batch_size < 1) {
        throw ttm::DomainError("batch size must be >= 1");
    }
    if (!o.scenario_dir.empty()) {
        ScenarioOnDisk sc = load_scenario_dir(o.scenario_dir);
        const ttm::ParameterMap pt = !o.pt_path.empty() ? ttm::load_checkpoint(o.pt_path)
                                                        : ttm::load_checkpoint(sc.pretrained_path);
        const ttm::ParameterMap ft = !o.ft_path.empty() ? ttm::load_checkpoint(o.ft_path)
                                                        : ttm::load_checkpoint(sc.expert_path);
        const fs::path out_dir(o.out_path);
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) {
            throw ttm::IoError(o.out_path + ": cannot create cache directory: " + ec.message());
        }
        for (const auto& [id, setting] : ttm::scenario_dataset_ids()) {
            (void)setting;
            const ttm::Dataset* ds = nullptr;
            if (id == "in_domain") {
                ds = &sc.scenario.test_in_domain;
            } else if (id == "novel") {
                ds = &sc.scenario.test_novel;
            } else {
                for (const auto& [key, d] : sc.scenario.test_corrupted) {
                    if (corrupted_id(key.first, key.second) == id) ds = &d;
                }
            }
            ttm::LambdaCache cache = ttm::precompute_lambdas(pt, ft, *ds, cfg, o.batch_size);
            ttm::save_cache(cache, out_dir / (id + ".ttlc"));
        }
        std::printf("wrote %zu caches to %s\n", ttm::scenario_dataset_ids().size(),
                    o.out_path.c_str());
        return 0;
    }
    if (o.pt_path.empty() || o.ft_path.empty() || o.data_path.empty()) {
        throw ttm::DomainError("precompute needs either --scenario or all of --pt/--ft/--data");
    }
    const ttm::ParameterMap pt = ttm::load_checkpoint(o.pt_path);
    const ttm::ParameterMap ft = ttm::load_checkpoint(o.ft_path);
    const ttm::Dataset data = ttm::load_dataset(o.data_path);
    ttm::LambdaCache cache = ttm::precompute_lambdas(pt, ft, data, cfg, o.batch_size);
    ttm::save_cache(cache, o.out_path);
    std::printf("wrote cache for %lld samples to %s\n",
                static_cast<long long>(data.num_samples), o.out_path.c_str());
    return 0;
}

// ---------- eval ----------

struct EvalOpts {
    std::string scenario_dir;
    std::string pt_path, ft_path;
    std::string methods = "pretrained,expert,ensemble,soup,task_arith,slerp,ties,mixup,dawin,t3,t3_batch";
    std::string cache_dir;
    std::string report = "json";
    std::string out_path;
    int64_t batch_size = 32;
    int bins = 10;
    CoefOpts coef;
};

int cmd_eval(const EvalOpts& o) {
    if (o.report != "json" && o.report != "csv") {
        throw ttm::DomainError("--report must be json or csv, got '" + o.report + "'");
    }
    const std::vector<ttm::MethodSpec> methods = ttm::parse_method_list(o.methods);
    ttm::BenchConfig bc;
    bc.coef = resolve_coef(o.coef);
    bc.batch_size = o.batch_size;
    bc.histogram_bins = o.bins;

    ScenarioOnDisk sc = load_scenario_dir(o.scenario_dir);
    const ttm::ParameterMap pt = !o.pt_path.empty() ? ttm::load_checkpoint(o.pt_path)
                                                    : ttm::load_checkpoint(sc.pretrained_path);
    const ttm::ParameterMap ft = !o.ft_path.empty() ? ttm::load_checkpoint(o.ft_path)
                                                    : ttm::load_checkpoint(sc.expert_path);

    ttm::CacheSet caches;
    const ttm::CacheSet* cache_ptr = nullptr;
    if (!o.cache_dir.empty()) {
        for (const auto& [id, setting] : ttm::scenario_dataset_ids()) {
            (void)setting;
            const fs::path path = fs::path(o.cache_dir) / (id + ".ttlc");
            if (fs::exists(path)) {
                caches.emplace(id, ttm::load_cache(path));
            }
        }
        if (caches.empty()) {
            throw ttm::IoError(o.cache_dir + ": no .ttlc caches found");
        }
        cache_ptr = &caches;
    }

    const std::vector<ttm::EvalReport> reports =
        ttm::run_benchmark(sc.scenario, pt, ft, methods, bc, cache_ptr);
    const std::string text =
        o.report == "json" ? ttm::reports_to_json(reports, bc) : ttm::reports_to_csv(reports);
    if (o.out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        write_text_atomic(o.out_path, text);
        std::printf("wrote %s report for %zu methods to %s\n", o.report.c_str(), reports.size(),
                    o.out_path.c_str());
    }
    return 0;
}

// ---------- diag ----------

struct DiagOpts {
    std::string pt_path, ft_path, data_path;
    std::string out_path;
    int64_t batch_size = 32;
    int bins = 10;
    CoefOpts coef;
};

int cmd_diag(const DiagOpts& o) {
    const ttm::CoefficientConfig cfg = resolve_coef(o.coef);
    if (o.bins < 1) {
        throw ttm::DomainError("--bins must be >= 1");
    }
    const ttm::ParameterMap pt = ttm::load_checkpoint(o.pt_path);
    const ttm::ParameterMap ft = ttm::load_checkpoint(o.ft_path);
    const ttm::Dataset data = ttm::load_dataset(o.data_path);

    const ttm::LambdaCache cache = ttm::precompute_lambdas(pt, ft, data, cfg, o.batch_size);
    const std::vector<int64_t> hist = ttm::lambda_histogram(cache.per_sample, o.bins);
    double mean = 0.0, var = 0.0;
    for (const auto& rec : cache.per_sample) mean += rec.lambda_prime;
    mean /= static_cast<double>(cache.per_sample.size());
    for (const auto& rec : cache.per_sample) {
        const double d = rec.lambda_prime - mean;
        var += d * d;
    }
    var /= static_cast<double>(cache.per_sample.size());

    const ttm::QuadrantReport quad = ttm::quadrant_analysis(pt, ft, data);

    json out;
    out["n"] = data.num_samples;
    out["coefficient"] = json::parse(cfg.to_json());
    out["lambda_histogram"] = json{{"bins", o.bins},
                                   {"counts", hist},
                                   {"mean", mean},
                                   {"stddev", std::sqrt(var)}};
    out["quadrants"] = json::parse(ttm::quadrants_to_json(quad));
    out["rho_ir"] = quad.overall.has_stats ? json(quad.overall.pearson_ir) : json(nullptr);
    const std::string text = out.dump(2) + "\n";
    if (o.out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        write_text_atomic(o.out_path, text);
        std::printf("wrote diagnostics for %lld samples to %s\n",
                    static_cast<long long>(data.num_samples), o.out_path.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"test-time adaptive merging of two classifier checkpoints"};
    app.require_subcommand(1);

    GenOpts gen;
    CLI::App* cgen = app.add_subcommand("gen", "generate a shift scenario and train both models");
    cgen->add_option("--seed", gen.seed, "scenario seed")->capture_default_str();
    cgen->add_option("--out", gen.out_dir, "output directory")->required();
    cgen->add_option("--dim", gen.params.d, "feature dimension")->capture_default_str();
    cgen->add_option("--base-classes", gen.params.c_base, "classes in the expert data")
        ->capture_default_str();
    cgen->add_option("--novel-classes", gen.params.c_novel, "classes held out from the expert")
        ->capture_default_str();
    cgen->add_option("--n-pretrain", gen.params.n_pretrain, "pretraining samples")
        ->capture_default_str();
    cgen->add_option("--n-expert", gen.params.n_expert, "fine-tuning samples")
        ->capture_default_str();
    cgen->add_option("--n-test-in", gen.params.n_test_in_domain, "in-domain test samples")
        ->capture_default_str();
    cgen->add_option("--n-test-novel", gen.params.n_test_novel, "novel-class test samples")
        ->capture_default_str();
    cgen->add_option("--base-radius", gen.params.base_radius, "base class-mean radius")
        ->capture_default_str();
    cgen->add_option("--novel-radius", gen.params.novel_radius, "novel class-mean radius")
        ->capture_default_str();
    cgen->add_option("--narrow-sigma", gen.params.narrow_sigma, "expert-site class spread")
        ->capture_default_str();
    cgen->add_option("--broad-sigma", gen.params.broad_sigma, "pretraining class spread")
        ->capture_default_str();
    cgen->add_option("--pretrain-clusters", gen.params.pretrain_clusters,
                     "sub-clusters per pretraining class")
        ->capture_default_str();
    cgen->add_option("--cluster-spread", gen.params.cluster_spread, "sub-cluster center spread")
        ->capture_default_str();
    cgen->add_option("--site-offset", gen.params.site_offset, "expert-site shift magnitude")
        ->capture_default_str();

    PrecomputeOpts pre;
    CLI::App* cpre = app.add_subcommand("precompute", "precompute coefficient caches offline");
    cpre->add_option("--scenario", pre.scenario_dir, "scenario directory (one cache per test set)");
    cpre->add_option("--pt", pre.pt_path, "pretrained checkpoint");
    cpre->add_option("--ft", pre.ft_path, "finetuned checkpoint");
    cpre->add_option("--data", pre.data_path, "dataset file (single-cache mode)");
    cpre->add_option("--out", pre.out_path, "cache file, or directory with --scenario")->required();
    cpre->add_option("--batch-size", pre.batch_size, "batch size")->capture_default_str();
    add_coef_flags(cpre, pre.coef);

    EvalOpts ev;
    CLI::App* cev = app.add_subcommand("eval", "run the benchmark and write a report");
    cev->add_option("--scenario", ev.scenario_dir, "scenario directory")->required();
    cev->add_option("--pt", ev.pt_path, "override pretrained checkpoint");
    cev->add_option("--ft", ev.ft_path, "override finetuned checkpoint");
    cev->add_option("--methods", ev.methods, "comma-separated method list")->capture_default_str();
    cev->add_option("--cache", ev.cache_dir, "directory of precomputed .ttlc caches");
    cev->add_option("--report", ev.report, "json | csv")->capture_default_str();
    cev->add_option("--out", ev.out_path, "report file (stdout when omitted)");
    cev->add_option("--batch-size", ev.batch_size, "batch size")->capture_default_str();
    cev->add_option("--bins", ev.bins, "lambda histogram bins")->capture_default_str();
    add_coef_flags(cev, ev.coef);

    DiagOpts dg;
    CLI::App* cdg = app.add_subcommand("diag", "lambda histogram + decision-quadrant report");
    cdg->add_option("--pt", dg.pt_path, "pretrained checkpoint")->required();
    cdg->add_option("--ft", dg.ft_path, "finetuned checkpoint")->required();
    cdg->add_option("--data", dg.data_path, "dataset file")->required();
    cdg->add_option("--out", dg.out_path, "output file (stdout when omitted)");
    cdg->add_option("--batch-size", dg.batch_size, "batch size")->capture_default_str();
    cdg->add_option("--bins", dg.bins, "lambda histogram bins")->capture_default_str();
    add_coef_flags(cdg, dg.coef);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (cgen->parsed()) return cmd_gen(gen);
        if (cpre->parsed()) return cmd_precompute(pre);
        if (cev->parsed()) return cmd_eval(ev);
        return cmd_diag(dg);
    } catch (const ttm::StalenessError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const ttm::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ttm::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
