#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <utility>
#include <vector>

#include "ttm/bench.hpp"
#include "ttm/coefficient.hpp"
#include "ttm/dynamic_merge.hpp"
#include "ttm/error.hpp"
#include "ttm/models.hpp"
#include "ttm/param_store.hpp"
#include "ttm/prng.hpp"
#include "ttm/prob_metrics.hpp"
#include "ttm/scenario.hpp"

namespace py = pybind11;
using namespace ttm;

namespace {

Tensor make_tensor(std::vector<int64_t> shape, std::vector<float> data) {
    return Tensor(std::move(shape), std::move(data));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Test-time adaptive merging of classifier checkpoints";

    // ---------- errors ----------
    const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", base);
    py::register_exception<CorruptionError>(m, "CorruptionError", base);
    py::register_exception<ValidationError>(m, "ValidationError", base);
    py::register_exception<AlignmentError>(m, "AlignmentError", base);
    py::register_exception<DomainError>(m, "DomainError", base);
    py::register_exception<StalenessError>(m, "StalenessError", base);
    py::register_exception<IoError>(m, "IoError", base);

    // ---------- prng ----------
    py::class_<SplitMix64>(m, "SplitMix64")
        .def(py::init<uint64_t>(), py::arg("seed"))
        .def("next", &SplitMix64::next)
        .def("uniform", py::overload_cast<>(&SplitMix64::uniform))
        .def("uniform", py::overload_cast<double, double>(&SplitMix64::uniform),
             py::arg("lo"), py::arg("hi"))
        .def("gaussian", py::overload_cast<>(&SplitMix64::gaussian))
        .def("gaussian", py::overload_cast<double, double>(&SplitMix64::gaussian),
             py::arg("mean"), py::arg("stddev"))
        .def("beta", &SplitMix64::beta, py::arg("a"), py::arg("b"));

    // ---------- probability metrics ----------
    m.def("softmax", &softmax, py::arg("logits"));
    m.def("entropy", &entropy, py::arg("p"), py::arg("eps") = kLogEps);
    m.def("kl_divergence", &kl_divergence, py::arg("p"), py::arg("q"),
          py::arg("eps") = kLogEps);
    m.def("js_divergence", &js_divergence, py::arg("p"), py::arg("q"),
          py::arg("eps") = kLogEps);
    m.def("js_via_entropy", &js_via_entropy, py::arg("p"), py::arg("q"),
          py::arg("eps") = kLogEps);
    m.def("entropy_ratio", &entropy_ratio, py::arg("p_pt"), py::arg("p_ft"),
          py::arg("eps") = kLogEps);
    m.def("xentropy_ratio", &xentropy_ratio, py::arg("p_pt"), py::arg("p_ft"),
          py::arg("label"), py::arg("eps") = kLogEps);
    m.def("confidence_ratio", &confidence_ratio, py::arg("p_pt"), py::arg("p_ft"));

    // ---------- coefficient ----------
    m.def("sigmoid", &sigmoid, py::arg("v"));

    py::class_<CoefficientConfig>(m, "CoefficientConfig")
        .def(py::init<>())
        .def_readwrite("lambda_min", &CoefficientConfig::lambda_min)
        .def_readwrite("lambda_max", &CoefficientConfig::lambda_max)
        .def_readwrite("delta", &CoefficientConfig::delta)
        .def_readwrite("tau_pt", &CoefficientConfig::tau_pt)
        .def_readwrite("tau_ft", &CoefficientConfig::tau_ft)
        .def_readwrite("fixed_alpha", &CoefficientConfig::fixed_alpha)
        .def_readwrite("sigmoid_gain", &CoefficientConfig::sigmoid_gain)
        .def_readwrite("sigmoid_center", &CoefficientConfig::sigmoid_center)
        .def_property(
            "policy",
            [](const CoefficientConfig& c) { return policy_to_string(c.policy, c.fixed_alpha); },
            [](CoefficientConfig& c, const std::string& text) {
                c.policy = policy_from_string(text, &c.fixed_alpha);
            })
        .def_property(
            "direction",
            [](const CoefficientConfig& c) { return direction_to_string(c.direction); },
            [](CoefficientConfig& c, const std::string& text) {
                c.direction = direction_from_string(text);
            })
        .def("validate", &CoefficientConfig::validate)
        .def("to_json", &CoefficientConfig::to_json)
        .def_static("from_json", &CoefficientConfig::from_json, py::arg("text"))
        .def("digest", &CoefficientConfig::digest)
        .def("__repr__", [](const CoefficientConfig& c) {
            return "CoefficientConfig(" + c.to_json() + ")";
        });

    m.def("lambda_from_mi", &lambda_from_mi, py::arg("mi"), py::arg("config"));
    m.def("extrapolate", &extrapolate, py::arg("lambda_"), py::arg("entropy_pt"),
          py::arg("entropy_ft"), py::arg("config"));
    m.def("batch_lambda", &batch_lambda, py::arg("lambdas"));
    m.def("dawin_lambda", &dawin_lambda, py::arg("p_pt"), py::arg("p_ft"));

    py::class_<LambdaRecord>(m, "LambdaRecord")
        .def_readonly("sample_index", &LambdaRecord::sample_index)
        .def_readonly("js", &LambdaRecord::js)
        .def_readonly("entropy_pt", &LambdaRecord::entropy_pt)
        .def_readonly("entropy_ft", &LambdaRecord::entropy_ft)
        .def_readonly("lambda_raw", &LambdaRecord::lambda_raw)
        .def_readonly("lambda_prime", &LambdaRecord::lambda_prime)
        .def("__repr__", [](const LambdaRecord& r) {
            return "LambdaRecord(index=" + std::to_string(r.sample_index) +
                   ", lambda_prime=" + std::to_string(r.lambda_prime) + ")";
        });

    m.def("coefficient_for", &coefficient_for, py::arg("p_pt"), py::arg("p_ft"),
          py::arg("config"), py::arg("sample_index") = 0);

    // ---------- parameter maps and static merges ----------
    py::class_<ParameterMap>(m, "ParameterMap")
        .def(py::init<>())
        .def("insert",
             [](ParameterMap& p, const std::string& name, std::vector<int64_t> shape,
                std::vector<float> data) {
                 p.insert(name, make_tensor(std::move(shape), std::move(data)));
             },
             py::arg("name"), py::arg("shape"), py::arg("data"))
        .def("contains", &ParameterMap::contains, py::arg("name"))
        .def("names",
             [](const ParameterMap& p) {
                 std::vector<std::string> out;
                 for (const auto& [name, t] : p) out.push_back(name);
                 return out;
             })
        .def("shape",
             [](const ParameterMap& p, const std::string& name) { return p.at(name).shape; },
             py::arg("name"))
        .def("tensor",
             [](const ParameterMap& p, const std::string& name) { return p.at(name).data; },
             py::arg("name"))
        .def("__len__", &ParameterMap::size)
        .def("total_elements", &ParameterMap::total_elements);

    m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("lerp_params", &lerp_params, py::arg("pretrained"), py::arg("finetuned"),
          py::arg("lambda_"));
    m.def("slerp_params", &slerp_params, py::arg("a"), py::arg("b"), py::arg("t"));
    m.def("task_arithmetic", &task_arithmetic, py::arg("pretrained"), py::arg("finetuned"),
          py::arg("scale"));
    m.def("ties_merge", &ties_merge, py::arg("pretrained"), py::arg("finetuned"),
          py::arg("trim_fraction"), py::arg("scale"));
    m.def(
        "mixup_merge",
        [](const ParameterMap& pt, const ParameterMap& ft, uint64_t seed, double alpha) {
            SplitMix64 rng(seed);
            return mixup_merge(pt, ft, rng, alpha);
        },
        py::arg("pretrained"), py::arg("finetuned"), py::arg("seed"), py::arg("alpha"));

    // ---------- datasets and models ----------
    py::class_<Dataset>(m, "Dataset")
        .def(py::init([](int64_t n, int64_t d, int64_t c, std::vector<float> features,
                         std::vector<uint32_t> labels) {
                 Dataset ds;
                 ds.num_samples = n;
                 ds.num_features = d;
                 ds.num_classes = c;
                 ds.features = std::move(features);
                 ds.labels = std::move(labels);
                 ds.validate();
                 return ds;
             }),
             py::arg("num_samples"), py::arg("num_features"), py::arg("num_classes"),
             py::arg("features"), py::arg("labels"))
        .def_readonly("num_samples", &Dataset::num_samples)
        .def_readonly("num_features", &Dataset::num_features)
        .def_readonly("num_classes", &Dataset::num_classes)
        .def_readonly("features", &Dataset::features)
        .def_readonly("labels", &Dataset::labels)
        .def("row", [](const Dataset& ds, int64_t i) {
            const auto r = ds.row(i);
            return std::vector<float>(r.begin(), r.end());
        });

    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));

    py::enum_<Arch>(m, "Arch").value("linear", Arch::linear).value("mlp", Arch::mlp);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("arch", &TrainConfig::arch)
        .def_readwrite("hidden", &TrainConfig::hidden)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("l2", &TrainConfig::l2);

    m.def(
        "init_params",
        [](Arch arch, int64_t d, int64_t c, int64_t hidden, uint64_t seed) {
            SplitMix64 rng(seed);
            return init_params(arch, d, c, hidden, rng);
        },
        py::arg("arch"), py::arg("num_features"), py::arg("num_classes"), py::arg("hidden"),
        py::arg("seed"));
    m.def(
        "train",
        [](const Dataset& ds, const TrainConfig& cfg, uint64_t seed) {
            SplitMix64 rng(seed);
            return train(ds, cfg, rng);
        },
        py::arg("dataset"), py::arg("config"), py::arg("seed"));
    m.def(
        "finetune",
        [](const ParameterMap& start, const Dataset& ds, const TrainConfig& cfg,
           uint64_t seed) {
            SplitMix64 rng(seed);
            return finetune(start, ds, cfg, rng);
        },
        py::arg("start"), py::arg("dataset"), py::arg("config"), py::arg("seed"));

    m.def("forward",
          [](const ParameterMap& p, const std::vector<float>& x) {
              return forward(p, std::span<const float>(x.data(), x.size()));
          },
          py::arg("params"), py::arg("x"));
    m.def("predict_proba",
          [](const ParameterMap& p, const std::vector<float>& x) {
              return predict_proba(p, std::span<const float>(x.data(), x.size()));
          },
          py::arg("params"), py::arg("x"));
    m.def("argmax_class", &argmax_class, py::arg("logits"));

    // ---------- adaptive merging ----------
    py::class_<ForwardCounter>(m, "ForwardCounter")
        .def(py::init<>())
        .def_readonly("sample_forwards", &ForwardCounter::sample_forwards)
        .def_readonly("batch_forwards", &ForwardCounter::batch_forwards)
        .def_readonly("merges", &ForwardCounter::merges);

    m.def(
        "t3_sample_predict",
        [](const ParameterMap& pt, const ParameterMap& ft, const std::vector<float>& x,
           const CoefficientConfig& cfg, ForwardCounter& counter) {
            return t3_sample_predict(pt, ft, std::span<const float>(x.data(), x.size()), cfg,
                                     counter);
        },
        py::arg("pretrained"), py::arg("finetuned"), py::arg("x"), py::arg("config"),
        py::arg("counter"));
    m.def("t3_batch_predict",
          [](const ParameterMap& pt, const ParameterMap& ft, const Dataset& data,
             int64_t begin, int64_t end, const CoefficientConfig& cfg,
             ForwardCounter& counter) {
              return t3_batch_predict(pt, ft, data, begin, end, cfg, counter);
          },
          py::arg("pretrained"), py::arg("finetuned"), py::arg("data"), py::arg("begin"),
          py::arg("end"), py::arg("config"), py::arg("counter"));
    m.def("ensemble_predict",
          [](const ParameterMap& pt, const ParameterMap& ft, const std::vector<float>& x,
             ForwardCounter& counter) {
              return ensemble_predict(pt, ft, std::span<const float>(x.data(), x.size()),
                                      counter);
          },
          py::arg("pretrained"), py::arg("finetuned"), py::arg("x"), py::arg("counter"));

    py::class_<LambdaCache>(m, "LambdaCache")
        .def_readonly("per_sample", &LambdaCache::per_sample)
        .def_readonly("per_batch_means", &LambdaCache::per_batch_means)
        .def_readonly("batch_size", &LambdaCache::batch_size)
        .def_readonly("config_digest", &LambdaCache::config_digest)
        .def("validate", &LambdaCache::validate);

    py::enum_<CacheMode>(m, "CacheMode")
        .value("sample", CacheMode::sample)
        .value("batch", CacheMode::batch);

    m.def("precompute_lambdas", &precompute_lambdas, py::arg("pretrained"),
          py::arg("finetuned"), py::arg("data"), py::arg("config"), py::arg("batch_size"));
    m.def("save_cache", &save_cache, py::arg("cache"), py::arg("path"));
    m.def("load_cache", &load_cache, py::arg("path"));
    m.def("predict_with_cache", &predict_with_cache, py::arg("pretrained"),
          py::arg("finetuned"), py::arg("data"), py::arg("cache"), py::arg("config"),
          py::arg("mode"), py::arg("counter"));
    m.def("max_threads", &max_threads);

    // ---------- scenario and benchmark ----------
    py::class_<ScenarioParams>(m, "ScenarioParams")
        .def(py::init<>())
        .def_readwrite("d", &ScenarioParams::d)
        .def_readwrite("c_base", &ScenarioParams::c_base)
        .def_readwrite("c_novel", &ScenarioParams::c_novel)
        .def_readwrite("n_pretrain", &ScenarioParams::n_pretrain)
        .def_readwrite("n_expert", &ScenarioParams::n_expert)
        .def_readwrite("n_test_in_domain", &ScenarioParams::n_test_in_domain)
        .def_readwrite("n_test_novel", &ScenarioParams::n_test_novel)
        .def_readwrite("base_radius", &ScenarioParams::base_radius)
        .def_readwrite("novel_radius", &ScenarioParams::novel_radius)
        .def_readwrite("narrow_sigma", &ScenarioParams::narrow_sigma)
        .def_readwrite("broad_sigma", &ScenarioParams::broad_sigma)
        .def_readwrite("pretrain_clusters", &ScenarioParams::pretrain_clusters)
        .def_readwrite("cluster_spread", &ScenarioParams::cluster_spread)
        .def_readwrite("site_offset", &ScenarioParams::site_offset);

    py::enum_<CorruptionKind>(m, "CorruptionKind")
        .value("noise", CorruptionKind::noise)
        .value("quantize", CorruptionKind::quantize);

    py::class_<ShiftScenario>(m, "ShiftScenario")
        .def_readonly("seed", &ShiftScenario::seed)
        .def_readonly("params", &ShiftScenario::params)
        .def_readonly("pretrain_data", &ShiftScenario::pretrain_data)
        .def_readonly("expert_data", &ShiftScenario::expert_data)
        .def_readonly("test_in_domain", &ShiftScenario::test_in_domain)
        .def_readonly("test_novel", &ShiftScenario::test_novel)
        .def("test_corrupted",
             [](const ShiftScenario& s, CorruptionKind kind, int severity) {
                 return s.test_corrupted.at({kind, severity});
             },
             py::arg("kind"), py::arg("severity"));

    m.def("gen_scenario", &gen_scenario, py::arg("seed"),
          py::arg("params") = ScenarioParams{});
    m.def("train_scenario_models", &train_scenario_models, py::arg("scenario"));

    m.def(
        "run_benchmark_json",
        [](const ShiftScenario& scenario, const ParameterMap& pt, const ParameterMap& ft,
           const std::string& methods, const CoefficientConfig& coef, int64_t batch_size,
           int bins) {
            BenchConfig cfg;
            cfg.coef = coef;
            cfg.batch_size = batch_size;
            cfg.histogram_bins = bins;
            const auto reports = run_benchmark(scenario, pt, ft, parse_method_list(methods), cfg);
            return reports_to_json(reports, cfg);
        },
        py::arg("scenario"), py::arg("pretrained"), py::arg("finetuned"), py::arg("methods"),
        py::arg("coef") = CoefficientConfig{}, py::arg("batch_size") = 32,
        py::arg("bins") = 10);

    m.def("quadrants_json",
          [](const ParameterMap& pt, const ParameterMap& ft, const Dataset& data) {
              return quadrants_to_json(quadrant_analysis(pt, ft, data));
          },
          py::arg("pretrained"), py::arg("finetuned"), py::arg("data"));

    // ---------- simple metrics ----------
    m.def("top1_accuracy", &top1_accuracy, py::arg("preds"), py::arg("labels"));
    m.def("corruption_error", &corruption_error, py::arg("acc_method"), py::arg("acc_base"));
    m.def("mean_over_shifts", &mean_over_shifts, py::arg("b2n"), py::arg("noise"),
          py::arg("digital"));
    m.def("pearson", &pearson, py::arg("xs"), py::arg("ys"));
}
