#include "ttm/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include <nlohmann/json.hpp>

#include "ttm/binio.hpp"
#include "ttm/error.hpp"

namespace ttm {

using nlohmann::json;

// ---------- Dataset ----------

std::span<const float> Dataset::row(int64_t i) const {
    if (i < 0 || i >= num_samples) throw DomainError("dataset row index out of range");
    return {features.data() + static_cast<size_t>(i) * static_cast<size_t>(num_features),
            static_cast<size_t>(num_features)};
}

void Dataset::validate() const {
    if (num_samples < 0 || num_features < 1 || num_classes < 2) {
        throw ValidationError("dataset dimensions out of range");
    }
    if (features.size() !=
        static_cast<size_t>(num_samples) * static_cast<size_t>(num_features)) {
        throw ValidationError("feature buffer does not match n*d");
    }
    if (labels.size() != static_cast<size_t>(num_samples)) {
        throw ValidationError("label buffer does not match n");
    }
    for (float v : features) {
        if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
    for (uint32_t y : labels) {
        if (y >= static_cast<uint32_t>(num_classes)) {
            throw ValidationError("label out of range");
        }
    }
}

namespace {

constexpr std::string_view kDatasetMagic = "TTDS";
constexpr uint32_t kDatasetVersion = 1;

} // namespace

std::string encode_dataset(const Dataset& ds) {
    ds.validate();
    json header;
    header["n"] = ds.num_samples;
    header["d"] = ds.num_features;
    header["c"] = ds.num_classes;
    const std::string header_str = header.dump();

    std::string out;
    out.reserve(16 + header_str.size() + ds.features.size() * 4 + ds.labels.size() * 4);
    out.append(kDatasetMagic);
    io::put_u32(out, kDatasetVersion);
    io::put_u64(out, header_str.size());
    out.append(header_str);
    for (float v : ds.features) io::put_f32(out, v);
    for (uint32_t y : ds.labels) io::put_u32(out, y);
    return out;
}

Dataset decode_dataset(std::string_view bytes) {
    io::Reader r(bytes);
    if (r.remaining() < 4 || r.take(4) != kDatasetMagic) {
        throw FormatError("not a dataset container (bad magic)");
    }
    const uint32_t version = r.u32();
    if (version != kDatasetVersion) {
        throw FormatError("unsupported dataset version " + std::to_string(version));
    }
    const uint64_t header_len = r.u64();
    if (header_len > r.remaining()) throw CorruptionError("dataset header exceeds file size");

    json header;
    try {
        header = json::parse(r.take(static_cast<size_t>(header_len)));
    } catch (const json::exception& e) {
        throw FormatError(std::string("dataset header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("n") || !header.contains("d") ||
        !header.contains("c")) {
        throw FormatError("dataset header must carry n, d, c");
    }

    Dataset ds;
    ds.num_samples = header["n"].get<int64_t>();
    ds.num_features = header["d"].get<int64_t>();
    ds.num_classes = header["c"].get<int64_t>();
    if (ds.num_samples < 0 || ds.num_features < 1 || ds.num_classes < 2) {
        throw CorruptionError("dataset header dimensions out of range");
    }

    const uint64_t feature_count =
        static_cast<uint64_t>(ds.num_samples) * static_cast<uint64_t>(ds.num_features);
    if (r.remaining() != feature_count * 4 + static_cast<uint64_t>(ds.num_samples) * 4) {
        throw CorruptionError("dataset payload does not match header dimensions");
    }
    ds.features.resize(static_cast<size_t>(feature_count));
    for (auto& v : ds.features) {
        v = r.f32();
        if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
    }
    ds.labels.resize(static_cast<size_t>(ds.num_samples));
    for (auto& y : ds.labels) {
        y = r.u32();
        if (y >= static_cast<uint32_t>(ds.num_classes)) {
            throw ValidationError("label out of range");
        }
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_dataset(ds));
}

Dataset load_dataset(const std::filesystem::path& path) {
    return decode_dataset(io::read_file(path));
}

// ---------- parameter layout ----------

namespace {

constexpr const char* kLinW = "linear.W";
constexpr const char* kLinB = "linear.b";
constexpr const char* kMlpW1 = "mlp.W1";
constexpr const char* kMlpB1 = "mlp.b1";
constexpr const char* kMlpW2 = "mlp.W2";
constexpr const char* kMlpB2 = "mlp.b2";

// Resolved pointers into a FlatParams buffer for fast forward/backward.
struct LinearView {
    const double* W;
    const double* b;
    int64_t C, D;
};

struct MlpView {
    const double* W1;
    const double* b1;
    const double* W2;
    const double* b2;
    int64_t D, H, C;
};

size_t find_entry(const FlatParams& fp, const char* name) {
    for (size_t i = 0; i < fp.names.size(); ++i) {
        if (fp.names[i] == name) return i;
    }
    throw DomainError(std::string("missing parameter: ") + name);
}

Arch detect_arch_flat(const FlatParams& fp) {
    if (fp.names.size() == 2 && fp.names[0] == kLinW && fp.names[1] == kLinB) {
        return Arch::linear;
    }
    if (fp.names.size() == 4 && fp.names[0] == kMlpW1 && fp.names[1] == kMlpW2 &&
        fp.names[2] == kMlpB1 && fp.names[3] == kMlpB2) {
        return Arch::mlp;
    }
    throw DomainError("parameter map is not a known classifier layout");
}

LinearView linear_view(const FlatParams& fp) {
    const size_t iw = find_entry(fp, kLinW);
    const size_t ib = find_entry(fp, kLinB);
    if (fp.shapes[iw].size() != 2 || fp.shapes[ib].size() != 1 ||
        fp.shapes[iw][0] != fp.shapes[ib][0]) {
        throw ValidationError("linear parameter shapes are inconsistent");
    }
    return {fp.values.data() + fp.offsets[iw], fp.values.data() + fp.offsets[ib],
            fp.shapes[iw][0], fp.shapes[iw][1]};
}

MlpView mlp_view(const FlatParams& fp) {
    const size_t iw1 = find_entry(fp, kMlpW1);
    const size_t ib1 = find_entry(fp, kMlpB1);
    const size_t iw2 = find_entry(fp, kMlpW2);
    const size_t ib2 = find_entry(fp, kMlpB2);
    if (fp.shapes[iw1].size() != 2 || fp.shapes[iw2].size() != 2 ||
        fp.shapes[ib1].size() != 1 || fp.shapes[ib2].size() != 1 ||
        fp.shapes[iw1][0] != fp.shapes[ib1][0] || fp.shapes[iw2][0] != fp.shapes[ib2][0] ||
        fp.shapes[iw2][1] != fp.shapes[iw1][0]) {
        throw ValidationError("mlp parameter shapes are inconsistent");
    }
    return {fp.values.data() + fp.offsets[iw1], fp.values.data() + fp.offsets[ib1],
            fp.values.data() + fp.offsets[iw2], fp.values.data() + fp.offsets[ib2],
            fp.shapes[iw1][1], fp.shapes[iw1][0], fp.shapes[iw2][0]};
}

} // namespace

LogitVector forward_flat(const FlatParams& fp, std::span<const float> x) {
    const Arch arch = detect_arch_flat(fp);
    if (arch == Arch::linear) {
        const LinearView v = linear_view(fp);
        if (static_cast<int64_t>(x.size()) != v.D) {
            throw DomainError("feature vector length does not match model");
        }
        LogitVector z(static_cast<size_t>(v.C));
        for (int64_t c = 0; c < v.C; ++c) {
            double acc = v.b[c];
            const double* w = v.W + c * v.D;
            for (int64_t d = 0; d < v.D; ++d) acc += w[d] * static_cast<double>(x[d]);
            z[static_cast<size_t>(c)] = acc;
        }
        return z;
    }
    const MlpView v = mlp_view(fp);
    if (static_cast<int64_t>(x.size()) != v.D) {
        throw DomainError("feature vector length does not match model");
    }
    std::vector<double> a(static_cast<size_t>(v.H));
    for (int64_t h = 0; h < v.H; ++h) {
        double acc = v.b1[h];
        const double* w = v.W1 + h * v.D;
        for (int64_t d = 0; d < v.D; ++d) acc += w[d] * static_cast<double>(x[d]);
        a[static_cast<size_t>(h)] = acc > 0.0 ? acc : 0.0;
    }
    LogitVector z(static_cast<size_t>(v.C));
    for (int64_t c = 0; c < v.C; ++c) {
        double acc = v.b2[c];
        const double* w = v.W2 + c * v.H;
        for (int64_t h = 0; h < v.H; ++h) acc += w[h] * a[static_cast<size_t>(h)];
        z[static_cast<size_t>(c)] = acc;
    }
    return z;
}

// ---------- FlatParams ----------

FlatParams flatten(const ParameterMap& params) {
    FlatParams fp;
    size_t offset = 0;
    for (const auto& [name, t] : params) {
        fp.names.push_back(name);
        fp.shapes.push_back(t.shape);
        fp.offsets.push_back(offset);
        for (float v : t.data) fp.values.push_back(static_cast<double>(v));
        offset += t.data.size();
    }
    return fp;
}

ParameterMap unflatten(const FlatParams& fp) {
    ParameterMap out;
    for (size_t i = 0; i < fp.names.size(); ++i) {
        int64_t numel = 1;
        for (int64_t d : fp.shapes[i]) numel *= d;
        Tensor t;
        t.shape = fp.shapes[i];
        t.data.resize(static_cast<size_t>(numel));
        for (int64_t k = 0; k < numel; ++k) {
            t.data[static_cast<size_t>(k)] =
                static_cast<float>(fp.values[fp.offsets[i] + static_cast<size_t>(k)]);
        }
        out.insert(fp.names[i], std::move(t));
    }
    out.validate_finite("unflatten");
    return out;
}

// ---------- public model surface ----------

ParameterMap init_params(Arch arch, int64_t num_features, int64_t num_classes,
                         int64_t hidden, SplitMix64& rng) {
    if (num_features < 1 || num_classes < 2) {
        throw DomainError("init_params: need d >= 1 and c >= 2");
    }
    auto glorot = [&rng](int64_t fan_in, int64_t fan_out, std::vector<int64_t> shape) {
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor t = Tensor::zeros(std::move(shape));
        for (auto& v : t.data) v = static_cast<float>(rng.uniform(-a, a));
        return t;
    };

    ParameterMap out;
    if (arch == Arch::linear) {
        out.insert(kLinW, glorot(num_features, num_classes, {num_classes, num_features}));
        out.insert(kLinB, Tensor::zeros({num_classes}));
        return out;
    }
    if (hidden < 1) throw DomainError("init_params: need hidden >= 1 for mlp");
    out.insert(kMlpW1, glorot(num_features, hidden, {hidden, num_features}));
    out.insert(kMlpB1, Tensor::zeros({hidden}));
    out.insert(kMlpW2, glorot(hidden, num_classes, {num_classes, hidden}));
    out.insert(kMlpB2, Tensor::zeros({num_classes}));
    return out;
}

Arch detect_arch(const ParameterMap& params) {
    if (params.size() == 2 && params.contains(kLinW) && params.contains(kLinB)) {
        return Arch::linear;
    }
    if (params.size() == 4 && params.contains(kMlpW1) && params.contains(kMlpB1) &&
        params.contains(kMlpW2) && params.contains(kMlpB2)) {
        return Arch::mlp;
    }
    throw DomainError("parameter map is not a known classifier layout");
}

int64_t model_features(const ParameterMap& params) {
    return detect_arch(params) == Arch::linear ? params.at(kLinW).shape[1]
                                               : params.at(kMlpW1).shape[1];
}

int64_t model_classes(const ParameterMap& params) {
    return detect_arch(params) == Arch::linear ? params.at(kLinW).shape[0]
                                               : params.at(kMlpW2).shape[0];
}

LogitVector forward(const ParameterMap& params, std::span<const float> x) {
    return forward_flat(flatten(params), x);
}

ProbVector predict_proba(const ParameterMap& params, std::span<const float> x) {
    return softmax(forward(params, x));
}

uint32_t argmax_class(const LogitVector& logits) {
    if (logits.empty()) throw DomainError("argmax of empty logit vector");
    size_t best = 0;
    for (size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = i;
    }
    return static_cast<uint32_t>(best);
}

// ---------- training ----------

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw DomainError("learning_rate must be positive and finite");
    }
    if (epochs < 0) throw DomainError("epochs must be >= 0");
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (arch == Arch::mlp && hidden < 1) throw DomainError("hidden must be >= 1");
    if (!(l2 >= 0.0) || !std::isfinite(l2)) throw DomainError("l2 must be >= 0 and finite");
}

namespace {

// Loss and gradient in one pass: mean cross-entropy over idx plus the l2 term.
std::pair<double, std::vector<double>> loss_and_gradient(const FlatParams& fp,
                                                         const Dataset& ds,
                                                         std::span<const int64_t> idx,
                                                         double l2) {
    if (idx.empty()) throw DomainError("empty index set");
    const Arch arch = detect_arch_flat(fp);
    const double inv_b = 1.0 / static_cast<double>(idx.size());

    double loss = 0.0;
    std::vector<double> grad(fp.values.size(), 0.0);

    if (arch == Arch::linear) {
        const LinearView v = linear_view(fp);
        const size_t ow = fp.offsets[find_entry(fp, kLinW)];
        const size_t ob = fp.offsets[find_entry(fp, kLinB)];
        if (v.D != ds.num_features || v.C != ds.num_classes) {
            throw AlignmentError("model and dataset dimensions disagree");
        }
        for (int64_t i : idx) {
            const auto x = ds.row(i);
            const uint32_t y = ds.labels[static_cast<size_t>(i)];
            const ProbVector p = softmax(forward_flat(fp, x));
            loss -= std::log(p[y] + kLogEps) * inv_b;
            for (int64_t c = 0; c < v.C; ++c) {
                const double dz =
                    (p[static_cast<size_t>(c)] - (static_cast<uint32_t>(c) == y ? 1.0 : 0.0)) *
                    inv_b;
                grad[ob + static_cast<size_t>(c)] += dz;
                double* gw = grad.data() + ow + static_cast<size_t>(c * v.D);
                for (int64_t d = 0; d < v.D; ++d) gw[d] += dz * static_cast<double>(x[d]);
            }
        }
    } else {
        const MlpView v = mlp_view(fp);
        const size_t ow1 = fp.offsets[find_entry(fp, kMlpW1)];
        const size_t ob1 = fp.offsets[find_entry(fp, kMlpB1)];
        const size_t ow2 = fp.offsets[find_entry(fp, kMlpW2)];
        const size_t ob2 = fp.offsets[find_entry(fp, kMlpB2)];
        if (v.D != ds.num_features || v.C != ds.num_classes) {
            throw AlignmentError("model and dataset dimensions disagree");
        }
        std::vector<double> pre(static_cast<size_t>(v.H));
        std::vector<double> act(static_cast<size_t>(v.H));
        for (int64_t i : idx) {
            const auto x = ds.row(i);
            const uint32_t y = ds.labels[static_cast<size_t>(i)];
            for (int64_t h = 0; h < v.H; ++h) {
                double acc = v.b1[h];
                const double* w = v.W1 + h * v.D;
                for (int64_t d = 0; d < v.D; ++d) acc += w[d] * static_cast<double>(x[d]);
                pre[static_cast<size_t>(h)] = acc;
                act[static_cast<size_t>(h)] = acc > 0.0 ? acc : 0.0;
            }
            LogitVector z(static_cast<size_t>(v.C));
            for (int64_t c = 0; c < v.C; ++c) {
                double acc = v.b2[c];
                const double* w = v.W2 + c * v.H;
                for (int64_t h = 0; h < v.H; ++h) acc += w[h] * act[static_cast<size_t>(h)];
                z[static_cast<size_t>(c)] = acc;
            }
            const ProbVector p = softmax(z);
            loss -= std::log(p[y] + kLogEps) * inv_b;

            std::vector<double> da(static_cast<size_t>(v.H), 0.0);
            for (int64_t c = 0; c < v.C; ++c) {
                const double dz =
                    (p[static_cast<size_t>(c)] - (static_cast<uint32_t>(c) == y ? 1.0 : 0.0)) *
                    inv_b;
                grad[ob2 + static_cast<size_t>(c)] += dz;
                double* gw = grad.data() + ow2 + static_cast<size_t>(c * v.H);
                const double* w = v.W2 + c * v.H;
                for (int64_t h = 0; h < v.H; ++h) {
                    gw[h] += dz * act[static_cast<size_t>(h)];
                    da[static_cast<size_t>(h)] += dz * w[h];
                }
            }
            for (int64_t h = 0; h < v.H; ++h) {
                if (pre[static_cast<size_t>(h)] <= 0.0) continue;
                const double dz1 = da[static_cast<size_t>(h)];
                grad[ob1 + static_cast<size_t>(h)] += dz1;
                double* gw = grad.data() + ow1 + static_cast<size_t>(h * v.D);
                for (int64_t d = 0; d < v.D; ++d) gw[d] += dz1 * static_cast<double>(x[d]);
            }
        }
    }

    if (l2 > 0.0) {
        double sq = 0.0;
        for (size_t i = 0; i < fp.values.size(); ++i) {
            sq += fp.values[i] * fp.values[i];
            grad[i] += l2 * fp.values[i];
        }
        loss += 0.5 * l2 * sq;
    }
    return {loss, std::move(grad)};
}

ParameterMap fit(FlatParams fp, const Dataset& ds, const TrainConfig& cfg, SplitMix64& rng) {
    std::vector<int64_t> order(static_cast<size_t>(ds.num_samples));
    std::iota(order.begin(), order.end(), int64_t{0});

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (int64_t start = 0; start < ds.num_samples; start += cfg.batch_size) {
            const int64_t end = std::min(ds.num_samples, start + cfg.batch_size);
            const std::span<const int64_t> idx(order.data() + start,
                                               static_cast<size_t>(end - start));
            auto [loss, grad] = loss_and_gradient(fp, ds, idx, cfg.l2);
            if (!std::isfinite(loss)) {
                throw ValidationError("training diverged (non-finite loss)");
            }
            for (size_t i = 0; i < fp.values.size(); ++i) {
                fp.values[i] -= cfg.learning_rate * grad[i];
            }
        }
    }
    return unflatten(fp);
}

} // namespace

ParameterMap train(const Dataset& ds, const TrainConfig& cfg, SplitMix64& rng) {
    cfg.validate();
    ds.validate();
    if (ds.num_samples < 1) throw DomainError("train: empty dataset");
    ParameterMap start =
        init_params(cfg.arch, ds.num_features, ds.num_classes, cfg.hidden, rng);
    return fit(flatten(start), ds, cfg, rng);
}

ParameterMap finetune(const ParameterMap& start, const Dataset& ds, const TrainConfig& cfg,
                      SplitMix64& rng) {
    cfg.validate();
    ds.validate();
    if (ds.num_samples < 1) throw DomainError("finetune: empty dataset");
    if (model_features(start) != ds.num_features || model_classes(start) != ds.num_classes) {
        throw AlignmentError("finetune: model and dataset dimensions disagree");
    }
    return fit(flatten(start), ds, cfg, rng);
}

double batch_loss(const FlatParams& fp, const Dataset& ds, std::span<const int64_t> idx,
                  double l2) {
    return loss_and_gradient(fp, ds, idx, l2).first;
}

std::vector<double> batch_gradient(const FlatParams& fp, const Dataset& ds,
                                   std::span<const int64_t> idx, double l2) {
    return loss_and_gradient(fp, ds, idx, l2).second;
}

} // namespace ttm
