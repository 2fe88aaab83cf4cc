#include "ttm/param_store.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ttm/binio.hpp"

namespace ttm {

using nlohmann::json;

// ---------- Tensor ----------

Tensor::Tensor(std::vector<int64_t> shape_in, std::vector<float> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
    validate();
}

Tensor Tensor::zeros(std::vector<int64_t> shape_in) {
    Tensor t;
    t.shape = std::move(shape_in);
    int64_t n = 1;
    for (int64_t d : t.shape) {
        if (d <= 0) throw ValidationError("tensor shape entries must be positive");
        n *= d;
    }
    t.data.assign(static_cast<size_t>(n), 0.0f);
    return t;
}

int64_t Tensor::numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

void Tensor::validate() const {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d <= 0) throw ValidationError("tensor shape entries must be positive");
        n *= d;
    }
    if (n != static_cast<int64_t>(data.size())) {
        throw ValidationError("tensor data length does not match shape");
    }
    for (float v : data) {
        if (!std::isfinite(v)) throw ValidationError("tensor contains a non-finite value");
    }
}

// ---------- ParameterMap ----------

void ParameterMap::insert(std::string name, Tensor t) {
    if (name.empty()) throw DomainError("parameter name must not be empty");
    auto [it, inserted] = entries_.emplace(std::move(name), std::move(t));
    if (!inserted) throw DomainError("duplicate parameter name: " + it->first);
}

bool ParameterMap::contains(const std::string& name) const {
    return entries_.count(name) != 0;
}

const Tensor& ParameterMap::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw DomainError("no such parameter: " + name);
    return it->second;
}

int64_t ParameterMap::total_elements() const {
    int64_t n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
}

void ParameterMap::validate_finite(const std::string& context) const {
    for (const auto& [name, t] : entries_) {
        for (float v : t.data) {
            if (!std::isfinite(v)) {
                throw ValidationError(context + ": non-finite value in " + name);
            }
        }
    }
}

bool aligned(const ParameterMap& a, const ParameterMap& b) {
    if (a.size() != b.size()) return false;
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first) return false;
        if (ia->second.shape != ib->second.shape) return false;
    }
    return true;
}

void require_aligned(const ParameterMap& a, const ParameterMap& b) {
    if (!aligned(a, b)) {
        throw AlignmentError("parameter maps are not aligned (names or shapes differ)");
    }
}

// ---------- checkpoint container ----------

namespace {

constexpr std::string_view kCheckpointMagic = "TTMC";
constexpr uint32_t kCheckpointVersion = 1;

} // namespace

std::string encode_checkpoint(const ParameterMap& params) {
    params.validate_finite("encode_checkpoint");

    json header = json::object();
    std::string payload;
    uint64_t offset = 0;
    for (const auto& [name, t] : params) {
        const uint64_t nbytes = static_cast<uint64_t>(t.numel()) * 4;
        header[name] = {
            {"dtype", "f32"},
            {"shape", t.shape},
            {"offset", offset},
            {"nbytes", nbytes},
        };
        for (float v : t.data) io::put_f32(payload, v);
        offset += nbytes;
    }
    // nlohmann orders object keys lexicographically, matching map iteration.
    const std::string header_str = header.dump();

    std::string out;
    out.reserve(4 + 4 + 8 + header_str.size() + payload.size());
    out.append(kCheckpointMagic);
    io::put_u32(out, kCheckpointVersion);
    io::put_u64(out, header_str.size());
    out.append(header_str);
    out.append(payload);
    return out;
}

ParameterMap decode_checkpoint(std::string_view bytes) {
    io::Reader r(bytes);
    if (r.remaining() < 4 || r.take(4) != kCheckpointMagic) {
        throw FormatError("not a checkpoint container (bad magic)");
    }
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const uint64_t header_len = r.u64();
    if (header_len > r.remaining()) throw CorruptionError("checkpoint header exceeds file size");

    json header;
    try {
        header = json::parse(r.take(static_cast<size_t>(header_len)));
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    if (!header.is_object()) throw FormatError("checkpoint header must be a JSON object");

    ParameterMap out;
    uint64_t expected_offset = 0;
    // json objects iterate in key order, which is also the data packing order.
    for (const auto& [name, entry] : header.items()) {
        if (!entry.is_object() || !entry.contains("dtype") || !entry.contains("shape") ||
            !entry.contains("offset") || !entry.contains("nbytes")) {
            throw FormatError("checkpoint header entry is missing fields: " + name);
        }
        if (entry["dtype"] != "f32") {
            throw FormatError("unsupported dtype for " + name);
        }
        std::vector<int64_t> shape;
        for (const auto& d : entry["shape"]) {
            const int64_t dim = d.get<int64_t>();
            if (dim <= 0) throw CorruptionError("non-positive shape entry for " + name);
            shape.push_back(dim);
        }
        int64_t numel = 1;
        for (int64_t d : shape) numel *= d;

        const uint64_t nbytes = entry["nbytes"].get<uint64_t>();
        if (nbytes != static_cast<uint64_t>(numel) * 4) {
            throw CorruptionError("nbytes does not match shape for " + name);
        }
        if (entry["offset"].get<uint64_t>() != expected_offset) {
            throw CorruptionError("tensor data is not packed contiguously: " + name);
        }
        expected_offset += nbytes;

        std::vector<float> data(static_cast<size_t>(numel));
        for (auto& v : data) {
            v = r.f32();
            if (!std::isfinite(v)) throw ValidationError("non-finite value in " + name);
        }
        out.insert(name, Tensor(std::move(shape), std::move(data)));
    }
    if (r.remaining() != 0) throw CorruptionError("trailing bytes after checkpoint data");
    return out;
}

void save_checkpoint(const ParameterMap& params, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_checkpoint(params));
}

ParameterMap load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path));
}

// ---------- static merges ----------

namespace {

// Applies fn(pt_value, ft_value) elementwise over aligned maps; math runs in
// double, results are stored back as f32.
template <typename Fn>
ParameterMap elementwise(const ParameterMap& a, const ParameterMap& b, Fn&& fn,
                         const std::string& context) {
    require_aligned(a, b);
    ParameterMap out;
    auto ib = b.begin();
    for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
        const Tensor& ta = ia->second;
        const Tensor& tb = ib->second;
        Tensor t;
        t.shape = ta.shape;
        t.data.resize(ta.data.size());
        for (size_t i = 0; i < ta.data.size(); ++i) {
            t.data[i] = static_cast<float>(
                fn(static_cast<double>(ta.data[i]), static_cast<double>(tb.data[i])));
        }
        out.insert(ia->first, std::move(t));
    }
    out.validate_finite(context);
    return out;
}

} // namespace

ParameterMap lerp_params(const ParameterMap& pretrained, const ParameterMap& finetuned,
                         double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw DomainError("lerp_params: lambda must be in [0, 1]");
    }
    return elementwise(
        pretrained, finetuned,
        [lambda](double p, double f) { return (1.0 - lambda) * p + lambda * f; },
        "lerp_params");
}

ParameterMap slerp_params(const ParameterMap& a, const ParameterMap& b, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("slerp_params: t must be in [0, 1]");
    require_aligned(a, b);

    // Treat each map as one flat vector in iteration order.
    double dot = 0.0;
    double na2 = 0.0;
    double nb2 = 0.0;
    auto ib = b.begin();
    for (auto ia = a.begin(); ia != a.end(); ++ia, ++ib) {
        const auto& da = ia->second.data;
        const auto& db = ib->second.data;
        for (size_t i = 0; i < da.size(); ++i) {
            const double x = da[i];
            const double y = db[i];
            dot += x * y;
            na2 += x * x;
            nb2 += y * y;
        }
    }
    const double na = std::sqrt(na2);
    const double nb = std::sqrt(nb2);
    if (na == 0.0 || nb == 0.0) {
        throw DomainError("slerp_params: zero-norm parameter vector");
    }
    const double cos_omega = std::clamp(dot / (na * nb), -1.0, 1.0);
    const double omega = std::acos(cos_omega);
    if (omega < 1e-7) return lerp_params(a, b, t);

    const double sin_omega = std::sin(omega);
    const double ca = std::sin((1.0 - t) * omega) / sin_omega;
    const double cb = std::sin(t * omega) / sin_omega;
    return elementwise(
        a, b, [ca, cb](double x, double y) { return ca * x + cb * y; }, "slerp_params");
}

ParameterMap task_arithmetic(const ParameterMap& pretrained, const ParameterMap& finetuned,
                             double scale) {
    if (!std::isfinite(scale)) throw DomainError("task_arithmetic: scale must be finite");
    return elementwise(
        pretrained, finetuned,
        [scale](double p, double f) { return p + scale * (f - p); },
        "task_arithmetic");
}

ParameterMap ties_merge(const ParameterMap& pretrained, const ParameterMap& finetuned,
                        double trim_fraction, double scale) {
    if (!(trim_fraction > 0.0 && trim_fraction <= 1.0)) {
        throw DomainError("ties_merge: trim_fraction must be in (0, 1]");
    }
    if (!std::isfinite(scale)) throw DomainError("ties_merge: scale must be finite");
    require_aligned(pretrained, finetuned);

    ParameterMap out;
    auto ift = finetuned.begin();
    for (auto ipt = pretrained.begin(); ipt != pretrained.end(); ++ipt, ++ift) {
        const auto& pt = ipt->second.data;
        const auto& ft = ift->second.data;
        const size_t n = pt.size();

        std::vector<double> tau(n);
        for (size_t i = 0; i < n; ++i) {
            tau[i] = static_cast<double>(ft[i]) - static_cast<double>(pt[i]);
        }

        // Rank by |tau| descending; ties keep the lower flat index.
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        std::sort(order.begin(), order.end(), [&tau](size_t i, size_t j) {
            const double ai = std::fabs(tau[i]);
            const double aj = std::fabs(tau[j]);
            if (ai != aj) return ai > aj;
            return i < j;
        });
        const size_t keep =
            static_cast<size_t>(std::ceil(trim_fraction * static_cast<double>(n)));

        Tensor t;
        t.shape = ipt->second.shape;
        t.data.assign(pt.begin(), pt.end());
        for (size_t k = 0; k < keep && k < n; ++k) {
            const size_t i = order[k];
            t.data[i] = static_cast<float>(static_cast<double>(pt[i]) + scale * tau[i]);
        }
        out.insert(ipt->first, std::move(t));
    }
    out.validate_finite("ties_merge");
    return out;
}

std::pair<ParameterMap, double> mixup_merge(const ParameterMap& pretrained,
                                            const ParameterMap& finetuned,
                                            SplitMix64& rng, double alpha) {
    if (!(alpha > 0.0)) throw DomainError("mixup_merge: alpha must be positive");
    const double lambda = rng.beta(alpha, alpha);
    return {lerp_params(pretrained, finetuned, lambda), lambda};
}

} // namespace ttm
