#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ttm/error.hpp"
#include "ttm/prng.hpp"

namespace ttm {

// Dense float32 tensor with a row-major shape. Desk-scale models only, so
// everything lives in plain vectors.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> shape_in, std::vector<float> data_in);

    static Tensor zeros(std::vector<int64_t> shape_in);

    int64_t numel() const;

    // Shape entries positive, element count matches, all entries finite.
    void validate() const;
};

// Named tensor dictionary with name-lexicographic iteration order. All merge
// operations treat their inputs as immutable and return fresh maps.
class ParameterMap {
public:
    ParameterMap() = default;

    void insert(std::string name, Tensor t);
    bool contains(const std::string& name) const;
    const Tensor& at(const std::string& name) const;

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    int64_t total_elements() const;

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    // Every entry finite; throws ValidationError otherwise.
    void validate_finite(const std::string& context) const;

private:
    std::map<std::string, Tensor> entries_;
};

// Two maps are aligned when they hold the same names with the same shapes.
bool aligned(const ParameterMap& a, const ParameterMap& b);
void require_aligned(const ParameterMap& a, const ParameterMap& b);

// ---------- checkpoint container ----------

// Byte layout: "TTMC" | u32 version=1 | u64 header length | header JSON |
// packed f32 tensor data in header (name-lexicographic) order, little-endian.
std::string encode_checkpoint(const ParameterMap& params);
ParameterMap decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ParameterMap& params, const std::filesystem::path& path);
ParameterMap load_checkpoint(const std::filesystem::path& path);

// ---------- static merges ----------

// Elementwise (1 - lambda) * pretrained + lambda * finetuned, lambda in [0, 1].
ParameterMap lerp_params(const ParameterMap& pretrained, const ParameterMap& finetuned,
                         double lambda);

// Spherical interpolation over the full flattened parameter vectors; falls back
// to lerp_params when the angle between them is below 1e-7 rad.
ParameterMap slerp_params(const ParameterMap& a, const ParameterMap& b, double t);

// pretrained + scale * (finetuned - pretrained).
ParameterMap task_arithmetic(const ParameterMap& pretrained, const ParameterMap& finetuned,
                             double scale);

// Keeps only the ceil(trim_fraction * numel) largest-magnitude entries of the
// task vector per tensor (magnitude ties keep the lower flat index), then
// applies them like task_arithmetic.
ParameterMap ties_merge(const ParameterMap& pretrained, const ParameterMap& finetuned,
                        double trim_fraction, double scale);

// lerp_params at a single Beta(alpha, alpha) draw; returns the merged map and
// the drawn coefficient.
std::pair<ParameterMap, double> mixup_merge(const ParameterMap& pretrained,
                                            const ParameterMap& finetuned,
                                            SplitMix64& rng, double alpha);

} // namespace ttm
