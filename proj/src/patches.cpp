#include "glt/patches.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>
#include <random>

#include "glt/error.hpp"
#include "glt/ops.hpp"

namespace glt {

std::string PatchSpec::str() const
{
    return "(row " + std::to_string(row) + ", col " + std::to_string(col) + ", size " + std::to_string(size) + ")";
}

void require_inside(const PatchSpec& patch, std::size_t height, std::size_t width)
{
    if (!patch.fits(height, width))
        throw ContractError("patch " + patch.str() + " is not inside the " + std::to_string(height) + "x" +
                            std::to_string(width) + " image");
}

AgeEstimate AgeEstimate::from_predictions(std::vector<PatchPrediction> predictions)
{
    if (predictions.empty()) throw ContractError("AgeEstimate: no predictions");
    AgeEstimate e;
    e.per_patch = std::move(predictions);
    const double n = static_cast<double>(e.per_patch.size());
    double s = 0.0;
    for (const auto& p : e.per_patch) s += p.age;
    e.mean = s / n;
    double ss = 0.0;
    for (const auto& p : e.per_patch) ss += (p.age - e.mean) * (p.age - e.mean);
    e.stddev = std::sqrt(ss / n);
    return e;
}

std::vector<std::size_t> SizeGrid::sizes_within(std::size_t height, std::size_t width) const
{
    if (step == 0 || min == 0) throw ContractError("SizeGrid: min and step must be positive");
    std::vector<std::size_t> sizes;
    const auto limit = std::min({max, height, width});
    for (auto s = min; s <= limit; s += step) sizes.push_back(s);
    return sizes;
}

std::vector<PatchSpec> sliding_window(std::size_t height, std::size_t width, std::size_t size)
{
    if (size == 0 || size % 2 != 0) throw ContractError("sliding_window: patch size must be even and positive");
    if (size > height || size > width)
        throw ContractError("sliding_window: patch size " + std::to_string(size) + " exceeds image " +
                            std::to_string(height) + "x" + std::to_string(width));
    const auto step = size / 2;
    std::vector<PatchSpec> out;
    for (std::size_t r = 0; r + size <= height; r += step)
        for (std::size_t c = 0; c + size <= width; c += step) out.push_back({r, c, size});
    return out;
}

std::vector<PatchSpec> sample_multisize(std::size_t height, std::size_t width, std::size_t n, std::uint64_t seed,
                                        const SizeGrid& grid)
{
    if (n == 0) throw ContractError("sample_multisize: n must be positive");
    const auto sizes = grid.sizes_within(height, width);
    if (sizes.empty())
        throw ContractError("sample_multisize: no grid size fits a " + std::to_string(height) + "x" +
                            std::to_string(width) + " image");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, sizes.size() - 1);
    std::vector<PatchSpec> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = sizes[pick(rng)];
        std::uniform_int_distribution<std::size_t> row(0, height - s), col(0, width - s);
        const auto r = row(rng);
        out.push_back({r, col(rng), s});
    }
    return out;
}

AgeEstimate infer_patches(GltModel& model, const Tensor& image, std::span<const PatchSpec> patches, std::size_t batch)
{
    if (image.rank() != 3) throw DimensionError("infer_patches: expected [K, H, W], got " + shape_str(image.shape()));
    if (patches.empty()) throw ContractError("infer_patches: no patches");
    if (batch == 0) batch = 1;
    const auto H = image.dim(1), W = image.dim(2);
    for (const auto& p : patches) require_inside(p, H, W);

    NoGradGuard no_grad;
    auto images = reshape(image, {1, image.dim(0), H, W});
    GlobalContext ctx;
    if (!model.local_only()) ctx = model.encode_global(images);

    std::map<std::size_t, std::vector<std::size_t>> by_size;
    for (std::size_t i = 0; i < patches.size(); ++i) by_size[patches[i].size].push_back(i);

    std::vector<PatchPrediction> preds(patches.size());
    for (const auto& [size, idx] : by_size)
        for (std::size_t start = 0; start < idx.size(); start += batch) {
            const auto end = std::min(idx.size(), start + batch);
            std::vector<PatchSpec> chunk;
            for (auto k = start; k < end; ++k) chunk.push_back(patches[idx[k]]);
            std::vector<std::size_t> owner(chunk.size(), 0);
            const auto ages = model.predict_local(crop_patches(images, chunk, owner), &ctx, owner);
            for (auto k = start; k < end; ++k) preds[idx[k]] = PatchPrediction{patches[idx[k]], ages.data()[k - start]};
        }
    return AgeEstimate::from_predictions(std::move(preds));
}

AgeEstimate infer_single_size(GltModel& model, const Tensor& image, std::size_t size, std::size_t batch)
{
    if (image.rank() != 3) throw DimensionError("infer_single_size: expected [K, H, W], got " + shape_str(image.shape()));
    return infer_patches(model, image, sliding_window(image.dim(1), image.dim(2), size), batch);
}

AgeEstimate infer_multi_size(GltModel& model, const Tensor& image, std::size_t n, std::uint64_t seed,
                             const SizeGrid& grid, std::size_t batch)
{
    if (image.rank() != 3) throw DimensionError("infer_multi_size: expected [K, H, W], got " + shape_str(image.shape()));
    return infer_patches(model, image, sample_multisize(image.dim(1), image.dim(2), n, seed, grid), batch);
}

double fuse_planes(double axial, double coronal, double sagittal)
{
    if (!std::isfinite(axial) || !std::isfinite(coronal) || !std::isfinite(sagittal))
        throw NumericalError("fuse_planes: non-finite plane estimate");
    // Sorted summation makes the result independent of argument order.
    std::array<double, 3> v{axial, coronal, sagittal};
    std::sort(v.begin(), v.end());
    return (v[0] + v[1] + v[2]) / 3.0;
}

void write_patch_csv_header(std::ostream& os) { os << "subject_id,plane,row,col,size,predicted_age\n"; }

void write_patch_csv(std::ostream& os, const std::string& subject_id, const std::string& plane,
                     const AgeEstimate& estimate)
{
    const auto old = os.precision(17);
    for (const auto& p : estimate.per_patch)
        os << subject_id << ',' << plane << ',' << p.patch.row << ',' << p.patch.col << ',' << p.patch.size << ','
           << p.age << '\n';
    os.precision(old);
}

} // namespace glt
