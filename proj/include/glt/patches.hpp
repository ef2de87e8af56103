#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "glt/model.hpp"
#include "glt/patch.hpp"

namespace glt {

struct PatchPrediction {
    PatchSpec patch;
    double age = 0.0;
};

/// Per-patch predictions of one image with their mean and population standard deviation.
struct AgeEstimate {
    std::vector<PatchPrediction> per_patch;
    double mean = 0.0;
    double stddev = 0.0;

    static AgeEstimate from_predictions(std::vector<PatchPrediction> predictions);
};

/// Sizes min, min+step, ... up to max (inclusive). The default runs 32..104;
/// max = 96 gives the shorter reading of the same grid.
struct SizeGrid {
    std::size_t min = 32;
    std::size_t max = 104;
    std::size_t step = 8;

    // Grid sizes that fit in a height x width image.
    std::vector<std::size_t> sizes_within(std::size_t height, std::size_t width) const;
};

/// Row-major grid of size x size windows with stride size / 2.
std::vector<PatchSpec> sliding_window(std::size_t height, std::size_t width, std::size_t size);

/// n patches with sizes uniform over the grid and corners uniform over valid
/// positions, sampled with replacement.
std::vector<PatchSpec> sample_multisize(std::size_t height, std::size_t width, std::size_t n, std::uint64_t seed,
                                        const SizeGrid& grid = {});

/// Runs the model's local pathway over the given patches of one image [K, H, W].
/// The global feature is computed once and shared by every patch. Patches are
/// grouped by size and evaluated in chunks of at most batch.
AgeEstimate infer_patches(GltModel& model, const Tensor& image, std::span<const PatchSpec> patches,
                          std::size_t batch = 64);

AgeEstimate infer_single_size(GltModel& model, const Tensor& image, std::size_t size, std::size_t batch = 64);
AgeEstimate infer_multi_size(GltModel& model, const Tensor& image, std::size_t n, std::uint64_t seed,
                             const SizeGrid& grid = {}, std::size_t batch = 64);

double fuse_planes(double axial, double coronal, double sagittal);

void write_patch_csv_header(std::ostream& os);
// Rows subject_id,plane,row,col,size,predicted_age
void write_patch_csv(std::ostream& os, const std::string& subject_id, const std::string& plane,
                     const AgeEstimate& estimate);

} // namespace glt
