#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "glt/patch.hpp"

namespace glt {

struct PatchError {
    PatchSpec patch;
    double error = 0.0; // |predicted - true age| for this patch
};

/// height x width grid of non-negative values. Normalised heatmaps lie in [0, 1].
struct Heatmap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> grid;

    double at(std::size_t r, std::size_t c) const { return grid[r * width + c]; }
    double max() const;
    // Sum over the rectangle [row, row+h) x [col, col+w).
    double mass(std::size_t row, std::size_t col, std::size_t h, std::size_t w) const;
};

/// For every distinct patch size, the `per_size` patches with the lowest error.
/// Ties are broken by row, then column. If `sizes` is non-empty only those sizes
/// are considered.
std::vector<PatchSpec> lowest_error_per_size(std::span<const PatchError> patches, std::size_t per_size = 5,
                                             std::span<const std::size_t> sizes = {});

/// The `count` lowest-error patches among the given sizes, pooled.
std::vector<PatchSpec> lowest_error_pooled(std::span<const PatchError> patches, std::size_t count,
                                           std::span<const std::size_t> sizes);

// Adds 1 to every pixel covered by each patch.
Heatmap coverage(std::size_t height, std::size_t width, std::span<const PatchSpec> patches);
// Divides by the maximum (no-op for an all-zero grid).
Heatmap normalized(Heatmap map);

Heatmap subject_heatmap(std::size_t height, std::size_t width, std::span<const PatchError> patches,
                        std::size_t per_size = 5);

struct SubjectPatchErrors {
    double age = 0.0;
    std::vector<PatchError> patches;
};

inline constexpr std::size_t kGroupHeatmapSizes[] = {32, 40};

/// Averages, over subjects with age in [age_lo, age_hi), the coverage of each
/// subject's `count` lowest-error patches of the given sizes, then normalises.
/// Returns nullopt when no subject falls in the bin.
std::optional<Heatmap> group_heatmap(std::size_t height, std::size_t width,
                                     std::span<const SubjectPatchErrors> subjects, double age_lo, double age_hi,
                                     std::size_t count = 5,
                                     std::span<const std::size_t> sizes = kGroupHeatmapSizes);

// Binary PGM (P5), max-normalised and scaled to 0..255.
void write_pgm(std::ostream& os, const Heatmap& map);
// One CSV row per image row.
void write_heatmap_csv(std::ostream& os, const Heatmap& map);

struct SigmaRow {
    int age = 0;
    double mean_sigma = 0.0;
    double smoothed = 0.0;
    std::size_t count = 0;
};

/// Mean sigma per integer age year, smoothed with a centred moving average over
/// the years present within +-window/2.
std::vector<SigmaRow> sigma_distribution(std::span<const std::pair<double, double>> age_sigma,
                                         std::size_t window = 5);
void write_sigma_csv(std::ostream& os, std::span<const SigmaRow> rows);

} // namespace glt
