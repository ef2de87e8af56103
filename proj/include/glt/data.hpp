#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "glt/tensor.hpp"

namespace glt {

enum class Plane { axial, coronal, sagittal };

inline constexpr std::array<Plane, 3> kPlanes{Plane::axial, Plane::coronal, Plane::sagittal};

const char* plane_name(Plane plane);
Plane parse_plane(const std::string& name);

/// Dense X x Y x Z volume, row-major with z fastest.
struct Volume {
    std::size_t x = 0, y = 0, z = 0;
    std::vector<double> voxels;

    static Volume zeros(std::size_t x, std::size_t y, std::size_t z);
    double at(std::size_t i, std::size_t j, std::size_t k) const { return voxels[(i * y + j) * z + k]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return voxels[(i * y + j) * z + k]; }
    void validate() const;
};

// Slice indices c - K/2 .. c + ceil(K/2) - 1 around c = dim / 2.
std::vector<std::size_t> slice_indices(std::size_t dim, std::size_t count);

/// K slices around the volume centre as a [K, H, W] stack.
///   axial:    fixed z, H = X, W = Y
///   coronal:  fixed y, H = X, W = Z
///   sagittal: fixed x, H = Y, W = Z
Tensor extract_slices(const Volume& vol, Plane plane, std::size_t count = 5);

void save_volume(const Volume& vol, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

/// Axis-aligned rectangle in axial-slice coordinates (row = x, col = y). In the
/// volume it extends over every z.
struct SignalRect {
    std::size_t row = 0, col = 0, height = 0, width = 0;
};

struct SyntheticSpec {
    std::size_t subjects = 200;
    double age_min = 0.0;
    double age_max = 97.0;
    std::size_t x = 64, y = 64, z = 64;
    SignalRect rect{28, 18, 20, 24};
    // Scales every random nuisance; 0 makes a volume a pure function of age.
    double noise = 0.05;
    std::uint64_t seed = 7;

    // Rectangle at the same relative placement as the 64^3 default.
    static SignalRect default_rect(std::size_t x, std::size_t y);
    void validate() const;
};

struct SyntheticSubject {
    std::string id;
    double age = 0.0;
    Volume volume;
};

/// One synthetic volume. Age is carried by two cues:
///  - coarse: pairs of blobs at opposite ends of each axis whose intensity
///    difference grows with age; each blob alone is masked by a random per-pair
///    level, so the cue is only readable when both ends are in view;
///  - fine: a diagonal stripe texture inside the signal box whose spatial
///    frequency rises with age to a peak at 60% of the range and then falls
///    back part of the way; alone it leaves two candidate ages.
/// On top sit a smooth random background, a random global offset and white noise.
Volume synthesize_volume(const SyntheticSpec& spec, double age, std::uint64_t subject_seed);

/// Ages uniform in [age_min, age_max]; bitwise reproducible for a given seed.
std::vector<SyntheticSubject> generate_synthetic_volumes(const SyntheticSpec& spec);
// Same cohort, one subject at a time.
void for_each_synthetic(const SyntheticSpec& spec, const std::function<void(const SyntheticSubject&)>& fn);

struct SubjectRecord {
    std::string id;
    double age = 0.0;
    std::array<Tensor, 3> planes; // [K, H, W] per plane, indexed by Plane

    const Tensor& plane(Plane p) const { return planes[static_cast<std::size_t>(p)]; }
};

SubjectRecord make_record(const SyntheticSubject& subject, std::size_t slices = 5);
std::vector<SubjectRecord> generate_synthetic(const SyntheticSpec& spec, std::size_t slices = 5);

/// Cohort manifest CSV: id,age,axial_path,coronal_path,sagittal_path. Paths are
/// relative to the manifest's directory; each names a GLT1 [K, H, W] slice stack.
struct CohortEntry {
    std::string id;
    double age = 0.0;
    std::array<std::filesystem::path, 3> paths;
};

void write_cohort_manifest(const std::vector<CohortEntry>& entries, const std::filesystem::path& path);
std::vector<CohortEntry> read_cohort_manifest(const std::filesystem::path& path);
std::vector<SubjectRecord> load_cohort(const std::filesystem::path& manifest);

} // namespace glt
