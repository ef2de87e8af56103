#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "glt/data.hpp"
#include "glt/error.hpp"
#include "glt/tensor_io.hpp"
#include "support.hpp"

using namespace glt;
namespace fs = std::filesystem;

namespace {

Volume ramp(std::size_t x, std::size_t y, std::size_t z)
{
    auto v = Volume::zeros(x, y, z);
    for (std::size_t i = 0; i < v.voxels.size(); ++i) v.voxels[i] = static_cast<double>(i);
    return v;
}

SyntheticSpec small_spec(std::size_t n, std::size_t side = 16)
{
    SyntheticSpec spec;
    spec.subjects = n;
    spec.x = spec.y = spec.z = side;
    spec.rect = SyntheticSpec::default_rect(side, side);
    return spec;
}

double box_mean(const Volume& v, std::array<double, 3> centre, double r)
{
    double s = 0;
    int n = 0;
    for (std::size_t i = 0; i < v.x; ++i)
        for (std::size_t j = 0; j < v.y; ++j)
            for (std::size_t k = 0; k < v.z; ++k) {
                const double d0 = i + 0.5 - centre[0], d1 = j + 0.5 - centre[1], d2 = k + 0.5 - centre[2];
                if (d0 * d0 + d1 * d1 + d2 * d2 <= r * r) s += v.at(i, j, k), ++n;
            }
    return s / n;
}

} // namespace

TEST_CASE("central slice indices")
{
    CHECK(slice_indices(121, 5) == std::vector<std::size_t>{58, 59, 60, 61, 62});
    CHECK(slice_indices(64, 5) == std::vector<std::size_t>{30, 31, 32, 33, 34});
    CHECK(slice_indices(10, 4) == std::vector<std::size_t>{3, 4, 5, 6});
    CHECK(slice_indices(1, 1) == std::vector<std::size_t>{0});
    CHECK_THROWS_AS(slice_indices(3, 5), ContractError);
    CHECK_THROWS_AS(slice_indices(3, 0), ContractError);
}

TEST_CASE("slice extraction equals direct voxel reads in every plane")
{
    const auto v = ramp(7, 9, 11);
    const auto axial = extract_slices(v, Plane::axial, 3);
    const auto coronal = extract_slices(v, Plane::coronal, 3);
    const auto sagittal = extract_slices(v, Plane::sagittal, 3);
    CHECK(axial.shape() == Shape{3, 7, 9});
    CHECK(coronal.shape() == Shape{3, 7, 11});
    CHECK(sagittal.shape() == Shape{3, 9, 11});
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t r = 0; r < 7; ++r)
            for (std::size_t c = 0; c < 9; ++c) CHECK(axial.data()[(k * 7 + r) * 9 + c] == v.at(r, c, 4 + k));
        for (std::size_t r = 0; r < 7; ++r)
            for (std::size_t c = 0; c < 11; ++c) CHECK(coronal.data()[(k * 7 + r) * 11 + c] == v.at(r, 3 + k, c));
        for (std::size_t r = 0; r < 9; ++r)
            for (std::size_t c = 0; c < 11; ++c) CHECK(sagittal.data()[(k * 9 + r) * 11 + c] == v.at(2 + k, r, c));
    }
}

TEST_CASE("synthetic cohort is deterministic per seed and within range")
{
    auto spec = small_spec(6);
    auto a = generate_synthetic_volumes(spec), b = generate_synthetic_volumes(spec);
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].age == b[i].age);
        CHECK(a[i].volume.voxels == b[i].volume.voxels);
        CHECK(a[i].age >= 0.0);
        CHECK(a[i].age <= 97.0);
        for (double x : a[i].volume.voxels) CHECK((x >= 0.0 && x <= 1.0));
    }
    CHECK(a[0].id == "sub0000");
    spec.seed = 8;
    CHECK(generate_synthetic_volumes(spec)[0].age != a[0].age);
}

TEST_CASE("noise-free volumes are a pure function of age")
{
    auto spec = small_spec(1);
    spec.noise = 0.0;
    CHECK(synthesize_volume(spec, 40, 1).voxels == synthesize_volume(spec, 40, 99).voxels);
    CHECK(synthesize_volume(spec, 40, 1).voxels != synthesize_volume(spec, 41, 1).voxels);
}

TEST_CASE("signal rectangle statistics separate the youngest from the oldest age by more than 3 pooled sd")
{
    auto spec = small_spec(1, 32);
    const auto rect = spec.rect;
    // Mean absolute horizontal gradient inside the rectangle of the central axial slice.
    auto roughness = [&](double age, std::uint64_t seed) {
        const auto v = synthesize_volume(spec, age, seed);
        double s = 0;
        int n = 0;
        for (std::size_t i = rect.row; i < rect.row + rect.height; ++i)
            for (std::size_t j = rect.col; j + 1 < rect.col + rect.width; ++j, ++n)
                s += std::fabs(v.at(i, j + 1, 16) - v.at(i, j, 16));
        return s / n;
    };
    std::vector<double> young, old;
    for (std::uint64_t s = 0; s < 20; ++s) {
        young.push_back(roughness(spec.age_min, s));
        old.push_back(roughness(spec.age_max, 1000 + s));
    }
    auto mean = [](const std::vector<double>& v) { double s = 0; for (double x : v) s += x; return s / v.size(); };
    auto var = [&](const std::vector<double>& v) {
        const double m = mean(v);
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return s / (v.size() - 1);
    };
    const double pooled = std::sqrt(0.5 * (var(young) + var(old)));
    CAPTURE(pooled);
    CHECK(std::fabs(mean(old) - mean(young)) > 3.0 * pooled);
}

TEST_CASE("synthetic ages are uniform: chi-square over 10 bins at n = 1000")
{
    auto spec = small_spec(1000, 8);
    std::vector<int> bins(10, 0);
    for_each_synthetic(spec, [&](const SyntheticSubject& s) {
        ++bins[std::min<std::size_t>(9, static_cast<std::size_t>(s.age / 9.7))];
    });
    double chi2 = 0;
    for (int o : bins) chi2 += (o - 100.0) * (o - 100.0) / 100.0;
    CAPTURE(chi2);
    CHECK(chi2 < 21.666); // 99th percentile, 9 degrees of freedom
}

TEST_CASE("spec validation")
{
    auto spec = small_spec(3);
    spec.rect = {10, 10, 10, 10};
    CHECK_THROWS_AS(spec.validate(), ContractError);
    spec = small_spec(3);
    spec.age_max = spec.age_min;
    CHECK_THROWS_AS(spec.validate(), ContractError);
}

TEST_CASE("volume and cohort round trip")
{
    const auto dir = fs::temp_directory_path() / "glt_test_data";
    fs::remove_all(dir);
    fs::create_directories(dir / "slices");
    const auto v = ramp(4, 5, 6);
    save_volume(v, dir / "v.glt");
    const auto back = load_volume(dir / "v.glt");
    CHECK(back.x == 4);
    CHECK(back.voxels == v.voxels);

    auto subjects = generate_synthetic_volumes(small_spec(2));
    std::vector<CohortEntry> entries;
    for (const auto& s : subjects) {
        auto rec = make_record(s);
        CohortEntry e{s.id, s.age, {}};
        for (auto p : kPlanes) {
            const fs::path rel = fs::path("slices") / (s.id + "_" + plane_name(p) + ".glt");
            save_tensor(rec.plane(p), dir / rel);
            e.paths[static_cast<std::size_t>(p)] = rel;
        }
        entries.push_back(e);
    }
    write_cohort_manifest(entries, dir / "cohort.csv");
    const auto cohort = load_cohort(dir / "cohort.csv");
    REQUIRE(cohort.size() == 2);
    CHECK(cohort[1].age == subjects[1].age);
    CHECK(cohort[1].plane(Plane::sagittal).shape() == Shape{5, 16, 16});
    CHECK(test::max_abs_diff(cohort[0].plane(Plane::axial).data(), make_record(subjects[0]).plane(Plane::axial).data()) < 1e-7); // stored as float32

    save_tensor(Tensor::zeros({2, 2}), dir / "flat.glt");
    CHECK_THROWS_AS(load_volume(dir / "flat.glt"), FormatError);
    CHECK_THROWS_AS(load_volume(dir / "missing.glt"), IoError);
    {
        std::ofstream bad(dir / "bad.csv");
        bad << "id,age\n";
    }
    CHECK_THROWS_AS(read_cohort_manifest(dir / "bad.csv"), FormatError);
    CHECK(parse_plane("coronal") == Plane::coronal);
    CHECK_THROWS_AS(parse_plane("oblique"), ContractError);
    fs::remove_all(dir);
}
