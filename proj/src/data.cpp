#include "glt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "glt/error.hpp"
#include "glt/tensor_io.hpp"

namespace glt {

const char* plane_name(Plane plane)
{
    switch (plane) {
    case Plane::axial: return "axial";
    case Plane::coronal: return "coronal";
    case Plane::sagittal: return "sagittal";
    }
    return "?";
}

Plane parse_plane(const std::string& name)
{
    for (auto p : kPlanes)
        if (name == plane_name(p)) return p;
    throw ContractError("unknown plane '" + name + "'");
}

Volume Volume::zeros(std::size_t x, std::size_t y, std::size_t z)
{
    Volume v{x, y, z, std::vector<double>(x * y * z, 0.0)};
    v.validate();
    return v;
}

void Volume::validate() const
{
    if (x == 0 || y == 0 || z == 0) throw DimensionError("volume dimensions must be positive");
    if (voxels.size() != x * y * z) throw DimensionError("volume voxel count does not match its dimensions");
    for (double v : voxels)
        if (!std::isfinite(v)) throw NumericalError("volume contains non-finite voxels");
}

std::vector<std::size_t> slice_indices(std::size_t dim, std::size_t count)
{
    if (count == 0 || count > dim)
        throw ContractError("cannot take " + std::to_string(count) + " slices from a dimension of " +
                            std::to_string(dim));
    const auto first = dim / 2 - count / 2;
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = first + i;
    return idx;
}

Tensor extract_slices(const Volume& vol, Plane plane, std::size_t count)
{
    std::size_t H = 0, W = 0, depth = 0;
    switch (plane) {
    case Plane::axial: H = vol.x, W = vol.y, depth = vol.z; break;
    case Plane::coronal: H = vol.x, W = vol.z, depth = vol.y; break;
    case Plane::sagittal: H = vol.y, W = vol.z, depth = vol.x; break;
    }
    const auto idx = slice_indices(depth, count);
    std::vector<double> out(count * H * W);
    for (std::size_t k = 0; k < count; ++k)
        for (std::size_t r = 0; r < H; ++r)
            for (std::size_t c = 0; c < W; ++c) {
                double v = 0.0;
                switch (plane) {
                case Plane::axial: v = vol.at(r, c, idx[k]); break;
                case Plane::coronal: v = vol.at(r, idx[k], c); break;
                case Plane::sagittal: v = vol.at(idx[k], r, c); break;
                }
                out[(k * H + r) * W + c] = v;
            }
    return Tensor::from_data({count, H, W}, std::move(out));
}

void save_volume(const Volume& vol, const std::filesystem::path& path)
{
    vol.validate();
    save_tensor(Tensor::from_data({vol.x, vol.y, vol.z}, vol.voxels), path);
}

Volume load_volume(const std::filesystem::path& path)
{
    auto t = load_tensor(path);
    if (t.rank() != 3) throw FormatError("volume file " + path.string() + " has rank " + std::to_string(t.rank()));
    Volume v{t.dim(0), t.dim(1), t.dim(2), std::vector<double>(t.data().begin(), t.data().end())};
    return v;
}

SignalRect SyntheticSpec::default_rect(std::size_t x, std::size_t y)
{
    auto frac = [](std::size_t n, double f) { return static_cast<std::size_t>(std::lround(f * static_cast<double>(n))); };
    return {frac(x, 28.0 / 64), frac(y, 18.0 / 64), std::max<std::size_t>(1, frac(x, 20.0 / 64)),
            std::max<std::size_t>(1, frac(y, 24.0 / 64))};
}

void SyntheticSpec::validate() const
{
    if (x == 0 || y == 0 || z == 0) throw ContractError("synthetic volume dimensions must be positive");
    if (!(age_max > age_min) || age_min < 0.0) throw ContractError("synthetic age range must satisfy 0 <= min < max");
    if (rect.height == 0 || rect.width == 0 || rect.row + rect.height > x || rect.col + rect.width > y)
        throw ContractError("signal rectangle is not inside the axial slice");
    if (!(noise >= 0.0)) throw ContractError("noise level must be non-negative");
}

Volume synthesize_volume(const SyntheticSpec& spec, double age, std::uint64_t subject_seed)
{
    spec.validate();
    std::mt19937_64 rng(subject_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double k = spec.noise;
    const double two_pi = 2.0 * std::numbers::pi;

    const double u = std::clamp((age - spec.age_min) / (spec.age_max - spec.age_min), 0.0, 1.0);

    // Nuisance parameters. All vanish at k = 0.
    const double offset = 3.0 * k * gauss(rng);
    const double coarse = std::clamp(u + 1.0 * k * gauss(rng), 0.0, 1.0);
    std::array<double, 3> pair_level{};
    for (auto& level : pair_level) level = 4.0 * k * (2.0 * unit(rng) - 1.0);
    struct Wave {
        double fx, fy, fz, phase;
    };
    std::array<Wave, 3> waves{};
    for (auto& w : waves) w = {std::floor(3.0 * unit(rng)), std::floor(3.0 * unit(rng)), std::floor(3.0 * unit(rng)),
                               two_pi * unit(rng)};
    const double stripe_phase = k > 0.0 ? two_pi * unit(rng) : 0.0;

    const double contrast = 0.5 * coarse;
    // The stripe frequency rises with age up to the fold, then falls part of
    // the way back, so one patch pins the age down only up to two readings
    // and the coarse whole-image cue decides between them.
    constexpr double fold = 0.6, tail = 0.35;
    const double rise = u < fold ? u / fold : 1.0 - (1.0 - tail) * (u - fold) / (1.0 - fold);
    const double frequency = 0.04 + 0.16 * rise; // cycles per unit of x + y + z
    const double stripe_amp = 0.1;

    const double X = static_cast<double>(spec.x), Y = static_cast<double>(spec.y), Z = static_cast<double>(spec.z);
    const std::array<double, 3> dims{X, Y, Z};
    const double radius = 0.09 * std::min({X, Y, Z});

    auto v = Volume::zeros(spec.x, spec.y, spec.z);
    for (std::size_t i = 0; i < spec.x; ++i)
        for (std::size_t j = 0; j < spec.y; ++j)
            for (std::size_t l = 0; l < spec.z; ++l) {
                const std::array<double, 3> p{static_cast<double>(i) + 0.5, static_cast<double>(j) + 0.5,
                                              static_cast<double>(l) + 0.5};
                double value = 0.45 + offset;
                for (const auto& w : waves)
                    value += k * std::cos(two_pi * (w.fx * p[0] / X + w.fy * p[1] / Y + w.fz * p[2] / Z) + w.phase);

                // Blob pair along each axis: low end gets level - c/2, high end level + c/2.
                for (std::size_t axis = 0; axis < 3; ++axis)
                    for (int end = 0; end < 2; ++end) {
                        double d2 = 0.0;
                        for (std::size_t a = 0; a < 3; ++a) {
                            const double centre = a == axis ? (end ? 0.87 : 0.13) * dims[a] : 0.5 * dims[a];
                            d2 += (p[a] - centre) * (p[a] - centre);
                        }
                        if (d2 <= radius * radius)
                            value += pair_level[axis] + (end ? 0.5 : -0.5) * contrast;
                    }

                if (i >= spec.rect.row && i < spec.rect.row + spec.rect.height && j >= spec.rect.col &&
                    j < spec.rect.col + spec.rect.width)
                    value += stripe_amp *
                             std::sin(two_pi * frequency * static_cast<double>(i + j + l) + stripe_phase);

                if (k > 0.0) value += 0.3 * k * gauss(rng);
                v.at(i, j, l) = std::clamp(value, 0.0, 1.0);
            }
    return v;
}

void for_each_synthetic(const SyntheticSpec& spec, const std::function<void(const SyntheticSubject&)>& fn)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> age_dist(spec.age_min, spec.age_max);
    for (std::size_t s = 0; s < spec.subjects; ++s) {
        const double age = age_dist(rng);
        const auto subject_seed = rng();
        std::ostringstream id;
        id << "sub" << std::setw(4) << std::setfill('0') << s;
        fn({id.str(), age, synthesize_volume(spec, age, subject_seed)});
    }
}

std::vector<SyntheticSubject> generate_synthetic_volumes(const SyntheticSpec& spec)
{
    std::vector<SyntheticSubject> out;
    out.reserve(spec.subjects);
    for_each_synthetic(spec, [&](const SyntheticSubject& s) { out.push_back(s); });
    return out;
}

SubjectRecord make_record(const SyntheticSubject& subject, std::size_t slices)
{
    SubjectRecord r{subject.id, subject.age, {}};
    for (auto p : kPlanes) r.planes[static_cast<std::size_t>(p)] = extract_slices(subject.volume, p, slices);
    return r;
}

std::vector<SubjectRecord> generate_synthetic(const SyntheticSpec& spec, std::size_t slices)
{
    std::vector<SubjectRecord> out;
    for_each_synthetic(spec, [&](const SyntheticSubject& s) { out.push_back(make_record(s, slices)); });
    return out;
}

void write_cohort_manifest(const std::vector<CohortEntry>& entries, const std::filesystem::path& path)
{
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os.precision(17);
    os << "id,age,axial_path,coronal_path,sagittal_path\n";
    for (const auto& e : entries)
        os << e.id << ',' << e.age << ',' << e.paths[0].generic_string() << ',' << e.paths[1].generic_string() << ','
           << e.paths[2].generic_string() << '\n';
    if (!os) throw IoError("cannot write " + path.string());
}

std::vector<CohortEntry> read_cohort_manifest(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw IoError("cannot open cohort manifest " + path.string());
    std::string line;
    if (!std::getline(is, line) || line != "id,age,axial_path,coronal_path,sagittal_path")
        throw FormatError("cohort manifest " + path.string() + " has an unexpected header");
    std::vector<CohortEntry> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 5) throw FormatError("cohort manifest row has " + std::to_string(fields.size()) + " fields: " + line);
        CohortEntry e;
        e.id = fields[0];
        try {
            e.age = std::stod(fields[1]);
        } catch (const std::exception&) {
            throw FormatError("cohort manifest: bad age '" + fields[1] + "'");
        }
        for (std::size_t p = 0; p < 3; ++p) e.paths[p] = fields[2 + p];
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<SubjectRecord> load_cohort(const std::filesystem::path& manifest)
{
    const auto base = manifest.parent_path();
    std::vector<SubjectRecord> out;
    for (const auto& e : read_cohort_manifest(manifest)) {
        SubjectRecord r{e.id, e.age, {}};
        for (std::size_t p = 0; p < 3; ++p) {
            auto t = load_tensor(base / e.paths[p]);
            if (t.rank() != 3) throw FormatError("slice stack " + e.paths[p].string() + " is not [K, H, W]");
            r.planes[p] = std::move(t);
        }
        if (r.planes[0].dim(0) != r.planes[1].dim(0) || r.planes[1].dim(0) != r.planes[2].dim(0))
            throw FormatError("subject " + e.id + " has different slice counts per plane");
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace glt
