#include "glt/interpretation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "glt/error.hpp"

namespace glt {

double Heatmap::max() const
{
    return grid.empty() ? 0.0 : *std::max_element(grid.begin(), grid.end());
}

double Heatmap::mass(std::size_t row, std::size_t col, std::size_t h, std::size_t w) const
{
    if (row + h > height || col + w > width) throw ContractError("Heatmap::mass: rectangle outside the map");
    double s = 0.0;
    for (std::size_t r = row; r < row + h; ++r)
        for (std::size_t c = col; c < col + w; ++c) s += at(r, c);
    return s;
}

namespace {

bool wanted(std::size_t size, std::span<const std::size_t> sizes)
{
    return sizes.empty() || std::find(sizes.begin(), sizes.end(), size) != sizes.end();
}

bool lower_error(const PatchError& a, const PatchError& b)
{
    if (a.error != b.error) return a.error < b.error;
    if (a.patch.row != b.patch.row) return a.patch.row < b.patch.row;
    return a.patch.col < b.patch.col;
}

std::vector<PatchSpec> take_lowest(std::vector<PatchError> pool, std::size_t count)
{
    const auto n = std::min(count, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n), pool.end(), lower_error);
    std::vector<PatchSpec> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[i].patch);
    return out;
}

} // namespace

std::vector<PatchSpec> lowest_error_per_size(std::span<const PatchError> patches, std::size_t per_size,
                                             std::span<const std::size_t> sizes)
{
    std::map<std::size_t, std::vector<PatchError>> groups;
    for (const auto& p : patches)
        if (wanted(p.patch.size, sizes)) groups[p.patch.size].push_back(p);
    std::vector<PatchSpec> out;
    for (auto& [size, pool] : groups) {
        auto best = take_lowest(std::move(pool), per_size);
        out.insert(out.end(), best.begin(), best.end());
    }
    return out;
}

std::vector<PatchSpec> lowest_error_pooled(std::span<const PatchError> patches, std::size_t count,
                                           std::span<const std::size_t> sizes)
{
    std::vector<PatchError> pool;
    for (const auto& p : patches)
        if (wanted(p.patch.size, sizes)) pool.push_back(p);
    return take_lowest(std::move(pool), count);
}

Heatmap coverage(std::size_t height, std::size_t width, std::span<const PatchSpec> patches)
{
    Heatmap map{height, width, std::vector<double>(height * width, 0.0)};
    for (const auto& p : patches) {
        require_inside(p, height, width);
        for (std::size_t r = p.row; r < p.row + p.size; ++r)
            for (std::size_t c = p.col; c < p.col + p.size; ++c) map.grid[r * width + c] += 1.0;
    }
    return map;
}

Heatmap normalized(Heatmap map)
{
    const double m = map.max();
    if (m > 0.0)
        for (auto& v : map.grid) v /= m;
    return map;
}

Heatmap subject_heatmap(std::size_t height, std::size_t width, std::span<const PatchError> patches,
                        std::size_t per_size)
{
    const auto selected = lowest_error_per_size(patches, per_size);
    return normalized(coverage(height, width, selected));
}

std::optional<Heatmap> group_heatmap(std::size_t height, std::size_t width,
                                     std::span<const SubjectPatchErrors> subjects, double age_lo, double age_hi,
                                     std::size_t count, std::span<const std::size_t> sizes)
{
    Heatmap acc{height, width, std::vector<double>(height * width, 0.0)};
    std::size_t members = 0;
    for (const auto& s : subjects) {
        if (s.age < age_lo || s.age >= age_hi) continue;
        const auto selected = lowest_error_pooled(s.patches, count, sizes);
        const auto cov = coverage(height, width, selected);
        for (std::size_t i = 0; i < acc.grid.size(); ++i) acc.grid[i] += cov.grid[i];
        ++members;
    }
    if (members == 0) return std::nullopt;
    for (auto& v : acc.grid) v /= static_cast<double>(members);
    return normalized(std::move(acc));
}

void write_pgm(std::ostream& os, const Heatmap& map)
{
    os << "P5\n" << map.width << ' ' << map.height << "\n255\n";
    const double m = map.max();
    std::vector<unsigned char> bytes(map.grid.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = m > 0.0 ? std::clamp(map.grid[i] / m, 0.0, 1.0) : 0.0;
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_heatmap_csv(std::ostream& os, const Heatmap& map)
{
    const auto old = os.precision(10);
    for (std::size_t r = 0; r < map.height; ++r) {
        for (std::size_t c = 0; c < map.width; ++c) {
            if (c) os << ',';
            os << map.at(r, c);
        }
        os << '\n';
    }
    os.precision(old);
}

std::vector<SigmaRow> sigma_distribution(std::span<const std::pair<double, double>> age_sigma, std::size_t window)
{
    std::map<int, std::pair<double, std::size_t>> years;
    for (const auto& [age, sigma] : age_sigma) {
        auto& slot = years[static_cast<int>(std::floor(age))];
        slot.first += sigma;
        ++slot.second;
    }
    std::vector<SigmaRow> rows;
    for (const auto& [year, acc] : years)
        rows.push_back({year, acc.first / static_cast<double>(acc.second), 0.0, acc.second});

    const int half = static_cast<int>(window / 2);
    for (auto& row : rows) {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& other : rows)
            if (std::abs(other.age - row.age) <= half) {
                s += other.mean_sigma;
                ++n;
            }
        row.smoothed = s / static_cast<double>(n);
    }
    return rows;
}

void write_sigma_csv(std::ostream& os, std::span<const SigmaRow> rows)
{
    const auto old = os.precision(10);
    os << "age,mean_sigma,smoothed,count\n";
    for (const auto& r : rows) os << r.age << ',' << r.mean_sigma << ',' << r.smoothed << ',' << r.count << '\n';
    os.precision(old);
}

} // namespace glt
