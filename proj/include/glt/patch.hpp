#pragma once

#include <cstddef>
#include <string>

namespace glt {

/// Square crop of an image: top-left (row, col), side length size.
struct PatchSpec {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t size = 0;

    bool fits(std::size_t height, std::size_t width) const
    {
        return size > 0 && row + size <= height && col + size <= width;
    }
    std::string str() const;

    friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

// Throws ContractError naming the coordinates when the patch is not fully inside.
void require_inside(const PatchSpec& patch, std::size_t height, std::size_t width);

} // namespace glt
