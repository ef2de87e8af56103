#pragma once

#include <filesystem>
#include <iosfwd>

#include "glt/tensor.hpp"

// GLT1 binary layout: "GLT1", u32 rank, rank x u32 dims, then row-major
// float32 values. All integers and floats little-endian.
namespace glt {

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

// Bytes write_tensor emits for the given shape.
std::size_t encoded_size(const Shape& shape);

void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

} // namespace glt
