#include "glt/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "glt/error.hpp"

namespace glt {

namespace {

constexpr std::array<char, 4> kMagic{'G', 'L', 'T', '1'};
constexpr std::uint32_t kMaxRank = 16;

static_assert(std::endian::native == std::endian::little, "GLT1 I/O assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& is, const char* what)
{
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
        throw FormatError(std::string("GLT1: truncated while reading ") + what);
    return v;
}

} // namespace

std::size_t encoded_size(const Shape& shape)
{
    return 4 + 4 + 4 * shape.size() + 4 * shape_numel(shape);
}

void write_tensor(std::ostream& os, const Tensor& t)
{
    os.write(kMagic.data(), kMagic.size());
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    std::vector<float> buf(t.data().begin(), t.data().end());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw IoError("GLT1: write failed");
}

Tensor read_tensor(std::istream& is)
{
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), magic.size())) throw FormatError("GLT1: truncated before magic bytes");
    if (magic != kMagic) throw FormatError("GLT1: bad magic '" + std::string(magic.data(), magic.size()) + "'");
    const auto rank = get_u32(is, "rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError("GLT1: unsupported rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) {
        d = get_u32(is, "dimensions");
        if (d == 0) throw FormatError("GLT1: zero dimension");
    }
    std::vector<float> buf(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float))))
        throw FormatError("GLT1: truncated payload, expected " + std::to_string(buf.size()) + " values");
    return Tensor::from_data(std::move(shape), std::vector<double>(buf.begin(), buf.end()));
}

void save_tensor(const Tensor& t, const std::filesystem::path& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return read_tensor(is);
}

} // namespace glt
