#include "glt/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "glt/error.hpp"
#include "glt/tensor_io.hpp"

namespace glt {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix)
{
    auto p = stem;
    p += suffix;
    return p;
}

std::string shape_token(const Shape& s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(s[i]);
    }
    return out;
}

} // namespace

Shape parse_shape(const std::string& text)
{
    Shape shape;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        try {
            std::size_t used = 0;
            auto v = std::stoull(part, &used);
            if (used != part.size() || v == 0) throw std::invalid_argument(part);
            shape.push_back(v);
        } catch (const std::exception&) {
            throw FormatError("bad shape '" + text + "'");
        }
    }
    if (shape.empty()) throw FormatError("empty shape");
    return shape;
}

void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::filesystem::path& stem)
{
    std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
    std::ofstream man(with_suffix(stem, ".manifest"));
    if (!bin || !man) throw IoError("cannot write checkpoint " + stem.string());
    man << "# name\tshape\toffset\n";
    std::size_t offset = 0;
    for (const auto& t : tensors) {
        write_tensor(bin, t.tensor);
        man << t.name << '\t' << shape_token(t.tensor.shape()) << '\t' << offset << '\n';
        offset += encoded_size(t.tensor.shape());
    }
    if (!man) throw IoError("cannot write checkpoint manifest " + stem.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& stem)
{
    const auto path = with_suffix(stem, ".manifest");
    std::ifstream man(path);
    if (!man) throw IoError("cannot open " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    while (std::getline(man, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        ManifestEntry e;
        std::string shape, offset;
        if (!std::getline(ss, e.name, '\t') || !std::getline(ss, shape, '\t') || !std::getline(ss, offset))
            throw FormatError("malformed manifest line: " + line);
        e.shape = parse_shape(shape);
        try {
            e.offset = std::stoull(offset);
        } catch (const std::exception&) {
            throw FormatError("bad offset in manifest line: " + line);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& stem)
{
    const auto entries = read_manifest(stem);
    const auto path = with_suffix(stem, ".bin");
    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw IoError("cannot open " + path.string());
    std::vector<NamedTensor> out;
    for (const auto& e : entries) {
        bin.seekg(static_cast<std::streamoff>(e.offset));
        if (!bin) throw FormatError("offset past end of " + path.string() + " for '" + e.name + "'");
        auto t = read_tensor(bin);
        if (t.shape() != e.shape)
            throw FormatError("checkpoint tensor '" + e.name + "' has shape " + shape_str(t.shape()) +
                              ", manifest says " + shape_str(e.shape));
        out.push_back({e.name, std::move(t)});
    }
    return out;
}

void load_checkpoint_into(const std::vector<NamedTensor>& targets, const std::filesystem::path& stem)
{
    auto stored = read_checkpoint(stem);
    std::map<std::string, Tensor> by_name;
    for (auto& s : stored) by_name.emplace(s.name, s.tensor);

    std::string problems;
    for (const auto& t : targets) {
        auto it = by_name.find(t.name);
        if (it == by_name.end())
            problems += " missing '" + t.name + "';";
        else if (it->second.shape() != t.tensor.shape())
            problems += " '" + t.name + "' is " + shape_str(it->second.shape()) + ", model expects " +
                        shape_str(t.tensor.shape()) + ";";
    }
    if (by_name.size() != targets.size() && problems.empty())
        problems = " checkpoint holds " + std::to_string(by_name.size()) + " tensors, model has " +
                   std::to_string(targets.size());
    if (!problems.empty()) throw FormatError("checkpoint does not match the model architecture:" + problems);

    for (const auto& t : targets) {
        auto src = by_name.at(t.name).data();
        auto dst = t.tensor;
        std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    }
}

} // namespace glt
