#pragma once

#include <filesystem>
#include <vector>

#include "glt/gradcheck.hpp"

// A checkpoint is a pair of files sharing a stem:
//   <stem>.bin       concatenated GLT1 tensor records
//   <stem>.manifest  one line per tensor: name <TAB> shape <TAB> byte offset
namespace glt {

struct ManifestEntry {
    std::string name;
    Shape shape;
    std::size_t offset = 0;
};

void save_checkpoint(const std::vector<NamedTensor>& tensors, const std::filesystem::path& stem);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& stem);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& stem);

/// Copies checkpoint values into the given tensors. Every target must be present
/// with the same shape and the checkpoint must hold nothing else; otherwise a
/// FormatError lists the mismatch and no target is modified.
void load_checkpoint_into(const std::vector<NamedTensor>& targets, const std::filesystem::path& stem);

Shape parse_shape(const std::string& text); // "4x3x3"

} // namespace glt
