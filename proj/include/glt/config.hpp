#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "glt/data.hpp"
#include "glt/model.hpp"
#include "glt/train.hpp"

namespace glt {

enum class InferenceMode { single_size, multi_size };

/// Flat key=value run configuration. Every key has a default; unknown keys are
/// rejected. Values set later (file, then flags) replace earlier ones.
class RunConfig {
public:
    RunConfig();

    // One "key = value" per line; '#' starts a comment.
    void load_file(const std::filesystem::path& path);
    void parse(std::istream& is, const std::string& source = "<input>");
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    bool has_key(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::vector<std::size_t> get_sizes(const std::string& key) const;

    // Every key with its resolved value, sorted by key.
    void write(std::ostream& os) const;
    void write_file(const std::filesystem::path& path) const;

    static std::vector<std::string> keys();

    ModelConfig model_config() const;
    TrainConfig train_config() const;
    SyntheticSpec synthetic_spec() const;
    SizeGrid size_grid() const;
    InferenceMode inference_mode() const;
    // Planes named by train.plane ("all" gives the three of them).
    std::vector<Plane> planes() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace glt
