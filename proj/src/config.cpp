#include "glt/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "glt/error.hpp"

namespace glt {

namespace {

// Desk-scale defaults; training hyper-parameters follow the reference recipe.
const std::vector<std::pair<std::string, std::string>> kDefaults = {
    {"seed", "7"},
    {"data.subjects", "200"},
    {"data.age_min", "0"},
    {"data.age_max", "97"},
    {"data.x", "64"},
    {"data.y", "64"},
    {"data.z", "64"},
    {"data.rect", "28,18,20,24"},
    {"data.noise", "0.05"},
    {"data.slices", "5"},
    {"model.mode", "glt"},
    {"model.stage_channels", "8,16,32,64"},
    {"model.blocks_per_stage", "2"},
    {"model.heads", "4"},
    {"model.blocks", "2"},
    {"model.scaling", "per_head"},
    {"model.global_grad", "true"},
    {"train.epochs", "80"},
    {"train.batch_size", "18"},
    {"train.lr", "1e-4"},
    {"train.decay_period", "25"},
    {"train.decay_factor", "0.5"},
    {"train.policy", "single_size"},
    {"train.patch_size", "32"},
    {"train.patches_per_subject", "1"},
    {"train.normalize_targets", "true"},
    {"train.folds", "5"},
    {"train.fold", "0"},
    {"train.plane", "all"},
    {"patch.grid_min", "32"},
    {"patch.grid_max", "104"},
    {"patch.grid_step", "8"},
    {"eval.mode", "single_size"},
    {"eval.patch_size", "32"},
    {"eval.samples", "3000"},
    {"eval.batch", "64"},
    {"heatmap.bin_years", "5"},
    {"heatmap.per_size", "5"},
    {"heatmap.sigma_window", "5"},
    {"paths.cohort", "cohort/cohort.csv"},
    {"paths.model_dir", "run"},
    {"paths.out", "out"},
};

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

RunConfig::RunConfig()
{
    for (const auto& [k, v] : kDefaults) values_[k] = v;
}

std::vector<std::string> RunConfig::keys()
{
    std::vector<std::string> out;
    for (const auto& kv : kDefaults) out.push_back(kv.first);
    std::sort(out.begin(), out.end());
    return out;
}

bool RunConfig::has_key(const std::string& key) const { return values_.count(key) != 0; }

void RunConfig::set(const std::string& key, const std::string& value)
{
    auto it = values_.find(key);
    if (it == values_.end()) throw ContractError("unknown config key '" + key + "'");
    it->second = trim(value);
}

void RunConfig::parse(std::istream& is, const std::string& source)
{
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ContractError(source + ":" + std::to_string(lineno) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        if (!has_key(key)) throw ContractError(source + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
        set(key, line.substr(eq + 1));
    }
}

void RunConfig::load_file(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path.string());
    parse(is, path.string());
}

const std::string& RunConfig::get(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end()) throw ContractError("unknown config key '" + key + "'");
    return it->second;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const
{
    const auto& v = get(key);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ContractError("config key '" + key + "' needs a non-negative integer, got '" + v + "'");
    return out;
}

std::size_t RunConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

double RunConfig::get_double(const std::string& key) const
{
    const auto& v = get(key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ContractError("config key '" + key + "' needs a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const
{
    const auto& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ContractError("config key '" + key + "' needs true or false, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::get_sizes(const std::string& key) const
{
    std::vector<std::size_t> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
            throw ContractError("config key '" + key + "' needs a comma-separated integer list, got '" + get(key) + "'");
        out.push_back(n);
    }
    return out;
}

void RunConfig::write(std::ostream& os) const
{
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
}

void RunConfig::write_file(const std::filesystem::path& path) const
{
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    write(os);
}

ModelConfig RunConfig::model_config() const
{
    ModelConfig cfg;
    cfg.backbone.stage_channels = get_sizes("model.stage_channels");
    cfg.backbone.blocks_per_stage = get_size("model.blocks_per_stage");
    cfg.backbone.input_channels = get_size("data.slices");
    if (cfg.backbone.stage_channels.empty()) throw ContractError("model.stage_channels is empty");
    cfg.attention.d_model = cfg.backbone.stage_channels.back();
    cfg.attention.heads = get_size("model.heads");
    const auto& scaling = get("model.scaling");
    if (scaling == "per_head") cfg.attention.scaling = AttentionScaling::per_head;
    else if (scaling == "whole_model") cfg.attention.scaling = AttentionScaling::whole_model;
    else throw ContractError("model.scaling must be per_head or whole_model, got '" + scaling + "'");
    cfg.blocks = get_size("model.blocks");
    const auto& mode = get("model.mode");
    if (mode == "glt") cfg.mode = ModelMode::full;
    else if (mode == "local_only") cfg.mode = ModelMode::local_only;
    else throw ContractError("model.mode must be glt or local_only, got '" + mode + "'");
    cfg.global_grad_through_blocks = get_bool("model.global_grad");
    cfg.validate();
    return cfg;
}

SizeGrid RunConfig::size_grid() const
{
    return {get_size("patch.grid_min"), get_size("patch.grid_max"), get_size("patch.grid_step")};
}

TrainConfig RunConfig::train_config() const
{
    TrainConfig cfg;
    cfg.epochs = get_size("train.epochs");
    cfg.batch_size = get_size("train.batch_size");
    cfg.schedule = {get_double("train.lr"), get_size("train.decay_period"), get_double("train.decay_factor")};
    const auto& policy = get("train.policy");
    if (policy == "single_size") cfg.policy = PatchPolicy::single_size;
    else if (policy == "multi_size") cfg.policy = PatchPolicy::multi_size;
    else throw ContractError("train.policy must be single_size or multi_size, got '" + policy + "'");
    cfg.patch_size = get_size("train.patch_size");
    cfg.patches_per_subject = get_size("train.patches_per_subject");
    cfg.grid = size_grid();
    cfg.normalize_targets = get_bool("train.normalize_targets");
    cfg.seed = get_u64("seed");
    cfg.validate();
    return cfg;
}

SyntheticSpec RunConfig::synthetic_spec() const
{
    SyntheticSpec spec;
    spec.subjects = get_size("data.subjects");
    spec.age_min = get_double("data.age_min");
    spec.age_max = get_double("data.age_max");
    spec.x = get_size("data.x");
    spec.y = get_size("data.y");
    spec.z = get_size("data.z");
    const auto rect = get_sizes("data.rect");
    if (rect.size() != 4) throw ContractError("data.rect needs row,col,height,width");
    spec.rect = {rect[0], rect[1], rect[2], rect[3]};
    spec.noise = get_double("data.noise");
    spec.seed = get_u64("seed");
    spec.validate();
    return spec;
}

InferenceMode RunConfig::inference_mode() const
{
    const auto& m = get("eval.mode");
    if (m == "single_size") return InferenceMode::single_size;
    if (m == "multi_size") return InferenceMode::multi_size;
    throw ContractError("eval.mode must be single_size or multi_size, got '" + m + "'");
}

std::vector<Plane> RunConfig::planes() const
{
    const auto& p = get("train.plane");
    if (p == "all") return {kPlanes.begin(), kPlanes.end()};
    return {parse_plane(p)};
}

} // namespace glt
