#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "glt/checkpoint.hpp"
#include "glt/config.hpp"
#include "glt/error.hpp"
#include "glt/gradcheck_suite.hpp"
#include "glt/interpretation.hpp"
#include "glt/metrics.hpp"
#include "glt/patches.hpp"
#include "glt/tensor_io.hpp"

namespace glt::cli {

namespace fs = std::filesystem;

namespace {

// Raised for bad command-line input that only shows up after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* kResolvedConfig = "config.resolved.txt";

std::ofstream open_out(const fs::path& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    return os;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, sep)) out.push_back(f);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double to_double(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw FormatError("bad number '" + s + "' in " + what);
}

std::size_t to_size(const std::string& s, const std::string& what)
{
    const double v = to_double(s, what);
    if (v < 0 || v != std::floor(v)) throw FormatError("bad index '" + s + "' in " + what);
    return static_cast<std::size_t>(v);
}

void make_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Options shared by every subcommand that reads a run configuration.
struct Common {
    std::string config_file;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;

    void add(CLI::App* cmd)
    {
        cmd->add_option("--config", config_file, "key = value run configuration file");
        cmd->add_option("--set", sets, "override one config key (key=value), repeatable");
        seed_opt = cmd->add_option("--seed", seed, "random seed");
    }

    // defaults < base file < --config < specific flags < --set
    RunConfig resolve(const std::optional<fs::path>& base, const std::function<void(RunConfig&)>& flags) const
    {
        RunConfig cfg;
        if (base && fs::exists(*base)) cfg.load_file(*base);
        if (!config_file.empty()) cfg.load_file(config_file);
        if (seed_opt && seed_opt->count()) cfg.set("seed", std::to_string(seed));
        if (flags) flags(cfg);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        return cfg;
    }
};

template <class T>
void set_if(RunConfig& cfg, CLI::Option* opt, const std::string& key, const T& value)
{
    if (!opt->count()) return;
    std::ostringstream os;
    os.precision(17);
    os << value;
    cfg.set(key, os.str());
}

fs::path slice_path(const std::string& id, Plane p) { return fs::path("slices") / (id + "_" + plane_name(p) + ".glt"); }

// ---------------------------------------------------------------- synth

struct SynthArgs {
    Common common;
    std::string out = "cohort";
    std::size_t n = 0;
    double noise = 0;
    std::size_t size = 0;
    CLI::Option *n_opt = nullptr, *noise_opt = nullptr, *size_opt = nullptr, *out_opt = nullptr;
};

int cmd_synth(const SynthArgs& a, std::ostream& out)
{
    auto cfg = a.common.resolve(std::nullopt, [&](RunConfig& c) {
        set_if(c, a.n_opt, "data.subjects", a.n);
        set_if(c, a.noise_opt, "data.noise", a.noise);
        if (a.size_opt->count()) {
            for (auto key : {"data.x", "data.y", "data.z"}) c.set(key, std::to_string(a.size));
            const auto r = SyntheticSpec::default_rect(a.size, a.size);
            c.set("data.rect", std::to_string(r.row) + "," + std::to_string(r.col) + "," + std::to_string(r.height) +
                                   "," + std::to_string(r.width));
        }
    });
    if (cfg.get_size("data.subjects") == 0) throw UsageError("--n must be at least 1");
    const auto spec = cfg.synthetic_spec();
    const auto slices = cfg.get_size("data.slices");
    if (slices == 0 || slices > std::min({spec.x, spec.y, spec.z})) throw UsageError("data.slices does not fit the volume");

    const fs::path dir = a.out;
    make_dir(dir / "volumes");
    make_dir(dir / "slices");
    std::vector<CohortEntry> entries;
    for_each_synthetic(spec, [&](const SyntheticSubject& s) {
        save_volume(s.volume, dir / "volumes" / (s.id + ".glt"));
        CohortEntry e{s.id, s.age, {}};
        for (auto p : kPlanes) {
            const auto rel = slice_path(s.id, p);
            save_tensor(extract_slices(s.volume, p, slices), dir / rel);
            e.paths[static_cast<std::size_t>(p)] = rel;
        }
        entries.push_back(std::move(e));
    });
    write_cohort_manifest(entries, dir / "cohort.csv");
    cfg.set("paths.cohort", (dir / "cohort.csv").generic_string());
    cfg.write_file(dir / kResolvedConfig);
    out << "wrote " << entries.size() << " subjects to " << (dir / "cohort.csv").string() << '\n';
    return kSuccess;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    Common common;
    std::string cohort, out, mode, plane, policy;
    std::size_t epochs = 0, fold = 0, folds = 0, patch_size = 0, batch_size = 0, patches = 0;
    double lr = 0;
    CLI::Option *cohort_opt, *out_opt, *mode_opt, *plane_opt, *policy_opt, *epochs_opt, *fold_opt, *folds_opt,
        *patch_opt, *batch_opt, *patches_opt, *lr_opt;
};

std::vector<std::size_t> fold_of(const std::vector<SubjectRecord>& cohort, const RunConfig& cfg)
{
    const auto folds = cfg.get_size("train.folds");
    if (folds <= 1) return std::vector<std::size_t>(cohort.size(), 0);
    return kfold_assignment(cohort.size(), folds, cfg.get_u64("seed"));
}

bool is_training(std::size_t subject_fold, const RunConfig& cfg)
{
    return cfg.get_size("train.folds") <= 1 || subject_fold != cfg.get_size("train.fold");
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err)
{
    auto cfg = a.common.resolve(std::nullopt, [&](RunConfig& c) {
        set_if(c, a.cohort_opt, "paths.cohort", a.cohort);
        set_if(c, a.out_opt, "paths.model_dir", a.out);
        set_if(c, a.mode_opt, "model.mode", a.mode);
        set_if(c, a.plane_opt, "train.plane", a.plane);
        set_if(c, a.policy_opt, "train.policy", a.policy);
        set_if(c, a.epochs_opt, "train.epochs", a.epochs);
        set_if(c, a.fold_opt, "train.fold", a.fold);
        set_if(c, a.folds_opt, "train.folds", a.folds);
        set_if(c, a.patch_opt, "train.patch_size", a.patch_size);
        set_if(c, a.batch_opt, "train.batch_size", a.batch_size);
        set_if(c, a.patches_opt, "train.patches_per_subject", a.patches);
        set_if(c, a.lr_opt, "train.lr", a.lr);
    });
    const auto model_cfg = cfg.model_config();
    const auto train_cfg = cfg.train_config();
    const auto planes = cfg.planes();
    const auto folds = cfg.get_size("train.folds");
    if (folds > 1 && cfg.get_size("train.fold") >= folds) throw UsageError("train.fold must be below train.folds");

    const fs::path manifest = cfg.get("paths.cohort");
    if (!fs::exists(manifest)) throw IoError("cohort manifest " + manifest.string() + " not found; run `glt synth` first");
    const auto cohort = load_cohort(manifest);
    if (cohort.empty()) throw UsageError("cohort " + manifest.string() + " is empty");
    const auto fold = fold_of(cohort, cfg);

    const fs::path dir = cfg.get("paths.model_dir");
    make_dir(dir);
    cfg.write_file(dir / kResolvedConfig);
    {
        auto os = open_out(dir / "split.csv");
        os << "id,fold,role\n";
        for (std::size_t i = 0; i < cohort.size(); ++i)
            os << cohort[i].id << ',' << fold[i] << ',' << (is_training(fold[i], cfg) ? "train" : "holdout") << '\n';
    }

    for (auto plane : planes) {
        std::vector<TrainSample> data;
        for (std::size_t i = 0; i < cohort.size(); ++i)
            if (is_training(fold[i], cfg)) data.push_back({cohort[i].plane(plane), cohort[i].age});
        GltModel model(model_cfg, cfg.get_u64("seed"));
        err << "training " << plane_name(plane) << " model on " << data.size() << " subjects\n";
        auto result = train(model, data, train_cfg, [&](std::size_t epoch, double loss) {
            err << "  epoch " << epoch << " loss " << loss << '\n';
        });
        const auto stem = dir / (std::string("model_") + plane_name(plane));
        save_checkpoint(model.state(), stem);
        auto os = open_out(dir / (std::string("loss_") + plane_name(plane) + ".csv"));
        write_loss_csv(os, result.curve);
        out.precision(17);
        out << plane_name(plane) << " final_loss " << result.final_loss << '\n';
    }
    return kSuccess;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    Common common;
    std::string model_dir, cohort, out, mode;
    std::size_t patch_size = 0, samples = 0;
    bool all = false;
    CLI::Option *model_opt, *cohort_opt, *out_opt, *mode_opt, *patch_opt, *samples_opt;
};

std::map<std::string, std::size_t> read_split(const fs::path& path)
{
    std::map<std::string, std::size_t> out;
    std::ifstream is(path);
    if (!is) return out;
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
        auto f = split(line, ',');
        if (f.size() < 2) throw FormatError("bad row in " + path.string() + ": " + line);
        out[f[0]] = to_size(f[1], path.string());
    }
    return out;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    const fs::path model_dir = a.model_opt->count() ? fs::path(a.model_dir) : fs::path(RunConfig().get("paths.model_dir"));
    auto cfg = a.common.resolve(model_dir / kResolvedConfig, [&](RunConfig& c) {
        c.set("paths.model_dir", model_dir.string());
        set_if(c, a.cohort_opt, "paths.cohort", a.cohort);
        set_if(c, a.out_opt, "paths.out", a.out);
        set_if(c, a.mode_opt, "eval.mode", a.mode);
        set_if(c, a.patch_opt, "eval.patch_size", a.patch_size);
        set_if(c, a.samples_opt, "eval.samples", a.samples);
    });
    const auto model_cfg = cfg.model_config();
    const auto mode = cfg.inference_mode();
    const auto grid = cfg.size_grid();
    const auto batch = cfg.get_size("eval.batch");

    std::vector<Plane> planes;
    for (auto p : kPlanes)
        if (fs::exists(model_dir / (std::string("model_") + plane_name(p) + ".manifest"))) planes.push_back(p);
    if (planes.empty()) throw IoError("no checkpoints in " + model_dir.string() + "; run `glt train` first");

    const fs::path manifest = cfg.get("paths.cohort");
    if (!fs::exists(manifest)) throw IoError("cohort manifest " + manifest.string() + " not found");
    const auto cohort = load_cohort(manifest);

    std::vector<std::size_t> selected;
    if (a.all || cfg.get_size("train.folds") <= 1) {
        for (std::size_t i = 0; i < cohort.size(); ++i) selected.push_back(i);
    } else {
        auto split_map = read_split(model_dir / "split.csv");
        const auto fold = fold_of(cohort, cfg);
        for (std::size_t i = 0; i < cohort.size(); ++i) {
            auto it = split_map.find(cohort[i].id);
            const auto f = it != split_map.end() ? it->second : fold[i];
            if (!is_training(f, cfg)) selected.push_back(i);
        }
    }
    if (selected.empty()) throw UsageError("no held-out subjects to evaluate");

    const fs::path dir = cfg.get("paths.out");
    make_dir(dir);
    cfg.write_file(dir / kResolvedConfig);
    auto patches_os = open_out(dir / "patches.csv");
    write_patch_csv_header(patches_os);
    auto subjects_os = open_out(dir / "subjects.csv");
    subjects_os.precision(17);
    subjects_os << "id,age,plane,height,width,mean,sigma\n";

    std::vector<double> targets;
    for (auto i : selected) targets.push_back(cohort[i].age);
    std::map<Plane, std::vector<double>> per_plane;
    for (auto plane : planes) {
        GltModel model(model_cfg, cfg.get_u64("seed"));
        load_checkpoint_into(model.state(), model_dir / (std::string("model_") + plane_name(plane)));
        model.set_mode(Mode::eval);
        err << "evaluating " << plane_name(plane) << " on " << selected.size() << " subjects\n";
        auto& preds = per_plane[plane];
        for (auto i : selected) {
            const auto& rec = cohort[i];
            const auto& image = rec.plane(plane);
            const auto est =
                mode == InferenceMode::single_size
                    ? infer_single_size(model, image, cfg.get_size("eval.patch_size"), batch)
                    : infer_multi_size(model, image, cfg.get_size("eval.samples"), cfg.get_u64("seed") + i, grid, batch);
            preds.push_back(est.mean);
            write_patch_csv(patches_os, rec.id, plane_name(plane), est);
            subjects_os << rec.id << ',' << rec.age << ',' << plane_name(plane) << ',' << image.dim(1) << ','
                        << image.dim(2) << ',' << est.mean << ',' << est.stddev << '\n';
        }
    }

    auto csv = open_out(dir / "report.csv");
    auto table = open_out(dir / "report.txt");
    csv << "label,metric,value\n";
    for (auto plane : planes) {
        const auto report = evaluate(per_plane[plane], targets);
        write_report_csv(csv, report, plane_name(plane));
        write_report_table(table, report, plane_name(plane));
        write_report_table(out, report, plane_name(plane));
    }
    if (planes.size() == kPlanes.size()) {
        std::vector<double> fused;
        for (std::size_t k = 0; k < selected.size(); ++k) {
            const double y = fuse_planes(per_plane[Plane::axial][k], per_plane[Plane::coronal][k],
                                         per_plane[Plane::sagittal][k]);
            fused.push_back(y);
            subjects_os << cohort[selected[k]].id << ',' << targets[k] << ",fused,,," << y << ",\n";
        }
        const auto report = evaluate(fused, targets);
        write_report_csv(csv, report, "fused");
        write_report_table(table, report, "fused");
        write_report_table(out, report, "fused");
    }
    return kSuccess;
}

// ---------------------------------------------------------------- heatmap

struct HeatmapArgs {
    Common common;
    std::string eval_dir, out;
    double bin_years = 0;
    CLI::Option *eval_opt, *out_opt, *bin_opt;
};

struct SubjectRow {
    std::string id;
    std::string plane;
    double age = 0;
    std::size_t height = 0, width = 0;
    double sigma = 0;
};

int cmd_heatmap(const HeatmapArgs& a, std::ostream& out, std::ostream& err)
{
    const fs::path eval_dir = a.eval_opt->count() ? fs::path(a.eval_dir) : fs::path(RunConfig().get("paths.out"));
    const auto patches_path = eval_dir / "patches.csv";
    const auto subjects_path = eval_dir / "subjects.csv";
    if (!fs::exists(patches_path) || !fs::exists(subjects_path))
        throw UsageError("no per-patch predictions in " + eval_dir.string() +
                         "; run `glt eval` (preferably with --mode multi_size) first");
    auto cfg = a.common.resolve(eval_dir / kResolvedConfig, [&](RunConfig& c) {
        if (a.out_opt->count()) c.set("paths.out", a.out);
        else c.set("paths.out", (eval_dir / "heatmaps").string());
        set_if(c, a.bin_opt, "heatmap.bin_years", a.bin_years);
    });
    const double bin = cfg.get_double("heatmap.bin_years");
    if (!(bin > 0)) throw UsageError("heatmap.bin_years must be positive");
    const auto per_size = cfg.get_size("heatmap.per_size");
    const auto window = cfg.get_size("heatmap.sigma_window");

    // (id, plane) -> subject row
    std::map<std::pair<std::string, std::string>, SubjectRow> subjects;
    {
        std::ifstream is(subjects_path);
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) {
            auto f = split(line, ',');
            if (f.size() != 7) throw FormatError("bad row in " + subjects_path.string() + ": " + line);
            if (f[2] == "fused") continue;
            SubjectRow r{f[0], f[2], to_double(f[1], "subjects.csv"), to_size(f[3], "subjects.csv"),
                         to_size(f[4], "subjects.csv"), to_double(f[6], "subjects.csv")};
            subjects[{r.id, r.plane}] = r;
        }
    }
    std::map<std::pair<std::string, std::string>, std::vector<PatchError>> errors;
    {
        std::ifstream is(patches_path);
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line)) {
            auto f = split(line, ',');
            if (f.size() != 6) throw FormatError("bad row in " + patches_path.string() + ": " + line);
            auto it = subjects.find({f[0], f[1]});
            if (it == subjects.end()) throw FormatError("patch row for unknown subject " + f[0] + " / " + f[1]);
            PatchSpec p{to_size(f[2], "patches.csv"), to_size(f[3], "patches.csv"), to_size(f[4], "patches.csv")};
            errors[{f[0], f[1]}].push_back({p, std::fabs(to_double(f[5], "patches.csv") - it->second.age)});
        }
    }
    if (errors.empty()) throw UsageError("patches.csv in " + eval_dir.string() + " holds no predictions; run `glt eval` first");

    const fs::path dir = cfg.get("paths.out");
    make_dir(dir / "subject");
    make_dir(dir / "group");
    cfg.write_file(dir / kResolvedConfig);

    auto write_map = [&](const Heatmap& map, const fs::path& stem) {
        auto pgm = open_out(fs::path(stem).concat(".pgm"));
        write_pgm(pgm, map);
        auto csv = open_out(fs::path(stem).concat(".csv"));
        write_heatmap_csv(csv, map);
    };

    std::map<std::string, std::vector<SubjectPatchErrors>> by_plane;
    std::map<std::string, std::vector<std::pair<double, double>>> sigma;
    std::map<std::string, std::pair<std::size_t, std::size_t>> dims;
    for (const auto& [key, list] : errors) {
        const auto& row = subjects.at(key);
        write_map(subject_heatmap(row.height, row.width, list, per_size), dir / "subject" / (key.first + "_" + key.second));
        by_plane[key.second].push_back({row.age, list});
        sigma[key.second].emplace_back(row.age, row.sigma);
        dims[key.second] = {row.height, row.width};
    }
    std::size_t groups = 0;
    for (const auto& [plane, list] : by_plane) {
        double max_age = 0;
        for (const auto& s : list) max_age = std::max(max_age, s.age);
        for (double lo = 0; lo <= max_age; lo += bin) {
            const auto [h, w] = dims[plane];
            auto map = group_heatmap(h, w, list, lo, lo + bin, per_size);
            std::ostringstream name;
            name << plane << '_' << lo << '-' << lo + bin;
            if (!map) {
                err << "warning: no subjects in age bin [" << lo << ", " << lo + bin << ") for " << plane
                    << "; no group heatmap written\n";
                continue;
            }
            write_map(*map, dir / "group" / name.str());
            ++groups;
        }
        auto os = open_out(dir / ("sigma_" + plane + ".csv"));
        write_sigma_csv(os, sigma_distribution(sigma[plane], window));
    }
    out << "wrote " << errors.size() << " subject heatmaps and " << groups << " group heatmaps to " << dir.string()
        << '\n';
    return kSuccess;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
    Common common;
    bool inject_fault = false;
    double layer_tol = 1e-4, model_tol = 1e-3;
    std::string out;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out)
{
    auto cfg = a.common.resolve(std::nullopt, {});
    SuiteOptions options;
    options.seed = cfg.get_u64("seed");
    options.inject_fault = a.inject_fault;
    options.layer_tolerance = a.layer_tol;
    options.model_tolerance = a.model_tol;
    const auto checks = run_gradcheck_suite(options);

    std::ostringstream report;
    report.precision(3);
    report << std::scientific;
    bool ok = true;
    for (const auto& c : checks) {
        ok = ok && c.passed();
        report << (c.passed() ? "PASS " : "FAIL ") << c.name << " max_rel_err " << c.report.max_relative_error
               << " tol " << c.tolerance << " skipped_nonsmooth " << c.report.skipped_nonsmooth << '/'
               << c.report.coordinates << '\n';
        for (const auto& [name, e] : c.report.per_parameter_errors) report << "    " << name << ' ' << e << '\n';
        for (const auto& name : c.report.non_finite) report << "    non-finite gradient in " << name << '\n';
    }
    report << (ok ? "gradcheck passed\n" : "gradcheck FAILED\n");
    out << report.str();
    if (!a.out.empty()) {
        make_dir(a.out);
        cfg.write_file(fs::path(a.out) / kResolvedConfig);
        auto os = open_out(fs::path(a.out) / "gradcheck.txt");
        os << report.str();
    }
    return ok ? kSuccess : kNumerical;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Global-local transformer for patch-based age regression"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic cohort (volumes, slice stacks, manifest)");
    synth.common.add(s);
    synth.out_opt = s->add_option("--out", synth.out, "output directory")->capture_default_str();
    synth.n_opt = s->add_option("--n", synth.n, "number of subjects");
    synth.noise_opt = s->add_option("--noise", synth.noise, "nuisance level");
    synth.size_opt = s->add_option("--size", synth.size, "cubic volume side length");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "train one model per plane and write checkpoints and loss curves");
    tr.common.add(t);
    tr.cohort_opt = t->add_option("--cohort", tr.cohort, "cohort manifest CSV");
    tr.out_opt = t->add_option("--out", tr.out, "model directory");
    tr.mode_opt = t->add_option("--mode", tr.mode, "glt or local_only");
    tr.plane_opt = t->add_option("--plane", tr.plane, "axial, coronal, sagittal or all");
    tr.policy_opt = t->add_option("--policy", tr.policy, "single_size or multi_size");
    tr.epochs_opt = t->add_option("--epochs", tr.epochs, "training epochs");
    tr.fold_opt = t->add_option("--fold", tr.fold, "held-out fold index");
    tr.folds_opt = t->add_option("--folds", tr.folds, "number of folds (1 trains on everything)");
    tr.patch_opt = t->add_option("--patch-size", tr.patch_size, "single-size training patch side");
    tr.batch_opt = t->add_option("--batch-size", tr.batch_size, "subjects per step");
    tr.patches_opt = t->add_option("--patches", tr.patches, "patches per subject per step");
    tr.lr_opt = t->add_option("--lr", tr.lr, "initial learning rate");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "evaluate checkpoints on the held-out fold");
    ev.common.add(e);
    ev.model_opt = e->add_option("--model-dir", ev.model_dir, "directory written by train");
    ev.cohort_opt = e->add_option("--cohort", ev.cohort, "cohort manifest CSV");
    ev.out_opt = e->add_option("--out", ev.out, "report directory");
    ev.mode_opt = e->add_option("--mode", ev.mode, "single_size or multi_size");
    ev.patch_opt = e->add_option("--patch-size", ev.patch_size, "sliding-window patch side");
    ev.samples_opt = e->add_option("--samples", ev.samples, "multi-size patches per image");
    e->add_flag("--all", ev.all, "evaluate every subject instead of the held-out fold");

    HeatmapArgs hm;
    auto* h = app.add_subcommand("heatmap", "subject and group heatmaps and the sigma-by-age curve");
    hm.common.add(h);
    hm.eval_opt = h->add_option("--eval-dir", hm.eval_dir, "directory written by eval");
    hm.out_opt = h->add_option("--out", hm.out, "output directory (default <eval-dir>/heatmaps)");
    hm.bin_opt = h->add_option("--bin-years", hm.bin_years, "group age-bin width");

    GradcheckArgs gc;
    auto* g = app.add_subcommand("gradcheck", "finite-difference check of every layer type and a toy model");
    gc.common.add(g);
    g->add_flag("--inject-fault", gc.inject_fault, "use a deliberately wrong gradient in the linear check");
    g->add_option("--layer-tol", gc.layer_tol, "tolerance for single layers")->capture_default_str();
    g->add_option("--model-tol", gc.model_tol, "tolerance for blocks, backbone and model")->capture_default_str();
    g->add_option("--out", gc.out, "directory for the report and resolved config");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(rev);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    try {
        if (*s) return cmd_synth(synth, out);
        if (*t) return cmd_train(tr, out, err);
        if (*e) return cmd_eval(ev, out, err);
        if (*h) return cmd_heatmap(hm, out, err);
        if (*g) return cmd_gradcheck(gc, out);
    } catch (const UsageError& ex) {
        err << "usage error: " << ex.what() << '\n';
        return kUsage;
    } catch (const ContractError& ex) {
        err << "usage error: " << ex.what() << '\n';
        return kUsage;
    } catch (const DimensionError& ex) {
        err << "usage error: " << ex.what() << '\n';
        return kUsage;
    } catch (const FormatError& ex) {
        err << "format error: " << ex.what() << '\n';
        return kIo;
    } catch (const IoError& ex) {
        err << "i/o error: " << ex.what() << '\n';
        return kIo;
    } catch (const NumericalError& ex) {
        err << "numerical error: " << ex.what() << '\n';
        return kNumerical;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

} // namespace glt::cli
