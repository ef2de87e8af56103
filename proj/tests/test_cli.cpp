#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "glt/metrics.hpp"

namespace fs = std::filesystem;
using glt::cli::run;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result glt_cmd(std::vector<std::string> args)
{
    args.insert(args.begin(), "glt");
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

fs::path fresh_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p)
{
    std::ifstream is(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        rows.push_back(fields);
    }
    return rows;
}

const std::vector<std::string> kTiny{"--set", "model.stage_channels=4,8", "--set", "model.blocks_per_stage=1",
                                     "--set", "model.heads=2",            "--set", "model.blocks=1"};

std::vector<std::string> with_tiny(std::vector<std::string> args)
{
    args.insert(args.end(), kTiny.begin(), kTiny.end());
    return args;
}

} // namespace

TEST_CASE("synth is byte-identical for a fixed seed")
{
    const auto a = fresh_dir("glt_cli_synth_a"), b = fresh_dir("glt_cli_synth_b");
    REQUIRE(glt_cmd({"synth", "--out", a.string(), "--n", "3", "--size", "16", "--seed", "4"}).code == 0);
    REQUIRE(glt_cmd({"synth", "--out", b.string(), "--n", "3", "--size", "16", "--seed", "4"}).code == 0);
    CHECK(slurp(a / "cohort.csv") == slurp(b / "cohort.csv"));
    CHECK(slurp(a / "volumes" / "sub0002.glt") == slurp(b / "volumes" / "sub0002.glt"));
    CHECK(slurp(a / "slices" / "sub0001_coronal.glt") == slurp(b / "slices" / "sub0001_coronal.glt"));
    CHECK(fs::exists(a / "config.resolved.txt"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("usage errors exit 1 and write nothing")
{
    const auto dir = fresh_dir("glt_cli_usage");
    auto r = glt_cmd({"synth", "--out", dir.string(), "--n", "0"});
    CHECK(r.code == 1);
    CHECK_FALSE(fs::exists(dir));
    CHECK(glt_cmd({"train", "--set", "model.depth=3"}).code == 1);
    CHECK(glt_cmd({"frobnicate"}).code == 1);
    r = glt_cmd({"heatmap", "--eval-dir", dir.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("glt eval") != std::string::npos);
}

TEST_CASE("missing cohort is an I/O error")
{
    CHECK(glt_cmd({"train", "--cohort", "/nonexistent/cohort.csv", "--out", fresh_dir("glt_cli_io").string()}).code == 2);
}

TEST_CASE("gradcheck exits non-zero when a fault is injected")
{
    auto ok = glt_cmd({"gradcheck"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("gradcheck passed") != std::string::npos);
    auto bad = glt_cmd({"gradcheck", "--inject-fault"});
    CHECK(bad.code == 3);
    CHECK(bad.out.find("FAIL linear") != std::string::npos);
}

TEST_CASE("synth, train, eval and heatmap end to end")
{
    const auto root = fresh_dir("glt_cli_e2e");
    const auto cohort = root / "cohort", run_dir = root / "run", eval_dir = root / "eval";
    REQUIRE(glt_cmd({"synth", "--out", cohort.string(), "--n", "10", "--size", "32"}).code == 0);

    SUBCASE("local_only checkpoint carries no attention parameters")
    {
        auto r = glt_cmd(with_tiny({"train", "--cohort", (cohort / "cohort.csv").string(), "--out",
                                    (root / "local").string(), "--mode", "local_only", "--plane", "axial",
                                    "--epochs", "1", "--patch-size", "16", "--batch-size", "4"}));
        REQUIRE(r.code == 0);
        const auto manifest = slurp(root / "local" / "model_axial.manifest");
        CHECK(manifest.find("local_backbone") != std::string::npos);
        CHECK(manifest.find("attention") == std::string::npos);
    }

    SUBCASE("full model over all planes")
    {
        auto r = glt_cmd(with_tiny({"train", "--cohort", (cohort / "cohort.csv").string(), "--out", run_dir.string(),
                                    "--epochs", "1", "--patch-size", "16", "--batch-size", "4"}));
        REQUIRE(r.code == 0);
        CHECK(r.out.find("sagittal final_loss") != std::string::npos);
        for (const char* f : {"split.csv", "model_axial.bin", "loss_coronal.csv", "config.resolved.txt"})
            CHECK(fs::exists(run_dir / f));
        CHECK(slurp(run_dir / "model_axial.manifest").find("attention") != std::string::npos);

        r = glt_cmd({"eval", "--model-dir", run_dir.string(), "--cohort", (cohort / "cohort.csv").string(), "--out",
                     eval_dir.string(), "--patch-size", "16"});
        REQUIRE(r.code == 0);

        // The reported MAE matches the per-subject fused predictions.
        std::vector<double> pred, target;
        for (const auto& row : csv_rows(eval_dir / "subjects.csv"))
            if (row.size() >= 6 && row[2] == "fused") {
                target.push_back(std::stod(row[1]));
                pred.push_back(std::stod(row[5]));
            }
        REQUIRE(pred.size() == 2); // one held-out fold of 10
        double reported = -1;
        for (const auto& row : csv_rows(eval_dir / "report.csv"))
            if (row.size() == 3 && row[0] == "fused" && row[1] == "mae") reported = std::stod(row[2]);
        CHECK(reported == doctest::Approx(glt::mae(pred, target)).epsilon(1e-12));

        r = glt_cmd({"heatmap", "--eval-dir", eval_dir.string(), "--bin-years", "50"});
        REQUIRE(r.code == 0);
        CHECK(fs::exists(eval_dir / "heatmaps" / "sigma_axial.csv"));
        CHECK(!fs::is_empty(eval_dir / "heatmaps" / "subject"));
    }
    fs::remove_all(root);
}
