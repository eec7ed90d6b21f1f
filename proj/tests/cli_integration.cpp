// Integration checks that drive the real CLI binary end to end.
// Usage: cli_integration <path-to-recol-binary> <source-dir>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "proc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int checks = 0, failures = 0;

void check(bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
        ++failures;
        std::cerr << "FAIL: " << what << '\n';
    }
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: cli_integration <recol-binary> <source-dir>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path source_dir = argv[2];
    const fs::path work = fs::temp_directory_path() / "recol_cli_it";
    fs::remove_all(work);
    fs::create_directories(work);

    const fs::path data = work / "data.csv";

    // --- synth ---------------------------------------------------------------
    {
        auto r = proc::run(cli + " synth --out " + q(data) + " --n 1000 --outlier-fraction 0.05 --seed 3");
        check(r.exit_code == 0, "synth exits 0");
        const auto lines = read_lines(data.string());
        check(lines.size() == 1001, "synth writes n data rows plus header");
        check(lines.at(0) == "x,y,label", "synth header is x,y,label");
        int ones = 0;
        for (std::size_t i = 1; i < lines.size(); ++i)
            if (lines[i].size() >= 2 && lines[i].back() == '1') ++ones;
        check(ones == 50, "synth labels exactly 5% of rows as outliers");
    }
    {
        auto r = proc::run(cli + " synth --out " + q(work / "bad.csv") + " --outlier-fraction 0.9 2>&1");
        check(r.exit_code == 1, "synth with invalid fraction exits 1");
        check(r.output.find("outlier_fraction") != std::string::npos,
              "synth error message mentions the offending argument");
    }

    // --- run -----------------------------------------------------------------
    const fs::path cfg_path = work / "config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({"split":{"train_fraction":0.7,"seed":1},
                   "scorer":{"kind":"kth_nn","k":10},
                   "recol":{"feature_mode":"original_only"}})";
    }
    const fs::path out = work / "results.jsonl";
    {
        auto r = proc::run(cli + " run --data " + q(data) + " --config " + q(cfg_path) + " --out " + q(out));
        check(r.exit_code == 0, "run exits 0");
        const auto lines = read_lines(out.string());
        check(lines.size() == 1, "run appends one JSON line");
        const auto j = json::parse(lines.at(0));
        for (const char* key : {"train_roc_auc", "test_roc_auc", "train_pr_auc", "test_pr_auc"})
            check(j.contains(key) && j[key].is_number(), std::string("result has ") + key);
    }
    {
        // rerun: appended line's metric fields are byte-identical
        proc::run(cli + " run --data " + q(data) + " --config " + q(cfg_path) + " --out " + q(out));
        const auto lines = read_lines(out.string());
        check(lines.size() == 2, "rerun appends a second line");
        const auto a = json::parse(lines.at(0)), b = json::parse(lines.at(1));
        for (const char* key : {"train_roc_auc", "test_roc_auc", "train_pr_auc", "test_pr_auc"})
            check(a[key].dump() == b[key].dump(), std::string("rerun metric field stable: ") + key);
    }
    {
        std::ofstream cfg(work / "bad_config.json");
        cfg << R"({"scorer":{"kind":"ocsvm"}})";
        cfg.close();
        auto r = proc::run(cli + " run --data " + q(data) + " --config " + q(work / "bad_config.json") +
                           " --out " + q(out) + " 2>&1");
        check(r.exit_code == 1, "unknown scorer exits 1");
        check(r.output.find("scorer.kind") != std::string::npos, "schema error names the field path");
    }
    {
        auto r = proc::run(cli + " run --data " + q(work / "missing.csv") + " --config " + q(cfg_path) +
                           " --out " + q(out) + " 2>&1");
        check(r.exit_code == 2, "missing data file exits 2");
    }

    // --- grid ----------------------------------------------------------------
    const fs::path grid_path = work / "grid.json";
    {
        std::ofstream grid(grid_path);
        grid << R"({"split":{"train_fraction":0.7,"seeds":[1,2]},
                    "scorers":[{"kind":"kth_nn","k":10},{"kind":"hbos"}],
                    "recol":{"regressors":[{"kind":"linear"}],
                             "feature_modes":["combined"]}})";
    }
    const fs::path gout = work / "grid_results.jsonl";
    {
        auto r = proc::run(cli + " grid --data " + q(data) + " --grid " + q(grid_path) + " --out " + q(gout));
        check(r.exit_code == 0, "grid exits 0");
        check(r.output.find("4 configurations") != std::string::npos,
              "grid prints the configuration count before running");
        check(read_lines(gout.string()).size() == 4, "2x2 grid writes 4 result lines");
    }
    {
        // resume after a simulated interrupt: drop the last two lines, rerun
        auto lines = read_lines(gout.string());
        std::ofstream trunc(gout, std::ios::trunc);
        trunc << lines.at(0) << '\n' << lines.at(1) << '\n';
        trunc.close();
        auto r = proc::run(cli + " grid --data " + q(data) + " --grid " + q(grid_path) + " --out " + q(gout));
        check(r.exit_code == 0, "grid resume exits 0");
        lines = read_lines(gout.string());
        check(lines.size() == 4, "resume completes the remaining configs");
        std::set<std::string> hashes;
        for (const auto& l : lines) hashes.insert(json::parse(l)["config_hash"].get<std::string>());
        check(hashes.size() == 4, "no duplicate config hashes after resume");
        auto r2 = proc::run(cli + " grid --data " + q(data) + " --grid " + q(grid_path) + " --out " + q(gout));
        check(read_lines(gout.string()).size() == 4, "a fully-done grid adds nothing");
        check(r2.output.find("0 to run") != std::string::npos, "grid reports nothing left to run");
    }
    {
        // a kill mid-write can truncate the last line; resume must self-heal
        std::ofstream(gout, std::ios::app) << "{\"config_hash\":\"deadbeef\",\"trunc";
        auto r = proc::run(cli + " grid --data " + q(data) + " --grid " + q(grid_path) + " --out " + q(gout) + " 2>&1");
        check(r.exit_code == 0, "grid self-heals a truncated results file");
        const auto lines = read_lines(gout.string());
        check(lines.size() == 4, "truncated garbage removed, all configs present");
        for (const auto& l : lines) check(json::parse(l).contains("config_hash"), "healed file is valid JSONL");
    }

    // --- report ----------------------------------------------------------------
    {
        // build a results file with baseline + combined + recol-od rows
        const fs::path rgrid = work / "rgrid.json";
        std::ofstream g(rgrid);
        g << R"({"split":{"train_fraction":0.7,"seeds":[1]},
                 "scorers":[{"kind":"kth_nn","k":10},{"kind":"recol-od"}],
                 "recol":{"regressors":[{"kind":"linear"}],
                          "feature_modes":["original_only","recol_only","combined"]}})";
        g.close();
        const fs::path rout = work / "report_results.jsonl";
        proc::run(cli + " grid --data " + q(data) + " --grid " + q(rgrid) + " --out " + q(rout));

        auto best = proc::run(cli + " report --results " + q(rout) + " --style best-vs-best --csv " +
                              q(work / "report.csv"));
        check(best.exit_code == 0, "report best-vs-best exits 0");
        check(best.output.find("Dataset") != std::string::npos &&
                  best.output.find("Baseline") != std::string::npos &&
                  best.output.find("RECols") != std::string::npos &&
                  best.output.find("Delta") != std::string::npos,
              "best-vs-best columns match the published layout");
        check(read_lines((work / "report.csv").string()).size() == 2, "report CSV has header + row");

        auto avg = proc::run(cli + " report --results " + q(rout) + " --style recol-od-vs-avg");
        check(avg.exit_code == 0, "report recol-od-vs-avg exits 0");
        check(avg.output.find("Delta to Best") != std::string::npos &&
                  avg.output.find("Delta to Avg.") != std::string::npos,
              "recol-od-vs-avg includes both delta columns");

        auto cvr = proc::run(cli + " report --results " + q(rout) + " --style combined-vs-recol-only");
        check(cvr.exit_code == 0, "report combined-vs-recol-only exits 0");

        auto missing = proc::run(cli + " report --results " + q(work / "empty.jsonl") + " 2>&1");
        check(missing.exit_code != 0, "report on a missing results file fails");
        std::ofstream(work / "empty.jsonl").close();
        auto empty = proc::run(cli + " report --results " + q(work / "empty.jsonl") + " 2>&1");
        check(empty.exit_code == 1, "report on an empty results file exits 1");
    }

    // --- usage errors ----------------------------------------------------------
    {
        auto r = proc::run(cli + " frobnicate 2>&1");
        check(r.exit_code == 1, "unknown subcommand exits 1");
        auto h = proc::run(cli + " --help");
        check(h.exit_code == 0, "--help exits 0");
    }

    std::cout << (failures == 0 ? "OK" : "FAILED") << ": " << (checks - failures) << "/" << checks
              << " CLI checks passed\n";
    return failures == 0 ? 0 : 1;
}
