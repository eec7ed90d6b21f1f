// recol: batch CLI over the library. Subcommands: synth, run, grid, report.
// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "recol/recol.hpp"

namespace {

recol::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) recol::fail(recol::ErrorKind::io, "cannot open '" + path + "'");
    recol::json j;
    try {
        in >> j;
    } catch (const recol::json::exception& e) {
        recol::fail(recol::ErrorKind::parse, "'" + path + "': " + e.what());
    }
    return j;
}

struct SynthArgs {
    std::string out;
    std::size_t n = 1000;
    double slope = 1.0;
    double intercept = 0.0;
    double noise = 0.01;
    double outlier_fraction = 0.05;
    double outlier_offset = 3.0;
    std::uint64_t seed = 42;
};

int cmd_synth(const SynthArgs& a) {
    const recol::Table t = recol::generate_synthetic_linear(
        a.n, a.slope, a.intercept, a.noise, a.outlier_fraction, a.outlier_offset, a.seed);
    recol::write_csv(t, a.out, "label");
    return 0;
}

struct RunArgs {
    std::string data;
    std::string label_column = "label";
    std::string name;
    std::string config;
    std::string out;
};

int cmd_run(const RunArgs& a) {
    recol::DatasetRef dataset{a.data, a.label_column, a.name};
    const auto cfg = recol::parse_experiment_config(load_json_file(a.config), dataset);
    const auto result = recol::run_experiment(cfg);
    recol::append_result(result, a.out);
    std::cout << recol::to_json(result).dump() << '\n';
    return 0;
}

struct GridArgs {
    std::string data;
    std::string label_column = "label";
    std::string name;
    std::string grid;
    std::string out;
    int parallelism = 0;  // 0: RECOL_PARALLELISM env or 1
};

int cmd_grid(const GridArgs& a) {
    const recol::DatasetRef dataset{a.data, a.label_column, a.name};
    const auto grid = recol::parse_grid_spec(load_json_file(a.grid));
    auto configs = recol::expand_grid(grid, dataset);
    const std::size_t total = configs.size();

    // resumability: drop configs whose hash is already in the output file.
    // An interrupt can leave a truncated final line; such lines are removed
    // (their configs re-run) so the file stays valid JSONL.
    std::size_t already = 0;
    if (std::ifstream probe(a.out); probe.good()) {
        std::unordered_set<std::string> done;
        std::vector<std::string> valid_lines;
        std::string line;
        bool dropped_garbage = false;
        while (std::getline(probe, line)) {
            if (line.empty()) continue;
            try {
                done.insert(recol::result_from_json(recol::json::parse(line)).config_hash);
                valid_lines.push_back(line);
            } catch (const std::exception&) {
                dropped_garbage = true;
            }
        }
        probe.close();
        if (dropped_garbage) {
            std::cerr << "note: dropping malformed line(s) from " << a.out << '\n';
            std::ofstream rewrite(a.out, std::ios::trunc);
            for (const auto& l : valid_lines) rewrite << l << '\n';
        }
        std::erase_if(configs, [&](const recol::ExperimentConfig& c) {
            return done.count(recol::config_hash(c)) > 0;
        });
        already = total - configs.size();
    }

    int parallelism = a.parallelism;
    if (parallelism <= 0) {
        const char* env = std::getenv("RECOL_PARALLELISM");
        parallelism = env ? std::max(1, std::atoi(env)) : 1;
    }
    std::cout << "grid: " << total << " configurations (" << already << " already in " << a.out
              << ", " << configs.size() << " to run, parallelism " << parallelism << ")\n";
    if (configs.empty()) return 0;

    const recol::Table data = recol::load_csv(a.data, a.label_column);

    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    std::vector<std::string> failures;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= configs.size()) return;
            try {
                const auto result = recol::run_experiment(configs[i], data);
                const std::lock_guard<std::mutex> lock(io_mutex);
                recol::append_result(result, a.out);
            } catch (const std::exception& e) {
                const std::lock_guard<std::mutex> lock(io_mutex);
                failures.push_back(recol::config_hash(configs[i]) + ": " + e.what());
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(parallelism, static_cast<int>(configs.size())); ++t)
        pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (!failures.empty()) {
        std::cerr << failures.size() << " configuration(s) failed:\n";
        for (const auto& f : failures) std::cerr << "  " << f << '\n';
        return 2;
    }
    return 0;
}

struct ReportArgs {
    std::string results;
    std::string metric = "roc_auc";
    std::string style = "best-vs-best";
    std::string csv;
};

int cmd_report(const ReportArgs& a) {
    const auto results = recol::load_results(a.results);
    if (results.empty())
        recol::fail(recol::ErrorKind::invalid_argument, "'" + a.results + "' holds no results");
    const auto metric = recol::parse_metric(a.metric);
    if (!metric)
        recol::fail(recol::ErrorKind::invalid_argument, "unknown metric '" + a.metric + "'");
    const auto style = recol::parse_report_style(a.style);
    if (!style) recol::fail(recol::ErrorKind::invalid_argument, "unknown style '" + a.style + "'");

    const auto table = recol::make_report(results, *metric, *style);
    std::cout << recol::render_text(table);
    if (!a.csv.empty()) recol::write_csv(table, a.csv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RECol: reconstruction-error columns for outlier detection"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic linear-band dataset as CSV");
    s->add_option("--out", synth.out, "output CSV path")->required();
    s->add_option("--n", synth.n, "number of rows");
    s->add_option("--slope", synth.slope, "slope of the linear relation");
    s->add_option("--intercept", synth.intercept, "intercept of the linear relation");
    s->add_option("--noise", synth.noise, "inlier residual sigma");
    s->add_option("--outlier-fraction", synth.outlier_fraction, "fraction of outlier rows, in (0, 0.5)");
    s->add_option("--outlier-offset", synth.outlier_offset, "minimum outlier residual, in sigmas");
    s->add_option("--seed", synth.seed, "generator seed");

    RunArgs run;
    auto* r = app.add_subcommand("run", "run one experiment config and append a JSON-line result");
    r->add_option("--data", run.data, "dataset CSV path")->required();
    r->add_option("--label-column", run.label_column, "label column name");
    r->add_option("--name", run.name, "dataset name override (defaults to the file stem)");
    r->add_option("--config", run.config, "experiment config JSON path")->required();
    r->add_option("--out", run.out, "results JSONL path")->required();

    GridArgs grid;
    auto* g = app.add_subcommand("grid", "run a config grid (cross-product), resumable");
    g->add_option("--data", grid.data, "dataset CSV path")->required();
    g->add_option("--label-column", grid.label_column, "label column name");
    g->add_option("--name", grid.name, "dataset name override");
    g->add_option("--grid", grid.grid, "grid spec JSON path")->required();
    g->add_option("--out", grid.out, "results JSONL path")->required();
    g->add_option("--parallelism", grid.parallelism,
                  "concurrent experiments (default: RECOL_PARALLELISM or 1)");

    ReportArgs report;
    auto* p = app.add_subcommand("report", "render a comparison table from results");
    p->add_option("--results", report.results, "results JSONL path")->required();
    p->add_option("--metric", report.metric, "roc_auc or pr_auc");
    p->add_option("--style", report.style,
                  "best-vs-best, recol-od-vs-avg, or combined-vs-recol-only");
    p->add_option("--csv", report.csv, "also write the table as CSV to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*r) return cmd_run(run);
        if (*g) return cmd_grid(grid);
        if (*p) return cmd_report(report);
    } catch (const recol::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        const bool usage = e.kind() == recol::ErrorKind::invalid_argument ||
                           e.kind() == recol::ErrorKind::schema;
        return usage ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
