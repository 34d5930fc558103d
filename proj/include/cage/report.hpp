#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cage/shapley.hpp"

namespace cage {

// Full pipeline configuration; mirrors the CLI flag set and round-trips
// through the JSON echoed into every report.
struct RunConfig {
    std::string subcommand;  // generate|train|explain|verify|compare

    // dataset source: a bundled synthetic kind, or a CSV path plus target
    std::string dataset;
    std::string csv_path;
    std::string target = "Y";
    long n_train = 10000;
    long n_explain = 10000;
    double train_fraction = 0.75;
    bool normalize = false;

    // model
    std::string model = "linear";  // linear|mlp
    std::vector<int> mlp_layers{100};
    long epochs = 200;
    double learning_rate = 1e-3;
    int batch_size = 32;
    std::string loss = "mse";
    std::string load_model;
    std::string save_model;

    // explanation
    std::vector<std::string> methods{"cage", "sage"};
    std::string chain_graph;  // config path; empty selects the bundled graph
    long outer_samples = 2000;
    long inner_samples = 64;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string sampler = "exact";
    long gibbs_burnin = 100;
    long gibbs_thinning = 5;
    double ridge = 1e-6;
    double target_stderr = 0.0;
    bool oracle = false;  // additionally run the exact enumerator (d <= 20)

    // verify / compare
    std::string suite = "all";
    std::string report_a;
    std::string report_b;

    std::string out_dir;  // empty: $CAGE_OUT_DIR, then ./cage_out

    bool operator==(const RunConfig&) const = default;

    // Rejects inconsistent configurations before any computation runs.
    void validate() const;
    std::string to_json_string() const;
    static RunConfig from_json_string(const std::string& text);
    std::string resolved_out_dir() const;
};

struct Report {
    RunConfig config;
    std::vector<ExplanationResult> results;         // permutation estimates per method
    std::vector<ExplanationResult> oracle_results;  // exact enumeration, when requested
    std::vector<std::pair<std::string, std::string>> cache_exports;  // (method, csv text)
    PropertyReport properties;
    std::vector<std::pair<std::string, double>> timings_ms;
    std::string data_load_report;  // CSV ingestion summary, when a CSV was read
};

// Executes the configured pipeline; log receives one line per stage.
Report run_pipeline(const RunConfig& config, std::ostream& log);

// Writes report.json, per-feature and trace CSVs, and the SVG chart into
// dir; each file lands via temp-file-plus-rename.
void emit_report(const Report& report, const std::string& dir);

Report load_report(const std::string& path);

// Feature-by-feature diff of two stored reports; returns the text table
// and optionally writes compare.csv to out_dir.
std::string compare_reports(const Report& a, const Report& b, const std::string& out_dir = "");

// Shared number formatting (17 significant digits) so the human-readable
// tables and the CSVs carry identical text.
std::string format_double(double v);

// Renders the per-feature phi bars (one series per method) as standalone SVG.
std::string render_svg_chart(const Report& report);

// Runs a parsed config end to end: pipeline, emission, console summary.
// Returns the process exit code (0 success, 2 failed verify checks).
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace cage
