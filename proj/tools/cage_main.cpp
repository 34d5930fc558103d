// Command-line front end: generate / train / explain / verify / compare.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cage/report.hpp"

namespace {

std::vector<int> parse_layers(const std::string& spec) {
    if (spec == "adni") return {64, 128, 128, 64, 32};  // bundled deep preset
    std::vector<int> layers;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) layers.push_back(std::stoi(item));
    if (layers.empty()) throw CLI::ValidationError("--mlp-layers", "no layer widths given");
    return layers;
}

std::vector<std::string> parse_methods(const std::string& spec) {
    std::vector<std::string> methods;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) methods.push_back(item);
    return methods;
}

void add_common_flags(CLI::App* cmd, cage::RunConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "master random seed");
    cmd->add_option("--out", cfg.out_dir, "output directory (default $CAGE_OUT_DIR or ./cage_out)");
}

void add_data_flags(CLI::App* cmd, cage::RunConfig& cfg) {
    cmd->add_option("--dataset", cfg.dataset, "bundled dataset: direct_cause|markovian|mixed");
    cmd->add_option("--csv", cfg.csv_path, "CSV file with a header row");
    cmd->add_option("--target", cfg.target, "target column name (CSV)");
    cmd->add_option("--n-train", cfg.n_train, "training rows (synthetic)");
    cmd->add_option("--n-explain", cfg.n_explain, "explanation rows (synthetic)");
    cmd->add_option("--train-frac", cfg.train_fraction, "training fraction (CSV split)");
    cmd->add_flag("--normalize", cfg.normalize, "z-score features with training statistics");
}

void add_model_flags(CLI::App* cmd, cage::RunConfig& cfg, std::string& layer_spec) {
    cmd->add_option("--model", cfg.model, "model kind: linear|mlp");
    cmd->add_option("--mlp-layers", layer_spec, "hidden widths, e.g. 100 or 64,128 or 'adni'");
    cmd->add_option("--epochs", cfg.epochs, "mlp training epochs");
    cmd->add_option("--lr", cfg.learning_rate, "mlp learning rate");
    cmd->add_option("--batch-size", cfg.batch_size, "mlp minibatch size");
    cmd->add_option("--loss", cfg.loss, "loss: mse|bce");
    cmd->add_option("--load-model", cfg.load_model, "load a saved model instead of fitting");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causality-aware global Shapley feature importance (CAGE) toolkit"};
    app.require_subcommand(1);

    cage::RunConfig cfg;
    std::string layer_spec;
    std::string method_spec;

    CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset to disk");
    add_data_flags(generate, cfg);
    add_common_flags(generate, cfg);

    CLI::App* train = app.add_subcommand("train", "fit a model and save it");
    add_data_flags(train, cfg);
    add_model_flags(train, cfg, layer_spec);
    train->add_option("--save-model", cfg.save_model, "model output path");
    add_common_flags(train, cfg);

    CLI::App* explain = app.add_subcommand("explain", "compute global importance values");
    add_data_flags(explain, cfg);
    add_model_flags(explain, cfg, layer_spec);
    explain->add_option("--method", method_spec, "methods, comma separated: cage,sage");
    explain->add_option("--chain-graph", cfg.chain_graph, "chain graph config path");
    explain->add_option("--N,--outer", cfg.outer_samples, "outer permutation samples");
    explain->add_option("--M,--inner", cfg.inner_samples, "inner completion samples");
    explain->add_option("--workers", cfg.workers, "parallel workers");
    explain->add_option("--sampler", cfg.sampler, "out-coalition sampler: exact|gibbs");
    explain->add_option("--gibbs-burnin", cfg.gibbs_burnin, "gibbs burn-in sweeps");
    explain->add_option("--gibbs-thinning", cfg.gibbs_thinning, "gibbs thinning sweeps");
    explain->add_option("--ridge", cfg.ridge, "covariance ridge for the fitted joint");
    explain->add_option("--target-stderr", cfg.target_stderr,
                        "stop early when all stderrs fall below this");
    explain->add_flag("--oracle", cfg.oracle, "also run exact subset enumeration (<= 20 features)");
    explain->add_option("--save-model", cfg.save_model, "model output path");
    add_common_flags(explain, cfg);

    CLI::App* verify = app.add_subcommand("verify", "run the causal-soundness property suite");
    verify->add_option("--suite", cfg.suite, "all|p1|p2|p3|p4");
    verify->add_option("--N,--outer", cfg.outer_samples, "outer permutation samples");
    verify->add_option("--M,--inner", cfg.inner_samples, "inner completion samples");
    verify->add_option("--n-train", cfg.n_train, "training rows per dataset");
    verify->add_option("--n-explain", cfg.n_explain, "explanation rows per dataset");
    verify->add_option("--workers", cfg.workers, "parallel workers");
    verify->add_option("--sampler", cfg.sampler, "out-coalition sampler: exact|gibbs");
    add_common_flags(verify, cfg);

    CLI::App* compare = app.add_subcommand("compare", "diff two stored reports");
    compare->add_option("report_a", cfg.report_a, "first report.json")->required();
    compare->add_option("report_b", cfg.report_b, "second report.json")->required();
    add_common_flags(compare, cfg);

    // verify defaults to the heavier sample count its checks are tuned for
    verify->parse_complete_callback([&] {
        if (verify->count("--N") == 0) cfg.outer_samples = 4000;
    });

    CLI11_PARSE(app, argc, argv);

    try {
        if (!layer_spec.empty()) cfg.mlp_layers = parse_layers(layer_spec);
        if (!method_spec.empty()) cfg.methods = parse_methods(method_spec);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (generate->parsed()) cfg.subcommand = "generate";
    if (train->parsed()) cfg.subcommand = "train";
    if (explain->parsed()) cfg.subcommand = "explain";
    if (verify->parsed()) cfg.subcommand = "verify";
    if (compare->parsed()) cfg.subcommand = "compare";

    return cage::run_command(cfg, std::cout, std::cerr);
}
