#include "cage/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cage/dataset.hpp"
#include "cage/error.hpp"

namespace cage {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// RunConfig.

namespace {

const std::vector<std::string> kSubcommands = {"generate", "train", "explain", "verify",
                                               "compare"};

bool is_synthetic(const std::string& dataset) {
    return dataset == "direct_cause" || dataset == "markovian" || dataset == "mixed";
}

}  // namespace

void RunConfig::validate() const {
    if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end())
        throw Error("config: unknown subcommand '" + subcommand + "'");
    if (subcommand == "compare") {
        if (report_a.empty() || report_b.empty())
            throw Error("config: compare needs two report paths");
        return;
    }
    if (subcommand == "verify") {
        if (outer_samples < 1 || inner_samples < 1)
            throw Error("config: sample counts must be >= 1");
        return;
    }

    const bool synthetic = !dataset.empty();
    const bool csv = !csv_path.empty();
    if (synthetic == csv)
        throw Error("config: pick exactly one data source (--dataset or --csv)");
    if (synthetic && !is_synthetic(dataset))
        throw Error("config: unknown dataset '" + dataset +
                    "' (expected direct_cause|markovian|mixed)");
    if (n_train < 2) throw Error("config: n-train must be >= 2");
    if (n_explain < 1) throw Error("config: n-explain must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw Error("config: train fraction must be in (0, 1]");

    if (model != "linear" && model != "mlp")
        throw Error("config: unknown model '" + model + "' (expected linear|mlp)");
    loss_kind_from_string(loss);
    if (loss == "bce" && model == "linear" && load_model.empty())
        throw Error("config: bce loss needs an mlp (or a loaded logistic model)");
    if (epochs < 1 || batch_size < 1) throw Error("config: epochs and batch size must be >= 1");
    for (int w : mlp_layers)
        if (w < 1) throw Error("config: mlp layer widths must be >= 1");

    if (subcommand == "explain") {
        if (methods.empty()) throw Error("config: no methods selected");
        bool wants_cage = false;
        for (const auto& m : methods) {
            method_from_string(m);
            wants_cage = wants_cage || m == "cage";
        }
        if (wants_cage && csv && chain_graph.empty())
            throw Error("config: cage on a CSV dataset requires --chain-graph");
        if (outer_samples < 1 || inner_samples < 1)
            throw Error("config: sample counts must be >= 1");
        if (workers < 1) throw Error("config: workers must be >= 1");
        sampler_mode_from_string(sampler);
        if (gibbs_burnin < 0 || gibbs_thinning < 1)
            throw Error("config: invalid gibbs parameters");
        if (ridge < 0.0) throw Error("config: ridge must be >= 0");
        if (target_stderr < 0.0) throw Error("config: target stderr must be >= 0");
    }
}

std::string RunConfig::resolved_out_dir() const {
    if (!out_dir.empty()) return out_dir;
    if (const char* env = std::getenv("CAGE_OUT_DIR"); env && *env) return env;
    return "cage_out";
}

namespace {

json config_to_json(const RunConfig& c) {
    return json{{"subcommand", c.subcommand},
                {"dataset", c.dataset},
                {"csv_path", c.csv_path},
                {"target", c.target},
                {"n_train", c.n_train},
                {"n_explain", c.n_explain},
                {"train_fraction", c.train_fraction},
                {"normalize", c.normalize},
                {"model", c.model},
                {"mlp_layers", c.mlp_layers},
                {"epochs", c.epochs},
                {"learning_rate", c.learning_rate},
                {"batch_size", c.batch_size},
                {"loss", c.loss},
                {"load_model", c.load_model},
                {"save_model", c.save_model},
                {"methods", c.methods},
                {"chain_graph", c.chain_graph},
                {"outer_samples", c.outer_samples},
                {"inner_samples", c.inner_samples},
                {"seed", c.seed},
                {"workers", c.workers},
                {"sampler", c.sampler},
                {"gibbs_burnin", c.gibbs_burnin},
                {"gibbs_thinning", c.gibbs_thinning},
                {"ridge", c.ridge},
                {"target_stderr", c.target_stderr},
                {"oracle", c.oracle},
                {"suite", c.suite},
                {"report_a", c.report_a},
                {"report_b", c.report_b},
                {"out_dir", c.out_dir}};
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    j.at("subcommand").get_to(c.subcommand);
    j.at("dataset").get_to(c.dataset);
    j.at("csv_path").get_to(c.csv_path);
    j.at("target").get_to(c.target);
    j.at("n_train").get_to(c.n_train);
    j.at("n_explain").get_to(c.n_explain);
    j.at("train_fraction").get_to(c.train_fraction);
    j.at("normalize").get_to(c.normalize);
    j.at("model").get_to(c.model);
    j.at("mlp_layers").get_to(c.mlp_layers);
    j.at("epochs").get_to(c.epochs);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("batch_size").get_to(c.batch_size);
    j.at("loss").get_to(c.loss);
    j.at("load_model").get_to(c.load_model);
    j.at("save_model").get_to(c.save_model);
    j.at("methods").get_to(c.methods);
    j.at("chain_graph").get_to(c.chain_graph);
    j.at("outer_samples").get_to(c.outer_samples);
    j.at("inner_samples").get_to(c.inner_samples);
    c.seed = j.at("seed").get<std::uint64_t>();
    j.at("workers").get_to(c.workers);
    j.at("sampler").get_to(c.sampler);
    j.at("gibbs_burnin").get_to(c.gibbs_burnin);
    j.at("gibbs_thinning").get_to(c.gibbs_thinning);
    j.at("ridge").get_to(c.ridge);
    j.at("target_stderr").get_to(c.target_stderr);
    j.at("oracle").get_to(c.oracle);
    j.at("suite").get_to(c.suite);
    j.at("report_a").get_to(c.report_a);
    j.at("report_b").get_to(c.report_b);
    j.at("out_dir").get_to(c.out_dir);
    return c;
}

json result_to_json(const ExplanationResult& r) {
    json trace = json::array();
    for (const auto& tp : r.trace) {
        json phi = json::array();
        for (Eigen::Index i = 0; i < tp.phi.size(); ++i) phi.push_back(tp.phi(i));
        trace.push_back(json{{"iteration", tp.iteration}, {"phi", phi}});
    }
    json phi = json::array(), se = json::array();
    for (Eigen::Index i = 0; i < r.phi.size(); ++i) phi.push_back(r.phi(i));
    for (Eigen::Index i = 0; i < r.std_error.size(); ++i) se.push_back(r.std_error(i));
    return json{{"method", to_string(r.method)},
                {"features", r.features},
                {"phi", phi},
                {"stderr", se},
                {"outer_samples", r.outer_samples},
                {"inner_samples", r.inner_samples},
                {"seed", r.seed},
                {"oracle", r.oracle},
                {"value_empty", r.value_empty},
                {"value_full", r.value_full},
                {"trace", trace}};
}

ExplanationResult result_from_json(const json& j) {
    ExplanationResult r;
    r.method = method_from_string(j.at("method").get<std::string>());
    j.at("features").get_to(r.features);
    auto to_vec = [](const json& arr) {
        Eigen::VectorXd v(arr.size());
        for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = arr[i];
        return v;
    };
    r.phi = to_vec(j.at("phi"));
    r.std_error = to_vec(j.at("stderr"));
    j.at("outer_samples").get_to(r.outer_samples);
    j.at("inner_samples").get_to(r.inner_samples);
    r.seed = j.at("seed").get<std::uint64_t>();
    j.at("oracle").get_to(r.oracle);
    j.at("value_empty").get_to(r.value_empty);
    j.at("value_full").get_to(r.value_full);
    for (const auto& tp : j.at("trace"))
        r.trace.push_back({tp.at("iteration").get<long>(), to_vec(tp.at("phi"))});
    return r;
}

json property_to_json(const PropertyCheck& c) {
    return json{{"id", c.id},           {"description", c.description}, {"pass", c.pass},
                {"measured", c.measured}, {"threshold", c.threshold},     {"note", c.note}};
}

PropertyCheck property_from_json(const json& j) {
    PropertyCheck c;
    j.at("id").get_to(c.id);
    j.at("description").get_to(c.description);
    j.at("pass").get_to(c.pass);
    j.at("measured").get_to(c.measured);
    j.at("threshold").get_to(c.threshold);
    j.at("note").get_to(c.note);
    return c;
}

}  // namespace

std::string RunConfig::to_json_string() const { return config_to_json(*this).dump(2); }

RunConfig RunConfig::from_json_string(const std::string& text) {
    return config_from_json(json::parse(text));
}

// ---------------------------------------------------------------------------
// Pipeline.

namespace {

struct StageTimer {
    Report& report;
    std::string name;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    StageTimer(Report& r, std::string n) : report(r), name(std::move(n)) {}
    ~StageTimer() {
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start)
                        .count();
        report.timings_ms.emplace_back(name, ms);
    }
};

struct PipelineState {
    Dataset train;
    Dataset explain;
    std::optional<LinearScm> scm;
    std::optional<ChainGraph> chain;
    std::optional<Predictor> model;
    std::optional<GaussianModel> joint;
    std::string load_report;
};

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
    throw Error(stage + ": " + e.what());
}

void prepare_data(const RunConfig& cfg, PipelineState& state, std::ostream& log) {
    try {
        if (!cfg.dataset.empty()) {
            SyntheticKind kind = synthetic_kind_from_string(cfg.dataset);
            SyntheticBundle bundle =
                generate_synthetic(kind, cfg.n_train + cfg.n_explain, cfg.seed);
            Dataset& all = bundle.data;
            state.train.features.columns = all.features.columns;
            state.train.features.values = all.features.values.topRows(cfg.n_train);
            state.train.target = all.target.head(cfg.n_train);
            state.train.target_name = all.target_name;
            state.explain.features.columns = all.features.columns;
            state.explain.features.values = all.features.values.bottomRows(cfg.n_explain);
            state.explain.target = all.target.tail(cfg.n_explain);
            state.explain.target_name = all.target_name;
            state.scm = std::move(bundle.scm);
            state.chain = std::move(bundle.chain);
            log << "data: " << cfg.dataset << ", " << cfg.n_train << " train + " << cfg.n_explain
                << " explanation rows\n";
        } else {
            CsvLoadReport csv_report;
            Dataset all = load_csv(cfg.csv_path, cfg.target, &csv_report);
            log << "data: " << cfg.csv_path << ", " << csv_report.rows_kept << " rows kept, "
                << csv_report.rows_dropped << " dropped\n";
            std::ostringstream lr;
            lr << "source: " << cfg.csv_path << "\n"
               << "target: " << cfg.target << "\n"
               << "rows kept: " << csv_report.rows_kept << "\n"
               << "rows dropped (missing or unparsable cells): " << csv_report.rows_dropped
               << "\n"
               << "columns:";
            for (const auto& c : csv_report.columns) lr << " " << c;
            lr << "\n";
            state.load_report = lr.str();
            auto split = cfg.normalize ? normalize_split(all, cfg.train_fraction, cfg.seed)
                                       : shuffle_split(all, cfg.train_fraction, cfg.seed);
            state.train = std::move(split.first);
            state.explain = std::move(split.second);
            if (state.explain.rows() == 0) {
                // fraction 1.0: explain on the training rows
                state.explain = state.train;
            }
        }
        if (cfg.normalize && !cfg.dataset.empty())
            normalize_with_train_stats(state.train, state.explain);
        if (!cfg.chain_graph.empty())
            state.chain = ChainGraph::load(cfg.chain_graph, state.explain.feature_names());
    } catch (const Error& e) {
        stage_fail("data", e);
    }
}

void prepare_model(const RunConfig& cfg, PipelineState& state, std::ostream& log) {
    try {
        if (!cfg.load_model.empty()) {
            state.model = Predictor::load(cfg.load_model);
            log << "model: loaded " << cfg.load_model << "\n";
        } else if (cfg.model == "linear") {
            state.model = fit_linear(state.train.with_target(), state.train.target_name);
            log << "model: linear, training mse "
                << format_double(state.model->final_training_loss()) << "\n";
        } else {
            MlpOptions options;
            options.hidden_layers = cfg.mlp_layers;
            options.epochs = cfg.epochs;
            options.learning_rate = cfg.learning_rate;
            options.batch_size = cfg.batch_size;
            options.loss = loss_kind_from_string(cfg.loss);
            state.model =
                fit_mlp(state.train.with_target(), state.train.target_name, options, cfg.seed);
            log << "model: mlp, final training loss "
                << format_double(state.model->final_training_loss()) << "\n";
        }
        if (!cfg.save_model.empty()) {
            state.model->save(cfg.save_model);
            log << "model: saved to " << cfg.save_model << "\n";
        }
    } catch (const Error& e) {
        stage_fail("model", e);
    }
}

void prepare_joint(const RunConfig& cfg, PipelineState& state, std::ostream& log) {
    try {
        state.joint = fit_gaussian(state.train.features, cfg.ridge);
        log << "joint: fitted Gaussian over " << state.joint->dim() << " features\n";
    } catch (const Error& e) {
        stage_fail("joint", e);
    }
}

}  // namespace

Report run_pipeline(const RunConfig& raw_config, std::ostream& log) {
    raw_config.validate();
    RunConfig config = raw_config;
    if (config.subcommand == "train" && config.save_model.empty()) {
        fs::path dir(config.resolved_out_dir());
        std::error_code ec;
        fs::create_directories(dir, ec);
        config.save_model = (dir / "model.txt").string();
    }
    Report report;
    report.config = config;

    if (config.subcommand == "verify") {
        StageTimer timer(report, "verify");
        VerifyConfig vc;
        vc.n_train = config.n_train;
        vc.n_explain = config.n_explain;
        vc.outer_samples = config.outer_samples;
        vc.inner_samples = config.inner_samples;
        vc.seed = config.seed;
        vc.workers = config.workers;
        vc.sampler = sampler_mode_from_string(config.sampler);
        vc.suite = config.suite;
        report.properties = verify_properties(vc);
        return report;
    }

    PipelineState state;
    {
        StageTimer timer(report, "data");
        prepare_data(config, state, log);
        report.data_load_report = state.load_report;
    }

    if (config.subcommand == "generate") {
        StageTimer timer(report, "write");
        fs::path dir(config.resolved_out_dir());
        std::error_code ec;
        fs::create_directories(dir, ec);
        Dataset all;
        all.features.columns = state.train.features.columns;
        all.features.values.resize(state.train.rows() + state.explain.rows(),
                                   state.train.features.cols());
        all.features.values << state.train.features.values, state.explain.features.values;
        all.target.resize(state.train.rows() + state.explain.rows());
        all.target << state.train.target, state.explain.target;
        all.target_name = state.train.target_name;
        std::string base = config.dataset.empty() ? "dataset" : config.dataset;
        write_csv(all, (dir / (base + ".csv")).string());
        if (state.scm) {
            std::ofstream out(dir / (base + ".scm"));
            state.scm->write_definition(out);
        }
        if (state.chain) {
            std::ofstream out(dir / (base + ".chain"));
            state.chain->write_definition(out);
        }
        log << "generate: wrote " << (dir / (base + ".csv")).string() << "\n";
        return report;
    }

    {
        StageTimer timer(report, "model");
        prepare_model(config, state, log);
    }
    if (config.subcommand == "train") return report;

    bool wants_cage = std::find(config.methods.begin(), config.methods.end(), "cage") !=
                      config.methods.end();
    if (wants_cage) {
        StageTimer timer(report, "joint");
        prepare_joint(config, state, log);
        if (!state.chain) stage_fail("joint", Error("cage requires a chain graph"));
    }

    for (const auto& method_name : config.methods) {
        StageTimer timer(report, "explain-" + method_name);
        Method method = method_from_string(method_name);
        ExplainProblem problem;
        problem.features = &state.explain.features;
        problem.target = &state.explain.target;
        problem.model = &*state.model;
        problem.loss = loss_kind_from_string(config.loss);
        problem.method = method;
        problem.sampler = sampler_mode_from_string(config.sampler);
        problem.gibbs.burn_in = config.gibbs_burnin;
        problem.gibbs.thinning = config.gibbs_thinning;
        if (method == Method::cage) {
            problem.joint = &*state.joint;
            problem.chain = &*state.chain;
        }
        PermutationOptions options;
        options.target_stderr = config.target_stderr;
        try {
            ExplanationResult result =
                estimate_permutation(problem, config.outer_samples, config.inner_samples,
                                     config.seed, config.workers, options);
            log << "explain: " << method_name << " done (" << result.outer_samples
                << " outer samples)\n";
            report.results.push_back(std::move(result));
            if (config.oracle) {
                if (problem.dim() > 20)
                    throw Error("exact oracle capped at 20 features, got " +
                                std::to_string(problem.dim()));
                CoalitionValueCache cache =
                    build_value_cache(problem, config.inner_samples, config.seed);
                report.oracle_results.push_back(exact_enumerate(cache));
                std::ostringstream cache_csv;
                cache.export_csv(cache_csv);
                report.cache_exports.emplace_back(method_name, cache_csv.str());
                log << "explain: " << method_name << " exact enumeration done\n";
            }
        } catch (const Error& e) {
            stage_fail("explain-" + method_name, e);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Emission.

namespace {

void write_file_atomic(const fs::path& dir, const std::string& name, const std::string& content) {
    fs::path tmp = dir / (".tmp-" + name);
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("report: cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error("report: write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, dir / name, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("report: cannot move '" + tmp.string() + "' to '" + (dir / name).string() +
                    "': " + ec.message());
    }
}

json report_to_json(const Report& report) {
    json j;
    j["config"] = config_to_json(report.config);
    j["results"] = json::array();
    for (const auto& r : report.results) j["results"].push_back(result_to_json(r));
    j["oracle_results"] = json::array();
    for (const auto& r : report.oracle_results) j["oracle_results"].push_back(result_to_json(r));
    j["properties"] = json::array();
    for (const auto& c : report.properties.checks) j["properties"].push_back(property_to_json(c));

    json rankings = json::array();
    for (const auto& r : report.results) {
        std::vector<int> order(r.features.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return r.phi(a) > r.phi(b); });
        json entries = json::array();
        for (int idx : order)
            entries.push_back(json{{"feature", r.features[idx]},
                                   {"phi", format_double(r.phi(idx))},
                                   {"stderr", format_double(r.std_error(idx))}});
        rankings.push_back(json{{"method", to_string(r.method)}, {"ranking", entries}});
    }
    j["rankings"] = rankings;

    const ExplanationResult* cage_result = nullptr;
    const ExplanationResult* sage_result = nullptr;
    for (const auto& r : report.results) {
        if (r.method == Method::cage) cage_result = &r;
        if (r.method == Method::sage) sage_result = &r;
    }
    if (cage_result && sage_result && cage_result->features == sage_result->features) {
        json deltas = json::array();
        for (std::size_t i = 0; i < cage_result->features.size(); ++i) {
            auto idx = static_cast<Eigen::Index>(i);
            double se = std::sqrt(cage_result->std_error(idx) * cage_result->std_error(idx) +
                                  sage_result->std_error(idx) * sage_result->std_error(idx));
            deltas.push_back(json{{"feature", cage_result->features[i]},
                                  {"cage_minus_sage", cage_result->phi(idx) - sage_result->phi(idx)},
                                  {"combined_stderr", se}});
        }
        j["cage_vs_sage"] = deltas;
    }

    json timings = json::object();
    for (const auto& [name, ms] : report.timings_ms) timings[name] = ms;
    j["timings_ms"] = timings;
    return j;
}

std::string per_feature_csv(const Report& report) {
    std::ostringstream out;
    out << "feature,method,phi,stderr\n";
    for (const auto& r : report.results)
        for (std::size_t i = 0; i < r.features.size(); ++i) {
            auto idx = static_cast<Eigen::Index>(i);
            out << r.features[i] << "," << to_string(r.method) << ","
                << format_double(r.phi(idx)) << "," << format_double(r.std_error(idx)) << "\n";
        }
    return out.str();
}

std::string trace_csv(const Report& report) {
    std::ostringstream out;
    out << "method,iteration,feature,phi\n";
    for (const auto& r : report.results)
        for (const auto& tp : r.trace)
            for (std::size_t i = 0; i < r.features.size(); ++i)
                out << to_string(r.method) << "," << tp.iteration << "," << r.features[i] << ","
                    << format_double(tp.phi(static_cast<Eigen::Index>(i))) << "\n";
    return out.str();
}

std::string properties_csv(const Report& report) {
    std::ostringstream out;
    out << "id,pass,measured,threshold\n";
    for (const auto& c : report.properties.checks)
        out << c.id << "," << (c.pass ? "pass" : "fail") << "," << format_double(c.measured)
            << "," << format_double(c.threshold) << "\n";
    return out.str();
}

}  // namespace

std::string render_svg_chart(const Report& report) {
    const auto& results = report.results;
    std::ostringstream svg;
    const double width = 720, height = 400;
    const double left = 60, right = 30, top = 40, bottom = 60;
    svg << std::setprecision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    if (results.empty()) {
        svg << "<text x=\"20\" y=\"40\">no results</text>\n</svg>\n";
        return svg.str();
    }

    const auto& features = results[0].features;
    double lo = 0.0, hi = 0.0;
    for (const auto& r : results)
        for (Eigen::Index i = 0; i < r.phi.size(); ++i) {
            lo = std::min(lo, r.phi(i) - 2.0 * r.std_error(i));
            hi = std::max(hi, r.phi(i) + 2.0 * r.std_error(i));
        }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    auto y_of = [&](double v) {
        return top + (hi - v) / (hi - lo) * (height - top - bottom);
    };

    const char* colors[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44"};
    const double group_w = (width - left - right) / static_cast<double>(features.size());
    const double bar_w = group_w / (static_cast<double>(results.size()) + 1.0);

    svg << "<line x1=\"" << left << "\" y1=\"" << y_of(0.0) << "\" x2=\"" << width - right
        << "\" y2=\"" << y_of(0.0) << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    for (std::size_t f = 0; f < features.size(); ++f) {
        double gx = left + group_w * static_cast<double>(f);
        for (std::size_t m = 0; m < results.size(); ++m) {
            const auto& r = results[m];
            auto idx = static_cast<Eigen::Index>(f);
            double v = r.phi(idx);
            double se = r.std_error(idx);
            double x = gx + bar_w * (0.5 + static_cast<double>(m));
            double y0 = y_of(std::max(0.0, v));
            double h = std::abs(y_of(v) - y_of(0.0));
            svg << "<rect x=\"" << x << "\" y=\"" << y0 << "\" width=\"" << bar_w * 0.9
                << "\" height=\"" << h << "\" fill=\"" << colors[m % 4] << "\"/>\n";
            double cx = x + bar_w * 0.45;
            svg << "<line x1=\"" << cx << "\" y1=\"" << y_of(v - se) << "\" x2=\"" << cx
                << "\" y2=\"" << y_of(v + se) << "\" stroke=\"#222\" stroke-width=\"1.5\"/>\n";
        }
        svg << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << height - bottom + 20
            << "\" text-anchor=\"middle\" font-size=\"13\">" << features[f] << "</text>\n";
    }
    for (std::size_t m = 0; m < results.size(); ++m) {
        double lx = left + static_cast<double>(m) * 120.0;
        svg << "<rect x=\"" << lx << "\" y=\"12\" width=\"14\" height=\"14\" fill=\""
            << colors[m % 4] << "\"/>\n";
        svg << "<text x=\"" << lx + 20 << "\" y=\"24\" font-size=\"13\">"
            << to_string(results[m].method) << "</text>\n";
    }
    svg << "<text x=\"" << left << "\" y=\"" << y_of(hi) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << std::setprecision(3) << hi
        << "</text>\n";
    svg << "<text x=\"" << left << "\" y=\"" << y_of(lo) + 4
        << "\" font-size=\"11\" text-anchor=\"end\">" << lo << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void emit_report(const Report& report, const std::string& dir) {
    fs::path path(dir);
    std::error_code ec;
    fs::create_directories(path, ec);
    write_file_atomic(path, "report.json", report_to_json(report).dump(2) + "\n");
    if (!report.results.empty()) {
        write_file_atomic(path, "per_feature.csv", per_feature_csv(report));
        write_file_atomic(path, "trace.csv", trace_csv(report));
        write_file_atomic(path, "chart.svg", render_svg_chart(report));
    }
    if (!report.properties.checks.empty())
        write_file_atomic(path, "properties.csv", properties_csv(report));
    for (const auto& [method, csv] : report.cache_exports)
        write_file_atomic(path, "cache_" + method + ".csv", csv);
    if (!report.data_load_report.empty())
        write_file_atomic(path, "load_report.txt", report.data_load_report);
}

Report load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("report: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error("report: cannot parse '" + path + "': " + e.what());
    }
    Report report;
    report.config = config_from_json(j.at("config"));
    for (const auto& r : j.at("results")) report.results.push_back(result_from_json(r));
    for (const auto& r : j.at("oracle_results"))
        report.oracle_results.push_back(result_from_json(r));
    for (const auto& c : j.at("properties"))
        report.properties.checks.push_back(property_from_json(c));
    return report;
}

std::string compare_reports(const Report& a, const Report& b, const std::string& out_dir) {
    std::ostringstream text, csv;
    csv << "method,feature,phi_a,phi_b,delta\n";
    text << "method   feature        phi_a                  phi_b                  delta\n";
    for (const auto& ra : a.results) {
        const ExplanationResult* rb = nullptr;
        for (const auto& r : b.results)
            if (r.method == ra.method) rb = &r;
        if (!rb) continue;
        for (std::size_t i = 0; i < ra.features.size(); ++i) {
            auto idx = static_cast<Eigen::Index>(i);
            const std::string& feature = ra.features[i];
            int j = -1;
            for (std::size_t k = 0; k < rb->features.size(); ++k)
                if (rb->features[k] == feature) j = static_cast<int>(k);
            if (j < 0) continue;
            double va = ra.phi(idx);
            double vb = rb->phi(j);
            csv << to_string(ra.method) << "," << feature << "," << format_double(va) << ","
                << format_double(vb) << "," << format_double(va - vb) << "\n";
            text << std::left << std::setw(9) << to_string(ra.method) << std::setw(15) << feature
                 << std::setw(23) << format_double(va) << std::setw(23) << format_double(vb)
                 << format_double(va - vb) << "\n";
        }
    }
    if (!out_dir.empty()) {
        fs::path dir(out_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        write_file_atomic(dir, "compare.csv", csv.str());
    }
    return text.str();
}

// ---------------------------------------------------------------------------
// Console entry.

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        config.validate();
        if (config.subcommand == "compare") {
            Report a = load_report(config.report_a);
            Report b = load_report(config.report_b);
            out << compare_reports(a, b, config.resolved_out_dir());
            return 0;
        }

        Report report = run_pipeline(config, out);
        const std::string dir = config.resolved_out_dir();
        if (config.subcommand == "explain" || config.subcommand == "verify") {
            emit_report(report, dir);
            out << "report: " << dir << "/report.json\n";
        }

        if (config.subcommand == "explain") {
            for (const auto& r : report.results) {
                out << "\n" << to_string(r.method) << " ranking (phi +/- stderr):\n";
                std::vector<int> order(r.features.size());
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(),
                          [&](int x, int y) { return r.phi(x) > r.phi(y); });
                for (int idx : order)
                    out << "  " << std::left << std::setw(14) << r.features[idx]
                        << format_double(r.phi(idx)) << " +/- "
                        << format_double(r.std_error(idx)) << "\n";
                out << "  sum(phi) = " << format_double(r.phi_total())
                    << ", v(full)-v(empty) = "
                    << format_double(r.value_full - r.value_empty) << "\n";
            }
        }
        if (config.subcommand == "verify") {
            for (const auto& c : report.properties.checks)
                out << (c.pass ? "[PASS] " : "[FAIL] ") << c.id << ": measured "
                    << format_double(c.measured) << " vs threshold "
                    << format_double(c.threshold) << (c.note.empty() ? "" : " (" + c.note + ")")
                    << "\n";
            if (!report.properties.all_pass()) return 2;
        }
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace cage
