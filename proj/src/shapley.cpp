#include "cage/shapley.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <thread>

#include "cage/dataset.hpp"
#include "cage/error.hpp"
#include "cage/rng.hpp"
#include "cage/scm.hpp"

namespace cage {

std::string to_string(Method m) { return m == Method::cage ? "cage" : "sage"; }

Method method_from_string(const std::string& s) {
    if (s == "cage") return Method::cage;
    if (s == "sage") return Method::sage;
    throw Error("method: unknown '" + s + "' (expected cage|sage)");
}

void ExplainProblem::validate() const {
    if (!features || !target || !model) throw Error("explain: problem is missing data or model");
    if (features->rows() < 1) throw Error("explain: empty data");
    if (features->rows() != target->size())
        throw Error("explain: " + std::to_string(features->rows()) + " feature rows vs " +
                    std::to_string(target->size()) + " targets");
    if (features->columns != model->features())
        throw Error("explain: data columns do not match the model's feature order");
    if (loss == LossKind::bce && model->output_transform() != OutputTransform::logistic)
        throw Error("explain: bce loss requires a model with logistic output");
    if (method == Method::cage) {
        if (!chain) throw Error("explain: cage requires a chain graph");
        if (!joint) throw Error("explain: cage requires a fitted joint Gaussian");
        if (joint->names() != features->columns)
            throw Error("explain: joint Gaussian variables do not match the data columns");
        for (const auto& name : chain->feature_universe())
            if (features->column_index(name) < 0)
                throw Error("explain: chain graph feature '" + name + "' not in the data");
        if (chain->feature_universe().size() != static_cast<std::size_t>(features->cols()))
            throw Error("explain: chain graph does not cover all data columns");
    }
}

namespace {

// Completes out-of-coalition entries for one instance: causal chain-graph
// sampling for cage, independent per-feature resampling from the data's
// empirical marginals for sage. Draw k of a call consumes the (seed, k)
// stream. Not thread-safe; use one per worker.
class CompletionSampler {
public:
    explicit CompletionSampler(const ExplainProblem& problem) : p_(problem) {
        if (p_.method == Method::cage)
            cage_.emplace(*p_.joint, *p_.chain, p_.sampler, p_.gibbs);
    }

    void complete(const Eigen::VectorXd& instance, const std::vector<char>& in_coalition, long m,
                  std::uint64_t seed, Eigen::MatrixXd& out) {
        if (p_.method == Method::cage) {
            cage_->complete(instance, in_coalition, m, seed, out);
            return;
        }
        const int d = p_.dim();
        const auto rows = static_cast<std::uint64_t>(p_.features->rows());
        out.resize(m, d);
        for (long k = 0; k < m; ++k) {
            CounterRng rng(seed, static_cast<std::uint64_t>(k));
            for (int j = 0; j < d; ++j) {
                if (in_coalition[j])
                    out(k, j) = instance(j);
                else
                    out(k, j) = p_.features->values(
                        static_cast<Eigen::Index>(rng.uniform_int(rows)), j);
            }
        }
    }

private:
    const ExplainProblem& p_;
    std::optional<OutCoalitionSampler> cage_;
};

double sample_std_error(const Eigen::VectorXd& samples) {
    const auto n = static_cast<double>(samples.size());
    if (samples.size() < 2) return 0.0;
    double mean = samples.mean();
    double var = (samples.array() - mean).square().sum() / (n - 1.0);
    return std::sqrt(var / n);
}

}  // namespace

ValueEstimate estimate_value_with_error(const ExplainProblem& problem,
                                        const std::vector<char>& in_coalition, long inner_samples,
                                        std::uint64_t seed) {
    problem.validate();
    const int d = problem.dim();
    if (static_cast<int>(in_coalition.size()) != d)
        throw Error("estimate_value: coalition mask size mismatch");
    if (inner_samples < 1) throw Error("estimate_value: inner sample count must be >= 1");
    const Eigen::Index rows = problem.features->rows();
    const int in_count = static_cast<int>(
        std::count_if(in_coalition.begin(), in_coalition.end(), [](char c) { return c != 0; }));

    Eigen::VectorXd losses(rows);
    if (in_count == d) {
        Eigen::VectorXd preds = problem.model->predict_matrix(problem.features->values);
        for (Eigen::Index k = 0; k < rows; ++k)
            losses(k) = loss_pointwise(problem.loss, preds(k), (*problem.target)(k));
    } else if (in_count == 0) {
        double baseline = problem.model->predict_matrix(problem.features->values).mean();
        for (Eigen::Index k = 0; k < rows; ++k)
            losses(k) = loss_pointwise(problem.loss, baseline, (*problem.target)(k));
    } else {
        CompletionSampler sampler(problem);
        Eigen::MatrixXd completed;
        for (Eigen::Index k = 0; k < rows; ++k) {
            sampler.complete(problem.features->values.row(k).transpose(), in_coalition,
                             inner_samples, derive_seed(seed, static_cast<std::uint64_t>(k)),
                             completed);
            double yhat = problem.model->predict_matrix(completed).mean();
            losses(k) = loss_pointwise(problem.loss, yhat, (*problem.target)(k));
        }
    }
    double mean_loss = losses.mean();
    if (!std::isfinite(mean_loss)) throw Error("estimate_value: non-finite loss");
    return ValueEstimate{-mean_loss, sample_std_error(losses)};
}

double estimate_value(const ExplainProblem& problem, const std::vector<std::string>& coalition,
                      long inner_samples, std::uint64_t seed) {
    problem.validate();
    std::vector<char> mask(problem.dim(), 0);
    for (const auto& name : coalition) {
        int idx = problem.features->require_column(name);
        if (mask[idx]) throw Error("estimate_value: duplicate coalition feature '" + name + "'");
        mask[idx] = 1;
    }
    return estimate_value_with_error(problem, mask, inner_samples, seed).value;
}

// ---------------------------------------------------------------------------
// Permutation-sampling estimator.

ExplanationResult estimate_permutation(const ExplainProblem& problem, long outer_samples,
                                       long inner_samples, std::uint64_t seed, int workers,
                                       const PermutationOptions& options) {
    problem.validate();
    if (outer_samples < 1) throw Error("estimate_permutation: outer sample count must be >= 1");
    if (inner_samples < 1) throw Error("estimate_permutation: inner sample count must be >= 1");
    if (workers < 1) throw Error("estimate_permutation: worker count must be >= 1");
    if (options.trace_every < 1) throw Error("estimate_permutation: trace interval must be >= 1");

    const int d = problem.dim();
    const Eigen::Index rows = problem.features->rows();
    const double baseline = problem.model->predict_matrix(problem.features->values).mean();

    // Per-iteration delta vectors; reduction over this matrix is
    // order-insensitive, which is what makes worker count irrelevant.
    Eigen::MatrixXd deltas(outer_samples, d);

    const int n_workers = static_cast<int>(std::min<long>(workers, outer_samples));
    std::vector<CompletionSampler> samplers;
    samplers.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) samplers.emplace_back(problem);

    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto run_iteration = [&](long i, CompletionSampler& sampler, Eigen::MatrixXd& completed,
                             std::vector<int>& perm, std::vector<char>& in_coalition) {
        const std::uint64_t iter_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
        CounterRng rng(iter_seed, 0);
        const auto row = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(rows)));
        const Eigen::VectorXd instance = problem.features->values.row(row).transpose();
        const double y = (*problem.target)(row);

        std::iota(perm.begin(), perm.end(), 0);
        for (int j = d - 1; j > 0; --j)
            std::swap(perm[j], perm[rng.uniform_int(static_cast<std::uint64_t>(j + 1))]);

        std::fill(in_coalition.begin(), in_coalition.end(), 0);
        double loss_prev = loss_pointwise(problem.loss, baseline, y);
        for (int j = 0; j < d; ++j) {
            in_coalition[perm[j]] = 1;
            double yhat;
            if (j == d - 1) {
                yhat = problem.model->predict_row(instance.transpose());
            } else {
                sampler.complete(instance, in_coalition, inner_samples,
                                 derive_seed(iter_seed, static_cast<std::uint64_t>(j) + 1),
                                 completed);
                yhat = problem.model->predict_matrix(completed).mean();
            }
            double loss = loss_pointwise(problem.loss, yhat, y);
            double delta = loss_prev - loss;
            if (!std::isfinite(delta))
                throw Error("estimate_permutation: non-finite loss delta at iteration " +
                            std::to_string(i));
            deltas(i, perm[j]) = delta;
            loss_prev = loss;
        }
    };

    // Standard errors of the first n iterations' deltas.
    auto stderr_prefix = [&](long n) {
        Eigen::VectorXd se(d);
        for (int j = 0; j < d; ++j)
            se(j) = sample_std_error(deltas.col(j).head(n));
        return se;
    };

    long completed_iterations = 0;
    for (long block_start = 0; block_start < outer_samples && !failed.load();
         block_start += options.trace_every) {
        const long block_end = std::min(outer_samples, block_start + options.trace_every);
        std::atomic<long> next{block_start};
        auto worker_fn = [&](int w) {
            Eigen::MatrixXd completed;
            std::vector<int> perm(d);
            std::vector<char> in_coalition(d);
            for (;;) {
                long i = next.fetch_add(1);
                if (i >= block_end || failed.load()) break;
                try {
                    run_iteration(i, samplers[w], completed, perm, in_coalition);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    failed.store(true);
                    if (failure.empty()) failure = e.what();
                }
            }
        };
        if (n_workers == 1) {
            worker_fn(0);
        } else {
            std::vector<std::thread> threads;
            for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker_fn, w);
            for (auto& t : threads) t.join();
        }
        if (failed.load()) throw Error(failure);
        completed_iterations = block_end;
        if (options.target_stderr > 0.0 && completed_iterations >= 2) {
            if ((stderr_prefix(completed_iterations).array() <= options.target_stderr).all())
                break;
        }
    }

    const long n = completed_iterations;
    ExplanationResult result;
    result.method = problem.method;
    result.features = problem.features->columns;
    result.phi = deltas.topRows(n).colwise().mean();
    result.std_error = stderr_prefix(n);
    result.outer_samples = n;
    result.inner_samples = inner_samples;
    result.seed = seed;
    result.value_empty =
        estimate_value_with_error(problem, std::vector<char>(d, 0), inner_samples, seed).value;
    result.value_full =
        estimate_value_with_error(problem, std::vector<char>(d, 1), inner_samples, seed).value;
    for (long t = options.trace_every; t <= n; t += options.trace_every)
        result.trace.push_back({t, deltas.topRows(t).colwise().mean()});
    if (result.trace.empty() || result.trace.back().iteration != n)
        result.trace.push_back({n, result.phi});
    return result;
}

// ---------------------------------------------------------------------------
// Subset enumeration.

CoalitionValueCache::CoalitionValueCache(std::vector<std::string> features, Method method,
                                         long inner_samples, std::uint64_t seed)
    : features_(std::move(features)), method_(method), inner_samples_(inner_samples), seed_(seed) {
    if (features_.empty()) throw Error("value cache: no features");
    if (features_.size() > 20)
        throw Error("value cache: " + std::to_string(features_.size()) +
                    " features exceed the 20-feature enumeration cap");
    const std::size_t size = std::size_t{1} << features_.size();
    values_.assign(size, 0.0);
    errors_.assign(size, 0.0);
    present_.assign(size, 0);
}

void CoalitionValueCache::set(std::uint32_t mask, double value, double std_error) {
    if (mask >= values_.size()) throw Error("value cache: mask out of range");
    values_[mask] = value;
    errors_[mask] = std_error;
    present_[mask] = 1;
}

bool CoalitionValueCache::has(std::uint32_t mask) const {
    return mask < present_.size() && present_[mask];
}

double CoalitionValueCache::value(std::uint32_t mask) const {
    if (!has(mask))
        throw Error("value cache: no value for subset {" +
                    [&] {
                        std::string s;
                        for (const auto& m : members_of(mask)) s += (s.empty() ? "" : ", ") + m;
                        return s;
                    }() +
                    "}");
    return values_[mask];
}

double CoalitionValueCache::std_error(std::uint32_t mask) const {
    if (!has(mask)) throw Error("value cache: no estimate for mask " + std::to_string(mask));
    return errors_[mask];
}

bool CoalitionValueCache::complete() const {
    return std::all_of(present_.begin(), present_.end(), [](char c) { return c != 0; });
}

void CoalitionValueCache::require_complete() const {
    for (std::size_t mask = 0; mask < present_.size(); ++mask)
        if (!present_[mask]) {
            std::string s;
            for (const auto& m : members_of(static_cast<std::uint32_t>(mask)))
                s += (s.empty() ? "" : ", ") + m;
            throw Error("value cache: missing subset {" + s + "}");
        }
}

std::vector<std::string> CoalitionValueCache::members_of(std::uint32_t mask) const {
    std::vector<std::string> out;
    for (int i = 0; i < dim(); ++i)
        if (mask & (std::uint32_t{1} << i)) out.push_back(features_[i]);
    return out;
}

void CoalitionValueCache::export_csv(std::ostream& out) const {
    out << "bitmask,subset,value,stderr\n" << std::setprecision(17);
    for (std::size_t mask = 0; mask < values_.size(); ++mask) {
        if (!present_[mask]) continue;
        std::string s;
        for (const auto& m : members_of(static_cast<std::uint32_t>(mask)))
            s += (s.empty() ? "" : " ") + m;
        out << mask << "," << s << "," << values_[mask] << "," << errors_[mask] << "\n";
    }
}

CoalitionValueCache build_value_cache(const ExplainProblem& problem, long inner_samples,
                                      std::uint64_t seed) {
    problem.validate();
    const int d = problem.dim();
    if (d > 20)
        throw Error("build_value_cache: " + std::to_string(d) +
                    " features exceed the 20-feature enumeration cap");
    CoalitionValueCache cache(problem.features->columns, problem.method, inner_samples, seed);
    std::vector<char> in_coalition(d);
    for (std::uint32_t mask = 0; mask <= cache.full_mask(); ++mask) {
        for (int i = 0; i < d; ++i) in_coalition[i] = (mask >> i) & 1 ? 1 : 0;
        ValueEstimate ve = estimate_value_with_error(problem, in_coalition, inner_samples, seed);
        cache.set(mask, ve.value, ve.std_error);
    }
    return cache;
}

namespace {

// C(n, k) table as doubles; exact for n <= 20.
Eigen::MatrixXd binomial_table(int n) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i <= n; ++i) {
        c(i, 0) = 1.0;
        for (int k = 1; k <= i; ++k) c(i, k) = c(i - 1, k - 1) + (k <= i - 1 ? c(i - 1, k) : 0.0);
    }
    return c;
}

}  // namespace

ExplanationResult exact_enumerate(const CoalitionValueCache& cache) {
    cache.require_complete();
    const int d = cache.dim();
    const Eigen::MatrixXd binom = binomial_table(d);
    ExplanationResult result;
    result.method = cache.method();
    result.features = cache.features();
    result.phi = Eigen::VectorXd::Zero(d);
    result.std_error = Eigen::VectorXd::Zero(d);
    result.oracle = true;
    result.inner_samples = cache.inner_samples();
    result.seed = cache.seed();
    result.value_empty = cache.value(0);
    result.value_full = cache.value(cache.full_mask());

    for (int i = 0; i < d; ++i) {
        const std::uint32_t bit = std::uint32_t{1} << i;
        double acc = 0.0;
        for (std::uint32_t mask = 0; mask <= cache.full_mask(); ++mask) {
            if (mask & bit) continue;
            const int s = __builtin_popcount(mask);
            acc += (cache.value(mask | bit) - cache.value(mask)) / binom(d - 1, s);
        }
        result.phi(i) = acc / static_cast<double>(d);
    }
    return result;
}

Eigen::VectorXd propagated_oracle_stderr(const CoalitionValueCache& cache) {
    cache.require_complete();
    const int d = cache.dim();
    const Eigen::MatrixXd binom = binomial_table(d);
    Eigen::VectorXd se(d);
    for (int i = 0; i < d; ++i) {
        const std::uint32_t bit = std::uint32_t{1} << i;
        double var = 0.0;
        for (std::uint32_t mask = 0; mask <= cache.full_mask(); ++mask) {
            if (mask & bit) continue;
            const int s = __builtin_popcount(mask);
            const double coeff = 1.0 / (static_cast<double>(d) * binom(d - 1, s));
            const double e1 = cache.std_error(mask | bit);
            const double e0 = cache.std_error(mask);
            var += coeff * coeff * (e1 * e1 + e0 * e0);
        }
        se(i) = std::sqrt(var);
    }
    return se;
}

Eigen::VectorXd wls_shapley(const CoalitionValueCache& cache) {
    cache.require_complete();
    const int d = cache.dim();
    const double v_empty = cache.value(0);
    const double v_full = cache.value(cache.full_mask());
    if (d == 1) return Eigen::VectorXd::Constant(1, v_full - v_empty);

    const Eigen::MatrixXd binom = binomial_table(d);
    auto kernel = [&](int s) {
        return (d - 1.0) / (binom(d, s) * s * (d - s));
    };

    // Closed-form Gram of the kernel-weighted design.
    double diag = 0.0, offdiag = 0.0;
    for (int s = 1; s <= d - 1; ++s) {
        diag += binom(d - 1, s - 1) * kernel(s);
        if (s >= 2) offdiag += binom(d - 2, s - 2) * kernel(s);
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Constant(d, d, offdiag);
    gram.diagonal().setConstant(diag);

    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
    for (std::uint32_t mask = 1; mask < cache.full_mask(); ++mask) {
        const int s = __builtin_popcount(mask);
        const double w = kernel(s) * (cache.value(mask) - v_empty);
        for (int i = 0; i < d; ++i)
            if (mask & (std::uint32_t{1} << i)) rhs(i) += w;
    }

    // Efficiency-constrained KKT system.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(d + 1, d + 1);
    kkt.topLeftCorner(d, d) = 2.0 * gram;
    kkt.topRightCorner(d, 1).setOnes();
    kkt.bottomLeftCorner(1, d).setOnes();
    Eigen::VectorXd kkt_rhs(d + 1);
    kkt_rhs.head(d) = 2.0 * rhs;
    kkt_rhs(d) = v_full - v_empty;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) throw Error("wls_shapley: singular weighted least squares system");
    return lu.solve(kkt_rhs).head(d);
}

// ---------------------------------------------------------------------------
// Property suite.

bool PropertyReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const PropertyCheck& c) { return c.pass; });
}

namespace {

struct PreparedDataset {
    Dataset train;
    Dataset explain;
    LinearScm scm;
    ChainGraph chain;
    Predictor model;
    GaussianModel joint;

    PreparedDataset(SyntheticKind kind, const VerifyConfig& cfg)
        : PreparedDataset(generate_synthetic(kind, cfg.n_train + cfg.n_explain,
                                             derive_seed(cfg.seed, 11 + static_cast<int>(kind))),
                          cfg) {}

    PreparedDataset(SyntheticBundle bundle, const VerifyConfig& cfg)
        : scm(std::move(bundle.scm)),
          chain(std::move(bundle.chain)),
          model(Predictor::linear({}, Eigen::VectorXd(), 0.0)),
          joint({"_"}, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)) {
        const Eigen::Index n_train = std::min<Eigen::Index>(cfg.n_train, bundle.data.rows() - 1);
        train.features.columns = bundle.data.features.columns;
        train.features.values = bundle.data.features.values.topRows(n_train);
        train.target = bundle.data.target.head(n_train);
        train.target_name = bundle.data.target_name;
        explain.features.columns = bundle.data.features.columns;
        explain.features.values = bundle.data.features.values.bottomRows(bundle.data.rows() - n_train);
        explain.target = bundle.data.target.tail(bundle.data.rows() - n_train);
        explain.target_name = bundle.data.target_name;
        model = fit_linear(train.with_target(), train.target_name);
        joint = fit_gaussian(train.features);
    }

    ExplainProblem problem(Method method, const VerifyConfig& cfg) const {
        ExplainProblem p;
        p.features = &explain.features;
        p.target = &explain.target;
        p.model = &model;
        p.loss = LossKind::mse;
        p.method = method;
        p.joint = &joint;
        p.chain = &chain;
        p.sampler = cfg.sampler;
        return p;
    }
};

// Direct-cause structure with an appended pure-noise feature (no edges).
SyntheticBundle noise_feature_bundle(long n, std::uint64_t seed) {
    LinearScm scm({{"X1", 0.0, 1.0}, {"X3", 0.0, 1.0}, {"X2", 0.0, 1.0}, {"X4", 0.0, 1.0},
                   {"Y", 0.0, 1.0}},
                  {{"X1", "Y", 1.0}, {"X2", "Y", 1.0}, {"X3", "Y", 1.0}});
    Table all = scm.sample(n, seed);
    Dataset data;
    data.features = all.without_column("Y");
    data.target = all.col("Y");
    data.target_name = "Y";
    ChainGraph chain({{{"X1", "X2", "X3", "X4"}, ComponentMode::confounded}},
                     data.features.columns);
    return SyntheticBundle{std::move(data), std::move(scm), std::move(chain)};
}

}  // namespace

PropertyReport verify_properties(const VerifyConfig& cfg) {
    PropertyReport report;
    auto add = [&](std::string id, std::string description, double measured, double threshold,
                   std::string note = "") {
        report.checks.push_back(PropertyCheck{std::move(id), std::move(description),
                                              measured < threshold, measured, threshold,
                                              std::move(note)});
    };
    auto wanted = [&](const char* block) { return cfg.suite == "all" || cfg.suite == block; };
    if (cfg.suite != "all" && cfg.suite != "p1" && cfg.suite != "p2" && cfg.suite != "p3" &&
        cfg.suite != "p4")
        throw Error("verify: unknown suite '" + cfg.suite + "' (expected all|p1|p2|p3|p4)");

    const SyntheticKind kinds[] = {SyntheticKind::direct_cause, SyntheticKind::markovian,
                                   SyntheticKind::mixed};

    // P1 (perfect assignment): exact enumeration telescopes to machine
    // precision; the permutation estimator matches within Monte Carlo error.
    for (SyntheticKind kind : kinds) {
        if (!wanted("p1")) break;
        PreparedDataset prep(kind, cfg);
        ExplainProblem problem = prep.problem(Method::cage, cfg);
        CoalitionValueCache cache =
            build_value_cache(problem, cfg.inner_samples, derive_seed(cfg.seed, 21));
        ExplanationResult oracle = exact_enumerate(cache);
        double gap = std::abs(oracle.phi_total() - (oracle.value_full - oracle.value_empty));
        add("P1-exact-" + to_string(kind), "sum(phi) equals v(full)-v(empty) for the enumerator",
            gap, 1e-12);

        ExplanationResult perm =
            estimate_permutation(problem, cfg.outer_samples, cfg.inner_samples,
                                 derive_seed(cfg.seed, 22), cfg.workers);
        double tol = 4.0 * std::sqrt(perm.std_error.array().square().sum());
        double perm_gap = std::abs(perm.phi_total() - (perm.value_full - perm.value_empty));
        add("P1-perm-" + to_string(kind),
            "permutation estimator satisfies efficiency within 4*sqrt(sum se^2)", perm_gap, tol);
    }

    // P2 (causal irrelevance): a feature with no edges and no signal earns
    // no importance under either method.
    if (wanted("p2")) {
        SyntheticBundle bundle =
            noise_feature_bundle(cfg.n_train + cfg.n_explain, derive_seed(cfg.seed, 31));
        PreparedDataset prep(std::move(bundle), cfg);
        for (Method method : {Method::cage, Method::sage}) {
            ExplainProblem problem = prep.problem(method, cfg);
            ExplanationResult res = estimate_permutation(problem, cfg.outer_samples,
                                                         cfg.inner_samples,
                                                         derive_seed(cfg.seed, 32), cfg.workers);
            int noise_idx = 0;
            for (std::size_t i = 0; i < res.features.size(); ++i)
                if (res.features[i] == "X4") noise_idx = static_cast<int>(i);
            double noise_phi = std::abs(res.phi(noise_idx));
            double threshold = 0.05 * res.phi.maxCoeff();
            add("P2-" + to_string(method), "pure-noise feature receives no importance", noise_phi,
                threshold);
        }
    }

    // P3 (causal symmetry): exchangeable features in the symmetric
    // structure receive equal values within propagated Monte Carlo error.
    if (wanted("p3")) {
        PreparedDataset prep(SyntheticKind::direct_cause, cfg);
        ExplainProblem problem = prep.problem(Method::cage, cfg);
        CoalitionValueCache cache =
            build_value_cache(problem, cfg.inner_samples, derive_seed(cfg.seed, 41));
        ExplanationResult oracle = exact_enumerate(cache);
        Eigen::VectorXd se = propagated_oracle_stderr(cache);
        double worst_gap = 0.0, worst_tol = 1e300;
        for (int i = 0; i < oracle.phi.size(); ++i) {
            for (int j = i + 1; j < oracle.phi.size(); ++j) {
                double gap = std::abs(oracle.phi(i) - oracle.phi(j));
                double tol = 3.0 * std::sqrt(se(i) * se(i) + se(j) * se(j));
                if (gap - tol > worst_gap - worst_tol) {
                    worst_gap = gap;
                    worst_tol = tol;
                }
            }
        }
        add("P3-exact", "exchangeable features receive equal importance", worst_gap, worst_tol);
    }

    // P4 (least-squares characterization): the kernel-weighted WLS solution
    // reproduces the enumerated values.
    if (wanted("p4")) {
        PreparedDataset prep(SyntheticKind::direct_cause, cfg);
        ExplainProblem problem = prep.problem(Method::cage, cfg);
        CoalitionValueCache cache =
            build_value_cache(problem, cfg.inner_samples, derive_seed(cfg.seed, 51));
        double gap = (wls_shapley(cache) - exact_enumerate(cache).phi).cwiseAbs().maxCoeff();
        add("P4-wls-direct_cause", "weighted least squares equals exact enumeration", gap, 1e-6);

        CounterRng rng(cfg.seed, 99);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            CoalitionValueCache random_cache({"a", "b", "c", "d"}, Method::sage, 1, cfg.seed);
            for (std::uint32_t mask = 0; mask <= random_cache.full_mask(); ++mask)
                random_cache.set(mask, 2.0 * rng.uniform() - 1.0, 0.0);
            worst = std::max(worst, (wls_shapley(random_cache) - exact_enumerate(random_cache).phi)
                                        .cwiseAbs()
                                        .maxCoeff());
        }
        add("P4-wls-random", "WLS equals enumeration on random 4-feature games", worst, 1e-6);
    }

    return report;
}

}  // namespace cage
