#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cage/gaussian.hpp"
#include "cage/predictor.hpp"
#include "cage/table.hpp"

namespace cage {

enum class Method { cage, sage };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// Everything a value-function evaluation needs. Feature columns, the
// model's feature order and (for cage) the joint's variables must all agree
// exactly; validate() enforces this.
struct ExplainProblem {
    const Table* features = nullptr;       // K x d, explanation rows
    const Eigen::VectorXd* target = nullptr;
    const Predictor* model = nullptr;
    LossKind loss = LossKind::mse;
    Method method = Method::sage;
    const GaussianModel* joint = nullptr;  // cage only
    const ChainGraph* chain = nullptr;     // cage only
    SamplerMode sampler = SamplerMode::exact;
    GibbsConfig gibbs{};

    void validate() const;
    int dim() const { return static_cast<int>(features->cols()); }
};

struct ValueEstimate {
    double value = 0.0;
    double std_error = 0.0;  // across explanation rows
};

// v(S): minus the mean over rows of L(mean of M completed predictions, y).
// The empty coalition uses the dataset-mean prediction as baseline and the
// full coalition the direct predictions; both are then deterministic.
ValueEstimate estimate_value_with_error(const ExplainProblem& problem,
                                        const std::vector<char>& in_coalition, long inner_samples,
                                        std::uint64_t seed);
double estimate_value(const ExplainProblem& problem, const std::vector<std::string>& coalition,
                      long inner_samples, std::uint64_t seed);

struct TracePoint {
    long iteration = 0;
    Eigen::VectorXd phi;
};

struct ExplanationResult {
    Method method = Method::sage;
    std::vector<std::string> features;
    Eigen::VectorXd phi;
    Eigen::VectorXd std_error;
    long outer_samples = 0;
    long inner_samples = 0;
    std::uint64_t seed = 0;
    bool oracle = false;
    double value_empty = 0.0;
    double value_full = 0.0;
    std::vector<TracePoint> trace;  // running phi snapshots

    double phi_total() const { return phi.sum(); }
};

struct PermutationOptions {
    long trace_every = 100;
    // When > 0, stops at the end of the first trace block where every
    // feature's standard error is below the target.
    double target_stderr = 0.0;
};

// Permutation-sampling estimator: each outer iteration draws an instance
// and a uniform permutation, then walks the permutation accumulating loss
// deltas from the dataset-mean-prediction baseline. Iteration i derives all
// its randomness from (seed, i), so results are identical for any worker
// count.
ExplanationResult estimate_permutation(const ExplainProblem& problem, long outer_samples,
                                       long inner_samples, std::uint64_t seed, int workers = 1,
                                       const PermutationOptions& options = {});

// One value estimate per feature subset, keyed by bitmask; all subsets
// share the master seed so estimates use common random numbers.
class CoalitionValueCache {
public:
    CoalitionValueCache(std::vector<std::string> features, Method method, long inner_samples,
                        std::uint64_t seed);

    int dim() const { return static_cast<int>(features_.size()); }
    const std::vector<std::string>& features() const { return features_; }
    Method method() const { return method_; }
    long inner_samples() const { return inner_samples_; }
    std::uint64_t seed() const { return seed_; }

    void set(std::uint32_t mask, double value, double std_error);
    bool has(std::uint32_t mask) const;
    double value(std::uint32_t mask) const;
    double std_error(std::uint32_t mask) const;
    std::uint32_t full_mask() const { return (std::uint32_t{1} << dim()) - 1; }
    bool complete() const;
    void require_complete() const;

    std::vector<std::string> members_of(std::uint32_t mask) const;
    // Audit export: bitmask, subset members, value, stderr.
    void export_csv(std::ostream& out) const;

private:
    std::vector<std::string> features_;
    Method method_;
    long inner_samples_;
    std::uint64_t seed_;
    std::vector<double> values_;
    std::vector<double> errors_;
    std::vector<char> present_;
};

// One estimate_value per subset; requires d <= 20.
CoalitionValueCache build_value_cache(const ExplainProblem& problem, long inner_samples,
                                      std::uint64_t seed);

// Exact Shapley enumeration over a complete cache. The result is flagged as
// an oracle and reports zero standard errors; Monte Carlo noise carried by
// the cache values is available via propagated_oracle_stderr.
ExplanationResult exact_enumerate(const CoalitionValueCache& cache);

// Per-feature standard error of exact_enumerate's phi implied by the
// cache's per-subset standard errors (independence approximation).
Eigen::VectorXd propagated_oracle_stderr(const CoalitionValueCache& cache);

// Kernel-weighted least squares with the efficiency constraint; equals
// exact_enumerate for complete caches.
Eigen::VectorXd wls_shapley(const CoalitionValueCache& cache);

// ---------------------------------------------------------------------------
// Executable causal-soundness checks.

struct PropertyCheck {
    std::string id;
    std::string description;
    bool pass = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string note;
};

struct PropertyReport {
    std::vector<PropertyCheck> checks;
    bool all_pass() const;
};

struct VerifyConfig {
    long n_train = 10000;
    long n_explain = 10000;
    long outer_samples = 4000;
    long inner_samples = 64;
    std::uint64_t seed = 7;
    int workers = 1;
    SamplerMode sampler = SamplerMode::exact;
    std::string suite = "all";  // all|p1|p2|p3|p4
};

// Runs the perfect-assignment, causal-irrelevance, causal-symmetry and
// least-squares-equivalence checks on the bundled synthetic structures.
PropertyReport verify_properties(const VerifyConfig& cfg);

}  // namespace cage
