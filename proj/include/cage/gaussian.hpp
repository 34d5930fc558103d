#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cage/chain_graph.hpp"
#include "cage/table.hpp"

namespace cage {

struct GibbsConfig {
    long sweeps = 1;     // retained full sweeps per draw
    long burn_in = 100;  // discarded full sweeps
    long thinning = 5;   // sweeps between retained states

    void validate() const;
};

enum class SamplerMode { exact, gibbs };

std::string to_string(SamplerMode mode);
SamplerMode sampler_mode_from_string(const std::string& s);

// Joint Gaussian over named features. Covariance is required symmetric to
// 1e-12 and positive definite (after any ridge passed by the caller).
class GaussianModel {
public:
    GaussianModel(std::vector<std::string> names, Eigen::VectorXd mean, Eigen::MatrixXd covariance,
                  double ridge = 0.0);

    const std::vector<std::string>& names() const { return names_; }
    int dim() const { return static_cast<int>(names_.size()); }
    int index_of(const std::string& name) const;
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }

private:
    std::vector<std::string> names_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
};

// Column means and sample covariance (denominator n-1) plus ridge on the
// diagonal. Requires >= 2 rows and finite entries.
GaussianModel fit_gaussian(const Table& data, double ridge = 1e-6);

// Exact conditional distribution of the remaining features given the
// assignments, via the Schur complement.
GaussianModel condition(const GaussianModel& g,
                        const std::vector<std::pair<std::string, double>>& given);

// n independent draws through the Cholesky factor; row i consumes the
// (seed, i) stream.
Table draw(const GaussianModel& g, long n, std::uint64_t seed);

// One joint draw of the target features from P(target | given), by cycling
// through the target coordinates in index order and replacing each from its
// univariate full conditional. The state after burn_in + sweeps*thinning
// full sweeps is returned; the chain starts at the conditional mean and
// consumes the (seed, 0) stream.
Eigen::VectorXd gibbs_draw(const GaussianModel& g, const std::vector<std::string>& target,
                           const std::vector<std::pair<std::string, double>>& given,
                           const GibbsConfig& cfg, std::uint64_t seed);

// Realizes the chain-graph factorization of the post-interventional
// distribution: components are visited in chain order; confounded members
// are drawn one by one from their univariate conditionals given parent
// components only (never their own component's in-coalition members), while
// interacting members are drawn jointly conditional on parents and on the
// in-coalition members of their own component. Prepared once per
// (joint, chain) pair; per-coalition conditioning plans are cached, so a
// sampler instance is cheap to reuse but not safe to share across threads.
class OutCoalitionSampler {
public:
    OutCoalitionSampler(const GaussianModel& joint, const ChainGraph& chain, SamplerMode mode,
                        GibbsConfig gibbs = {});
    ~OutCoalitionSampler();
    OutCoalitionSampler(OutCoalitionSampler&&) noexcept;
    OutCoalitionSampler& operator=(OutCoalitionSampler&&) noexcept;

    const std::vector<std::string>& feature_names() const;

    // Completes m rows: in-coalition entries copied from `instance`
    // (indexed like feature_names()), out-coalition entries sampled. Draw
    // k consumes the (seed, k) stream. `out` is resized to m x d.
    void complete(const Eigen::VectorXd& instance, const std::vector<char>& in_coalition, long m,
                  std::uint64_t seed, Eigen::MatrixXd& out);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Name-based convenience wrapper over OutCoalitionSampler for one-off use.
Table sample_out_coalition(const GaussianModel& joint, const ChainGraph& chain,
                           const std::vector<std::pair<std::string, double>>& instance,
                           const std::vector<std::string>& coalition, long m, SamplerMode mode,
                           std::uint64_t seed, const GibbsConfig& gibbs = {});

}  // namespace cage
