#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cage/table.hpp"

namespace cage {

struct VariableSpec {
    std::string name;
    double intercept = 0.0;
    double noise_std = 1.0;
};

struct ScmEdge {
    std::string parent;
    std::string child;
    double weight = 0.0;
};

// do()-assignments; a variable may be assigned at most once.
class Intervention {
public:
    Intervention() = default;
    Intervention(std::initializer_list<std::pair<std::string, double>> assignments) {
        for (const auto& [name, value] : assignments) set(name, value);
    }

    void set(const std::string& variable, double value);
    bool empty() const { return assignments_.empty(); }
    const std::vector<std::pair<std::string, double>>& assignments() const {
        return assignments_;
    }

private:
    std::vector<std::pair<std::string, double>> assignments_;
};

// Exact mean/covariance of a (possibly post-interventional) joint
// distribution; serves as the analytic oracle for sampled data.
struct MomentSummary {
    std::vector<std::string> variables;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    int index_of(const std::string& name) const;
    double mean_of(const std::string& name) const { return mean(index_of(name)); }
    double cov_of(const std::string& a, const std::string& b) const {
        return covariance(index_of(a), index_of(b));
    }
    double var_of(const std::string& name) const { return cov_of(name, name); }
};

// DAG of linear structural equations with independent Gaussian noise:
//   X_v = intercept_v + sum_p coeff(v,p) * X_p + noise_std_v * Z_v.
// Immutable after construction; construction validates acyclicity,
// declared-variable references and nonnegative noise.
class LinearScm {
public:
    LinearScm(std::vector<VariableSpec> variables, std::vector<ScmEdge> edges);

    static LinearScm parse(std::istream& in, const std::string& origin = "<stream>");
    static LinearScm load(const std::string& path);
    void write_definition(std::ostream& out) const;

    const std::vector<std::string>& variables() const { return names_; }
    std::size_t size() const { return names_.size(); }
    int index_of(const std::string& name) const;

    double intercept(const std::string& name) const { return intercepts_(index_of(name)); }
    double noise_std(const std::string& name) const { return noise_std_(index_of(name)); }
    // Zero when no edge parent->child exists.
    double coefficient(const std::string& child, const std::string& parent) const;

    // Variables ordered so every parent precedes its children; ties broken
    // by declaration order.
    const std::vector<std::string>& topological_order() const { return topo_names_; }

    // n iid draws; row i derives all its noise from (seed, i), so equal
    // seeds reproduce the table bit-for-bit and generation may be
    // parallelized by row. Intervened variables are pinned in every row.
    Table sample(long n, std::uint64_t seed, const Intervention& iv = {}) const;

    // Closed-form joint moments: mu = (I-B)^-1 c, Sigma = (I-B)^-1 D (I-B)^-T.
    // An intervention zeroes the variable's parent row and noise and pins
    // its intercept to the assigned value.
    MomentSummary analytic_moments(const Intervention& iv = {}) const;

private:
    std::vector<int> intervened_indices(const Intervention& iv) const;

    std::vector<std::string> names_;
    Eigen::VectorXd intercepts_;
    Eigen::VectorXd noise_std_;
    std::vector<std::vector<std::pair<int, double>>> parents_;  // per child: (parent, weight)
    std::vector<int> topo_;                                     // indices in topological order
    std::vector<std::string> topo_names_;
};

}  // namespace cage
