#include "cage/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "cage/error.hpp"
#include "cage/rng.hpp"

namespace cage {

void GibbsConfig::validate() const {
    if (sweeps < 1) throw Error("gibbs: sweeps must be >= 1");
    if (burn_in < 0) throw Error("gibbs: burn_in must be >= 0");
    if (thinning < 1) throw Error("gibbs: thinning must be >= 1");
}

std::string to_string(SamplerMode mode) {
    return mode == SamplerMode::exact ? "exact" : "gibbs";
}

SamplerMode sampler_mode_from_string(const std::string& s) {
    if (s == "exact") return SamplerMode::exact;
    if (s == "gibbs") return SamplerMode::gibbs;
    throw Error("sampler: unknown mode '" + s + "' (expected exact|gibbs)");
}

namespace {

double smallest_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
    return (m + m.transpose()) / 2.0;
}

}  // namespace

GaussianModel::GaussianModel(std::vector<std::string> names, Eigen::VectorXd mean,
                             Eigen::MatrixXd covariance, double ridge)
    : names_(std::move(names)), mean_(std::move(mean)), cov_(std::move(covariance)) {
    const auto d = static_cast<Eigen::Index>(names_.size());
    if (d == 0) throw Error("gaussian: no variables");
    if (mean_.size() != d || cov_.rows() != d || cov_.cols() != d)
        throw Error("gaussian: mean/covariance shape does not match variable count");
    if (!mean_.allFinite() || !cov_.allFinite())
        throw Error("gaussian: non-finite mean or covariance entry");
    double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12)
        throw Error("gaussian: covariance asymmetric by " + std::to_string(asym));
    cov_ = symmetrized(cov_);
    if (ridge > 0.0) cov_.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(cov_);
    if (llt.info() != Eigen::Success)
        throw Error("gaussian: covariance not positive definite (smallest eigenvalue " +
                    std::to_string(smallest_eigenvalue(cov_)) + "); increase the ridge");
}

int GaussianModel::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    throw Error("gaussian: unknown variable '" + name + "'");
}

GaussianModel fit_gaussian(const Table& data, double ridge) {
    if (data.cols() < 1) throw Error("fit_gaussian: no columns");
    if (data.rows() < 2) throw Error("fit_gaussian: need at least 2 rows");
    if (ridge < 0.0) throw Error("fit_gaussian: ridge must be >= 0");
    if (!data.values.allFinite()) throw Error("fit_gaussian: non-finite entry in data");
    const double n = static_cast<double>(data.rows());
    Eigen::VectorXd mean = data.values.colwise().mean();
    Eigen::MatrixXd centered = data.values.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1.0);
    cov = symmetrized(cov);
    cov.diagonal().array() += ridge;
    return GaussianModel(data.columns, std::move(mean), std::move(cov));
}

namespace {

struct Partition {
    std::vector<int> keep;          // indices of remaining variables
    std::vector<int> given;         // indices of conditioned variables
    Eigen::VectorXd given_values;   // aligned with `given`
};

Partition partition_for(const GaussianModel& g,
                        const std::vector<std::pair<std::string, double>>& given) {
    Partition p;
    std::vector<char> is_given(g.dim(), 0);
    Eigen::VectorXd values(g.dim());
    for (const auto& [name, value] : given) {
        int idx = g.index_of(name);
        if (is_given[idx]) throw Error("condition: variable '" + name + "' given twice");
        is_given[idx] = 1;
        values(idx) = value;
    }
    for (int i = 0; i < g.dim(); ++i) {
        if (is_given[i])
            p.given.push_back(i);
        else
            p.keep.push_back(i);
    }
    p.given_values.resize(static_cast<Eigen::Index>(p.given.size()));
    for (std::size_t k = 0; k < p.given.size(); ++k) p.given_values(k) = values(p.given[k]);
    return p;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
    return out;
}

Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx) {
    Eigen::VectorXd out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
    return out;
}

}  // namespace

GaussianModel condition(const GaussianModel& g,
                        const std::vector<std::pair<std::string, double>>& given) {
    if (given.empty()) return g;
    Partition p = partition_for(g, given);
    if (p.keep.empty()) throw Error("condition: conditioning on all variables leaves nothing");

    Eigen::MatrixXd s_gg = submatrix(g.covariance(), p.given, p.given);
    Eigen::MatrixXd s_kg = submatrix(g.covariance(), p.keep, p.given);
    Eigen::MatrixXd s_kk = submatrix(g.covariance(), p.keep, p.keep);
    Eigen::LLT<Eigen::MatrixXd> llt(s_gg);
    if (llt.info() != Eigen::Success)
        throw Error("condition: conditioning block not positive definite (smallest eigenvalue " +
                    std::to_string(smallest_eigenvalue(s_gg)) + ")");
    // W = Sigma_kg Sigma_gg^-1
    Eigen::MatrixXd w = llt.solve(s_kg.transpose()).transpose();
    Eigen::VectorXd mean = subvector(g.mean(), p.keep) +
                           w * (p.given_values - subvector(g.mean(), p.given));
    Eigen::MatrixXd cov = symmetrized(s_kk - w * s_kg.transpose());

    std::vector<std::string> names;
    for (int idx : p.keep) names.push_back(g.names()[idx]);
    return GaussianModel(std::move(names), std::move(mean), std::move(cov));
}

Table draw(const GaussianModel& g, long n, std::uint64_t seed) {
    if (n < 1) throw Error("draw: sample count must be >= 1");
    Eigen::LLT<Eigen::MatrixXd> llt(g.covariance());
    if (llt.info() != Eigen::Success)
        throw Error("draw: Cholesky failed (smallest eigenvalue " +
                    std::to_string(smallest_eigenvalue(g.covariance())) + ")");
    Eigen::MatrixXd chol = llt.matrixL();
    Table out;
    out.columns = g.names();
    out.values.resize(n, g.dim());
    Eigen::VectorXd z(g.dim());
    for (long row = 0; row < n; ++row) {
        CounterRng rng(seed, static_cast<std::uint64_t>(row));
        for (int i = 0; i < g.dim(); ++i) z(i) = rng.normal();
        out.values.row(row) = (g.mean() + chol * z).transpose();
    }
    return out;
}

namespace {

// One full sweep of single-site updates from the precision matrix of the
// conditional: x_i ~ N(mu_i - (1/L_ii) sum_{j!=i} L_ij (x_j - mu_j), 1/L_ii).
// cond_sd carries sqrt(1/L_ii); for a 1-dimensional target it is taken from
// the covariance itself, making single-site Gibbs coincide bitwise with a
// direct draw.
void gibbs_sweeps(const Eigen::MatrixXd& precision, const Eigen::VectorXd& cond_sd,
                  const Eigen::VectorXd& mean, Eigen::VectorXd& state, long n_sweeps,
                  CounterRng& rng) {
    const int d = static_cast<int>(state.size());
    for (long s = 0; s < n_sweeps; ++s) {
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j)
                if (j != i) acc += precision(i, j) * (state(j) - mean(j));
            double cond_mean = mean(i) - acc / precision(i, i);
            state(i) = cond_mean + cond_sd(i) * rng.normal();
        }
    }
}

Eigen::MatrixXd precision_of(const Eigen::MatrixXd& cov, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw Error(std::string(what) + ": conditional covariance not positive definite " +
                    "(smallest eigenvalue " + std::to_string(smallest_eigenvalue(cov)) + ")");
    return llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
}

Eigen::VectorXd gibbs_cond_sd(const Eigen::MatrixXd& cov, const Eigen::MatrixXd& precision) {
    if (cov.rows() == 1) return cov.diagonal().cwiseSqrt();
    return precision.diagonal().cwiseInverse().cwiseSqrt();
}

}  // namespace

Eigen::VectorXd gibbs_draw(const GaussianModel& g, const std::vector<std::string>& target,
                           const std::vector<std::pair<std::string, double>>& given,
                           const GibbsConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (target.empty()) throw Error("gibbs_draw: empty target set");
    std::unordered_set<std::string> target_set(target.begin(), target.end());
    if (target_set.size() != target.size()) throw Error("gibbs_draw: duplicate target feature");
    for (const auto& [name, value] : given)
        if (target_set.count(name))
            throw Error("gibbs_draw: variable '" + name + "' both target and given");

    // Drop variables in neither set (Gaussian marginalization), then
    // condition on the given values.
    std::vector<std::pair<std::string, double>> given_in;
    std::unordered_set<std::string> keep(target.begin(), target.end());
    for (const auto& [name, value] : given) {
        g.index_of(name);
        keep.insert(name);
        given_in.emplace_back(name, value);
    }
    std::vector<int> sel;
    for (int i = 0; i < g.dim(); ++i)
        if (keep.count(g.names()[i])) sel.push_back(i);
    std::vector<std::string> sel_names;
    for (int idx : sel) sel_names.push_back(g.names()[idx]);
    GaussianModel sub(sel_names, subvector(g.mean(), sel),
                      submatrix(g.covariance(), sel, sel));
    GaussianModel cond_model = condition(sub, given_in);

    Eigen::MatrixXd precision = precision_of(cond_model.covariance(), "gibbs_draw");
    Eigen::VectorXd cond_sd = gibbs_cond_sd(cond_model.covariance(), precision);
    Eigen::VectorXd state = cond_model.mean();
    CounterRng rng(seed, 0);
    gibbs_sweeps(precision, cond_sd, cond_model.mean(), state,
                 cfg.burn_in + cfg.sweeps * cfg.thinning, rng);

    // Map back to the caller's target order.
    Eigen::VectorXd out(static_cast<Eigen::Index>(target.size()));
    for (std::size_t k = 0; k < target.size(); ++k)
        out(static_cast<Eigen::Index>(k)) = state(cond_model.index_of(target[k]));
    return out;
}

// ---------------------------------------------------------------------------
// Out-of-coalition completion.

namespace {

struct MemberRegression {
    int target = -1;            // feature index in joint space
    std::vector<int> cond;      // conditioning feature indices
    Eigen::RowVectorXd weights;
    double base = 0.0;          // mu_t - w . mu_cond
    double sd = 0.0;
};

struct ComponentPlan {
    bool interacting = false;
    // confounded path
    std::vector<MemberRegression> members;
    // interacting path
    std::vector<int> targets;
    std::vector<int> cond;
    Eigen::MatrixXd weights;    // |targets| x |cond|
    Eigen::VectorXd base;       // mu_T - W mu_cond
    Eigen::MatrixXd chol;       // exact mode
    Eigen::MatrixXd precision;  // gibbs mode
    Eigen::VectorXd cond_sd;    // gibbs mode
};

struct CoalitionPlan {
    std::vector<ComponentPlan> components;
};

}  // namespace

struct OutCoalitionSampler::Impl {
    GaussianModel joint;
    SamplerMode mode;
    GibbsConfig gibbs;
    std::vector<std::vector<int>> component_members;  // joint indices, ascending
    std::vector<ComponentMode> component_modes;
    std::unordered_map<std::uint64_t, CoalitionPlan> plan_cache;
    bool cacheable = false;

    static constexpr std::size_t kPlanCacheCap = 8192;

    Impl(const GaussianModel& g, const ChainGraph& chain, SamplerMode m, GibbsConfig cfg)
        : joint(g), mode(m), gibbs(cfg) {
        gibbs.validate();
        if (chain.feature_universe().size() != static_cast<std::size_t>(g.dim()))
            throw Error("out-coalition sampler: chain graph universe has " +
                        std::to_string(chain.feature_universe().size()) + " features, joint has " +
                        std::to_string(g.dim()));
        for (const auto& comp : chain.components()) {
            std::vector<int> idx;
            for (const auto& name : comp.members) idx.push_back(g.index_of(name));
            std::sort(idx.begin(), idx.end());
            component_members.push_back(std::move(idx));
            component_modes.push_back(comp.mode);
        }
        cacheable = g.dim() <= 64;
    }

    std::uint64_t mask_of(const std::vector<char>& in_coalition) const {
        std::uint64_t mask = 0;
        for (std::size_t i = 0; i < in_coalition.size(); ++i)
            if (in_coalition[i]) mask |= std::uint64_t{1} << i;
        return mask;
    }

    // Conditional regression of `targets` on `cond` from the joint moments.
    void joint_regression(const std::vector<int>& targets, const std::vector<int>& cond,
                          Eigen::MatrixXd& weights, Eigen::VectorXd& base,
                          Eigen::MatrixXd& cond_cov) const {
        const Eigen::MatrixXd& sigma = joint.covariance();
        Eigen::MatrixXd s_tt = submatrix(sigma, targets, targets);
        if (cond.empty()) {
            weights.resize(targets.size(), 0);
            base = subvector(joint.mean(), targets);
            cond_cov = s_tt;
            return;
        }
        Eigen::MatrixXd s_cc = submatrix(sigma, cond, cond);
        Eigen::MatrixXd s_tc = submatrix(sigma, targets, cond);
        Eigen::LLT<Eigen::MatrixXd> llt(s_cc);
        if (llt.info() != Eigen::Success)
            throw Error("conditioning block not positive definite (smallest eigenvalue " +
                        std::to_string(smallest_eigenvalue(s_cc)) + ")");
        weights = llt.solve(s_tc.transpose()).transpose();
        base = subvector(joint.mean(), targets) - weights * subvector(joint.mean(), cond);
        cond_cov = symmetrized(s_tt - weights * s_tc.transpose());
    }

    CoalitionPlan build_plan(const std::vector<char>& in_coalition) const {
        CoalitionPlan plan;
        std::vector<int> earlier;  // members of preceding components, ascending
        for (std::size_t t = 0; t < component_members.size(); ++t) {
            const auto& members = component_members[t];
            std::vector<int> sampled, fixed;
            for (int idx : members)
                (in_coalition[idx] ? fixed : sampled).push_back(idx);
            if (!sampled.empty()) {
                try {
                    ComponentPlan cp;
                    if (component_modes[t] == ComponentMode::confounded) {
                        cp.interacting = false;
                        for (int target : sampled) {
                            MemberRegression reg;
                            reg.target = target;
                            reg.cond = earlier;
                            Eigen::MatrixXd w, cc;
                            Eigen::VectorXd b;
                            joint_regression({target}, earlier, w, b, cc);
                            reg.weights = w.row(0);
                            reg.base = b(0);
                            if (cc(0, 0) <= 0.0)
                                throw Error("zero conditional variance for '" +
                                            joint.names()[target] + "'");
                            reg.sd = std::sqrt(cc(0, 0));
                            cp.members.push_back(std::move(reg));
                        }
                    } else {
                        cp.interacting = true;
                        cp.targets = sampled;
                        cp.cond = earlier;
                        cp.cond.insert(cp.cond.end(), fixed.begin(), fixed.end());
                        std::sort(cp.cond.begin(), cp.cond.end());
                        Eigen::MatrixXd cond_cov;
                        joint_regression(cp.targets, cp.cond, cp.weights, cp.base, cond_cov);
                        if (mode == SamplerMode::exact) {
                            Eigen::LLT<Eigen::MatrixXd> llt(cond_cov);
                            if (llt.info() != Eigen::Success)
                                throw Error(
                                    "conditional covariance not positive definite (smallest "
                                    "eigenvalue " +
                                    std::to_string(smallest_eigenvalue(cond_cov)) + ")");
                            cp.chol = llt.matrixL();
                        } else {
                            cp.precision = precision_of(cond_cov, "out-coalition sampler");
                            cp.cond_sd = gibbs_cond_sd(cond_cov, cp.precision);
                        }
                    }
                    plan.components.push_back(std::move(cp));
                } catch (const Error& e) {
                    throw Error("out-coalition sampler: component " + std::to_string(t + 1) +
                                ": " + e.what());
                }
            }
            earlier.insert(earlier.end(), members.begin(), members.end());
            std::sort(earlier.begin(), earlier.end());
        }
        return plan;
    }

    const CoalitionPlan& plan_for(const std::vector<char>& in_coalition) {
        if (!cacheable) {
            scratch_plan = build_plan(in_coalition);
            return scratch_plan;
        }
        std::uint64_t key = mask_of(in_coalition);
        auto it = plan_cache.find(key);
        if (it != plan_cache.end()) return it->second;
        if (plan_cache.size() >= kPlanCacheCap) plan_cache.clear();
        return plan_cache.emplace(key, build_plan(in_coalition)).first->second;
    }

    CoalitionPlan scratch_plan;
};

OutCoalitionSampler::OutCoalitionSampler(const GaussianModel& joint, const ChainGraph& chain,
                                         SamplerMode mode, GibbsConfig gibbs)
    : impl_(std::make_unique<Impl>(joint, chain, mode, gibbs)) {}

OutCoalitionSampler::~OutCoalitionSampler() = default;
OutCoalitionSampler::OutCoalitionSampler(OutCoalitionSampler&&) noexcept = default;
OutCoalitionSampler& OutCoalitionSampler::operator=(OutCoalitionSampler&&) noexcept = default;

const std::vector<std::string>& OutCoalitionSampler::feature_names() const {
    return impl_->joint.names();
}

void OutCoalitionSampler::complete(const Eigen::VectorXd& instance,
                                   const std::vector<char>& in_coalition, long m,
                                   std::uint64_t seed, Eigen::MatrixXd& out) {
    const int d = impl_->joint.dim();
    if (instance.size() != d)
        throw Error("out-coalition sampler: instance has " + std::to_string(instance.size()) +
                    " entries, expected " + std::to_string(d));
    if (static_cast<int>(in_coalition.size()) != d)
        throw Error("out-coalition sampler: coalition mask size mismatch");
    if (m < 1) throw Error("out-coalition sampler: draw count must be >= 1");

    out.resize(m, d);
    bool all_in = std::all_of(in_coalition.begin(), in_coalition.end(),
                              [](char c) { return c != 0; });
    if (all_in) {
        out = instance.transpose().replicate(m, 1);
        return;
    }

    const CoalitionPlan& plan = impl_->plan_for(in_coalition);
    Eigen::VectorXd x(d);
    for (long k = 0; k < m; ++k) {
        CounterRng rng(seed, static_cast<std::uint64_t>(k));
        x = instance;
        for (const auto& cp : plan.components) {
            if (!cp.interacting) {
                for (const auto& reg : cp.members) {
                    double mean = reg.base;
                    for (std::size_t j = 0; j < reg.cond.size(); ++j)
                        mean += reg.weights(static_cast<Eigen::Index>(j)) * x(reg.cond[j]);
                    x(reg.target) = mean + reg.sd * rng.normal();
                }
            } else {
                const auto nt = static_cast<Eigen::Index>(cp.targets.size());
                Eigen::VectorXd mean = cp.base;
                for (std::size_t j = 0; j < cp.cond.size(); ++j)
                    mean += cp.weights.col(static_cast<Eigen::Index>(j)) * x(cp.cond[j]);
                Eigen::VectorXd values(nt);
                if (impl_->mode == SamplerMode::exact) {
                    Eigen::VectorXd z(nt);
                    for (Eigen::Index i = 0; i < nt; ++i) z(i) = rng.normal();
                    values = mean + cp.chol * z;
                } else {
                    values = mean;  // chain starts at the conditional mean
                    gibbs_sweeps(cp.precision, cp.cond_sd, mean, values,
                                 impl_->gibbs.burn_in + impl_->gibbs.sweeps * impl_->gibbs.thinning,
                                 rng);
                }
                for (Eigen::Index i = 0; i < nt; ++i) x(cp.targets[i]) = values(i);
            }
        }
        out.row(k) = x.transpose();
    }
}

Table sample_out_coalition(const GaussianModel& joint, const ChainGraph& chain,
                           const std::vector<std::pair<std::string, double>>& instance,
                           const std::vector<std::string>& coalition, long m, SamplerMode mode,
                           std::uint64_t seed, const GibbsConfig& gibbs) {
    OutCoalitionSampler sampler(joint, chain, mode, gibbs);
    std::vector<char> in_coalition(joint.dim(), 0);
    for (const auto& name : coalition) {
        int idx = joint.index_of(name);
        if (in_coalition[idx]) throw Error("sample_out_coalition: duplicate coalition feature '" +
                                           name + "'");
        in_coalition[idx] = 1;
    }
    Eigen::VectorXd inst = Eigen::VectorXd::Zero(joint.dim());
    std::vector<char> have(joint.dim(), 0);
    for (const auto& [name, value] : instance) {
        int idx = joint.index_of(name);
        inst(idx) = value;
        have[idx] = 1;
    }
    for (int i = 0; i < joint.dim(); ++i)
        if (in_coalition[i] && !have[i])
            throw Error("sample_out_coalition: instance missing value for coalition feature '" +
                        joint.names()[i] + "'");
    Eigen::MatrixXd out;
    sampler.complete(inst, in_coalition, m, seed, out);
    return Table(joint.names(), std::move(out));
}

}  // namespace cage
