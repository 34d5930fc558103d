#include "cage/scm.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cage/rng.hpp"

namespace cage {

void Intervention::set(const std::string& variable, double value) {
    for (const auto& [name, _] : assignments_)
        if (name == variable)
            throw Error("intervention: variable '" + variable + "' assigned twice");
    assignments_.emplace_back(variable, value);
}

int MomentSummary::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
        if (variables[i] == name) return static_cast<int>(i);
    throw Error("moments: unknown variable '" + name + "'");
}

namespace {

// Kahn's algorithm with declaration-order tie-break. On a cycle, walks
// parent links among the unresolved vertices to name a vertex that is
// actually on the cycle.
std::vector<int> topological_sort(const std::vector<std::string>& names,
                                  const std::vector<std::vector<std::pair<int, double>>>& parents) {
    const int n = static_cast<int>(names.size());
    std::vector<int> remaining_parents(n, 0);
    for (int v = 0; v < n; ++v) remaining_parents[v] = static_cast<int>(parents[v].size());

    std::vector<char> placed(n, 0);
    std::vector<int> order;
    order.reserve(n);
    for (int step = 0; step < n; ++step) {
        int next = -1;
        for (int v = 0; v < n; ++v) {
            if (!placed[v] && remaining_parents[v] == 0) {
                next = v;
                break;
            }
        }
        if (next < 0) {
            int cursor = 0;
            while (placed[cursor]) ++cursor;
            std::vector<char> seen(n, 0);
            while (!seen[cursor]) {
                seen[cursor] = 1;
                for (const auto& [p, w] : parents[cursor]) {
                    if (!placed[p]) {
                        cursor = p;
                        break;
                    }
                }
            }
            throw Error("scm: cycle detected through variable '" + names[cursor] + "'");
        }
        placed[next] = 1;
        order.push_back(next);
        for (int v = 0; v < n; ++v) {
            if (placed[v]) continue;
            for (const auto& [p, w] : parents[v])
                if (p == next) --remaining_parents[v];
        }
    }
    return order;
}

}  // namespace

LinearScm::LinearScm(std::vector<VariableSpec> variables, std::vector<ScmEdge> edges) {
    if (variables.empty()) throw Error("scm: no variables declared");
    std::unordered_map<std::string, int> index;
    intercepts_.resize(static_cast<Eigen::Index>(variables.size()));
    noise_std_.resize(static_cast<Eigen::Index>(variables.size()));
    for (const auto& v : variables) {
        if (index.count(v.name)) throw Error("scm: variable '" + v.name + "' declared twice");
        if (!(v.noise_std >= 0.0))
            throw Error("scm: variable '" + v.name + "' has negative noise std");
        int i = static_cast<int>(names_.size());
        index[v.name] = i;
        names_.push_back(v.name);
        intercepts_(i) = v.intercept;
        noise_std_(i) = v.noise_std;
    }
    parents_.assign(names_.size(), {});
    for (const auto& e : edges) {
        auto pit = index.find(e.parent);
        auto cit = index.find(e.child);
        if (pit == index.end())
            throw Error("scm: edge references undeclared variable '" + e.parent + "'");
        if (cit == index.end())
            throw Error("scm: edge references undeclared variable '" + e.child + "'");
        if (pit->second == cit->second)
            throw Error("scm: self-loop on variable '" + e.parent + "'");
        for (const auto& [p, w] : parents_[cit->second])
            if (p == pit->second)
                throw Error("scm: duplicate edge " + e.parent + " -> " + e.child);
        parents_[cit->second].emplace_back(pit->second, e.weight);
    }
    topo_ = topological_sort(names_, parents_);
    for (int v : topo_) topo_names_.push_back(names_[v]);
}

int LinearScm::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    throw Error("scm: unknown variable '" + name + "'");
}

double LinearScm::coefficient(const std::string& child, const std::string& parent) const {
    int c = index_of(child);
    int p = index_of(parent);
    for (const auto& [pi, w] : parents_[c])
        if (pi == p) return w;
    return 0.0;
}

std::vector<int> LinearScm::intervened_indices(const Intervention& iv) const {
    std::vector<int> result;
    for (const auto& [name, value] : iv.assignments()) result.push_back(index_of(name));
    return result;
}

Table LinearScm::sample(long n, std::uint64_t seed, const Intervention& iv) const {
    if (n < 1) throw Error("scm: sample size must be >= 1");
    const int d = static_cast<int>(names_.size());
    std::vector<double> pinned(d, 0.0);
    std::vector<char> is_pinned(d, 0);
    {
        std::size_t k = 0;
        auto idx = intervened_indices(iv);
        for (const auto& [name, value] : iv.assignments()) {
            pinned[idx[k]] = value;
            is_pinned[idx[k]] = 1;
            ++k;
        }
    }

    Table out;
    out.columns = names_;
    out.values.resize(n, d);
    Eigen::VectorXd noise(d);
    Eigen::VectorXd x(d);
    for (long row = 0; row < n; ++row) {
        CounterRng rng(seed, static_cast<std::uint64_t>(row));
        // Noise drawn in declaration order for every variable, pinned or
        // not, so the stream layout is stable across interventions.
        for (int v = 0; v < d; ++v) noise(v) = rng.normal();
        for (int v : topo_) {
            if (is_pinned[v]) {
                x(v) = pinned[v];
                continue;
            }
            double value = intercepts_(v);
            for (const auto& [p, w] : parents_[v]) value += w * x(p);
            x(v) = value + noise_std_(v) * noise(v);
        }
        out.values.row(row) = x.transpose();
    }
    return out;
}

MomentSummary LinearScm::analytic_moments(const Intervention& iv) const {
    const int d = static_cast<int>(names_.size());
    Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(d, d);  // coeff(child, parent)
    Eigen::VectorXd c = intercepts_;
    Eigen::VectorXd noise_var = noise_std_.array().square();
    for (int v = 0; v < d; ++v)
        for (const auto& [p, w] : parents_[v]) coeff(v, p) = w;
    auto idx = intervened_indices(iv);
    {
        std::size_t k = 0;
        for (const auto& [name, value] : iv.assignments()) {
            coeff.row(idx[k]).setZero();
            c(idx[k]) = value;
            noise_var(idx[k]) = 0.0;
            ++k;
        }
    }
    // X = coeff X + c + eps  =>  X = (I - coeff)^-1 (c + eps).
    Eigen::MatrixXd transfer =
        (Eigen::MatrixXd::Identity(d, d) - coeff).partialPivLu().solve(Eigen::MatrixXd::Identity(d, d));
    MomentSummary m;
    m.variables = names_;
    m.mean = transfer * c;
    m.covariance = transfer * noise_var.asDiagonal() * transfer.transpose();
    m.covariance = ((m.covariance + m.covariance.transpose()) / 2.0).eval();  // exact symmetry
    return m;
}

// ---------------------------------------------------------------------------
// Definition file format, one statement per line:
//   variable <name> intercept <value> noise <std>
//   edge <parent> -> <child> <weight>
// '#' starts a comment.

LinearScm LinearScm::parse(std::istream& in, const std::string& origin) {
    std::vector<VariableSpec> vars;
    std::vector<ScmEdge> edges;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        auto fail = [&](const std::string& what) {
            throw Error("scm: " + origin + ":" + std::to_string(line_no) + ": " + what);
        };
        if (kind == "variable") {
            VariableSpec v;
            std::string kw1, kw2;
            if (!(ls >> v.name >> kw1 >> v.intercept >> kw2 >> v.noise_std) ||
                kw1 != "intercept" || kw2 != "noise")
                fail("expected 'variable <name> intercept <v> noise <std>'");
            vars.push_back(v);
        } else if (kind == "edge") {
            ScmEdge e;
            std::string arrow;
            if (!(ls >> e.parent >> arrow >> e.child >> e.weight) || arrow != "->")
                fail("expected 'edge <parent> -> <child> <weight>'");
            edges.push_back(e);
        } else {
            fail("unknown statement '" + kind + "'");
        }
    }
    return LinearScm(std::move(vars), std::move(edges));
}

LinearScm LinearScm::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("scm: cannot open '" + path + "'");
    return parse(in, path);
}

void LinearScm::write_definition(std::ostream& out) const {
    out << std::setprecision(17);
    for (std::size_t v = 0; v < names_.size(); ++v)
        out << "variable " << names_[v] << " intercept " << intercepts_(static_cast<Eigen::Index>(v))
            << " noise " << noise_std_(static_cast<Eigen::Index>(v)) << "\n";
    for (std::size_t v = 0; v < names_.size(); ++v)
        for (const auto& [p, w] : parents_[v])
            out << "edge " << names_[p] << " -> " << names_[v] << " " << w << "\n";
}

}  // namespace cage
