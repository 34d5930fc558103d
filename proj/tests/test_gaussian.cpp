#include <doctest.h>

#include <cmath>

#include "cage/dataset.hpp"
#include "cage/gaussian.hpp"
#include "cage/rng.hpp"
#include "cage/scm.hpp"

using namespace cage;

namespace {

GaussianModel bivariate(double rho, double m1 = 0.0, double m2 = 0.0) {
    Eigen::VectorXd mean(2);
    mean << m1, m2;
    Eigen::MatrixXd cov(2, 2);
    cov << 1.0, rho, rho, 1.0;
    return GaussianModel({"X1", "X2"}, mean, cov);
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double ma = a.mean(), mb = b.mean();
    Eigen::ArrayXd ca = a.array() - ma, cb = b.array() - mb;
    return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

// Random symmetric positive definite covariance for property checks.
GaussianModel random_model(int d, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    Eigen::MatrixXd cov = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd mean(d);
    for (int i = 0; i < d; ++i) mean(i) = 2.0 * rng.normal();
    std::vector<std::string> names;
    for (int i = 0; i < d; ++i) names.push_back("F" + std::to_string(i));
    return GaussianModel(names, mean, cov);
}

}  // namespace

TEST_CASE("fit recovers independent standard normals") {
    SyntheticBundle bundle = generate_synthetic(SyntheticKind::direct_cause, 100000, 17);
    GaussianModel g = fit_gaussian(bundle.data.features);
    for (int i = 0; i < g.dim(); ++i) {
        CHECK(std::abs(g.mean()(i)) < 0.02);
        for (int j = 0; j < g.dim(); ++j)
            if (i != j) CHECK(std::abs(g.covariance()(i, j)) < 0.02);
    }
}

TEST_CASE("fit on constant data leaves only the ridge") {
    Table t({"a", "b"}, Eigen::MatrixXd::Constant(2, 2, 3.0));
    GaussianModel g = fit_gaussian(t, 1e-6);
    CHECK(g.covariance()(0, 0) == doctest::Approx(1e-6));
    CHECK(g.covariance()(1, 1) == doctest::Approx(1e-6));
    CHECK(g.covariance()(0, 1) == 0.0);
}

TEST_CASE("fit variance is consistent") {
    CounterRng rng(3, 0);
    Eigen::MatrixXd col(100000, 1);
    for (int i = 0; i < col.rows(); ++i) col(i, 0) = rng.normal();
    GaussianModel g = fit_gaussian(Table({"z"}, col), 0.0);
    CHECK(std::abs(g.covariance()(0, 0) - 1.0) < 0.02);
}

TEST_CASE("fit rejects bad input") {
    CHECK_THROWS_AS(fit_gaussian(Table({"a"}, Eigen::MatrixXd::Zero(1, 1))), Error);
    Eigen::MatrixXd nan_values = Eigen::MatrixXd::Zero(3, 1);
    nan_values(1, 0) = std::nan("");
    CHECK_THROWS_AS(fit_gaussian(Table({"a"}, nan_values)), Error);
    // zero ridge on degenerate data cannot produce a usable model
    CHECK_THROWS_AS(fit_gaussian(Table({"a", "b"}, Eigen::MatrixXd::Constant(3, 2, 1.0)), 0.0),
                    Error);
}

TEST_CASE("conditioning matches the Schur complement by hand") {
    GaussianModel g = bivariate(0.5);
    GaussianModel c = condition(g, {{"X1", 2.0}});
    REQUIRE(c.dim() == 1);
    CHECK(c.names()[0] == "X2");
    CHECK(c.mean()(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(c.covariance()(0, 0) == doctest::Approx(0.75).epsilon(1e-12));

    // conditioning on nothing is the identity
    GaussianModel same = condition(g, {});
    CHECK(same.mean() == g.mean());
    CHECK(same.covariance() == g.covariance());

    // under independence the conditional equals the marginal
    GaussianModel ind = condition(bivariate(0.0), {{"X1", 123.0}});
    CHECK(ind.mean()(0) == doctest::Approx(0.0));
    CHECK(ind.covariance()(0, 0) == doctest::Approx(1.0));

    CHECK_THROWS_AS(condition(g, {{"X1", 0.0}, {"X2", 0.0}}), Error);
    CHECK_THROWS_AS(condition(g, {{"X1", 0.0}, {"X1", 1.0}}), Error);
}

TEST_CASE("sequential conditioning equals joint conditioning") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        GaussianModel g = random_model(5, seed);
        GaussianModel joint = condition(g, {{"F1", 0.3}, {"F3", -1.2}});
        GaussianModel seq = condition(condition(g, {{"F1", 0.3}}), {{"F3", -1.2}});
        CHECK((joint.mean() - seq.mean()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((joint.covariance() - seq.covariance()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("conditional covariance ignores the conditioning values and stays PSD") {
    GaussianModel g = random_model(4, 9);
    GaussianModel a = condition(g, {{"F0", -5.0}, {"F2", 1.0}});
    GaussianModel b = condition(g, {{"F0", 40.0}, {"F2", -3.5}});
    CHECK((a.covariance() - b.covariance()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.covariance(), Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("draw: independence, degeneracy, correlation recovery") {
    Table ind = draw(bivariate(0.0), 100000, 1);
    CHECK(std::abs(correlation(ind.values.col(0), ind.values.col(1))) < 0.02);

    Eigen::VectorXd mean(1);
    mean << 3.0;
    GaussianModel point({"a"}, mean, Eigen::MatrixXd::Zero(1, 1), 1e-12);
    Table near = draw(point, 1000, 2);
    CHECK((near.values.array() - 3.0).abs().maxCoeff() < 1e-5);

    Table corr = draw(bivariate(0.9), 100000, 3);
    CHECK(std::abs(correlation(corr.values.col(0), corr.values.col(1)) - 0.9) < 0.01);
}

TEST_CASE("gibbs chain reproduces the joint") {
    GaussianModel g = bivariate(0.5);
    GibbsConfig cfg;  // defaults: burn_in 100, sweeps 1, thinning 5
    const int n = 5000;
    Eigen::MatrixXd draws(n, 2);
    for (int k = 0; k < n; ++k)
        draws.row(k) = gibbs_draw(g, {"X1", "X2"}, {}, cfg, derive_seed(7, k)).transpose();
    CHECK(std::abs(draws.col(0).mean()) < 0.05);
    CHECK(std::abs(draws.col(1).mean()) < 0.05);
    CHECK(std::abs(correlation(draws.col(0), draws.col(1)) - 0.5) < 0.05);
}

TEST_CASE("single-site gibbs is direct sampling, bitwise under matched streams") {
    GaussianModel g = bivariate(0.5);
    GibbsConfig cfg;
    cfg.burn_in = 0;
    cfg.sweeps = 1;
    cfg.thinning = 1;
    for (std::uint64_t seed : {4u, 5u, 6u}) {
        double via_gibbs = gibbs_draw(g, {"X2"}, {{"X1", 1.3}}, cfg, seed)(0);
        double via_draw = draw(condition(g, {{"X1", 1.3}}), 1, seed).values(0, 0);
        CHECK(via_gibbs == via_draw);
    }
}

TEST_CASE("gibbs on a diagonal covariance matches independent draws") {
    GaussianModel g = bivariate(0.0, 1.0, -2.0);
    GibbsConfig cfg;
    const int n = 10000;
    Eigen::MatrixXd gibbs_samples(n, 2);
    for (int k = 0; k < n; ++k)
        gibbs_samples.row(k) = gibbs_draw(g, {"X1", "X2"}, {}, cfg, derive_seed(11, k)).transpose();
    Table direct = draw(g, n, 12);
    for (int c = 0; c < 2; ++c) {
        CHECK(std::abs(gibbs_samples.col(c).mean() - direct.values.col(c).mean()) < 0.05);
        double v1 = (gibbs_samples.col(c).array() - gibbs_samples.col(c).mean()).square().mean();
        double v2 = (direct.values.col(c).array() - direct.values.col(c).mean()).square().mean();
        CHECK(std::abs(v1 - v2) < 0.05);
    }
}

TEST_CASE("gibbs validates arguments") {
    GaussianModel g = bivariate(0.2);
    GibbsConfig cfg;
    CHECK_THROWS_AS(gibbs_draw(g, {}, {}, cfg, 1), Error);
    CHECK_THROWS_AS(gibbs_draw(g, {"X1"}, {{"X1", 0.0}}, cfg, 1), Error);
    GibbsConfig bad;
    bad.sweeps = 0;
    CHECK_THROWS_AS(gibbs_draw(g, {"X1"}, {}, bad, 1), Error);
}

// ---------------------------------------------------------------------------
// Out-of-coalition completion.

TEST_CASE("full coalition copies the instance without sampling") {
    SyntheticBundle bundle = generate_synthetic(SyntheticKind::markovian, 1000, 5);
    GaussianModel joint = fit_gaussian(bundle.data.features);
    Table out = sample_out_coalition(joint, bundle.chain,
                                     {{"X1", 1.0}, {"X3", 2.0}, {"X2", 3.0}},
                                     {"X1", "X3", "X2"}, 7, SamplerMode::exact, 3);
    CHECK(out.rows() == 7);
    for (int r = 0; r < 7; ++r) {
        CHECK(out.col("X1")(r) == 1.0);
        CHECK(out.col("X3")(r) == 2.0);
        CHECK(out.col("X2")(r) == 3.0);
    }
}

TEST_CASE("empty coalition with one interacting component reproduces the joint") {
    GaussianModel g = bivariate(0.6, 0.5, -0.5);
    ChainGraph chain({{{"X1", "X2"}, ComponentMode::interacting}}, {"X1", "X2"});
    Table sampled = sample_out_coalition(g, chain, {}, {}, 10000, SamplerMode::exact, 21);
    Table direct = draw(g, 10000, 22);
    for (int c = 0; c < 2; ++c)
        CHECK(std::abs(sampled.values.col(c).mean() - direct.values.col(c).mean()) < 0.05);
    CHECK(std::abs(correlation(sampled.values.col(0), sampled.values.col(1)) - 0.6) < 0.05);
}

TEST_CASE("markovian completion draws the mediator from its causal conditional") {
    // True conditional: X2 | x1, x3 ~ N(x1 + x3, 1).
    SyntheticBundle bundle = generate_synthetic(SyntheticKind::markovian, 100000, 31);
    GaussianModel joint = fit_gaussian(bundle.data.features);
    Table out = sample_out_coalition(joint, bundle.chain, {{"X1", 1.5}, {"X3", 0.5}},
                                     {"X1", "X3"}, 10000, SamplerMode::exact, 32);
    Eigen::VectorXd x2 = out.col("X2");
    double mean = x2.mean();
    double var = (x2.array() - mean).square().sum() / static_cast<double>(x2.size() - 1);
    CHECK(std::abs(mean - 2.0) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("confounded components ignore in-coalition siblings") {
    // Correlated pair in one confounded component: intervening on X1 must
    // not move X2, whatever the instance value.
    GaussianModel g = bivariate(0.9);
    ChainGraph chain({{{"X1", "X2"}, ComponentMode::confounded}}, {"X1", "X2"});
    Table low = sample_out_coalition(g, chain, {{"X1", -3.0}}, {"X1"}, 10000,
                                     SamplerMode::exact, 41);
    Table high = sample_out_coalition(g, chain, {{"X1", 3.0}}, {"X1"}, 10000,
                                      SamplerMode::exact, 41);
    CHECK(std::abs(low.col("X2").mean() - high.col("X2").mean()) < 0.05);
    CHECK(std::abs(low.col("X2").mean()) < 0.05);
}

TEST_CASE("interacting components do condition on in-coalition siblings") {
    GaussianModel g = bivariate(0.9);
    ChainGraph chain({{{"X1", "X2"}, ComponentMode::interacting}}, {"X1", "X2"});
    Table out = sample_out_coalition(g, chain, {{"X1", 2.0}}, {"X1"}, 10000,
                                     SamplerMode::exact, 42);
    CHECK(std::abs(out.col("X2").mean() - 1.8) < 0.05);  // rho * x1
    double var = (out.col("X2").array() - out.col("X2").mean()).square().mean();
    CHECK(std::abs(var - (1.0 - 0.81)) < 0.02);
}

TEST_CASE("exact and gibbs completion agree in their first two moments") {
    GaussianModel g = random_model(3, 77);
    ChainGraph chain({{{"F0", "F1", "F2"}, ComponentMode::interacting}}, {"F0", "F1", "F2"});
    Table exact = sample_out_coalition(g, chain, {{"F0", 1.0}}, {"F0"}, 10000,
                                       SamplerMode::exact, 50);
    Table gibbs = sample_out_coalition(g, chain, {{"F0", 1.0}}, {"F0"}, 10000,
                                       SamplerMode::gibbs, 51);
    for (const char* name : {"F1", "F2"}) {
        Eigen::VectorXd a = exact.col(name), b = gibbs.col(name);
        double scale = std::max(1.0, std::abs(a.mean()));
        CHECK(std::abs(a.mean() - b.mean()) / scale < 0.05);
        double va = (a.array() - a.mean()).square().mean();
        double vb = (b.array() - b.mean()).square().mean();
        CHECK(std::abs(va - vb) / std::max(1.0, va) < 0.05);
    }
    CHECK(std::abs(correlation(exact.col("F1"), exact.col("F2")) -
                   correlation(gibbs.col("F1"), gibbs.col("F2"))) < 0.05);
}

TEST_CASE("completion errors carry the component index") {
    GaussianModel g = bivariate(0.5);
    ChainGraph chain({{{"X1"}, ComponentMode::confounded}, {{"X2"}, ComponentMode::confounded}},
                     {"X1", "X2"});
    OutCoalitionSampler sampler(g, chain, SamplerMode::exact);
    Eigen::MatrixXd out;
    Eigen::VectorXd instance(2);
    instance << 0.0, 0.0;
    CHECK_THROWS_AS(sampler.complete(instance, {1}, 1, 0, out), Error);  // bad mask size
    CHECK_THROWS_AS(sample_out_coalition(g, chain, {}, {"X1"}, 1, SamplerMode::exact, 0), Error);
}
