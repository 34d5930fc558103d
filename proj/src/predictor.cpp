#include "cage/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "cage/error.hpp"
#include "cage/rng.hpp"

namespace cage {

std::string to_string(LossKind kind) { return kind == LossKind::mse ? "mse" : "bce"; }

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse") return LossKind::mse;
    if (s == "bce") return LossKind::bce;
    throw Error("loss: unknown kind '" + s + "' (expected mse|bce)");
}

namespace {

constexpr double kBceClamp = 1e-12;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double loss_pointwise(LossKind kind, double prediction, double target) {
    if (kind == LossKind::mse) {
        double r = prediction - target;
        return r * r;
    }
    if (target != 0.0 && target != 1.0)
        throw Error("loss: bce target must be 0 or 1, got " + std::to_string(target));
    double p = std::clamp(prediction, kBceClamp, 1.0 - kBceClamp);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double compute_loss(LossKind kind, const Eigen::VectorXd& predictions,
                    const Eigen::VectorXd& targets) {
    if (predictions.size() != targets.size())
        throw Error("loss: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(targets.size()) + " targets");
    if (predictions.size() == 0) throw Error("loss: empty input");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < predictions.size(); ++i)
        acc += loss_pointwise(kind, predictions(i), targets(i));
    return acc / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// Forward / backward.

namespace detail {

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x,
                            OutputTransform transform) {
    Eigen::MatrixXd a = x.transpose();  // fan_in x batch
    const std::size_t n_layers = params.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        a = (params.weights[l] * a).colwise() + params.biases[l];
        if (l + 1 < n_layers) a = a.cwiseMax(0.0);  // ReLU on hidden layers
    }
    Eigen::VectorXd out = a.row(0).transpose();
    if (transform == OutputTransform::logistic)
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = logistic(out(i));
    return out;
}

double mlp_loss_and_grad(const MlpParams& params, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& y, LossKind loss, OutputTransform transform,
                         MlpParams& grad) {
    const std::size_t n_layers = params.weights.size();
    const double batch = static_cast<double>(x.rows());

    std::vector<Eigen::MatrixXd> activations(n_layers + 1);
    activations[0] = x.transpose();
    std::vector<Eigen::MatrixXd> pre(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = (params.weights[l] * activations[l]).colwise() + params.biases[l];
        activations[l + 1] = (l + 1 < n_layers) ? pre[l].cwiseMax(0.0) : pre[l];
    }

    Eigen::VectorXd z = activations[n_layers].row(0).transpose();
    Eigen::VectorXd out = z;
    if (transform == OutputTransform::logistic)
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = logistic(out(i));
    double total_loss = compute_loss(loss, out, y);

    // d(loss)/d(pre-activation output). For logistic + bce the two chain
    // through to the same (p - y)/n form.
    Eigen::RowVectorXd delta(out.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (loss == LossKind::mse) {
            double d = 2.0 * (out(i) - y(i)) / batch;
            if (transform == OutputTransform::logistic) d *= out(i) * (1.0 - out(i));
            delta(i) = d;
        } else {
            if (transform != OutputTransform::logistic)
                throw Error("mlp: bce loss requires the logistic output transform");
            delta(i) = (out(i) - y(i)) / batch;
        }
    }

    grad.weights.assign(n_layers, {});
    grad.biases.assign(n_layers, {});
    Eigen::MatrixXd d = delta;  // fan_out x batch, starting at the output layer
    for (std::size_t l = n_layers; l-- > 0;) {
        grad.weights[l] = d * activations[l].transpose();
        grad.biases[l] = d.rowwise().sum();
        if (l > 0) {
            d = params.weights[l].transpose() * d;
            d = d.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
    }
    return total_loss;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Predictor.

Predictor Predictor::linear(std::vector<std::string> features, Eigen::VectorXd weights,
                            double bias, OutputTransform transform) {
    if (static_cast<std::size_t>(weights.size()) != features.size())
        throw Error("predictor: weight count does not match feature count");
    Predictor p;
    p.kind_ = Kind::linear;
    p.features_ = std::move(features);
    p.params_.weights.push_back(weights.transpose());
    p.params_.biases.push_back(Eigen::VectorXd::Constant(1, bias));
    p.transform_ = transform;
    return p;
}

Predictor Predictor::mlp(std::vector<std::string> features, detail::MlpParams params,
                         OutputTransform transform) {
    if (params.weights.empty() || params.weights.size() != params.biases.size())
        throw Error("predictor: inconsistent mlp parameter shapes");
    Eigen::Index fan_in = static_cast<Eigen::Index>(features.size());
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        if (params.weights[l].cols() != fan_in || params.biases[l].size() != params.weights[l].rows())
            throw Error("predictor: layer " + std::to_string(l) + " shape mismatch");
        fan_in = params.weights[l].rows();
    }
    if (fan_in != 1) throw Error("predictor: final layer must have one output");
    Predictor p;
    p.kind_ = Kind::mlp;
    p.features_ = std::move(features);
    p.params_ = std::move(params);
    p.transform_ = transform;
    return p;
}

std::vector<int> Predictor::hidden_widths() const {
    std::vector<int> widths;
    for (std::size_t l = 0; l + 1 < params_.weights.size(); ++l)
        widths.push_back(static_cast<int>(params_.weights[l].rows()));
    return widths;
}

double Predictor::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (kind_ == Kind::linear) {
        double z = params_.weights[0].row(0).dot(row) + params_.biases[0](0);
        return transform_ == OutputTransform::logistic ? logistic(z) : z;
    }
    Eigen::MatrixXd x = row;
    return detail::mlp_forward(params_, x, transform_)(0);
}

Eigen::VectorXd Predictor::predict_matrix(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != static_cast<Eigen::Index>(features_.size()))
        throw Error("predictor: input has " + std::to_string(rows.cols()) +
                    " columns, model expects " + std::to_string(features_.size()));
    if (rows.rows() == 0) return Eigen::VectorXd(0);
    if (kind_ == Kind::linear) {
        Eigen::VectorXd z =
            (rows * params_.weights[0].row(0).transpose()).array() + params_.biases[0](0);
        if (transform_ == OutputTransform::logistic)
            for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = logistic(z(i));
        return z;
    }
    return detail::mlp_forward(params_, rows, transform_);
}

Eigen::VectorXd Predictor::predict_batch(const Table& rows) const {
    if (rows.columns != features_) {
        for (const auto& f : features_)
            if (rows.column_index(f) < 0)
                throw Error("predictor: input is missing feature column '" + f + "'");
        for (const auto& c : rows.columns)
            if (std::find(features_.begin(), features_.end(), c) == features_.end())
                throw Error("predictor: input has extra column '" + c + "'");
        throw Error("predictor: input columns are ordered differently from the model's features");
    }
    return predict_matrix(rows.values);
}

// ---------------------------------------------------------------------------
// Fitting.

Predictor fit_linear(const Table& train, const std::string& target) {
    Table features = train.without_column(target);
    Eigen::VectorXd y = train.col(target);
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n < d + 1)
        throw Error("fit_linear: need at least " + std::to_string(d + 1) + " rows for " +
                    std::to_string(d) + " features, got " + std::to_string(n));
    if (!features.values.allFinite() || !y.allFinite())
        throw Error("fit_linear: non-finite entry in training data");

    Eigen::MatrixXd design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = features.values;
    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::VectorXd rhs = design.transpose() * y;

    bool fallback = false;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        fallback = true;
        gram.diagonal().array() += 1e-8;
        llt.compute(gram);
        if (llt.info() != Eigen::Success)
            throw Error("fit_linear: normal equations singular even after ridge");
    }
    Eigen::VectorXd beta = llt.solve(rhs);

    Predictor p = Predictor::linear(features.columns, beta.tail(d), beta(0));
    p.ridge_fallback_ = fallback;
    p.final_training_loss_ = compute_loss(LossKind::mse, p.predict_matrix(features.values), y);
    return p;
}

Predictor fit_mlp(const Table& train, const std::string& target, const MlpOptions& options,
                  std::uint64_t seed) {
    if (options.hidden_layers.empty()) throw Error("fit_mlp: hidden layer list is empty");
    for (int w : options.hidden_layers)
        if (w < 1) throw Error("fit_mlp: hidden layer width must be >= 1");
    if (options.epochs < 1) throw Error("fit_mlp: epochs must be >= 1");
    if (options.batch_size < 1) throw Error("fit_mlp: batch size must be >= 1");

    Table features = train.without_column(target);
    Eigen::VectorXd y = train.col(target);
    if (!features.values.allFinite() || !y.allFinite())
        throw Error("fit_mlp: non-finite entry in training data");
    const Eigen::Index n = features.rows();
    if (n < 1) throw Error("fit_mlp: empty training data");
    OutputTransform transform =
        options.loss == LossKind::bce ? OutputTransform::logistic : OutputTransform::identity;

    // He-style init, drawn from the (seed, layer) streams.
    detail::MlpParams params;
    {
        std::vector<int> sizes;
        sizes.push_back(static_cast<int>(features.cols()));
        for (int w : options.hidden_layers) sizes.push_back(w);
        sizes.push_back(1);
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            CounterRng rng(seed, l);
            double scale = std::sqrt(2.0 / sizes[l]);
            Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng.normal();
            params.weights.push_back(std::move(w));
            params.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
        }
    }

    detail::MlpParams m_state, v_state, grad;
    auto zeros_like = [](const detail::MlpParams& src, detail::MlpParams& dst) {
        dst.weights.clear();
        dst.biases.clear();
        for (std::size_t l = 0; l < src.weights.size(); ++l) {
            dst.weights.push_back(Eigen::MatrixXd::Zero(src.weights[l].rows(), src.weights[l].cols()));
            dst.biases.push_back(Eigen::VectorXd::Zero(src.biases[l].size()));
        }
    };
    zeros_like(params, m_state);
    zeros_like(params, v_state);

    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    long adam_step = 0;
    double epoch_loss = 0.0;

    for (long epoch = 0; epoch < options.epochs; ++epoch) {
        CounterRng shuffle_rng(seed, 1000 + static_cast<std::uint64_t>(epoch));
        for (long i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);

        epoch_loss = 0.0;
        long batches = 0;
        for (long start = 0; start < n; start += options.batch_size) {
            long len = std::min<long>(options.batch_size, n - start);
            Eigen::MatrixXd xb(len, features.cols());
            Eigen::VectorXd yb(len);
            for (long r = 0; r < len; ++r) {
                xb.row(r) = features.values.row(order[start + r]);
                yb(r) = y(order[start + r]);
            }
            double batch_loss =
                detail::mlp_loss_and_grad(params, xb, yb, options.loss, transform, grad);
            if (!std::isfinite(batch_loss))
                throw Error("fit_mlp: training diverged (non-finite loss at epoch " +
                            std::to_string(epoch) + ")");
            epoch_loss += batch_loss;
            ++batches;

            ++adam_step;
            double corr1 = 1.0 - std::pow(beta1, static_cast<double>(adam_step));
            double corr2 = 1.0 - std::pow(beta2, static_cast<double>(adam_step));
            for (std::size_t l = 0; l < params.weights.size(); ++l) {
                m_state.weights[l] = beta1 * m_state.weights[l] + (1.0 - beta1) * grad.weights[l];
                v_state.weights[l] =
                    beta2 * v_state.weights[l] + (1.0 - beta2) * grad.weights[l].array().square().matrix();
                params.weights[l] -=
                    (options.learning_rate * (m_state.weights[l] / corr1).array() /
                     ((v_state.weights[l] / corr2).array().sqrt() + eps))
                        .matrix();
                m_state.biases[l] = beta1 * m_state.biases[l] + (1.0 - beta1) * grad.biases[l];
                v_state.biases[l] =
                    beta2 * v_state.biases[l] + (1.0 - beta2) * grad.biases[l].array().square().matrix();
                params.biases[l] -=
                    (options.learning_rate * (m_state.biases[l] / corr1).array() /
                     ((v_state.biases[l] / corr2).array().sqrt() + eps))
                        .matrix();
            }
        }
        epoch_loss /= static_cast<double>(batches);
    }

    Predictor p = Predictor::mlp(features.columns, std::move(params), transform);
    p.final_training_loss_ = epoch_loss;
    return p;
}

double mean_prediction(const Predictor& p, const Table& data) {
    if (data.rows() == 0) throw Error("mean_prediction: empty data");
    return p.predict_batch(data).mean();
}

// ---------------------------------------------------------------------------
// Flat text save/load.

void Predictor::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("predictor: cannot write '" + path + "'");
    out << std::setprecision(17);
    out << "kind " << (kind_ == Kind::linear ? "linear" : "mlp") << "\n";
    out << "transform " << (transform_ == OutputTransform::identity ? "identity" : "logistic")
        << "\n";
    out << "features " << features_.size();
    for (const auto& f : features_) out << " " << f;
    out << "\n";
    out << "layers " << params_.weights.size();
    for (const auto& w : params_.weights) out << " " << w.rows();
    out << "\n";
    for (std::size_t l = 0; l < params_.weights.size(); ++l) {
        out << "layer " << l << "\n";
        const auto& w = params_.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) out << (j ? " " : "") << w(i, j);
            out << "\n";
        }
        for (Eigen::Index i = 0; i < params_.biases[l].size(); ++i)
            out << (i ? " " : "") << params_.biases[l](i);
        out << "\n";
    }
    if (!out) throw Error("predictor: write to '" + path + "' failed");
}

Predictor Predictor::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("predictor: cannot open '" + path + "'");
    auto fail = [&](const std::string& what) {
        throw Error("predictor: " + path + ": " + what);
    };
    std::string kw, kind_str, transform_str;
    if (!(in >> kw >> kind_str) || kw != "kind") fail("expected 'kind'");
    if (!(in >> kw >> transform_str) || kw != "transform") fail("expected 'transform'");
    std::size_t n_features = 0;
    if (!(in >> kw >> n_features) || kw != "features") fail("expected 'features'");
    std::vector<std::string> features(n_features);
    for (auto& f : features)
        if (!(in >> f)) fail("truncated feature list");
    std::size_t n_layers = 0;
    if (!(in >> kw >> n_layers) || kw != "layers" || n_layers == 0) fail("expected 'layers'");
    std::vector<Eigen::Index> outs(n_layers);
    for (auto& o : outs)
        if (!(in >> o)) fail("truncated layer sizes");

    detail::MlpParams params;
    Eigen::Index fan_in = static_cast<Eigen::Index>(n_features);
    for (std::size_t l = 0; l < n_layers; ++l) {
        std::size_t idx = 0;
        if (!(in >> kw >> idx) || kw != "layer" || idx != l) fail("expected 'layer' header");
        Eigen::MatrixXd w(outs[l], fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                if (!(in >> w(i, j))) fail("truncated weights");
        Eigen::VectorXd b(outs[l]);
        for (Eigen::Index i = 0; i < b.size(); ++i)
            if (!(in >> b(i))) fail("truncated biases");
        params.weights.push_back(std::move(w));
        params.biases.push_back(std::move(b));
        fan_in = outs[l];
    }

    OutputTransform transform;
    if (transform_str == "identity")
        transform = OutputTransform::identity;
    else if (transform_str == "logistic")
        transform = OutputTransform::logistic;
    else {
        fail("unknown transform '" + transform_str + "'");
        return Predictor();  // unreachable
    }

    if (kind_str == "linear") {
        if (params.weights.size() != 1 || params.weights[0].rows() != 1)
            fail("linear model must have exactly one 1-row layer");
        return Predictor::linear(std::move(features), params.weights[0].row(0).transpose(),
                                 params.biases[0](0), transform);
    }
    if (kind_str != "mlp") fail("unknown kind '" + kind_str + "'");
    return Predictor::mlp(std::move(features), std::move(params), transform);
}

}  // namespace cage
