#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cage/table.hpp"

namespace cage {

enum class LossKind { mse, bce };
enum class OutputTransform { identity, logistic };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& s);

namespace detail {

struct MlpParams {
    std::vector<Eigen::MatrixXd> weights;  // layer l: fan_out x fan_in
    std::vector<Eigen::VectorXd> biases;
};

// Forward + backward pass over a batch; returns the batch loss and fills
// `grad` with d(loss)/d(param). Exposed so tests can finite-difference it.
double mlp_loss_and_grad(const MlpParams& params, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& y, LossKind loss, OutputTransform transform,
                         MlpParams& grad);

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x,
                            OutputTransform transform);

}  // namespace detail

// Trained model f: a single affine map (linear) or a ReLU feed-forward
// network (mlp), optionally followed by a logistic output transform.
class Predictor {
public:
    enum class Kind { linear, mlp };

    static Predictor linear(std::vector<std::string> features, Eigen::VectorXd weights,
                            double bias, OutputTransform transform = OutputTransform::identity);
    static Predictor mlp(std::vector<std::string> features, detail::MlpParams params,
                         OutputTransform transform);

    Kind kind() const { return kind_; }
    const std::vector<std::string>& features() const { return features_; }
    OutputTransform output_transform() const { return transform_; }
    // Hidden layer widths (empty for linear).
    std::vector<int> hidden_widths() const;
    const detail::MlpParams& params() const { return params_; }

    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    // Fast path: rows already aligned with features(); no name checks.
    Eigen::VectorXd predict_matrix(const Eigen::MatrixXd& rows) const;
    // Checked path: column names must equal features() in order.
    Eigen::VectorXd predict_batch(const Table& rows) const;

    void save(const std::string& path) const;
    static Predictor load(const std::string& path);

    double final_training_loss() const { return final_training_loss_; }
    bool ridge_fallback() const { return ridge_fallback_; }

private:
    Predictor() = default;

    Kind kind_ = Kind::linear;
    std::vector<std::string> features_;
    detail::MlpParams params_;
    OutputTransform transform_ = OutputTransform::identity;
    double final_training_loss_ = 0.0;
    bool ridge_fallback_ = false;

    friend Predictor fit_linear(const Table&, const std::string&);
    friend Predictor fit_mlp(const Table&, const std::string&, const struct MlpOptions&,
                             std::uint64_t);
};

// Ordinary least squares on all non-target columns. Singular Gram matrices
// fall back to a 1e-8 ridge, recorded on the returned predictor.
Predictor fit_linear(const Table& train, const std::string& target);

struct MlpOptions {
    std::vector<int> hidden_layers{100};
    long epochs = 200;
    double learning_rate = 1e-3;
    int batch_size = 32;
    LossKind loss = LossKind::mse;  // bce switches the output to logistic
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) with seeded init and minibatch
// order; deterministic for a fixed seed.
Predictor fit_mlp(const Table& train, const std::string& target, const MlpOptions& options,
                  std::uint64_t seed);

double loss_pointwise(LossKind kind, double prediction, double target);
double compute_loss(LossKind kind, const Eigen::VectorXd& predictions,
                    const Eigen::VectorXd& targets);

double mean_prediction(const Predictor& p, const Table& data);

}  // namespace cage
