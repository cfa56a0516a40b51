#pragma once

#include <texforge/crystal_plasticity.hpp>
#include <texforge/mesh.hpp>

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace texforge {

/// Added to the normalization denominator q.u.
inline constexpr double kNormEpsilon = 1e-12;
/// Below this post-ReLU mass the output is considered dead.
inline constexpr double kDeadOutputGuard = 1e-8;
inline constexpr int kDefaultHiddenWidth = 760;

struct TrainConfig {
    int batch_size = 128;
    int epochs = 310;  // ends a warm-restart cycle with the defaults below
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Cosine annealing with warm restarts: the first cycle lasts restart_period
    // epochs and every later one period_multiplier times the previous.
    int restart_period = 10;
    int period_multiplier = 2;
    double lr_max = 1e-3;
    double lr_min = 1e-5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Learning rate at a fractional epoch position.
double sgdr_learning_rate(const TrainConfig& cfg, double epoch);

/// input -> tanh hidden layer -> linear -> ReLU -> division by q.u.
/// Weights act on column vectors, so batches are stored one sample per column.
struct MlpModel {
    ProcessMode mode = ProcessMode::from_id(1);
    Eigen::MatrixXd m0;  // hidden x input
    Eigen::VectorXd b0;
    Eigen::MatrixXd m1;  // output x hidden
    Eigen::VectorXd b1;
    Eigen::VectorXd norm_weights;  // mesh q
    std::optional<TrainConfig> training;  // echo of the last training run

    std::array<int, 3> dims() const {
        return {static_cast<int>(m0.cols()), static_cast<int>(m0.rows()), static_cast<int>(m1.rows())};
    }
    /// Throws InvalidArgument if the shapes disagree.
    void validate() const;
};

/// Glorot-uniform weights drawn from a stream seeded with `seed`, the first layer
/// divided by the norm of the uniform ODF; hidden biases zero, output biases at
/// the uniform density 1 / sum(q).
MlpModel initialize_model(ProcessMode mode, const Eigen::VectorXd& norm_weights,
                          std::uint64_t seed, int hidden = kDefaultHiddenWidth);

Odf forward(const MlpModel& model, const Odf& a);
/// Columns of `inputs` are samples.
Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs);

/// (1/B) sum_b sum_i w_i (y_true - y_pred)^2 / sum_i w_i over the columns b.
double wmse(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred, const Eigen::VectorXd& w);

struct Gradients {
    Eigen::MatrixXd m0;
    Eigen::VectorXd b0;
    Eigen::MatrixXd m1;
    Eigen::VectorXd b1;
    double loss = 0;
};

/// Exact gradient of wmse(targets, forward_batch(inputs), w) with respect to every
/// parameter.  The ReLU subgradient at 0 is 0.
Gradients backward(const MlpModel& model, const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets, const Eigen::VectorXd& w);

/// Inputs and targets for one mode, one sample per column.
struct TrainingSet {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;

    Eigen::Index size() const { return inputs.cols(); }
};

struct LossHistory {
    // Entry 0 is the untrained model, entry e the model after epoch e.
    std::vector<double> train;
    std::vector<double> test;
};

struct TrainResult {
    MlpModel model;
    LossHistory history;
};

/// Mini-batch Adam over the train set, losses weighted by model.norm_weights.
/// Deterministic in cfg.seed.  An empty test set records no test losses.
TrainResult train(MlpModel model, const TrainingSet& train_set, const TrainingSet& test_set,
                  const TrainConfig& cfg);

/// One forward pass per mode; `models` must hold every mode exactly once, and
/// the result follows ascending mode id.
std::vector<Odf> predict_all_modes(const std::vector<MlpModel>& models, const Odf& a);

/// Sorts models by mode id and throws ConfigurationError unless all 31 are present once.
std::vector<MlpModel> order_by_mode(std::vector<MlpModel> models);

}  // namespace texforge
