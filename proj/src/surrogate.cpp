#include <texforge/surrogate.hpp>

#include <texforge/errors.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

namespace texforge {

namespace {

// tanh through the vectorized exponential; saturates cleanly to +-1.
Eigen::ArrayXXd tanh_activation(const Eigen::ArrayXXd& z) {
    return 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
}

struct Activations {
    Eigen::MatrixXd h;   // tanh(z1)
    Eigen::MatrixXd z2;
    Eigen::MatrixXd u;   // ReLU(z2)
    Eigen::RowVectorXd s;  // q.u + eps per sample
    Eigen::MatrixXd y;
};

Activations run_forward(const MlpModel& model, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != model.m0.cols())
        throw InvalidArgument("surrogate input has " + std::to_string(inputs.rows()) +
                              " entries, model expects " + std::to_string(model.m0.cols()));
    Activations act;
    act.h = tanh_activation(((model.m0 * inputs).colwise() + model.b0).array()).matrix();
    act.z2 = (model.m1 * act.h).colwise() + model.b1;
    act.u = act.z2.cwiseMax(0.0);
    const Eigen::RowVectorXd mass = model.norm_weights.transpose() * act.u;
    for (Eigen::Index b = 0; b < mass.size(); ++b) {
        if (!(mass(b) >= kDeadOutputGuard))
            throw DeadOutput("surrogate for mode " + model.mode.mask() +
                             " produced no output mass (q.u = " + std::to_string(mass(b)) + ")");
    }
    act.s = mass.array() + kNormEpsilon;
    act.y = act.u.array().rowwise() / act.s.array();
    return act;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
    if (epochs < 0) throw InvalidArgument("epoch count must be non-negative");
    if (restart_period < 1 || period_multiplier < 1)
        throw InvalidArgument("warm-restart period and multiplier must be at least 1");
    if (!(lr_min >= 0) || !(lr_max >= lr_min) || !std::isfinite(lr_max))
        throw InvalidArgument("learning rates must satisfy 0 <= lr_min <= lr_max");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0))
        throw InvalidArgument("invalid Adam constants");
}

double sgdr_learning_rate(const TrainConfig& cfg, double epoch) {
    double period = cfg.restart_period;
    double start = 0;
    while (epoch >= start + period) {
        start += period;
        period *= cfg.period_multiplier;
    }
    const double t = (epoch - start) / period;
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

void MlpModel::validate() const {
    if (m0.rows() != b0.size() || m1.cols() != m0.rows() || m1.rows() != b1.size() ||
        norm_weights.size() != m1.rows() || m0.cols() == 0 || m1.rows() == 0)
        throw InvalidArgument("surrogate model shapes are inconsistent");
}

MlpModel initialize_model(ProcessMode mode, const Eigen::VectorXd& norm_weights,
                          std::uint64_t seed, int hidden) {
    if (hidden < 1) throw InvalidArgument("hidden width must be at least 1");
    const auto n = static_cast<int>(norm_weights.size());
    if (n < 1) throw InvalidArgument("model needs at least one node");

    std::mt19937_64 rng(seed);
    auto glorot = [&rng](int rows, int cols, double gain) {
        const double limit = gain * std::sqrt(6.0 / (rows + cols));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::MatrixXd m(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) m(i, j) = dist(rng);
        return m;
    };
    MlpModel model;
    model.mode = mode;
    // Glorot assumes unit-norm inputs; ODFs sit near the uniform density, whose
    // norm grows with the node count, so the first layer is scaled by its inverse.
    const double uniform_norm = std::sqrt(static_cast<double>(n)) / norm_weights.sum();
    model.m0 = glorot(hidden, n, 1.0 / uniform_norm);
    model.b0 = Eigen::VectorXd::Zero(hidden);
    model.m1 = glorot(n, hidden, 1.0);
    // Output bias at the uniform density keeps every ReLU channel live at the start.
    model.b1 = Eigen::VectorXd::Constant(n, 1.0 / norm_weights.sum());
    model.norm_weights = norm_weights;
    return model;
}

Odf forward(const MlpModel& model, const Odf& a) { return run_forward(model, a).y.col(0); }

Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& inputs) {
    return run_forward(model, inputs).y;
}

double wmse(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred, const Eigen::VectorXd& w) {
    if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols() ||
        w.size() != y_true.rows())
        throw InvalidArgument("wmse: shape mismatch");
    if (y_true.cols() == 0) throw InvalidArgument("wmse: empty batch");
    if ((w.array() < 0).any()) throw InvalidArgument("wmse: negative weight");
    const double total = w.sum();
    if (!(total > 0)) throw InvalidArgument("wmse: weights sum to zero");
    const double weighted = w.dot((y_true - y_pred).array().square().rowwise().sum().matrix());
    return weighted / total / static_cast<double>(y_true.cols());
}

Gradients backward(const MlpModel& model, const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets, const Eigen::VectorXd& w) {
    const Activations act = run_forward(model, inputs);
    Gradients g;
    g.loss = wmse(targets, act.y, w);

    const double scale = 2.0 / (w.sum() * static_cast<double>(inputs.cols()));
    const Eigen::MatrixXd g_y = ((act.y - targets).array().colwise() * (scale * w).array()).matrix();
    // y = u / s with s = q.u + eps.
    const Eigen::RowVectorXd gy_dot_u = (g_y.array() * act.u.array()).colwise().sum();
    const Eigen::RowVectorXd coupling = gy_dot_u.array() / act.s.array().square();
    Eigen::MatrixXd g_z2 = (g_y.array().rowwise() / act.s.array()).matrix() -
                           model.norm_weights * coupling;
    g_z2 = (act.z2.array() > 0).select(g_z2, 0.0);

    g.m1 = g_z2 * act.h.transpose();
    g.b1 = g_z2.rowwise().sum();
    const Eigen::MatrixXd g_z1 =
        ((model.m1.transpose() * g_z2).array() * (1.0 - act.h.array().square())).matrix();
    g.m0 = g_z1 * inputs.transpose();
    g.b0 = g_z1.rowwise().sum();
    return g;
}

namespace {

struct AdamState {
    Eigen::MatrixXd m0_m, m0_v, m1_m, m1_v;
    Eigen::VectorXd b0_m, b0_v, b1_m, b1_v;

    explicit AdamState(const MlpModel& model)
        : m0_m(Eigen::MatrixXd::Zero(model.m0.rows(), model.m0.cols())), m0_v(m0_m),
          m1_m(Eigen::MatrixXd::Zero(model.m1.rows(), model.m1.cols())), m1_v(m1_m),
          b0_m(Eigen::VectorXd::Zero(model.b0.size())), b0_v(b0_m),
          b1_m(Eigen::VectorXd::Zero(model.b1.size())), b1_v(b1_m) {}
};

template <typename Param, typename Grad>
void adam_update(Param& p, const Grad& g, Param& m, Param& v, const TrainConfig& cfg, double lr,
                 long step) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g.cwiseAbs2();
    const double c1 = 1 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1 - std::pow(cfg.beta2, static_cast<double>(step));
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
}

void check_set(const MlpModel& model, const TrainingSet& set, const char* name) {
    if (set.inputs.cols() != set.targets.cols() ||
        (set.size() > 0 && (set.inputs.rows() != model.m0.cols() ||
                            set.targets.rows() != model.m1.rows())))
        throw InvalidArgument(std::string(name) + " set shape does not match the model");
}

}  // namespace

TrainResult train(MlpModel model, const TrainingSet& train_set, const TrainingSet& test_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    model.validate();
    if (train_set.size() == 0) throw InvalidArgument("training set is empty");
    check_set(model, train_set, "training");
    check_set(model, test_set, "test");

    const Eigen::VectorXd& w = model.norm_weights;
    TrainResult result;
    auto record = [&] {
        result.history.train.push_back(wmse(train_set.targets, forward_batch(model, train_set.inputs), w));
        if (test_set.size() > 0)
            result.history.test.push_back(wmse(test_set.targets, forward_batch(model, test_set.inputs), w));
    };
    record();

    // Shuffling draws from its own stream so it does not depend on initialization.
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      0x5eedu};
    std::mt19937_64 rng(seq);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(train_set.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    AdamState adam(model);
    const auto n = static_cast<Eigen::Index>(order.size());
    const Eigen::Index batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    long step = 0;
    Eigen::MatrixXd batch_in, batch_out;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index b = 0; b < batches; ++b) {
            const Eigen::Index begin = b * cfg.batch_size;
            const Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, n - begin);
            batch_in.resize(train_set.inputs.rows(), size);
            batch_out.resize(train_set.targets.rows(), size);
            for (Eigen::Index k = 0; k < size; ++k) {
                batch_in.col(k) = train_set.inputs.col(order[static_cast<std::size_t>(begin + k)]);
                batch_out.col(k) = train_set.targets.col(order[static_cast<std::size_t>(begin + k)]);
            }
            const Gradients g = backward(model, batch_in, batch_out, w);
            const double lr =
                sgdr_learning_rate(cfg, epoch + static_cast<double>(b) / static_cast<double>(batches));
            ++step;
            adam_update(model.m0, g.m0, adam.m0_m, adam.m0_v, cfg, lr, step);
            adam_update(model.b0, g.b0, adam.b0_m, adam.b0_v, cfg, lr, step);
            adam_update(model.m1, g.m1, adam.m1_m, adam.m1_v, cfg, lr, step);
            adam_update(model.b1, g.b1, adam.b1_m, adam.b1_v, cfg, lr, step);
        }
        record();
    }
    model.training = cfg;
    result.model = std::move(model);
    return result;
}

std::vector<MlpModel> order_by_mode(std::vector<MlpModel> models) {
    std::sort(models.begin(), models.end(),
              [](const MlpModel& a, const MlpModel& b) { return a.mode < b.mode; });
    for (int id = 1; id <= ProcessMode::kCount; ++id) {
        const auto idx = static_cast<std::size_t>(id - 1);
        if (idx >= models.size() || models[idx].mode.id() != id)
            throw ConfigurationError("no surrogate model for mode " + ProcessMode::from_id(id).mask());
    }
    if (models.size() != ProcessMode::kCount)
        throw ConfigurationError("duplicate surrogate models: expected 31, got " +
                                 std::to_string(models.size()));
    return models;
}

std::vector<Odf> predict_all_modes(const std::vector<MlpModel>& models, const Odf& a) {
    if (models.size() != ProcessMode::kCount)
        throw ConfigurationError("expected 31 surrogate models, got " + std::to_string(models.size()));
    std::vector<Odf> out;
    out.reserve(models.size());
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (models[k].mode.id() != static_cast<int>(k) + 1)
            throw ConfigurationError("no surrogate model for mode " +
                                     ProcessMode::from_id(static_cast<int>(k) + 1).mask());
        out.push_back(forward(models[k], a));
    }
    return out;
}

}  // namespace texforge
