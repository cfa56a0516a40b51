#pragma once

#include <texforge/crystal_plasticity.hpp>
#include <texforge/homogenization.hpp>
#include <texforge/mesh.hpp>
#include <texforge/stiffness.hpp>
#include <texforge/surrogate.hpp>
#include <texforge/texture_evolution.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace texforge {

/// Predicts the ODF after one process step.  Implementations must be safe to
/// call concurrently.
class StepOracle {
  public:
    virtual ~StepOracle() = default;

    /// Outcome of every mode, ascending mode id.
    virtual std::vector<Odf> expand(const Odf& a) const = 0;
    /// Outcome of a single mode; bitwise equal to the matching entry of expand().
    virtual Odf step(const Odf& a, ProcessMode mode) const = 0;
    virtual std::string name() const = 0;
};

class SurrogateOracle final : public StepOracle {
  public:
    /// Throws ConfigurationError unless every mode has exactly one model.
    explicit SurrogateOracle(std::vector<MlpModel> models);

    std::vector<Odf> expand(const Odf& a) const override;
    Odf step(const Odf& a, ProcessMode mode) const override;
    std::string name() const override { return "surrogate"; }

    const std::vector<MlpModel>& models() const { return models_; }

  private:
    std::vector<MlpModel> models_;
};

/// Runs apply_process for every mode, the modes spread over `workers` threads.
class SimulatorOracle final : public StepOracle {
  public:
    SimulatorOracle(const FundamentalMesh& mesh, ProcessStepConfig cfg, SlipSystemSet slips,
                    std::size_t workers);

    std::vector<Odf> expand(const Odf& a) const override;
    Odf step(const Odf& a, ProcessMode mode) const override;
    std::string name() const override { return "simulator"; }

  private:
    const FundamentalMesh& mesh_;
    ProcessStepConfig cfg_;
    SlipSystemSet slips_;
    std::size_t workers_;
};

/// Delta_k = F(P^T outcome_k) - F(P^T a), with F o P^T applied as the row
/// vector objective_row(p, w).
Eigen::VectorXd objective_diffs(const std::vector<Odf>& outcomes, const Odf& a,
                                const Eigen::VectorXd& row);
Eigen::VectorXd objective_diffs(const StepOracle& oracle, const Odf& a, const ObjectiveWeights& w,
                                const PropertyMatrix& p);

/// Median wall-clock seconds of oracle.expand(a) over `repeats` runs, after one
/// untimed warm-up call.
double time_expansion(const StepOracle& oracle, const Odf& a, int repeats);

enum class SoftmaxForm {
    base_beta,    // beta^(Delta / Delta_max)
    exponential,  // exp(beta Delta / Delta_max)
};

/// Sampling probabilities over the modes, or nullopt when no Delta is positive.
std::optional<Eigen::VectorXd> softmax_base(const Eigen::VectorXd& deltas, double beta,
                                            SoftmaxForm form = SoftmaxForm::base_beta);

struct SearchConfig {
    int restarts = 1000;
    int steps = 10;
    double beta = 5.0;
    std::uint64_t seed = 0;
    bool greedy = false;  // argmax of Delta, lowest mode id on ties
    SoftmaxForm form = SoftmaxForm::base_beta;

    void validate() const;
};

struct RestartSummary {
    std::vector<ProcessMode> modes;
    double final_objective = 0;
    std::optional<int> break_step;  // step at which every Delta was <= 0
    std::optional<std::string> error;
};

struct PathResult {
    std::vector<ProcessMode> best_modes;
    double best_objective = 0;
    Trajectory best_trajectory;  // replay of best_modes through the oracle
    std::vector<RestartSummary> restarts;
    int failed_restarts = 0;
};

/// Exponential-weights search with independent restarts; restart i draws from a
/// stream seeded with seed + i.  The best restart is the one with the largest
/// final objective, ties going to the lexicographically smaller mode sequence.
/// Oracle failures end their restart and are tallied; if every restart fails the
/// first failure is rethrown.
PathResult search(const StepOracle& oracle, const Odf& a0, const SearchConfig& cfg,
                  const ObjectiveWeights& w, const PropertyMatrix& p);

}  // namespace texforge
