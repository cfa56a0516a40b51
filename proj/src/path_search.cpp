#include <texforge/path_search.hpp>

#include <texforge/errors.hpp>
#include <texforge/parallel.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <random>

namespace texforge {

SurrogateOracle::SurrogateOracle(std::vector<MlpModel> models)
    : models_(order_by_mode(std::move(models))) {}

std::vector<Odf> SurrogateOracle::expand(const Odf& a) const { return predict_all_modes(models_, a); }

Odf SurrogateOracle::step(const Odf& a, ProcessMode mode) const {
    return forward(models_[static_cast<std::size_t>(mode.id() - 1)], a);
}

SimulatorOracle::SimulatorOracle(const FundamentalMesh& mesh, ProcessStepConfig cfg,
                                 SlipSystemSet slips, std::size_t workers)
    : mesh_(mesh), cfg_(cfg), slips_(std::move(slips)), workers_(workers) {
    cfg_.validate();
}

std::vector<Odf> SimulatorOracle::expand(const Odf& a) const {
    std::vector<Odf> out(ProcessMode::kCount);
    parallel_for(
        out.size(),
        [&](std::size_t k) { out[k] = step(a, ProcessMode::from_id(static_cast<int>(k) + 1)); },
        workers_);
    return out;
}

Odf SimulatorOracle::step(const Odf& a, ProcessMode mode) const {
    try {
        return apply_process(mesh_, a, mode, cfg_, slips_);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string(e.what()) + " (mode " + mode.mask() + ")", e.residual(),
                               e.node());
    } catch (const NumericalBlowup& e) {
        throw NumericalBlowup(std::string(e.what()) + " (mode " + mode.mask() + ")", e.substep());
    }
}

Eigen::VectorXd objective_diffs(const std::vector<Odf>& outcomes, const Odf& a,
                                const Eigen::VectorXd& row) {
    if (a.size() != row.size()) throw InvalidArgument("objective_diffs: ODF length mismatch");
    const double base = row.dot(a);
    Eigen::VectorXd deltas(static_cast<Eigen::Index>(outcomes.size()));
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
        if (outcomes[k].size() != row.size())
            throw InvalidArgument("objective_diffs: outcome length mismatch");
        deltas(static_cast<Eigen::Index>(k)) = row.dot(outcomes[k]) - base;
    }
    return deltas;
}

Eigen::VectorXd objective_diffs(const StepOracle& oracle, const Odf& a, const ObjectiveWeights& w,
                                const PropertyMatrix& p) {
    return objective_diffs(oracle.expand(a), a, objective_row(p, w));
}

double time_expansion(const StepOracle& oracle, const Odf& a, int repeats) {
    if (repeats < 1) throw InvalidArgument("timing needs at least one repeat");
    (void)oracle.expand(a);
    std::vector<double> seconds;
    for (int i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const auto outcomes = oracle.expand(a);
        seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        if (outcomes.size() != ProcessMode::kCount) throw std::logic_error("oracle returned wrong count");
    }
    std::nth_element(seconds.begin(), seconds.begin() + repeats / 2, seconds.end());
    return seconds[static_cast<std::size_t>(repeats / 2)];
}

std::optional<Eigen::VectorXd> softmax_base(const Eigen::VectorXd& deltas, double beta,
                                            SoftmaxForm form) {
    if (deltas.size() == 0 || !deltas.allFinite())
        throw InvalidArgument("softmax_base: objective differences must be finite");
    if (!(beta > 1) || !std::isfinite(beta)) throw InvalidArgument("softmax_base: beta must exceed 1");
    const double top = deltas.maxCoeff();
    if (!(top > 0)) return std::nullopt;
    // Exponents are at most 1 (or beta), so nothing overflows.
    const Eigen::ArrayXd scaled = deltas.array() / top;
    Eigen::VectorXd weights = form == SoftmaxForm::base_beta
                                  ? (scaled * std::log(beta)).exp().matrix()
                                  : (scaled * beta).exp().matrix();
    return weights / weights.sum();
}

void SearchConfig::validate() const {
    if (restarts < 1) throw InvalidArgument("search needs at least one restart");
    if (steps < 0) throw InvalidArgument("search step count must be non-negative");
    if (!greedy && (!(beta > 1) || !std::isfinite(beta)))
        throw InvalidArgument("softmax base must be a finite value above 1");
}

namespace {

int greedy_choice(const Eigen::VectorXd& deltas) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < deltas.size(); ++k)
        if (deltas(k) > deltas(best)) best = k;
    return static_cast<int>(best);
}

int sample(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0;
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
        cumulative += probs(k);
        if (u < cumulative) return static_cast<int>(k);
    }
    // Round-off left u above the last partial sum: take the last positive entry.
    for (Eigen::Index k = probs.size() - 1; k > 0; --k)
        if (probs(k) > 0) return static_cast<int>(k);
    return 0;
}

bool better(const RestartSummary& a, const RestartSummary& b) {
    if (a.final_objective != b.final_objective) return a.final_objective > b.final_objective;
    return std::lexicographical_compare(a.modes.begin(), a.modes.end(), b.modes.begin(), b.modes.end());
}

}  // namespace

PathResult search(const StepOracle& oracle, const Odf& a0, const SearchConfig& cfg,
                  const ObjectiveWeights& w, const PropertyMatrix& p) {
    cfg.validate();
    const Eigen::VectorXd row = objective_row(p, w);
    if (a0.size() != row.size()) throw InvalidArgument("search: initial ODF length mismatch");

    PathResult result;
    result.restarts.resize(static_cast<std::size_t>(cfg.restarts));
    std::vector<std::exception_ptr> errors(result.restarts.size());
    parallel_for(result.restarts.size(), [&](std::size_t i) {
        RestartSummary& summary = result.restarts[i];
        std::mt19937_64 rng(cfg.seed + i);
        Odf current = a0;
        try {
            for (int s = 0; s < cfg.steps; ++s) {
                std::vector<Odf> outcomes = oracle.expand(current);
                const Eigen::VectorXd deltas = objective_diffs(outcomes, current, row);
                const auto probs = softmax_base(deltas, cfg.greedy ? 2.0 : cfg.beta, cfg.form);
                if (!probs) {
                    summary.break_step = s;
                    break;
                }
                const int k = cfg.greedy ? greedy_choice(deltas) : sample(*probs, rng);
                summary.modes.push_back(ProcessMode::from_id(k + 1));
                current = std::move(outcomes[static_cast<std::size_t>(k)]);
            }
            summary.final_objective = row.dot(current);
        } catch (const std::exception& e) {
            summary.error = e.what();
            errors[i] = std::current_exception();
        }
    });

    const RestartSummary* best = nullptr;
    for (const auto& summary : result.restarts) {
        if (summary.error) {
            ++result.failed_restarts;
            continue;
        }
        if (!best || better(summary, *best)) best = &summary;
    }
    if (!best) std::rethrow_exception(errors.front());

    result.best_modes = best->modes;
    result.best_objective = best->final_objective;
    Trajectory& t = result.best_trajectory;
    t.odfs.push_back(a0);
    t.objectives.push_back(row.dot(a0));
    for (const ProcessMode mode : best->modes) {
        t.odfs.push_back(oracle.step(t.odfs.back(), mode));
        t.modes.push_back(mode);
        t.objectives.push_back(row.dot(t.odfs.back()));
    }
    return result;
}

}  // namespace texforge
