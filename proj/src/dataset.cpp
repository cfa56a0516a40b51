#include <texforge/dataset.hpp>

#include <texforge/errors.hpp>
#include <texforge/homogenization.hpp>
#include <texforge/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <set>

namespace texforge {

std::vector<Odf> generate_initial_odfs(int n, std::uint64_t seed, const FundamentalMesh& mesh) {
    if (n < 1) throw InvalidArgument("need at least one initial ODF");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<Odf> odfs;
    odfs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Odf a(mesh.independent_count());
        for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = dist(rng);
        odfs.push_back(normalize_odf(mesh, a));
    }
    return odfs;
}

Dataset generate_dataset(const FundamentalMesh& mesh, const std::vector<Odf>& odfs,
                         const std::vector<ProcessMode>& modes, const ProcessStepConfig& cfg,
                         const SlipSystemSet& slips, const Provenance& provenance) {
    cfg.validate();
    // The velocity field depends only on the mode, so it is shared by every sample;
    // advect with it is exactly apply_process.
    std::vector<std::optional<Eigen::Matrix3Xd>> velocity(modes.size());
    std::vector<std::string> velocity_error(modes.size());
    parallel_for(modes.size(), [&](std::size_t m) {
        try {
            velocity[m] = reorientation_velocity(mesh, build_velocity_gradient(modes[m], 1.0), slips);
        } catch (const std::exception& e) {
            velocity_error[m] = e.what();
        }
    });

    const std::size_t n_modes = modes.size();
    std::vector<std::optional<DatasetRecord>> slots(odfs.size() * n_modes);
    std::vector<std::string> reasons(slots.size());
    parallel_for(odfs.size(), [&](std::size_t i) {
        for (std::size_t m = 0; m < n_modes; ++m) {
            const std::size_t slot = i * n_modes + m;
            if (!velocity[m]) {
                reasons[slot] = velocity_error[m];
                continue;
            }
            try {
                DatasetRecord rec;
                rec.sample = i;
                rec.input = odfs[i];
                rec.mode = modes[m];
                rec.output = advect(mesh, odfs[i], *velocity[m], cfg);
                rec.provenance = provenance;
                slots[slot] = std::move(rec);
            } catch (const std::exception& e) {
                reasons[slot] = e.what();
            }
        }
    });

    Dataset data;
    data.records.reserve(slots.size());
    for (std::size_t slot = 0; slot < slots.size(); ++slot) {
        if (slots[slot]) {
            data.records.push_back(std::move(*slots[slot]));
        } else {
            data.skipped.push_back({slot / n_modes, modes[slot % n_modes], reasons[slot]});
        }
    }
    return data;
}

std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split(
    const std::vector<DatasetRecord>& records, double ratio, std::uint64_t seed) {
    if (!(ratio > 0 && ratio < 1)) throw InvalidArgument("split ratio must lie in (0, 1)");
    std::set<std::size_t> unique;
    for (const auto& r : records) unique.insert(r.sample);
    std::vector<std::size_t> samples(unique.begin(), unique.end());
    std::mt19937_64 rng(seed);
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(samples.size())));
    const std::set<std::size_t> train_ids(samples.begin(),
                                          samples.begin() + static_cast<std::ptrdiff_t>(n_train));

    std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> out;
    for (const auto& r : records) (train_ids.contains(r.sample) ? out.first : out.second).push_back(r);
    return out;
}

TrainingSet training_set(const std::vector<DatasetRecord>& records, ProcessMode mode) {
    std::vector<const DatasetRecord*> chosen;
    for (const auto& r : records)
        if (r.mode == mode) chosen.push_back(&r);
    TrainingSet set;
    if (chosen.empty()) return set;
    const Eigen::Index n = chosen.front()->input.size();
    set.inputs.resize(n, static_cast<Eigen::Index>(chosen.size()));
    set.targets.resize(n, static_cast<Eigen::Index>(chosen.size()));
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (chosen[k]->input.size() != n || chosen[k]->output.size() != n)
            throw InvalidArgument("dataset records have inconsistent lengths");
        set.inputs.col(static_cast<Eigen::Index>(k)) = chosen[k]->input;
        set.targets.col(static_cast<Eigen::Index>(k)) = chosen[k]->output;
    }
    return set;
}

double relative_l2(const Odf& y_true, const Odf& y_pred) {
    if (y_true.size() != y_pred.size()) throw InvalidArgument("relative_l2: length mismatch");
    const double norm = y_true.norm();
    if (!(norm > 0)) throw InvalidArgument("relative_l2: reference vector is zero");
    return (y_true - y_pred).norm() / norm;
}

double stiffness_error(const FundamentalMesh& mesh, const StiffnessMatrix& c0, const Odf& y_true,
                       const Odf& y_pred, const ObjectiveWeights& w) {
    return std::abs(objective(homogenize(mesh, c0, y_true), w) -
                    objective(homogenize(mesh, c0, y_pred), w));
}

}  // namespace texforge
