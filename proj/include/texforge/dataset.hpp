#pragma once

#include <texforge/crystal_plasticity.hpp>
#include <texforge/mesh.hpp>
#include <texforge/stiffness.hpp>
#include <texforge/surrogate.hpp>
#include <texforge/texture_evolution.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace texforge {

struct Provenance {
    std::string mesh_hash;
    std::string config_hash;
    std::uint64_t seed = 0;
};

struct DatasetRecord {
    std::size_t sample = 0;  // index of the input ODF; all its modes share it
    Odf input;
    ProcessMode mode = ProcessMode::from_id(1);
    Odf output;
    Provenance provenance;
};

struct SkippedRecord {
    std::size_t sample;
    ProcessMode mode;
    std::string reason;
};

struct Dataset {
    std::vector<DatasetRecord> records;  // ordered by (sample, mode id)
    std::vector<SkippedRecord> skipped;
};

/// Independent uniform(0,1) draws per node, normalized.  Deterministic in seed.
std::vector<Odf> generate_initial_odfs(int n, std::uint64_t seed, const FundamentalMesh& mesh);

/// Labels every ODF with apply_process for every mode in `modes`.  A simulator
/// failure skips that (sample, mode) pair and records why.
Dataset generate_dataset(const FundamentalMesh& mesh, const std::vector<Odf>& odfs,
                         const std::vector<ProcessMode>& modes, const ProcessStepConfig& cfg,
                         const SlipSystemSet& slips, const Provenance& provenance);

/// Splits by input sample so no ODF appears on both sides.  The train side gets
/// round(ratio * samples) ODFs chosen by a seeded shuffle.
std::pair<std::vector<DatasetRecord>, std::vector<DatasetRecord>> split(
    const std::vector<DatasetRecord>& records, double ratio, std::uint64_t seed);

/// Columns of the records that belong to `mode`, in record order.
TrainingSet training_set(const std::vector<DatasetRecord>& records, ProcessMode mode);

/// |y_true - y_pred| / |y_true| in the Euclidean norm.
double relative_l2(const Odf& y_true, const Odf& y_pred);

/// |F(<C>(y_true)) - F(<C>(y_pred))| in GPa.
double stiffness_error(const FundamentalMesh& mesh, const StiffnessMatrix& c0, const Odf& y_true,
                       const Odf& y_pred, const ObjectiveWeights& w);

}  // namespace texforge
