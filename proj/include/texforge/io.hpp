#pragma once

#include <texforge/dataset.hpp>
#include <texforge/mesh.hpp>
#include <texforge/path_search.hpp>
#include <texforge/surrogate.hpp>
#include <texforge/texture_evolution.hpp>

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace texforge {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Reads a whole file; FileError if it cannot be opened.
std::string read_text(const std::filesystem::path& path);
/// Writes atomically enough for our purposes (truncate + write); FileError on failure.
void write_text(const std::filesystem::path& path, std::string_view text);

/// Parses JSON, reporting the failing line in the FileError.
Json parse_json(std::string_view text, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);
Json matrix_to_json(const Eigen::MatrixXd& m);  // row-major nested arrays
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);

Json to_json(const FundamentalMesh& mesh);
FundamentalMesh mesh_from_json(const Json& j);
FundamentalMesh read_mesh(const std::filesystem::path& path);
/// Hash of the canonical JSON form, independent of file formatting.
std::string mesh_hash(const FundamentalMesh& mesh);

Json odf_to_json(const Odf& a);
/// Accepts {"values": [...]} or a bare array.
Odf odf_from_json(const Json& j);

Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);

Json to_json(const ProcessStepConfig& cfg);
Json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j);
Json to_json(const SearchConfig& cfg);

Json to_json(const MlpModel& model);
MlpModel model_from_json(const Json& j);
MlpModel read_model(const std::filesystem::path& path);
/// Every model_*.json file in a directory, ordered by mode id.
std::vector<MlpModel> read_models(const std::filesystem::path& dir);
std::string model_filename(ProcessMode mode);

Json to_json(const DatasetRecord& record);
DatasetRecord record_from_json(const Json& j);
/// One record per line.
void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

Json to_json(const PathResult& result);

/// Sidecar for a primary output: data.jsonl -> data.manifest.json.
std::filesystem::path manifest_path(const std::filesystem::path& output);

struct RunManifest {
    std::string command;
    Json config = Json::object();
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path -> sha256
    std::map<std::string, double> timings;       // phase -> seconds
    std::uint64_t seed = 0;
    Json extra = Json::object();  // command-specific fields

    Json to_json() const;
    void write(const std::filesystem::path& path) const;
};

}  // namespace texforge
