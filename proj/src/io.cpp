#include <texforge/io.hpp>

#include <texforge/errors.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace texforge {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 computation failed");
    std::string hex;
    hex.reserve(2 * length);
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError(path.string(), 0, "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(path.string(), 0, "cannot open for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw FileError(path.string(), 0, "write failed");
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw InvalidArgument(std::string("missing field '") + key + "'");
    return j.at(key);
}

template <typename T>
T get(const Json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument(std::string("field '") + key + "' has the wrong type");
    }
}

// Converts any schema failure inside `body` into a FileError naming the file.
template <typename F>
auto with_file_context(const fs::path& path, std::size_t line, F&& body) {
    try {
        return body();
    } catch (const FileError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw FileError(path.string(), line, e.what());
    } catch (const nlohmann::json::exception& e) {
        throw FileError(path.string(), line, e.what());
    }
}

}  // namespace

Json parse_json(std::string_view text, const fs::path& path) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FileError(path.string(), line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }
}

Json read_json(const fs::path& path) { return parse_json(read_text(path), path); }

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(1) + "\n"); }

Json vector_to_json(const Eigen::VectorXd& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw InvalidArgument(what + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidArgument(what + " must be an array of numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw InvalidArgument(what + " must be a non-empty array of rows");
    const Eigen::VectorXd first = vector_from_json(j[0], what);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), first.size());
    for (std::size_t r = 0; r < j.size(); ++r) {
        const Eigen::VectorXd row = vector_from_json(j[r], what);
        if (row.size() != first.size()) throw InvalidArgument(what + " has ragged rows");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

Json to_json(const FundamentalMesh& mesh) {
    Json nodes = Json::array();
    for (const auto& r : mesh.nodes) nodes.push_back({r.x(), r.y(), r.z()});
    Json elements = Json::array();
    for (const auto& e : mesh.elements) elements.push_back({e[0], e[1], e[2], e[3]});
    Json dependent = Json::object();
    for (const auto& [dep, rep] : mesh.dependent_map) dependent[std::to_string(dep)] = rep;
    return {{"subdivision", mesh.subdivision},
            {"symmetry_tag", mesh.symmetry_tag},
            {"nodes", nodes},
            {"elements", elements},
            {"independent_ids", mesh.independent_ids},
            {"dependent_map", dependent},
            {"node_weights", vector_to_json(mesh.node_weights)}};
}

FundamentalMesh mesh_from_json(const Json& j) {
    const int s = get<int>(j, "subdivision");
    if (s < 1) throw InvalidArgument("subdivision must be positive");
    if (get<std::string>(j, "symmetry_tag") != "FCC-cubic")
        throw InvalidArgument("unsupported symmetry_tag");
    std::vector<Vector3> nodes;
    for (const auto& n : field(j, "nodes")) {
        const Eigen::VectorXd v = vector_from_json(n, "node");
        if (v.size() != 3) throw InvalidArgument("nodes must have three coordinates");
        nodes.emplace_back(v);
    }
    std::vector<std::array<int, 4>> elements;
    for (const auto& e : field(j, "elements")) elements.push_back(e.get<std::array<int, 4>>());
    const auto side = static_cast<std::size_t>(s + 1);
    if (nodes.size() != side * side * side || elements.size() != 6u * static_cast<std::size_t>(s * s * s))
        throw InvalidArgument("node or element count does not match the subdivision");
    std::map<int, int> dependent;
    for (const auto& [key, value] : field(j, "dependent_map").items()) {
        try {
            dependent[std::stoi(key)] = value.get<int>();
        } catch (const std::exception&) {
            throw InvalidArgument("dependent_map keys and values must be node indices");
        }
    }
    FundamentalMesh mesh = FundamentalMesh::from_topology(
        s, std::move(nodes), std::move(elements), get<std::vector<int>>(j, "independent_ids"),
        std::move(dependent));
    const Eigen::VectorXd stored = vector_from_json(field(j, "node_weights"), "node_weights");
    if (stored.size() != mesh.node_weights.size() ||
        (stored - mesh.node_weights).cwiseAbs().maxCoeff() > 1e-12 * mesh.node_weights.sum())
        throw InvalidArgument("node_weights do not match the mesh topology");
    return mesh;
}

FundamentalMesh read_mesh(const fs::path& path) {
    const Json j = read_json(path);
    return with_file_context(path, 0, [&] { return mesh_from_json(j); });
}

std::string mesh_hash(const FundamentalMesh& mesh) { return sha256_hex(to_json(mesh).dump()); }

Json odf_to_json(const Odf& a) { return {{"values", vector_to_json(a)}}; }

Odf odf_from_json(const Json& j) {
    if (j.is_array()) return vector_from_json(j, "ODF");
    return vector_from_json(field(j, "values"), "ODF values");
}

Json to_json(const Trajectory& t) {
    Json modes = Json::array();
    for (const auto& m : t.modes) modes.push_back(m.mask());
    Json odfs = Json::array();
    for (const auto& a : t.odfs) odfs.push_back(vector_to_json(a));
    return {{"modes", modes}, {"odfs", odfs}, {"objectives", t.objectives}};
}

Trajectory trajectory_from_json(const Json& j) {
    Trajectory t;
    for (const auto& m : field(j, "modes")) t.modes.push_back(ProcessMode::from_mask(m.get<std::string>()));
    for (const auto& a : field(j, "odfs")) t.odfs.push_back(vector_from_json(a, "trajectory ODF"));
    t.objectives = get<std::vector<double>>(j, "objectives");
    if (t.odfs.size() != t.modes.size() + 1 || t.objectives.size() != t.odfs.size())
        throw InvalidArgument("trajectory needs one more ODF and objective than modes");
    return t;
}

Json to_json(const ProcessStepConfig& cfg) {
    return {{"dt_total", cfg.dt_total}, {"substeps", cfg.substeps}, {"clip_negative", cfg.clip_negative}};
}

Json to_json(const TrainConfig& cfg) {
    return {{"batch_size", cfg.batch_size},   {"epochs", cfg.epochs},
            {"beta1", cfg.beta1},             {"beta2", cfg.beta2},
            {"epsilon", cfg.epsilon},         {"restart_period", cfg.restart_period},
            {"period_multiplier", cfg.period_multiplier}, {"lr_max", cfg.lr_max},
            {"lr_min", cfg.lr_min},           {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
    TrainConfig cfg;
    cfg.batch_size = get<int>(j, "batch_size");
    cfg.epochs = get<int>(j, "epochs");
    cfg.beta1 = get<double>(j, "beta1");
    cfg.beta2 = get<double>(j, "beta2");
    cfg.epsilon = get<double>(j, "epsilon");
    cfg.restart_period = get<int>(j, "restart_period");
    cfg.period_multiplier = get<int>(j, "period_multiplier");
    cfg.lr_max = get<double>(j, "lr_max");
    cfg.lr_min = get<double>(j, "lr_min");
    cfg.seed = get<std::uint64_t>(j, "seed");
    return cfg;
}

Json to_json(const SearchConfig& cfg) {
    return {{"restarts", cfg.restarts},
            {"steps", cfg.steps},
            {"beta", cfg.beta},
            {"seed", cfg.seed},
            {"greedy", cfg.greedy},
            {"softmax", cfg.form == SoftmaxForm::base_beta ? "base" : "exp"}};
}

Json to_json(const MlpModel& model) {
    const auto dims = model.dims();
    Json j = {{"format_version", kModelFormatVersion},
              {"dims", dims},
              {"mode", model.mode.mask()},
              {"hidden_activation", "tanh"},
              {"output_stage", "relu-normalize"},
              {"weights", {matrix_to_json(model.m0), matrix_to_json(model.m1)}},
              {"biases", {vector_to_json(model.b0), vector_to_json(model.b1)}},
              {"norm_weights", vector_to_json(model.norm_weights)}};
    j["training"] = model.training ? to_json(*model.training) : Json(nullptr);
    return j;
}

MlpModel model_from_json(const Json& j) {
    const int version = get<int>(j, "format_version");
    if (version != kModelFormatVersion)
        throw InvalidArgument("unsupported model format_version " + std::to_string(version));
    if (get<std::string>(j, "hidden_activation") != "tanh" ||
        get<std::string>(j, "output_stage") != "relu-normalize")
        throw InvalidArgument("unsupported activation or output stage");
    const Json& weights = field(j, "weights");
    const Json& biases = field(j, "biases");
    if (!weights.is_array() || weights.size() != 2 || !biases.is_array() || biases.size() != 2)
        throw InvalidArgument("model needs exactly two weight matrices and two bias vectors");
    MlpModel model;
    model.mode = ProcessMode::from_mask(get<std::string>(j, "mode"));
    model.m0 = matrix_from_json(weights[0], "weights[0]");
    model.m1 = matrix_from_json(weights[1], "weights[1]");
    model.b0 = vector_from_json(biases[0], "biases[0]");
    model.b1 = vector_from_json(biases[1], "biases[1]");
    model.norm_weights = vector_from_json(field(j, "norm_weights"), "norm_weights");
    model.validate();
    if (get<std::array<int, 3>>(j, "dims") != model.dims())
        throw InvalidArgument("dims do not match the weight shapes");
    if (j.contains("training") && !j["training"].is_null())
        model.training = train_config_from_json(j["training"]);
    return model;
}

MlpModel read_model(const fs::path& path) {
    const Json j = read_json(path);
    return with_file_context(path, 0, [&] { return model_from_json(j); });
}

std::string model_filename(ProcessMode mode) { return "model_" + mode.mask() + ".json"; }

std::vector<MlpModel> read_models(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw FileError(dir.string(), 0, "not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && name.starts_with("model_") && name.ends_with(".json"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<MlpModel> models;
    for (const auto& f : files) models.push_back(read_model(f));
    return order_by_mode(std::move(models));
}

Json to_json(const DatasetRecord& r) {
    return {{"sample", r.sample},
            {"mode", r.mode.mask()},
            {"input", vector_to_json(r.input)},
            {"output", vector_to_json(r.output)},
            {"provenance",
             {{"mesh_hash", r.provenance.mesh_hash},
              {"config_hash", r.provenance.config_hash},
              {"seed", r.provenance.seed}}}};
}

DatasetRecord record_from_json(const Json& j) {
    DatasetRecord r;
    r.sample = get<std::size_t>(j, "sample");
    r.mode = ProcessMode::from_mask(get<std::string>(j, "mode"));
    r.input = vector_from_json(field(j, "input"), "input");
    r.output = vector_from_json(field(j, "output"), "output");
    const Json& p = field(j, "provenance");
    r.provenance = {get<std::string>(p, "mesh_hash"), get<std::string>(p, "config_hash"),
                    get<std::uint64_t>(p, "seed")};
    return r;
}

void write_dataset(const fs::path& path, const std::vector<DatasetRecord>& records) {
    std::string text;
    for (const auto& r : records) {
        text += to_json(r).dump();
        text += '\n';
    }
    write_text(path, text);
}

std::vector<DatasetRecord> read_dataset(const fs::path& path) {
    const std::string text = read_text(path);
    std::vector<DatasetRecord> records;
    std::size_t line = 0;
    std::size_t begin = 0;
    while (begin < text.size()) {
        std::size_t end = text.find('\n', begin);
        if (end == std::string::npos) end = text.size();
        ++line;
        const std::string_view content(text.data() + begin, end - begin);
        begin = end + 1;
        if (content.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        Json j;
        try {
            j = Json::parse(content);
        } catch (const nlohmann::json::parse_error& e) {
            throw FileError(path.string(), line, e.what());
        }
        records.push_back(with_file_context(path, line, [&] {
            DatasetRecord r = record_from_json(j);
            if (r.input.size() != r.output.size())
                throw InvalidArgument("input and output lengths differ");
            if (!records.empty() && r.input.size() != records.front().input.size())
                throw InvalidArgument("record length differs from the first record");
            return r;
        }));
    }
    return records;
}

Json to_json(const PathResult& result) {
    Json modes = Json::array();
    for (const auto& m : result.best_modes) modes.push_back(m.mask());
    Json restarts = Json::array();
    for (const auto& r : result.restarts) {
        Json path = Json::array();
        for (const auto& m : r.modes) path.push_back(m.mask());
        Json entry = {{"modes", path}, {"final_objective", r.final_objective}};
        entry["break_step"] = r.break_step ? Json(*r.break_step) : Json(nullptr);
        if (r.error) entry["error"] = *r.error;
        restarts.push_back(entry);
    }
    return {{"best_modes", modes},
            {"best_objective", result.best_objective},
            {"best_trajectory", to_json(result.best_trajectory)},
            {"restarts", restarts},
            {"failed_restarts", result.failed_restarts}};
}

fs::path manifest_path(const fs::path& output) {
    fs::path p = output;
    if (fs::is_directory(output)) return output / "manifest.json";
    return p.replace_extension().concat(".manifest.json");
}

Json RunManifest::to_json() const {
    Json j = {{"command", command},   {"config", config},   {"inputs", inputs},
              {"outputs", outputs},   {"timings", timings}, {"seed", seed},
              {"tool_version", kToolVersion}};
    for (const auto& [key, value] : extra.items()) j[key] = value;
    return j;
}

void RunManifest::write(const fs::path& path) const { write_json(path, to_json()); }

}  // namespace texforge
