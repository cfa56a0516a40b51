#include <texforge/cli.hpp>

#include <texforge/dataset.hpp>
#include <texforge/errors.hpp>
#include <texforge/homogenization.hpp>
#include <texforge/io.hpp>
#include <texforge/parallel.hpp>
#include <texforge/path_search.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

namespace texforge::cli {

namespace {

namespace fs = std::filesystem;

class Stopwatch {
  public:
    explicit Stopwatch(RunManifest& manifest) : manifest_(manifest) {}

    template <typename F>
    auto operator()(const std::string& phase, F&& body) {
        const auto start = std::chrono::steady_clock::now();
        struct Record {
            RunManifest& m;
            const std::string& phase;
            std::chrono::steady_clock::time_point start;
            ~Record() {
                m.timings[phase] +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
        } record{manifest_, phase, start};
        return body();
    }

  private:
    RunManifest& manifest_;
};

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// A JSON config file becomes `--key value` tokens placed right after the
// subcommand, so flags given on the command line (parsed later, last one wins)
// take precedence over the file.
std::vector<std::string> apply_config_file(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file path");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                       args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].starts_with("--config=")) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty() || args.size() < 2) return args;

    const Json config = read_json(path);
    if (!config.is_object()) throw FileError(path, 1, "config must be a JSON object");
    std::vector<std::string> tokens;
    for (const auto& [key, value] : config.items()) {
        std::string flag = key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        if (!flag.starts_with("--")) flag = "--" + flag;
        if (value.is_boolean()) {
            tokens.push_back(flag + "=" + (value.get<bool>() ? "true" : "false"));
        } else if (value.is_string()) {
            tokens.push_back(flag);
            tokens.push_back(value.get<std::string>());
        } else if (value.is_number()) {
            tokens.push_back(flag);
            tokens.push_back(value.is_number_integer() ? value.dump() : format_number(value.get<double>()));
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) {
                if (!joined.empty()) joined += ',';
                joined += v.is_string() ? v.get<std::string>() : v.dump();
            }
            tokens.push_back(flag);
            tokens.push_back(joined);
        } else {
            throw FileError(path, 0, "unsupported value for '" + key + "'");
        }
    }
    args.insert(args.begin() + 2, tokens.begin(), tokens.end());
    return args;
}

std::vector<ProcessMode> parse_modes(const std::string& list) {
    std::vector<ProcessMode> modes;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) modes.push_back(ProcessMode::from_mask(item));
    return modes;
}

ObjectiveWeights parse_weights(const std::string& diagonal, double off_diagonal) {
    ObjectiveWeights w;
    std::stringstream ss(diagonal);
    std::string item;
    int k = 0;
    while (std::getline(ss, item, ',')) {
        if (k >= 6) throw InvalidArgument("--diag-weights takes six values");
        try {
            w.diagonal(k++) = std::stod(item);
        } catch (const std::exception&) {
            throw InvalidArgument("--diag-weights: '" + item + "' is not a number");
        }
    }
    if (k != 6) throw InvalidArgument("--diag-weights takes six values");
    w.off_diagonal = off_diagonal;
    w.validate();
    return w;
}

FundamentalMesh load_mesh(const std::string& path, RunManifest& manifest) {
    manifest.inputs[path] = sha256_file(path);
    return read_mesh(path);
}

// "uniform", "random:SEED" or a JSON file; files are normalized on load.
Odf load_odf(const std::string& source, const FundamentalMesh& mesh, RunManifest& manifest) {
    if (source == "uniform") {
        manifest.inputs["odf"] = "uniform";
        return mesh.uniform_odf();
    }
    if (source.starts_with("random:")) {
        std::uint64_t seed = 0;
        try {
            seed = std::stoull(source.substr(7));
        } catch (const std::exception&) {
            throw InvalidArgument("--odf random:SEED needs an integer seed");
        }
        manifest.inputs["odf"] = source;
        return generate_initial_odfs(1, seed, mesh).front();
    }
    manifest.inputs[source] = sha256_file(source);
    const Json j = read_json(source);
    try {
        const Odf a = odf_from_json(j);
        if (a.size() != mesh.independent_count())
            throw InvalidArgument("ODF has " + std::to_string(a.size()) + " values, mesh has " +
                                  std::to_string(mesh.independent_count()) + " independent nodes");
        return normalize_odf(mesh, a);
    } catch (const InvalidArgument& e) {
        throw FileError(source, 0, e.what());
    } catch (const DegenerateOdf& e) {
        throw FileError(source, 0, e.what());
    }
}

std::vector<MlpModel> load_models(const std::string& dir, RunManifest& manifest) {
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.starts_with("model_") && name.ends_with(".json"))
            manifest.inputs[entry.path().string()] = sha256_file(entry.path());
    }
    return read_models(dir);
}

void finish(RunManifest& manifest, const fs::path& output, const fs::path& manifest_file) {
    if (fs::is_regular_file(output)) manifest.outputs[output.string()] = sha256_file(output);
    manifest.write(manifest_file);
}

struct StepOptions {
    double dt = 0.1;
    int substeps = 10;
    bool clip = true;

    void add_to(CLI::App* app) {
        app->add_option("--dt", dt, "Process step duration in seconds")->capture_default_str();
        app->add_option("--substeps", substeps, "Explicit Euler substeps per process step")
            ->capture_default_str();
        app->add_flag("--clip-negative,!--no-clip-negative", clip,
                      "Clip negative ODF values after each substep")
            ->capture_default_str();
    }
    ProcessStepConfig config() const {
        ProcessStepConfig cfg{dt, substeps, clip};
        cfg.validate();
        return cfg;
    }
};

struct WeightOptions {
    std::string diagonal = "1,1,1,1,1,1";
    double off_diagonal = 0.5;

    void add_to(CLI::App* app) {
        app->add_option("--diag-weights", diagonal, "Six comma-separated weights on C11..C66")
            ->capture_default_str();
        app->add_option("--offdiag-weight", off_diagonal, "Weight on each C_ij, i < j")
            ->capture_default_str();
    }
    ObjectiveWeights weights() const { return parse_weights(diagonal, off_diagonal); }
    Json echo() const { return {{"diag_weights", diagonal}, {"offdiag_weight", off_diagonal}}; }
};

// ---------------------------------------------------------------- mesh

struct MeshOptions {
    int subdivision = 3;
    std::string out;
};

void run_mesh(const MeshOptions& o, std::ostream& out) {
    RunManifest manifest;
    manifest.command = "mesh";
    manifest.config = {{"subdivision", o.subdivision}};
    Stopwatch time(manifest);
    const FundamentalMesh mesh = time("build", [&] { return build_mesh(o.subdivision); });
    time("write", [&] { write_json(o.out, to_json(mesh)); });
    manifest.extra = {{"node_count", mesh.node_count()},
                      {"independent_count", mesh.independent_count()},
                      {"element_count", mesh.elements.size()},
                      {"total_weight", mesh.node_weights.sum()},
                      {"mesh_hash", mesh_hash(mesh)}};
    finish(manifest, o.out, manifest_path(o.out));
    out << "mesh: " << mesh.independent_count() << " independent of " << mesh.node_count()
        << " nodes -> " << o.out << "\n";
}

// ---------------------------------------------------------------- gen-data

struct GenDataOptions {
    std::string mesh;
    int n = 5000;
    std::uint64_t seed = 0;
    std::string out;
    StepOptions step;
};

void run_gen_data(const GenDataOptions& o, std::ostream& out, std::ostream& err) {
    RunManifest manifest;
    manifest.command = "gen-data";
    manifest.seed = o.seed;
    const ProcessStepConfig cfg = o.step.config();
    manifest.config = {{"n", o.n}, {"seed", o.seed}, {"step", to_json(cfg)}};
    Stopwatch time(manifest);
    const FundamentalMesh mesh = load_mesh(o.mesh, manifest);
    const Provenance provenance{mesh_hash(mesh), sha256_hex(to_json(cfg).dump()), o.seed};

    const auto odfs = time("initial_odfs", [&] { return generate_initial_odfs(o.n, o.seed, mesh); });
    const Dataset data = time("simulate", [&] {
        return generate_dataset(mesh, odfs, ProcessMode::all(), cfg, fcc_slip_systems(), provenance);
    });
    time("write", [&] { write_dataset(o.out, data.records); });

    Json skipped = Json::array();
    for (const auto& s : data.skipped) {
        err << Json{{"warning", "record skipped"}, {"sample", s.sample}, {"mode", s.mode.mask()},
                    {"reason", s.reason}}
                   .dump()
            << "\n";
        skipped.push_back({{"sample", s.sample}, {"mode", s.mode.mask()}, {"reason", s.reason}});
    }
    manifest.extra = {{"format_version", kDatasetFormatVersion},
                      {"odf_count", o.n},
                      {"mode_count", ProcessMode::kCount},
                      {"record_count", data.records.size()},
                      {"skipped", skipped},
                      {"mesh_hash", provenance.mesh_hash},
                      {"config_hash", provenance.config_hash}};
    finish(manifest, o.out, manifest_path(o.out));
    out << "gen-data: " << data.records.size() << " records from " << o.n << " ODFs ("
        << data.skipped.size() << " skipped) -> " << o.out << "\n";
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    std::string mesh;
    std::string data;
    std::string mode;  // empty: every mode into the --out directory
    std::string out;
    TrainConfig cfg;
    double ratio = 0.8;
    std::uint64_t split_seed = 0;
    int hidden = kDefaultHiddenWidth;
};

void check_provenance(const std::vector<DatasetRecord>& records, const FundamentalMesh& mesh,
                      const std::string& data_path) {
    const std::string hash = mesh_hash(mesh);
    for (const auto& r : records)
        if (r.provenance.mesh_hash != hash)
            throw ConfigurationError(data_path + " was generated on a different mesh");
}

void run_train(const TrainOptions& o, std::ostream& out) {
    RunManifest manifest;
    manifest.command = "train";
    manifest.seed = o.cfg.seed;
    manifest.config = {{"train", to_json(o.cfg)},
                       {"ratio", o.ratio},
                       {"split_seed", o.split_seed},
                       {"hidden", o.hidden},
                       {"mode", o.mode.empty() ? "all" : o.mode}};
    o.cfg.validate();
    Stopwatch time(manifest);
    const FundamentalMesh mesh = load_mesh(o.mesh, manifest);
    manifest.inputs[o.data] = sha256_file(o.data);
    const auto records = time("read_data", [&] { return read_dataset(o.data); });
    check_provenance(records, mesh, o.data);
    const auto [train_records, test_records] = split(records, o.ratio, o.split_seed);

    const std::vector<ProcessMode> modes =
        o.mode.empty() ? ProcessMode::all() : std::vector{ProcessMode::from_mask(o.mode)};
    std::vector<TrainResult> results(modes.size());
    time("train", [&] {
        parallel_for(modes.size(), [&](std::size_t k) {
            TrainConfig cfg = o.cfg;
            cfg.seed = o.cfg.seed + static_cast<std::uint64_t>(modes[k].id());
            const TrainingSet train_set = training_set(train_records, modes[k]);
            if (train_set.size() == 0)
                throw InvalidArgument("no training records for mode " + modes[k].mask());
            results[k] = train(initialize_model(modes[k], mesh.node_weights, cfg.seed, o.hidden),
                               train_set, training_set(test_records, modes[k]), cfg);
        });
    });

    Json history = Json::object();
    const fs::path manifest_file = o.mode.empty() ? fs::path(o.out) / "manifest.json" : manifest_path(o.out);
    time("write", [&] {
        for (std::size_t k = 0; k < modes.size(); ++k) {
            const fs::path file = o.mode.empty() ? fs::path(o.out) / model_filename(modes[k]) : fs::path(o.out);
            write_json(file, to_json(results[k].model));
            manifest.outputs[file.string()] = sha256_file(file);
            history[modes[k].mask()] = {{"train_wmse", results[k].history.train},
                                        {"test_wmse", results[k].history.test}};
            out << "train " << modes[k].mask() << ": train WMSE " << results[k].history.train.front()
                << " -> " << results[k].history.train.back();
            if (!results[k].history.test.empty())
                out << ", test WMSE " << results[k].history.test.front() << " -> "
                    << results[k].history.test.back();
            out << "\n";
        }
    });
    manifest.extra = {{"history", history},
                      {"train_odfs", train_records.size() / std::max<std::size_t>(1, ProcessMode::kCount)},
                      {"train_records", train_records.size()},
                      {"test_records", test_records.size()}};
    manifest.write(manifest_file);
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string mesh;
    std::string odf;
    std::string modes;
    std::string out;
    StepOptions step;
    WeightOptions weights;
};

void run_simulate(const SimulateOptions& o, std::ostream& out) {
    RunManifest manifest;
    manifest.command = "simulate";
    const ProcessStepConfig cfg = o.step.config();
    manifest.config = {{"modes", o.modes}, {"odf", o.odf}, {"step", to_json(cfg)},
                       {"weights", o.weights.echo()}};
    Stopwatch time(manifest);
    const FundamentalMesh mesh = load_mesh(o.mesh, manifest);
    const Odf a0 = load_odf(o.odf, mesh, manifest);
    const auto modes = parse_modes(o.modes);
    const Trajectory t = time("simulate", [&] {
        return simulate_path(mesh, a0, modes, cfg, fcc_slip_systems(), copper_stiffness(),
                             o.weights.weights());
    });
    write_json(o.out, to_json(t));
    finish(manifest, o.out, manifest_path(o.out));
    out << "simulate: " << modes.size() << " steps, objective " << t.objectives.front() << " -> "
        << t.objectives.back() << " GPa -> " << o.out << "\n";
}

// ---------------------------------------------------------------- search

struct SearchOptions {
    std::string mesh;
    std::string models;
    std::string odf = "uniform";
    std::string oracle = "surrogate";
    std::string softmax = "base";
    std::string out;
    SearchConfig cfg;
    StepOptions step;
    WeightOptions weights;
};

void run_search(const SearchOptions& o, std::ostream& out) {
    RunManifest manifest;
    manifest.command = "search";
    manifest.seed = o.cfg.seed;
    SearchConfig cfg = o.cfg;
    cfg.form = o.softmax == "exp" ? SoftmaxForm::exponential : SoftmaxForm::base_beta;
    const ProcessStepConfig step = o.step.config();
    manifest.config = {{"search", to_json(cfg)}, {"oracle", o.oracle}, {"odf", o.odf},
                       {"step", to_json(step)},  {"weights", o.weights.echo()}};
    Stopwatch time(manifest);
    const FundamentalMesh mesh = load_mesh(o.mesh, manifest);
    const Odf a0 = load_odf(o.odf, mesh, manifest);
    const ObjectiveWeights w = o.weights.weights();
    const PropertyMatrix p = time("property_matrix", [&] {
        return assemble_property_matrix(mesh, copper_stiffness());
    });

    std::unique_ptr<StepOracle> oracle;
    if (o.oracle == "surrogate") {
        if (o.models.empty()) throw CLI::RequiredError("--models is required for the surrogate oracle");
        oracle = std::make_unique<SurrogateOracle>(load_models(o.models, manifest));
    } else {
        oracle = std::make_unique<SimulatorOracle>(mesh, step, fcc_slip_systems(), worker_count());
    }
    const PathResult result = time("search", [&] { return search(*oracle, a0, cfg, w, p); });

    const CrystalBound bound = single_crystal_bound(p, mesh.node_weights, w);
    const Eigen::VectorXd row = objective_row(p, w);
    Json report = to_json(result);
    report["oracle"] = o.oracle;
    report["config"] = manifest.config;
    report["initial_objective"] = row.dot(a0);
    report["uniform_objective"] = row.dot(mesh.uniform_odf());
    report["single_crystal_bound"] = {
        {"node", mesh.independent_ids[static_cast<std::size_t>(bound.slot)]},
        {"objective", bound.objective}};
    write_json(o.out, report);
    finish(manifest, o.out, manifest_path(o.out));

    out << "search (" << o.oracle << "): best " << result.best_objective << " GPa via";
    for (const auto& m : result.best_modes) out << " " << m.mask();
    out << "; " << result.failed_restarts << " failed restarts -> " << o.out << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
    std::string mesh;
    std::string models;
    std::string data;
    std::string out;
    double ratio = 0.8;
    std::uint64_t split_seed = 0;
    bool all_records = false;
    WeightOptions weights;
};

void run_eval(const EvalOptions& o, std::ostream& out) {
    RunManifest manifest;
    manifest.command = "eval";
    manifest.config = {{"ratio", o.ratio}, {"split_seed", o.split_seed},
                       {"all_records", o.all_records}, {"weights", o.weights.echo()}};
    Stopwatch time(manifest);
    const FundamentalMesh mesh = load_mesh(o.mesh, manifest);
    const auto models = load_models(o.models, manifest);
    manifest.inputs[o.data] = sha256_file(o.data);
    const auto records = time("read_data", [&] { return read_dataset(o.data); });
    check_provenance(records, mesh, o.data);
    const auto held_out = o.all_records ? records : split(records, o.ratio, o.split_seed).second;
    const ObjectiveWeights w = o.weights.weights();
    const StiffnessMatrix c0 = copper_stiffness();

    std::vector<std::array<double, 3>> rows(models.size());
    time("evaluate", [&] {
        parallel_for(models.size(), [&](std::size_t k) {
            double l2 = 0, stiffness = 0;
            int count = 0;
            for (const auto& r : held_out) {
                if (r.mode != models[k].mode) continue;
                const Odf y = forward(models[k], r.input);
                l2 += relative_l2(r.output, y);
                stiffness += stiffness_error(mesh, c0, r.output, y, w);
                ++count;
            }
            if (count == 0) throw InvalidArgument("no held-out records for mode " + models[k].mode.mask());
            rows[k] = {100.0 * l2 / count, stiffness / count, static_cast<double>(count)};
        });
    });

    std::string csv = "mode,relative_l2_percent,stiffness_error_gpa,records\n";
    for (std::size_t k = 0; k < models.size(); ++k)
        csv += models[k].mode.mask() + "," + format_number(rows[k][0]) + "," +
               format_number(rows[k][1]) + "," + std::to_string(static_cast<int>(rows[k][2])) + "\n";
    write_text(o.out, csv);
    finish(manifest, o.out, manifest_path(o.out));

    double worst = 0, mean_gpa = 0;
    for (const auto& r : rows) {
        worst = std::max(worst, r[0]);
        mean_gpa += r[1] / static_cast<double>(rows.size());
    }
    out << "eval: worst relative L2 " << worst << " %, mean stiffness error " << mean_gpa
        << " GPa -> " << o.out << "\n";
}

// ---------------------------------------------------------------- compare

struct CompareOptions {
    std::string mesh;
    std::string models;
    std::string odf = "uniform";
    std::string modes;
    std::string out;
    int repeats = 5;
    StepOptions step;
    WeightOptions weights;
};

void run_compare(const CompareOptions& o, std::ostream& out) {
    RunManifest manifest;
    manifest.command = "compare";
    const ProcessStepConfig step = o.step.config();
    manifest.config = {{"odf", o.odf}, {"modes", o.modes}, {"repeats", o.repeats},
                       {"step", to_json(step)}, {"weights", o.weights.echo()}};
    Stopwatch time(manifest);
    const FundamentalMesh mesh = load_mesh(o.mesh, manifest);
    const Odf a0 = load_odf(o.odf, mesh, manifest);
    const auto modes = parse_modes(o.modes);
    const ObjectiveWeights w = o.weights.weights();
    const StiffnessMatrix c0 = copper_stiffness();

    const SurrogateOracle surrogate(load_models(o.models, manifest));
    const std::size_t workers = worker_count();
    const SimulatorOracle simulator(mesh, step, fcc_slip_systems(), workers);

    auto replay = [&](const StepOracle& oracle) {
        Trajectory t;
        t.odfs.push_back(a0);
        t.objectives.push_back(objective(homogenize(mesh, c0, a0), w));
        for (const auto& m : modes) {
            t.odfs.push_back(oracle.step(t.odfs.back(), m));
            t.modes.push_back(m);
            t.objectives.push_back(objective(homogenize(mesh, c0, t.odfs.back()), w));
        }
        return t;
    };
    const Trajectory sim = time("simulator_path", [&] { return replay(simulator); });
    const Trajectory sur = time("surrogate_path", [&] { return replay(surrogate); });

    Json steps = Json::array();
    for (std::size_t i = 0; i < sim.odfs.size(); ++i)
        steps.push_back({{"step", i},
                         {"relative_l2", relative_l2(sim.odfs[i], sur.odfs[i])},
                         {"stiffness_gap_gpa", std::abs(sim.objectives[i] - sur.objectives[i])}});

    const double t_sur = time("time_surrogate", [&] { return time_expansion(surrogate, a0, o.repeats); });
    const double t_sim = time("time_simulator", [&] { return time_expansion(simulator, a0, o.repeats); });
    const Json timing = {{"surrogate_expansion_seconds", t_sur},
                         {"simulator_expansion_seconds", t_sim},
                         {"speedup", t_sim / t_sur},
                         {"repeats", o.repeats},
                         {"simulator_workers", workers}};

    const double f_sim = sim.objectives.back(), f_sur = sur.objectives.back();
    const Json report = {{"modes", o.modes},
                         {"simulator", to_json(sim)},
                         {"surrogate", to_json(sur)},
                         {"per_step", steps},
                         {"final",
                          {{"simulator_objective", f_sim},
                           {"surrogate_objective", f_sur},
                           {"relative_gap", std::abs(f_sur - f_sim) / f_sim}}},
                         {"timing", timing}};
    write_json(o.out, report);
    manifest.extra = {{"timing", timing}};
    finish(manifest, o.out, manifest_path(o.out));
    out << "compare: final objective simulator " << f_sim << " GPa, surrogate " << f_sur
        << " GPa; 31-mode expansion " << t_sim << " s vs " << t_sur << " s (" << t_sim / t_sur
        << "x) -> " << o.out << "\n";
}

// ---------------------------------------------------------------- export-plot

struct ExportOptions {
    std::string traj;
    std::string mesh;
    std::string out;
};

void run_export_plot(const ExportOptions& o, std::ostream& out) {
    RunManifest manifest;
    manifest.command = "export-plot";
    const FundamentalMesh mesh = load_mesh(o.mesh, manifest);
    manifest.inputs[o.traj] = sha256_file(o.traj);
    const Json j = read_json(o.traj);
    Trajectory t;
    try {
        t = trajectory_from_json(j);
        for (const auto& a : t.odfs)
            if (a.size() != mesh.independent_count())
                throw InvalidArgument("trajectory ODF length does not match the mesh");
    } catch (const InvalidArgument& e) {
        throw FileError(o.traj, 0, e.what());
    }
    std::string csv = "step,node_id,r1,r2,r3,value,objective\n";
    for (std::size_t s = 0; s < t.odfs.size(); ++s) {
        const Eigen::VectorXd full = mesh.expand(t.odfs[s]);
        for (int n = 0; n < mesh.node_count(); ++n) {
            const Vector3& r = mesh.nodes[static_cast<std::size_t>(n)];
            csv += std::to_string(s) + "," + std::to_string(n) + "," + format_number(r.x()) + "," +
                   format_number(r.y()) + "," + format_number(r.z()) + "," + format_number(full(n)) +
                   "," + format_number(t.objectives[s]) + "\n";
        }
    }
    write_text(o.out, csv);
    finish(manifest, o.out, manifest_path(o.out));
    out << "export-plot: " << t.odfs.size() << " steps x " << mesh.node_count() << " nodes -> "
        << o.out << "\n";
}

Json error_json(const char* kind, const std::string& message) {
    return {{"error", kind}, {"message", message}};
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Polycrystal texture simulation, surrogate training and process-path search",
                 "texture-forge"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", kToolVersion);
    // --config is consumed before parsing; declared here so it shows in --help.
    std::string config_path;
    app.add_option("--config", config_path, "JSON file of flag values (flags on the command line win)");

    std::function<void()> action;

    MeshOptions mesh_opt;
    auto* mesh_cmd = app.add_subcommand("mesh", "Build the fundamental-region mesh");
    mesh_cmd->add_option("--subdivision", mesh_opt.subdivision, "Cells per cube edge")
        ->capture_default_str();
    mesh_cmd->add_option("--out", mesh_opt.out, "Mesh JSON file")->required();
    mesh_cmd->callback([&] { action = [&] { run_mesh(mesh_opt, out); }; });

    GenDataOptions gen_opt;
    auto* gen_cmd = app.add_subcommand("gen-data", "Label random ODFs with the simulator");
    gen_cmd->add_option("--mesh", gen_opt.mesh, "Mesh JSON file")->required();
    gen_cmd->add_option("--n", gen_opt.n, "Number of initial ODFs")->capture_default_str();
    gen_cmd->add_option("--seed", gen_opt.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--out", gen_opt.out, "Dataset JSON-lines file")->required();
    gen_opt.step.add_to(gen_cmd);
    gen_cmd->callback([&] { action = [&] { run_gen_data(gen_opt, out, err); }; });

    TrainOptions train_opt;
    auto* train_cmd = app.add_subcommand("train", "Train surrogate networks");
    train_cmd->add_option("--mesh", train_opt.mesh, "Mesh JSON file")->required();
    train_cmd->add_option("--data", train_opt.data, "Dataset JSON-lines file")->required();
    train_cmd->add_option("--mode", train_opt.mode,
                          "Train one mode (5-digit mask) into --out; all 31 into the --out directory otherwise");
    train_cmd->add_option("--out", train_opt.out, "Model file, or directory for all modes")->required();
    train_cmd->add_option("--epochs", train_opt.cfg.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", train_opt.cfg.batch_size)->capture_default_str();
    train_cmd->add_option("--lr-max", train_opt.cfg.lr_max)->capture_default_str();
    train_cmd->add_option("--lr-min", train_opt.cfg.lr_min)->capture_default_str();
    train_cmd->add_option("--restart-period", train_opt.cfg.restart_period)->capture_default_str();
    train_cmd->add_option("--period-multiplier", train_opt.cfg.period_multiplier)->capture_default_str();
    train_cmd->add_option("--hidden", train_opt.hidden, "Hidden-layer width")->capture_default_str();
    train_cmd->add_option("--seed", train_opt.cfg.seed, "Master seed; each mode adds its id")
        ->capture_default_str();
    train_cmd->add_option("--ratio", train_opt.ratio, "Fraction of ODFs used for training")
        ->capture_default_str();
    train_cmd->add_option("--split-seed", train_opt.split_seed)->capture_default_str();
    train_cmd->callback([&] { action = [&] { run_train(train_opt, out); }; });

    SimulateOptions sim_opt;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a processing path through the simulator");
    sim_cmd->add_option("--mesh", sim_opt.mesh, "Mesh JSON file")->required();
    sim_cmd->add_option("--odf", sim_opt.odf, "ODF JSON file, 'uniform' or 'random:SEED'")->required();
    sim_cmd->add_option("--modes", sim_opt.modes, "Comma-separated mode masks")->required();
    sim_cmd->add_option("--out", sim_opt.out, "Trajectory JSON file")->required();
    sim_opt.step.add_to(sim_cmd);
    sim_opt.weights.add_to(sim_cmd);
    sim_cmd->callback([&] { action = [&] { run_simulate(sim_opt, out); }; });

    SearchOptions search_opt;
    auto* search_cmd = app.add_subcommand("search", "Exponential-weights process-path search");
    search_cmd->add_option("--mesh", search_opt.mesh, "Mesh JSON file")->required();
    search_cmd->add_option("--models", search_opt.models, "Directory of surrogate models");
    search_cmd->add_option("--odf", search_opt.odf, "ODF JSON file, 'uniform' or 'random:SEED'")
        ->capture_default_str();
    search_cmd->add_option("--restarts", search_opt.cfg.restarts)->capture_default_str();
    search_cmd->add_option("--steps", search_opt.cfg.steps)->capture_default_str();
    search_cmd->add_option("--beta", search_opt.cfg.beta, "Softmax base")->capture_default_str();
    search_cmd->add_option("--seed", search_opt.cfg.seed)->capture_default_str();
    search_cmd->add_flag("--greedy", search_opt.cfg.greedy, "Always take the best mode");
    search_cmd->add_option("--softmax", search_opt.softmax, "base: beta^(d/dmax), exp: e^(beta d/dmax)")
        ->check(CLI::IsMember({"base", "exp"}))
        ->capture_default_str();
    search_cmd->add_option("--oracle", search_opt.oracle)
        ->check(CLI::IsMember({"surrogate", "simulator"}))
        ->capture_default_str();
    search_cmd->add_option("--out", search_opt.out, "Result JSON file")->required();
    search_opt.step.add_to(search_cmd);
    search_opt.weights.add_to(search_cmd);
    search_cmd->callback([&] { action = [&] { run_search(search_opt, out); }; });

    EvalOptions eval_opt;
    auto* eval_cmd = app.add_subcommand("eval", "Per-mode surrogate error table on held-out data");
    eval_cmd->add_option("--mesh", eval_opt.mesh, "Mesh JSON file")->required();
    eval_cmd->add_option("--models", eval_opt.models, "Directory of surrogate models")->required();
    eval_cmd->add_option("--data", eval_opt.data, "Dataset JSON-lines file")->required();
    eval_cmd->add_option("--out", eval_opt.out, "CSV file")->required();
    eval_cmd->add_option("--ratio", eval_opt.ratio, "Training fraction used by train")->capture_default_str();
    eval_cmd->add_option("--split-seed", eval_opt.split_seed)->capture_default_str();
    eval_cmd->add_flag("--all-records", eval_opt.all_records, "Evaluate every record, not the held-out split");
    eval_opt.weights.add_to(eval_cmd);
    eval_cmd->callback([&] { action = [&] { run_eval(eval_opt, out); }; });

    CompareOptions cmp_opt;
    auto* cmp_cmd = app.add_subcommand("compare", "Simulator against surrogate along one path");
    cmp_cmd->add_option("--mesh", cmp_opt.mesh, "Mesh JSON file")->required();
    cmp_cmd->add_option("--models", cmp_opt.models, "Directory of surrogate models")->required();
    cmp_cmd->add_option("--odf", cmp_opt.odf, "ODF JSON file, 'uniform' or 'random:SEED'")
        ->capture_default_str();
    cmp_cmd->add_option("--modes", cmp_opt.modes, "Comma-separated mode masks")->required();
    cmp_cmd->add_option("--repeats", cmp_opt.repeats, "Timed 31-mode expansions per oracle")
        ->capture_default_str();
    cmp_cmd->add_option("--out", cmp_opt.out, "Report JSON file")->required();
    cmp_opt.step.add_to(cmp_cmd);
    cmp_opt.weights.add_to(cmp_cmd);
    cmp_cmd->callback([&] { action = [&] { run_compare(cmp_opt, out); }; });

    ExportOptions exp_opt;
    auto* exp_cmd = app.add_subcommand("export-plot", "Trajectory as per-node CSV for plotting");
    exp_cmd->add_option("--traj", exp_opt.traj, "Trajectory JSON file")->required();
    exp_cmd->add_option("--mesh", exp_opt.mesh, "Mesh JSON file the trajectory was run on")->required();
    exp_cmd->add_option("--out", exp_opt.out, "CSV file")->required();
    exp_cmd->callback([&] { action = [&] { run_export_plot(exp_opt, out); }; });

    try {
        std::vector<std::string> args = apply_config_file(raw_args);
        std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
        app.parse(reversed);
        action();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e, out, err);
        err << error_json("usage", e.what()).dump() << "\n";
        return kExitUsage;
    } catch (const FileError& e) {
        Json j = error_json("file", e.what());
        j["path"] = e.path();
        if (e.line()) j["line"] = e.line();
        err << j.dump() << "\n";
        return kExitFile;
    } catch (const InvalidArgument& e) {
        err << error_json("invalid-argument", e.what()).dump() << "\n";
        return kExitUsage;
    } catch (const ConfigurationError& e) {
        err << error_json("configuration", e.what()).dump() << "\n";
        return kExitFile;
    } catch (const ConvergenceError& e) {
        Json j = error_json("convergence", e.what());
        j["residual"] = e.residual();
        if (e.node() >= 0) j["node"] = e.node();
        err << j.dump() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << error_json("runtime", e.what()).dump() << "\n";
        return kExitRuntime;
    }
}

}  // namespace texforge::cli
