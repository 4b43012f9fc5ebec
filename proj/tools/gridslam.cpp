/* gridslam.cpp */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridslam/gridslam.hpp"

using namespace gridslam;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDegenerate = 3;

class UsageError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct Clock
{
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - this->start)
            .count();
    }
};

std::string algorithm_name(Algorithm a)
{
    switch (a) {
        case Algorithm::DeadReckoning: return "dead-reckoning";
        case Algorithm::OdometryPath: return "odometry-path";
        case Algorithm::HardConsistency: return "hard-consistency";
        case Algorithm::Agreement: return "agreement";
    }
    return "unknown";
}

Json entries_json(const std::vector<std::pair<std::string, std::string>>& entries,
                  const std::string& skip = {})
{
    Json out = Json::object();
    for (const auto& [key, value] : entries)
        if (key != skip)
            out[key] = value;
    return out;
}

void write_manifest(const Json& manifest, const std::string& path)
{
    detail::write_file(path, manifest.dump(2) + "\n");
}

/*
 * Grid covering the dead-reckoned path plus the sensor range and a
 * safety band, for logs without an explicit grid
 */
GridGeometry auto_geometry(const Dataset& d, const Pose& start)
{
    double min_x = start.x;
    double max_x = start.x;
    double min_y = start.y;
    double max_y = start.y;
    Pose z = start;
    for (const DataRecord& r : d.records) {
        z = compose(z, r.u);
        min_x = std::min(min_x, z.x);
        max_x = std::max(max_x, z.x);
        min_y = std::min(min_y, z.y);
        max_y = std::max(max_y, z.y);
    }
    const double margin = d.d_max + 2.0;
    const double res = d.resolution;
    GridGeometry g;
    g.resolution = res;
    g.origin_x = res * std::floor((min_x - margin) / res);
    g.origin_y = res * std::floor((min_y - margin) / res);
    g.cols = static_cast<int>(std::ceil((max_x + margin - g.origin_x) / res));
    g.rows = static_cast<int>(std::ceil((max_y + margin - g.origin_y) / res));
    return g;
}

bool has_grid_keys(const KeyValues& kv)
{
    return std::any_of(kv.begin(), kv.end(),
                       [](const auto& e) { return e.first.rfind("grid.", 0) == 0; });
}

/* Defaults, then the config file, then the log's scanner and grid hints */
SlamConfig load_slam_config(const std::optional<std::string>& path, const Dataset& d)
{
    SlamConfig cfg;
    KeyValues kv;
    if (path)
        kv = read_key_values(*path);
    apply_slam_config(cfg, kv);
    if (!kv.contains("perception.d_max"))
        cfg.perception.d_max = d.d_max;
    if (!has_grid_keys(kv))
        cfg.geometry = auto_geometry(d, cfg.start);
    return cfg;
}

Json diagnostics_json(const SlamResult& r)
{
    double ess = 0.0;
    int fallbacks = 0;
    long masked = 0;
    for (const StepDiagnostics& s : r.diagnostics) {
        ess += s.ess;
        fallbacks += s.fallback ? 1 : 0;
        masked += s.masked_beams;
    }
    Json out;
    out["steps"] = r.diagnostics.size();
    out["mean_effective_sample_size"] =
        r.diagnostics.empty() ? 0.0 : ess / static_cast<double>(r.diagnostics.size());
    out["fallback_steps"] = fallbacks;
    out["masked_beams"] = masked;
    if (r.degeneracy) {
        out["degeneracy"] = Json { { "timestep", r.degeneracy->timestep },
                                   { "completed_steps", r.degeneracy->completed_steps } };
    } else {
        out["degeneracy"] = nullptr;
    }
    return out;
}

/*
 * simulate
 */

struct SimulateArgs
{
    std::string world;
    std::string config;
    std::string out;
    std::string truth;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> manifest;
};

int cmd_simulate(const SimulateArgs& a, bool verbose)
{
    const Clock clock;
    const World w = read_world(a.world);
    SimulationSetup setup;
    apply_sim_config(setup, read_key_values(a.config));
    if (a.seed)
        setup.sim.seed = *a.seed;

    const Simulation sim = simulate(w, setup.sim, setup.scanner(), setup.n_beams);
    write_dataset(sim.dataset, a.out);
    write_path_csv(timed_path(sim.truth), a.truth);
    if (verbose)
        std::cerr << "simulated " << sim.dataset.size() << " records\n";

    Json m;
    m["command"] = "simulate";
    m["seed"] = setup.sim.seed;
    m["inputs"] = Json { { "world", a.world }, { "config", a.config } };
    m["outputs"] = Json { { "log", a.out }, { "truth", a.truth } };
    m["config"] = entries_json(sim_config_entries(setup));
    m["records"] = sim.dataset.size();
    m["timing"] = Json { { "seconds", clock.seconds() } };
    write_manifest(m, a.manifest.value_or(a.out + ".manifest.json"));
    return kExitOk;
}

/*
 * slam
 */

struct SlamArgs
{
    int algo = 3;
    std::optional<int> n;
    std::string data;
    std::optional<std::string> config;
    std::string out_map;
    std::string out_path;
    std::optional<std::string> manifest;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

int cmd_slam(const SlamArgs& a, bool verbose)
{
    const Clock clock;
    const Dataset d = read_dataset(a.data);
    SlamConfig cfg = load_slam_config(a.config, d);
    if (a.n)
        cfg.n_is = *a.n;
    if (a.seed)
        cfg.seed = *a.seed;
    if (a.workers)
        cfg.workers = *a.workers;

    const Algorithm algo = static_cast<Algorithm>(a.algo);
    StepCallback progress;
    if (verbose)
        progress = [&](const StepDiagnostics& s) {
            std::fprintf(stderr, "t=%d/%zu ess=%.2f%s\n", s.t, d.size(), s.ess,
                         s.fallback ? " fallback" : "");
        };
    const SlamResult r = run_slam(algo, d, cfg, progress);

    write_map_pgm(render(r.labels(cfg.labeling)), a.out_map);
    write_path_csv(TimedPath { r.timesteps, r.path }, a.out_path);

    Json m;
    m["command"] = "slam";
    m["seed"] = cfg.seed;
    m["algorithm"] = a.algo;
    m["algorithm_name"] = algorithm_name(algo);
    m["inputs"] = Json { { "data", a.data }, { "config", a.config ? Json(*a.config) : Json() } };
    m["outputs"] = Json { { "map", a.out_map }, { "path", a.out_path } };
    m["config"] = entries_json(slam_config_entries(cfg), "workers");
    m["records"] = d.size();
    m["path_length"] = r.path.size();
    m["completed"] = !r.degeneracy.has_value();
    m["diagnostics"] = diagnostics_json(r);
    m["timing"] = Json { { "seconds", clock.seconds() }, { "workers", cfg.workers } };
    write_manifest(m, a.manifest.value_or(a.out_map + ".manifest.json"));

    if (r.degeneracy) {
        std::cerr << "algorithm 2 found no consistent pose at timestep "
                  << r.degeneracy->timestep << " after " << r.degeneracy->completed_steps
                  << " steps\n";
        return kExitDegenerate;
    }
    return kExitOk;
}

/*
 * render
 */

struct RenderArgs
{
    std::string data;
    std::string out;
    std::optional<std::string> config;
    std::optional<std::string> out_path;
};

int cmd_render(const RenderArgs& a)
{
    const Dataset d = read_dataset(a.data);
    const SlamConfig cfg = load_slam_config(a.config, d);
    const SlamResult r = dead_reckon(d, cfg.start, cfg.geometry);
    write_map_pgm(render(r.labels(cfg.labeling)), a.out);
    if (a.out_path)
        write_path_csv(TimedPath { r.timesteps, r.path }, *a.out_path);
    return kExitOk;
}

/*
 * eval
 */

struct EvalArgs
{
    std::optional<std::string> map;
    std::optional<std::string> truth;
    std::optional<std::string> est_path;
    std::optional<std::string> truth_path;
    std::optional<std::string> out;
};

int cmd_eval(const EvalArgs& a)
{
    if (a.map.has_value() != a.truth.has_value())
        throw UsageError("--map and --truth go together");
    if (a.est_path.has_value() != a.truth_path.has_value())
        throw UsageError("--est-path and --truth-path go together");
    if (!a.map && !a.est_path)
        throw UsageError("nothing to evaluate: give --map/--truth and/or --est-path/--truth-path");

    std::string csv = "metric,value\n";
    if (a.map) {
        const World w = read_world(*a.truth);
        const MapScore s = map_accuracy(labels_from_pixels(read_map_pgm(*a.map)), w);
        csv += "labeled_cells," + std::to_string(s.labeled_cells) + "\n";
        csv += "correct_cells," + std::to_string(s.correct) + "\n";
        csv += "accuracy," + format_real(s.accuracy) + "\n";
    }
    if (a.est_path) {
        const TimedPath est = read_path_csv(*a.est_path);
        const TimedPath truth = read_path_csv(*a.truth_path);
        /* Compare at the timesteps the estimate kept */
        std::map<int, Pose> by_t;
        for (std::size_t i = 0; i < truth.poses.size(); ++i)
            by_t.emplace(truth.timesteps[i], truth.poses[i]);
        std::vector<Pose> matched;
        for (const int t : est.timesteps) {
            const auto it = by_t.find(t);
            if (it == by_t.end())
                throw LengthMismatch("truth path has no pose for timestep " + std::to_string(t));
            matched.push_back(it->second);
        }
        const PathError e = path_error(est.poses, matched);
        csv += "rmse_position," + format_real(e.rmse_position) + "\n";
        csv += "final_error," + format_real(e.final_error) + "\n";
        csv += "final_heading_error," + format_real(e.final_heading_error) + "\n";
    }
    if (a.out)
        detail::write_file(*a.out, csv);
    else
        std::cout << csv;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Occupancy-grid SLAM from odometry and laser logs" };
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Per-timestep progress on standard error");

    SimulateArgs sim_args;
    CLI::App* sim = app.add_subcommand("simulate", "Generate a log and ground truth from a world");
    sim->add_option("--world", sim_args.world, "World file")->required();
    sim->add_option("--config", sim_args.config, "Simulation config (key = value)")->required();
    sim->add_option("--out", sim_args.out, "Output log")->required();
    sim->add_option("--truth", sim_args.truth, "Output ground-truth path CSV")->required();
    sim->add_option("--seed", sim_args.seed, "Random seed (overrides the config)");
    sim->add_option("--manifest", sim_args.manifest, "Run manifest (default <out>.manifest.json)");

    SlamArgs slam_args;
    CLI::App* slam = app.add_subcommand("slam", "Estimate path and map from a log");
    slam->add_option("--algo", slam_args.algo, "Algorithm 1, 2 or 3")
        ->check(CLI::IsMember({ 1, 2, 3 }))
        ->capture_default_str();
    slam->add_option("--n", slam_args.n, "Importance-sampling sample size (default 100)")
        ->check(CLI::Range(1, 1000000));
    slam->add_option("--data", slam_args.data, "Input log")->required();
    slam->add_option("--config", slam_args.config, "SLAM config (key = value)");
    slam->add_option("--out-map", slam_args.out_map, "Output map PGM")->required();
    slam->add_option("--out-path", slam_args.out_path, "Output path CSV")->required();
    slam->add_option("--manifest", slam_args.manifest, "Run manifest (default <out-map>.manifest.json)");
    slam->add_option("--seed", slam_args.seed, "Random seed (overrides the config)");
    slam->add_option("--workers", slam_args.workers, "Threads for candidate weighting")
        ->check(CLI::Range(1, 1024));

    RenderArgs render_args;
    CLI::App* rend = app.add_subcommand("render", "Dead-reckoned raw map of a log");
    rend->add_option("--data", render_args.data, "Input log")->required();
    rend->add_option("--out", render_args.out, "Output map PGM")->required();
    rend->add_option("--config", render_args.config, "SLAM config for the grid and start pose");
    rend->add_option("--out-path", render_args.out_path, "Dead-reckoned path CSV");

    EvalArgs eval_args;
    CLI::App* ev = app.add_subcommand("eval", "Score a map and/or path against ground truth");
    ev->add_option("--map", eval_args.map, "Estimated map PGM");
    ev->add_option("--truth", eval_args.truth, "Ground-truth world file");
    ev->add_option("--est-path", eval_args.est_path, "Estimated path CSV");
    ev->add_option("--truth-path", eval_args.truth_path, "Ground-truth path CSV");
    ev->add_option("--out", eval_args.out, "Output CSV (default standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*sim)
            return cmd_simulate(sim_args, verbose);
        if (*slam)
            return cmd_slam(slam_args, verbose);
        if (*rend)
            return cmd_render(render_args);
        return cmd_eval(eval_args);
    } catch (const UsageError& e) {
        std::cerr << "gridslam: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "gridslam: " << e.what() << "\n";
        return kExitData;
    }
}
