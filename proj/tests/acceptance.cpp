/* acceptance.cpp */

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gridslam/gridslam.hpp"

using namespace gridslam;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double elapsed(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

/*
 * Fixture runs
 */

constexpr int kSeeds = 10;
const PerceptionParams kScanner { 0.02, 10.0 };
constexpr int kBeams = 180;
constexpr std::size_t kMinComponent = 200;

Simulation corridor_run(std::uint64_t seed)
{
    return simulate(two_corridor_world(), two_corridor_sim_config(seed), kScanner, kBeams);
}

SlamConfig corridor_slam_config(std::uint64_t seed, int n)
{
    SlamConfig cfg;
    cfg.n_is = n;
    cfg.geometry = two_corridor_world().geometry;
    cfg.start = two_corridor_sim_config().start;
    cfg.seed = 1000 + seed;
    return cfg;
}

double final_error(const SlamResult& r, const std::vector<Pose>& truth)
{
    const Pose& est = r.path.back();
    const Pose& ref = truth.at(static_cast<std::size_t>(r.timesteps.back()));
    return std::hypot(est.x - ref.x, est.y - ref.y);
}

/*
 * 1. Distribution oracles
 */

/* First-occupied law over one ray of labels ('u', 'e', 'o'), by summing
 * every joint assignment of the unknown cells */
std::vector<double> enumerate_assignments(const std::string& labels, double p)
{
    std::vector<int> unknown;
    bool terminal = false;
    for (const char l : labels) {
        if (l == 'u')
            unknown.push_back(1);
        if (l == 'o') {
            terminal = true;
            break;
        }
    }
    const std::size_t m = unknown.size();
    std::vector<double> mass(m + (terminal ? 1 : 0), 0.0);
    for (std::uint64_t bits = 0; bits < (std::uint64_t { 1 } << m); ++bits) {
        double prob = 1.0;
        int first = -1;
        for (std::size_t j = 0; j < m; ++j) {
            const bool occ = (bits >> j) & 1U;
            prob *= occ ? p : 1.0 - p;
            if (occ && first < 0)
                first = static_cast<int>(j);
        }
        if (first >= 0)
            mass[static_cast<std::size_t>(first)] += prob;
        else if (terminal)
            mass.back() += prob;
    }
    double total = 0.0;
    for (const double x : mass)
        total += x;
    for (double& x : mass)
        x /= total;
    return mass;
}

/* Same law from the outcome tree: branch on each unknown cell in ray
 * order; an occupied branch is a leaf since later cells are irrelevant */
std::vector<double> enumerate_outcome_tree(const std::string& labels, double p)
{
    std::vector<double> mass;
    double reach = 1.0;
    for (const char l : labels) {
        if (l == 'e')
            continue;
        if (l == 'o') {
            mass.push_back(reach);
            break;
        }
        mass.push_back(reach * p);
        reach *= 1.0 - p;
    }
    double total = 0.0;
    for (const double x : mass)
        total += x;
    for (double& x : mass)
        x /= total;
    return mass;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n)
{
    const double h = (b - a) / n;
    double sum = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

/* A 1-row map with the given labels right of the robot's cell */
PartialMap ray_map(const std::string& labels, double res)
{
    PartialMap m(GridGeometry { 1, static_cast<int>(labels.size()) + 1, res, 0.0, 0.0 });
    for (std::size_t i = 0; i < labels.size(); ++i)
        m.labels(0, static_cast<int>(i) + 1) = labels[i] == 'u'
            ? CellLabel::Unknown
            : (labels[i] == 'e' ? CellLabel::Empty : CellLabel::Occupied);
    return m;
}

Outcome criterion_1()
{
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<int> len(1, 80);
    std::uniform_real_distribution<double> up(0.02, 0.9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double res = 0.1;
    const Pose z { 0.5 * res, 0.5 * res, 0.0 };

    double worst = 0.0;
    int fixtures = 0;
    int bitwise = 0;
    int largest = 0;
    bool sizes_ok = true;
    while (fixtures < 200) {
        const int n = len(rng);
        const double p_empty = 0.5 * unit(rng);
        const double p_occ = 0.1 * unit(rng);
        std::string labels;
        for (int i = 0; i < n; ++i) {
            const double u = unit(rng);
            labels += u < p_occ ? 'o' : (u < p_occ + p_empty ? 'e' : 'u');
        }
        const ConsistentSet c = consistent_set(ray_map(labels, res), z, 0, kScanner, 1);
        if (c.empty() || c.size() > 50)
            continue;
        ++fixtures;
        largest = std::max(largest, static_cast<int>(c.size()));

        const double p = up(rng);
        const auto pmf = trgeom_pmf(c, MapPrior { p });
        const long unknowns = std::count(labels.begin(), labels.end(), 'u');
        std::vector<double> oracle;
        if (unknowns <= 16) {
            oracle = enumerate_assignments(labels, p);
            ++bitwise;
        } else {
            oracle = enumerate_outcome_tree(labels, p);
        }
        if (oracle.size() != pmf.size()) {
            sizes_ok = false;
            continue;
        }
        for (std::size_t i = 0; i < pmf.size(); ++i)
            worst = std::max(worst, std::fabs(pmf[i] - oracle[i]));
    }

    double worst_integral = 0.0;
    for (const double sigma : { 0.02, 0.5 })
        for (const double theta : { 0.01, 5.0, 9.99 }) {
            const PerceptionParams pp { sigma, 10.0 };
            const auto f = [&](double v) {
                return v <= 0.0 || v >= pp.d_max ? 0.0
                                                 : std::exp(perception_logpdf(v, theta, pp));
            };
            const double eps = 1e-12;
            const double a = std::max(eps, theta - 12.0 * sigma);
            const double b = std::min(pp.d_max - eps, theta + 12.0 * sigma);
            double total = simpson(f, a, b, 200000);
            if (a > eps)
                total += simpson(f, eps, a, 20000);
            if (b < pp.d_max - eps)
                total += simpson(f, b, pp.d_max - eps, 20000);
            worst_integral = std::max(worst_integral, std::fabs(total - 1.0));
        }

    return { sizes_ok && worst <= 1e-12 && worst_integral <= 1e-6,
             fmt("trgeom max |diff| %.2e over %d fixtures (%d by assignments, largest |C| %d); "
                 "density max |integral - 1| %.2e",
                 worst, fixtures, bitwise, largest, worst_integral) };
}

/*
 * 2. Importance-sampling correctness
 */

Outcome criterion_2()
{
    const double res = 0.1;
    const std::string labels = "eeeuuuueuuuuuuouuuu";
    const PartialMap map = ray_map(labels, res);
    const PerceptionParams pp { 0.25, 10.0 };
    const MapPrior prior { 0.05 };
    const double v = 1.0;
    const Pose z { 0.5 * res, 0.5 * res, 0.0 };
    const ConsistentSet c = consistent_set(map, z, 0, pp, 1);

    /* Exact target over theta: prior mass of the first occupied cell times
     * the truncated Gaussian density of the reading */
    const int max_theta = static_cast<int>(labels.size());
    std::vector<double> target(static_cast<std::size_t>(max_theta) + 1, 0.0);
    const auto Phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    double reach = 1.0;
    double total = 0.0;
    for (int theta = 1; theta <= max_theta; ++theta) {
        const char l = labels[static_cast<std::size_t>(theta - 1)];
        if (l == 'e')
            continue;
        const double mass = l == 'o' ? reach : reach * prior.p;
        const double tm = (theta - 0.5) * res;
        const double dens = std::exp(-0.5 * std::pow((v - tm) / pp.sigma, 2)) /
                            (pp.sigma * std::sqrt(2.0 * std::numbers::pi)) /
                            (Phi((pp.d_max - tm) / pp.sigma) - Phi(-tm / pp.sigma));
        target[static_cast<std::size_t>(theta)] = mass * dens;
        total += mass * dens;
        if (l == 'o')
            break;
        reach *= 1.0 - prior.p;
    }
    for (double& x : target)
        x /= total;

    const std::size_t n = 100000;
    Rng rng = Rng::stream(7, StreamTag::Test);
    std::vector<int> draws(n);
    std::vector<double> logweights(n);
    for (std::size_t i = 0; i < n; ++i) {
        draws[i] = perception_sample(v, pp, map.geometry, rng);
        logweights[i] = algo1_theta_logweight(draws[i], c, pp, prior, map.geometry);
    }
    /* Resampling a draw is resampling its theta with the summed weight of
     * all draws sharing it */
    std::vector<double> pooled(target.size(), kLogZero);
    for (std::size_t i = 0; i < n; ++i) {
        if (is_log_zero(logweights[i]))
            continue;
        double& acc = pooled.at(static_cast<std::size_t>(draws[i]));
        const double hi = std::max(acc, logweights[i]);
        acc = hi + std::log(std::exp(acc - hi) + std::exp(logweights[i] - hi));
    }
    std::vector<double> empirical(target.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
        empirical[resample(pooled, rng)] += 1.0 / static_cast<double>(n);

    double tv = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i)
        tv += 0.5 * std::fabs(empirical[i] - target[i]);
    return { tv <= 0.02, fmt("TV %.4f over %d cells, sigma %.2f m, n %zu", tv,
                             static_cast<int>(labels.size()), pp.sigma, n) };
}

/*
 * 3-6. Two-corridor reproductions
 */

Outcome criterion_3()
{
    const World w = two_corridor_world();
    const int truth_components = free_components(world_labels(w), kMinComponent);
    int exceeded = 0;
    std::string counts;
    for (int s = 0; s < kSeeds; ++s) {
        const Simulation sim = corridor_run(static_cast<std::uint64_t>(s));
        const SlamResult dr = dead_reckon(sim.dataset, two_corridor_sim_config().start, w.geometry);
        const int k = free_components(dr.labels(LabelingParams {}), kMinComponent);
        exceeded += k > truth_components ? 1 : 0;
        counts += (s > 0 ? " " : "") + std::to_string(k);
    }
    return { exceeded >= 9, fmt("%d/10 seeds exceed the true %d component(s); counts %s", exceeded,
                                truth_components, counts.c_str()) };
}

Outcome criterion_4()
{
    std::vector<double> dr;
    std::vector<double> a1;
    std::vector<double> a3;
    for (int s = 0; s < kSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        const Simulation sim = corridor_run(seed);
        const SlamConfig cfg = corridor_slam_config(seed, 100);
        dr.push_back(final_error(dead_reckon(sim.dataset, cfg.start, cfg.geometry), sim.truth));
        a1.push_back(final_error(run_algo1(sim.dataset, cfg), sim.truth));
        a3.push_back(final_error(run_algo3(sim.dataset, cfg), sim.truth));
    }
    const double m_dr = median(dr);
    const double r1 = median(a1) / m_dr;
    const double r3 = median(a3) / m_dr;
    return { r1 >= 0.8 && r3 <= 0.25,
             fmt("median final error: dead reckoning %.3f m, algorithm 1 %.3f m (%.3f of DR, need >= 0.80), "
                 "algorithm 3 %.3f m (%.3f of DR, need <= 0.25)",
                 m_dr, median(a1), r1, median(a3), r3) };
}

Outcome criterion_5()
{
    int degenerate = 0;
    std::string stops;
    for (int s = 0; s < kSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        const Simulation sim = corridor_run(seed);
        const SlamResult r = run_algo2(sim.dataset, corridor_slam_config(seed, 100));
        const bool stopped = r.degeneracy.has_value() &&
                             static_cast<std::size_t>(r.degeneracy->timestep) <= sim.dataset.size();
        degenerate += stopped ? 1 : 0;
        stops += (s > 0 ? " " : "") + (stopped ? std::to_string(r.degeneracy->timestep) : std::string("-"));
    }
    return { degenerate >= 9, fmt("%d/10 seeds stop with a degeneracy report; stop timesteps %s",
                                  degenerate, stops.c_str()) };
}

Outcome criterion_6()
{
    const World w = two_corridor_world();
    std::vector<double> acc10;
    std::vector<double> acc100;
    for (int s = 0; s < kSeeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        const Simulation sim = corridor_run(seed);
        for (const int n : { 10, 100 }) {
            const SlamConfig cfg = corridor_slam_config(seed, n);
            const double a = map_accuracy(run_algo3(sim.dataset, cfg).labels(cfg.labeling), w).accuracy;
            (n == 10 ? acc10 : acc100).push_back(a);
        }
    }
    const double m10 = median(acc10);
    const double m100 = median(acc100);
    return { m100 >= m10 && m100 >= 0.90,
             fmt("median accuracy n=10 %.4f, n=100 %.4f (need n=100 >= n=10 and >= 0.90)", m10, m100) };
}

/*
 * 7. Complexity
 */

Outcome criterion_7()
{
    const Simulation sim = corridor_run(0);
    const auto timed = [&](int n, std::size_t steps) {
        Dataset d = sim.dataset;
        d.records.resize(std::min(steps, d.records.size()));
        const SlamConfig cfg = corridor_slam_config(0, n);
        std::vector<double> runs;
        for (int i = 0; i < 5; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            const SlamResult r = run_algo3(d, cfg);
            runs.push_back(elapsed(t0));
            if (r.path.size() != d.size() + 1)
                throw std::runtime_error("truncated run");
        }
        return median(runs);
    };
    const double n10 = timed(10, 600);
    const double n50 = timed(50, 600);
    const double n100 = timed(100, 600);
    const double t150 = timed(100, 150);
    const double t300 = timed(100, 300);
    const double rn = n100 / n10;
    const double rt = n100 / t150;
    return { rn >= 8.0 && rn <= 12.0 && rt >= 3.2 && rt <= 4.8,
             fmt("T=600: n=10 %.3f s, n=50 %.3f s, n=100 %.3f s, ratio %.2f in [8, 12]; "
                 "n=100: T=150 %.3f s, T=300 %.3f s, ratio %.2f in [3.2, 4.8]",
                 n10, n50, n100, rn, t150, t300, rt) };
}

/*
 * 8. Determinism through the CLI
 */

std::string quoted(const fs::path& p)
{
    return "'" + p.string() + "'";
}

int run_cli(const fs::path& dir, const std::string& args)
{
    const std::string cmd = "cd " + quoted(dir) + " && " + quoted(GRIDSLAM_CLI) + " " + args +
                            " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return status != -1 && WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_8()
{
    const fs::path src = GRIDSLAM_SOURCE_DIR;
    const fs::path root = fs::temp_directory_path() / ("gridslam_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);

    Outcome out { true, "" };
    if (run_cli(root, "simulate --world " + quoted(src / "worlds/two_corridor.world") + " --config " +
                          quoted(src / "configs/two_corridor_sim.cfg") +
                          " --out log.txt --truth truth.csv --seed 5") != 0) {
        fs::remove_all(root);
        return { false, "simulate failed" };
    }
    int compared = 0;
    for (const int algo : { 2, 3 }) {
        /* Algorithm 2 is expected to stop early on this fixture */
        const int expected = algo == 2 ? 3 : 0;
        std::vector<fs::path> dirs;
        for (const int workers : { 1, 1, 4 }) {
            const fs::path d = root / fmt("a%d_%zu", algo, dirs.size());
            fs::create_directories(d);
            const int code = run_cli(d, fmt("slam --algo %d --n 50 --workers %d --seed 9", algo, workers) +
                                            " --data " + quoted(root / "log.txt") + " --config " +
                                            quoted(src / "configs/two_corridor_slam.cfg") +
                                            " --out-map map.pgm --out-path path.csv");
            if (code != expected) {
                fs::remove_all(root);
                return { false, fmt("slam algorithm %d exited with %d", algo, code) };
            }
            dirs.push_back(d);
        }
        for (std::size_t i = 1; i < dirs.size(); ++i) {
            auto manifest = [](const fs::path& p) {
                nlohmann::json m = nlohmann::json::parse(detail::read_file(p));
                m.erase("timing");
                return m;
            };
            const bool same = detail::read_file(dirs[0] / "map.pgm") == detail::read_file(dirs[i] / "map.pgm") &&
                              detail::read_file(dirs[0] / "path.csv") == detail::read_file(dirs[i] / "path.csv") &&
                              manifest(dirs[0] / "map.pgm.manifest.json") ==
                                  manifest(dirs[i] / "map.pgm.manifest.json");
            out.pass = out.pass && same;
            ++compared;
        }
    }
    fs::remove_all(root);
    out.detail = fmt("%d run pairs compared (algorithms 2 and 3, 1 vs 1 and 1 vs 4 workers): %s", compared,
                     out.pass ? "map, path and manifest identical" : "outputs differ");
    return out;
}

/*
 * 9. Prior sanity
 */

Outcome criterion_9()
{
    const MapPrior prior { 0.05 };
    Rng rng = Rng::stream(0, StreamTag::PriorMap);
    const Grid<std::uint8_t> m = sample_prior_map(200, 200, prior, rng);
    double occupied = 0.0;
    for (const std::uint8_t v : m.values())
        occupied += v;
    const double fraction = occupied / static_cast<double>(m.size());
    const double band = 3.0 * std::sqrt(prior.p * (1.0 - prior.p) / 40000.0);
    return { std::fabs(fraction - prior.p) <= band,
             fmt("occupied fraction %.5f, |diff| %.5f within %.5f", fraction,
                 std::fabs(fraction - prior.p), band) };
}

/*
 * 10. Format round-trips
 */

Outcome criterion_10()
{
    const World w = two_corridor_world();
    const Simulation sim = corridor_run(0);
    const fs::path dir = fs::temp_directory_path() / ("gridslam_formats_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    const std::string log = format_dataset(sim.dataset);
    write_dataset(sim.dataset, dir / "log.txt");
    const bool dataset_ok = format_dataset(parse_dataset(log)) == log &&
                            format_dataset(read_dataset(dir / "log.txt")) == log;

    const std::string world = format_world(w);
    const std::string shipped = detail::read_file(fs::path(GRIDSLAM_SOURCE_DIR) / "worlds/two_corridor.world");
    const bool world_ok = format_world(parse_world(world)) == world &&
                          format_world(parse_world(shipped)) == shipped;

    const std::string path = format_path_csv(timed_path(sim.truth));
    const bool path_ok = format_path_csv(parse_path_csv(path)) == path;

    const SlamResult dr = dead_reckon(sim.dataset, two_corridor_sim_config().start, w.geometry);
    const Grid<std::uint8_t> image = render(dr.labels(LabelingParams {}));
    write_map_pgm(image, dir / "map.pgm");
    const cv::Mat read = cv::imread((dir / "map.pgm").string(), cv::IMREAD_UNCHANGED);
    bool pgm_ok = !read.empty() && read.type() == CV_8UC1 && read.rows == image.rows() &&
                  read.cols == image.cols();
    long mismatches = 0;
    if (pgm_ok)
        for (int r = 0; r < image.rows(); ++r)
            for (int c = 0; c < image.cols(); ++c)
                mismatches += read.at<std::uint8_t>(image.rows() - 1 - r, c) != image(r, c) ? 1 : 0;
    pgm_ok = pgm_ok && mismatches == 0;
    fs::remove_all(dir);

    return { dataset_ok && world_ok && path_ok && pgm_ok,
             fmt("dataset %s (%zu records), world %s, path %s, PGM via OpenCV %s (%d x %d, %ld pixel mismatches)",
                 dataset_ok ? "ok" : "differs", sim.dataset.size(), world_ok ? "ok" : "differs",
                 path_ok ? "ok" : "differs", pgm_ok ? "ok" : "differs", image.cols(), image.rows(), mismatches) };
}

struct Criterion
{
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

} // namespace

int main()
{
    const std::vector<Criterion> criteria {
        { 1, "distribution oracles", 10.0, criterion_1 },
        { 2, "importance-sampling correctness", 30.0, criterion_2 },
        { 3, "drift splits the dead-reckoned map", 60.0, criterion_3 },
        { 4, "final-pose error vs dead reckoning", 300.0, criterion_4 },
        { 5, "hard-consistency degeneracy", 300.0, criterion_5 },
        { 6, "map accuracy grows with n", 600.0, criterion_6 },
        { 7, "runtime linear in n and T", 0.0, criterion_7 },
        { 8, "determinism", 0.0, criterion_8 },
        { 9, "prior occupied fraction", 0.0, criterion_9 },
        { 10, "format round-trips", 0.0, criterion_10 },
    };

    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = { false, std::string("exception: ") + e.what() };
        }
        const double seconds = elapsed(t0);
        std::string limit;
        if (c.limit_seconds > 0.0) {
            limit = fmt(", limit %.0f s", c.limit_seconds);
            if (seconds >= c.limit_seconds) {
                o.pass = false;
                o.detail += "; over the runtime limit";
            }
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s [%.1f s%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), seconds, limit.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
