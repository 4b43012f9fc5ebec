/* algorithms.hpp */

#ifndef GRIDSLAM_ALGORITHMS_HPP
#define GRIDSLAM_ALGORITHMS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <variant>
#include <vector>

#include "gridslam/dataset.hpp"
#include "gridslam/errors.hpp"
#include "gridslam/geometry.hpp"
#include "gridslam/mapping.hpp"
#include "gridslam/models.hpp"
#include "gridslam/random.hpp"

namespace gridslam {

/* Merge thresholds for slow or static stretches of the log */
struct RedundancyParams
{
    double min_trans = 0.0;
    double min_rot = 0.0;
};

struct SlamConfig
{
    /* Importance-sampling sample size */
    int n_is = 100;
    MotionParams motion { 0.02, 0.15, 0.011, 0.2 };
    PerceptionParams perception;
    MapPrior prior;
    LabelingParams labeling;
    GridGeometry geometry;
    Pose start;
    RedundancyParams redundancy;
    std::uint64_t seed = 0;
    /* Threads used to weigh candidates; results do not depend on it */
    int workers = 1;

    void validate() const
    {
        if (this->n_is < 1)
            throw InvalidArgument("n_is must be >= 1");
        if (this->workers < 1)
            throw InvalidArgument("workers must be >= 1");
        this->motion.validate();
        this->perception.validate();
        this->prior.validate();
        this->labeling.validate();
        this->geometry.validate();
    }
};

struct StepDiagnostics
{
    /* Original (1-based) timestep of the record */
    int t = 0;
    /* Effective sample size of the pose candidates (mean over beams for
     * algorithm 1) */
    double ess = 0.0;
    /* A degenerate-weight fallback was taken at this step */
    bool fallback = false;
    int masked_beams = 0;
};

/* Called after every committed step, e.g. for progress output */
using StepCallback = std::function<void(const StepDiagnostics&)>;

/* Algorithm 2 ran out of consistent pose candidates */
struct DegeneracyReport
{
    /* Original (1-based) timestep at which every candidate had zero weight */
    int timestep = 0;
    /* Retained steps committed before the failure */
    int completed_steps = 0;
};

enum class Algorithm : int
{
    DeadReckoning = 0,
    OdometryPath = 1,
    HardConsistency = 2,
    Agreement = 3,
};

struct SlamResult
{
    Algorithm algorithm = Algorithm::DeadReckoning;
    /* Z_0 ... Z_T' */
    std::vector<Pose> path;
    /* Original timestep of path[i]; 0 for the start pose */
    std::vector<int> timesteps;
    /* Per committed step, per beam integer distances (0 = unused beam) */
    std::vector<std::vector<int>> thetas;
    std::vector<std::vector<std::uint8_t>> masks;
    std::variant<PartialMap, ProbabilisticMap> map;
    std::vector<StepDiagnostics> diagnostics;
    std::optional<DegeneracyReport> degeneracy;

    /* Ternary labels of the final map */
    Grid<CellLabel> labels(const LabelingParams& lp) const
    {
        if (const auto* partial = std::get_if<PartialMap>(&this->map))
            return partial->labels;
        return label_map(std::get<ProbabilisticMap>(this->map), lp);
    }

    const GridGeometry& geometry() const
    {
        return std::visit([](const auto& m) -> const GridGeometry& {
            return m.geometry; }, this->map);
    }
};

/*
 * Utilities
 */

/* (sum w)^2 / sum w^2 of the normalized linear weights */
inline double effective_sample_size(std::span<const double> logweights)
{
    if (logweights.empty())
        throw InvalidArgument("effective sample size of an empty list");
    const double max_lw = *std::max_element(logweights.begin(), logweights.end());
    if (is_log_zero(max_lw))
        throw AllZeroWeights("all weights are zero");

    double sum = 0.0;
    double sum_sq = 0.0;
    for (const double lw : logweights) {
        const double w = std::exp(lw - max_lw);
        sum += w;
        sum_sq += w * w;
    }
    return sum * sum / sum_sq;
}

/*
 * Run fn(i) for i in [0, n). Work is split over at most `workers` threads;
 * fn must only write to per-index slots.
 */
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn)
{
    const std::size_t threads = std::min<std::size_t>(
        static_cast<std::size_t>(std::max(workers, 1)), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next { 0 };
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&]() {
        try {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        } catch (...) {
            const std::lock_guard lock(error_mutex);
            if (!error)
                error = std::current_exception();
            next = n;
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(threads - 1);
    for (std::size_t w = 1; w < threads; ++w)
        pool.emplace_back(body);
    body();
    pool.clear();

    if (error)
        std::rethrow_exception(error);
}

/* Beam takes part in inference: the indicator 0 < v < d_max, with the
 * last cell before the range limit treated as max-range */
inline bool beam_active(double v, double d_max, double resolution)
{
    return v > 0.0 && v < d_max - resolution;
}

/*
 * Merge consecutive records until the accumulated motion reaches either
 * threshold; the merged record carries the summed delta and the latest
 * scan. The final record is always kept.
 */
inline std::vector<std::size_t> redundancy_kept_indices(const Dataset& d,
                                                        double min_trans,
                                                        double min_rot)
{
    std::vector<std::size_t> kept;
    double sum_trans = 0.0;
    double sum_rot = 0.0;
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        sum_trans += d.records[i].u.trans;
        sum_rot += d.records[i].u.rot;
        const bool last = i + 1 == d.records.size();
        if (std::fabs(sum_trans) >= min_trans || std::fabs(sum_rot) >= min_rot ||
            last) {
            kept.push_back(i);
            sum_trans = 0.0;
            sum_rot = 0.0;
        }
    }
    return kept;
}

inline Dataset filter_redundant(const Dataset& d, double min_trans,
                                double min_rot)
{
    Dataset out;
    out.n_beams = d.n_beams;
    out.d_max = d.d_max;
    out.resolution = d.resolution;

    std::size_t begin = 0;
    for (const std::size_t end : redundancy_kept_indices(d, min_trans, min_rot)) {
        DataRecord merged;
        for (std::size_t i = begin; i <= end; ++i) {
            merged.u.trans += d.records[i].u.trans;
            merged.u.rot += d.records[i].u.rot;
        }
        merged.ranges = d.records[end].ranges;
        out.records.push_back(std::move(merged));
        begin = end + 1;
    }
    return out;
}

namespace detail {

/* Dataset after redundancy filtering, with per-step beam masks */
struct PreparedRun
{
    Dataset data;
    /* Original 1-based timestep of each retained record */
    std::vector<int> timesteps;
    std::vector<std::vector<std::uint8_t>> masks;
    PerceptionParams perception;
    BeamFan fan;
    int max_steps = 0;

    std::size_t size() const { return this->data.records.size(); }
};

inline PreparedRun prepare_run(const Dataset& d, const SlamConfig& cfg)
{
    d.validate();
    cfg.validate();

    /* The log's range limit is authoritative */
    PerceptionParams pp = cfg.perception;
    pp.d_max = d.d_max;

    PreparedRun run { {}, {}, {}, pp, BeamFan(d.n_beams),
                      steps_for_range(pp.d_max, cfg.geometry.resolution) };

    std::vector<std::size_t> kept = redundancy_kept_indices(
        d, cfg.redundancy.min_trans, cfg.redundancy.min_rot);
    run.data = filter_redundant(d, cfg.redundancy.min_trans,
                                cfg.redundancy.min_rot);
    for (const std::size_t i : kept)
        run.timesteps.push_back(static_cast<int>(i) + 1);

    const double res = cfg.geometry.resolution;
    for (const auto& r : run.data.records) {
        std::vector<std::uint8_t> mask(r.ranges.size(), 0);
        for (std::size_t k = 0; k < r.ranges.size(); ++k)
            mask[k] = beam_active(r.ranges[k], pp.d_max, res) ? 1 : 0;
        run.masks.push_back(std::move(mask));
    }
    return run;
}

inline void check_inside(const Pose& z, const GridGeometry& g, int t)
{
    if (!g.contains(z.x, z.y))
        throw OutOfBounds("pose at timestep " + std::to_string(t) +
                          " left the grid");
}

inline SlamResult start_result(Algorithm algo, const SlamConfig& cfg,
                               std::variant<PartialMap, ProbabilisticMap> map)
{
    SlamResult result { algo, {}, {}, {}, {}, std::move(map), {}, {} };
    check_inside(cfg.start, cfg.geometry, 0);
    result.path.push_back(cfg.start);
    result.timesteps.push_back(0);
    return result;
}

/*
 * Phase 1 of algorithms 2 and 3: per (t, k) draw n candidate distances
 * around the reading, weigh them with the geometric prior over the
 * truncation normalizer, keep one. Depends on the readings only.
 */
inline std::vector<std::vector<int>> sample_thetas(const PreparedRun& run,
                                                   const SlamConfig& cfg)
{
    const std::size_t n = static_cast<std::size_t>(cfg.n_is);
    std::vector<std::vector<int>> thetas(run.size());

    parallel_for(run.size(), cfg.workers, [&](std::size_t s) {
        const auto& ranges = run.data.records[s].ranges;
        const auto& mask = run.masks[s];
        auto& out = thetas[s];
        out.assign(ranges.size(), 0);

        Rng rng = Rng::stream(cfg.seed, StreamTag::ThetaPhase1,
                              { static_cast<std::uint64_t>(run.timesteps[s]) });
        std::vector<int> draws(n);
        std::vector<double> logweights(n);
        for (std::size_t k = 0; k < ranges.size(); ++k) {
            if (mask[k] == 0)
                continue;
            for (std::size_t i = 0; i < n; ++i) {
                draws[i] = perception_sample(ranges[k], run.perception,
                                             cfg.geometry, rng);
                logweights[i] = algo2_theta_logweight(
                    draws[i], run.perception, cfg.prior, cfg.geometry);
            }
            out[k] = draws[resample(logweights, rng)];
        }
    });
    return thetas;
}

/* n pose candidates for step s drawn from the motion model */
inline void draw_pose_candidates(std::vector<Pose>& out, const Pose& prev,
                                 const OdometryDelta& u, int timestep,
                                 const SlamConfig& cfg)
{
    out.resize(static_cast<std::size_t>(cfg.n_is));
    for (std::size_t i = 0; i < out.size(); ++i) {
        Rng rng = Rng::stream(cfg.seed, StreamTag::PoseCandidate,
                              { static_cast<std::uint64_t>(timestep), i });
        out[i] = motion_sample(prev, u, cfg.motion, rng);
    }
}

} // namespace detail

/*
 * Raw map: compose the odometry without noise and convert every reading
 * directly to an integer distance.
 */
inline SlamResult dead_reckon(const Dataset& d, const Pose& start,
                              const GridGeometry& geometry,
                              const StepCallback& on_step = {})
{
    d.validate();
    geometry.validate();
    SlamResult result { Algorithm::DeadReckoning, { start }, { 0 }, {}, {},
                        PartialMap(geometry), {}, {} };
    detail::check_inside(start, geometry, 0);

    auto& map = std::get<PartialMap>(result.map);
    const BeamFan fan(d.n_beams);
    Pose pose = start;
    for (std::size_t s = 0; s < d.records.size(); ++s) {
        const auto& r = d.records[s];
        const int t = static_cast<int>(s) + 1;
        pose = compose(pose, r.u);
        detail::check_inside(pose, geometry, t);

        std::vector<int> thetas(r.ranges.size(), 0);
        std::vector<std::uint8_t> mask(r.ranges.size(), 0);
        for (std::size_t k = 0; k < r.ranges.size(); ++k) {
            if (!beam_active(r.ranges[k], d.d_max, geometry.resolution))
                continue;
            mask[k] = 1;
            thetas[k] = theta_of_range(r.ranges[k], geometry.resolution);
        }
        apply_scan(map, pose, thetas, mask, fan);

        result.path.push_back(pose);
        result.timesteps.push_back(t);
        result.thetas.push_back(std::move(thetas));
        result.masks.push_back(std::move(mask));
        result.diagnostics.push_back(StepDiagnostics { t, 1.0, false, 0 });
        if (on_step)
            on_step(result.diagnostics.back());
    }
    return result;
}

/*
 * Algorithm 1: the path comes from the motion model alone; distances are
 * then importance-sampled beam by beam against the consistency sets of
 * the partial map built so far.
 */
inline SlamResult run_algo1(const Dataset& d, const SlamConfig& cfg,
                            const StepCallback& on_step = {})
{
    const detail::PreparedRun run = detail::prepare_run(d, cfg);
    SlamResult result = detail::start_result(Algorithm::OdometryPath, cfg,
                                             PartialMap(cfg.geometry));
    auto& map = std::get<PartialMap>(result.map);
    const GridGeometry& g = cfg.geometry;
    const std::size_t n = static_cast<std::size_t>(cfg.n_is);

    /* Phase 1: odometry-only path */
    for (std::size_t s = 0; s < run.size(); ++s) {
        const int t = run.timesteps[s];
        Rng rng = Rng::stream(cfg.seed, StreamTag::PoseCandidate,
                              { static_cast<std::uint64_t>(t), 0 });
        result.path.push_back(motion_sample(result.path.back(),
                                            run.data.records[s].u,
                                            cfg.motion, rng));
        result.timesteps.push_back(t);
    }

    /* Phase 2: distances given the path */
    ConsistentSet consistent;
    std::vector<int> draws(n);
    std::vector<double> logweights(n);
    for (std::size_t s = 0; s < run.size(); ++s) {
        const int t = run.timesteps[s];
        const Pose& z = result.path[s + 1];
        detail::check_inside(z, g, t);

        const auto& ranges = run.data.records[s].ranges;
        std::vector<int> thetas(ranges.size(), 0);
        std::vector<std::uint8_t> mask = run.masks[s];
        StepDiagnostics diag { t, 0.0, false, 0 };
        int weighed_beams = 0;

        Rng rng = Rng::stream(cfg.seed, StreamTag::ThetaAlgo1,
                              { static_cast<std::uint64_t>(t) });
        const double hc = std::cos(z.heading);
        const double hs = std::sin(z.heading);
        for (std::size_t k = 0; k < ranges.size(); ++k) {
            if (mask[k] == 0)
                continue;
            double dir_x = 0.0;
            double dir_y = 0.0;
            run.fan.direction(hc, hs, static_cast<int>(k), dir_x, dir_y);
            consistent_set_into(consistent, map, z, dir_x, dir_y, run.max_steps);

            bool any = false;
            for (std::size_t i = 0; i < n; ++i) {
                draws[i] = perception_sample(ranges[k], run.perception, g, rng);
                logweights[i] = consistent.empty()
                    ? kLogZero
                    : algo1_theta_logweight(draws[i], consistent,
                                            run.perception, cfg.prior, g);
                any = any || !is_log_zero(logweights[i]);
            }
            if (!any) {
                /* No draw is consistent with the map: drop the beam */
                mask[k] = 0;
                ++diag.masked_beams;
                diag.fallback = true;
                continue;
            }
            diag.ess += effective_sample_size(logweights);
            ++weighed_beams;
            thetas[k] = draws[resample(logweights, rng)];
        }
        if (weighed_beams > 0)
            diag.ess /= weighed_beams;

        apply_scan(map, z, thetas, mask, run.fan);
        result.thetas.push_back(std::move(thetas));
        result.masks.push_back(std::move(mask));
        result.diagnostics.push_back(diag);
        if (on_step)
            on_step(result.diagnostics.back());
    }
    return result;
}

/*
 * Algorithm 2: distances from the readings alone, then poses step by step
 * weighted by the truncated-geometric mass of the fixed distances under
 * the partial map (hard consistency). Stops with a degeneracy report when
 * no candidate is consistent.
 */
inline SlamResult run_algo2(const Dataset& d, const SlamConfig& cfg,
                            const StepCallback& on_step = {})
{
    const detail::PreparedRun run = detail::prepare_run(d, cfg);
    SlamResult result = detail::start_result(Algorithm::HardConsistency, cfg,
                                             PartialMap(cfg.geometry));
    auto& map = std::get<PartialMap>(result.map);
    const GridGeometry& g = cfg.geometry;
    const std::size_t n = static_cast<std::size_t>(cfg.n_is);

    std::vector<std::vector<int>> thetas = detail::sample_thetas(run, cfg);

    std::vector<Pose> candidates;
    std::vector<double> logweights(n);
    for (std::size_t s = 0; s < run.size(); ++s) {
        const int t = run.timesteps[s];
        const auto& theta_t = thetas[s];
        const auto& mask = run.masks[s];
        detail::draw_pose_candidates(candidates, result.path.back(),
                                     run.data.records[s].u, t, cfg);

        parallel_for(n, cfg.workers, [&](std::size_t i) {
            const Pose& z = candidates[i];
            detail::check_inside(z, g, t);
            ConsistentSet consistent;
            const double hc = std::cos(z.heading);
            const double hs = std::sin(z.heading);
            double total = 0.0;
            for (std::size_t k = 0; k < theta_t.size() && !is_log_zero(total); ++k) {
                if (mask[k] == 0)
                    continue;
                double dir_x = 0.0;
                double dir_y = 0.0;
                run.fan.direction(hc, hs, static_cast<int>(k), dir_x, dir_y);
                consistent_set_into(consistent, map, z, dir_x, dir_y,
                                    run.max_steps);
                total += consistent.empty()
                    ? kLogZero
                    : trgeom_logmass(consistent, cfg.prior, theta_t[k]);
            }
            logweights[i] = total;
        });

        const bool any = std::any_of(logweights.begin(), logweights.end(),
                                     [](double lw) { return !is_log_zero(lw); });
        if (!any) {
            result.degeneracy = DegeneracyReport {
                t, static_cast<int>(result.path.size()) - 1 };
            result.diagnostics.push_back(StepDiagnostics { t, 0.0, true, 0 });
            if (on_step)
                on_step(result.diagnostics.back());
            break;
        }

        Rng rng = Rng::stream(cfg.seed, StreamTag::Resample,
                              { static_cast<std::uint64_t>(t) });
        const Pose chosen = candidates[resample(logweights, rng)];
        apply_scan(map, chosen, theta_t, mask, run.fan);

        result.path.push_back(chosen);
        result.timesteps.push_back(t);
        result.thetas.push_back(theta_t);
        result.masks.push_back(mask);
        result.diagnostics.push_back(StepDiagnostics {
            t, effective_sample_size(logweights), false, 0 });
        if (on_step)
            on_step(result.diagnostics.back());
    }
    return result;
}

/*
 * Algorithm 3: as algorithm 2 for the distances, but pose candidates are
 * weighted by their per-beam agreement with the thresholded count map,
 * and scans accumulate into counts instead of hard labels.
 */
inline SlamResult run_algo3(const Dataset& d, const SlamConfig& cfg,
                            const StepCallback& on_step = {})
{
    const detail::PreparedRun run = detail::prepare_run(d, cfg);
    SlamResult result = detail::start_result(Algorithm::Agreement, cfg,
                                             ProbabilisticMap(cfg.geometry));
    auto& map = std::get<ProbabilisticMap>(result.map);
    const GridGeometry& g = cfg.geometry;
    const std::size_t n = static_cast<std::size_t>(cfg.n_is);

    std::vector<std::vector<int>> thetas = detail::sample_thetas(run, cfg);

    /* Labels of the count map, refreshed for touched cells after commits */
    Grid<CellLabel> labels(g.rows, g.cols, CellLabel::Unknown);
    std::vector<std::size_t> touched;

    std::vector<Pose> candidates;
    std::vector<AgreementScore> scores(n);
    std::vector<double> logweights(n);
    for (std::size_t s = 0; s < run.size(); ++s) {
        const int t = run.timesteps[s];
        const auto& theta_t = thetas[s];
        const auto& mask = run.masks[s];
        detail::draw_pose_candidates(candidates, result.path.back(),
                                     run.data.records[s].u, t, cfg);

        auto commit = [&](const Pose& chosen, const StepDiagnostics& diag) {
            accumulate_scan(map, chosen, theta_t, mask, run.fan, &touched);
            for (const std::size_t idx : touched)
                labels.values()[idx] = label_from_counts(
                    map.occupied_count.values()[idx],
                    map.observed_count.values()[idx], cfg.labeling);
            result.path.push_back(chosen);
            result.timesteps.push_back(t);
            result.thetas.push_back(theta_t);
            result.masks.push_back(mask);
            result.diagnostics.push_back(diag);
            if (on_step)
                on_step(result.diagnostics.back());
        };

        parallel_for(n, cfg.workers, [&](std::size_t i) {
            detail::check_inside(candidates[i], g, t);
            scores[i] = agreement_score(labels, g, candidates[i], theta_t,
                                        mask, run.fan);
            logweights[i] = scores[i].logweight;
        });

        StepDiagnostics diag { t, 0.0, false, 0 };
        std::size_t pick = 0;
        const bool informative = std::any_of(scores.begin(), scores.end(),
            [](const AgreementScore& sc) { return sc.agree + sc.disagree > 0; });
        const bool any = std::any_of(logweights.begin(), logweights.end(),
                                     [](double lw) { return !is_log_zero(lw); });
        if (!informative) {
            /* Nothing to compare against yet: take the candidate closest
             * to the odometry pose */
            const Pose mode = compose(result.path.back(), run.data.records[s].u);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
                const double dx = candidates[i].x - mode.x;
                const double dy = candidates[i].y - mode.y;
                const double dh = normalize_angle(candidates[i].heading - mode.heading);
                const double dist = dx * dx + dy * dy + dh * dh;
                if (dist < best) {
                    best = dist;
                    pick = i;
                }
            }
            diag.ess = static_cast<double>(n);
        } else if (any) {
            Rng rng = Rng::stream(cfg.seed, StreamTag::Resample,
                                  { static_cast<std::uint64_t>(t) });
            pick = resample(logweights, rng);
            diag.ess = effective_sample_size(logweights);
        } else {
            /* Every candidate has a fully disagreeing beam */
            for (std::size_t i = 1; i < n; ++i)
                if (scores[i].agree > scores[pick].agree)
                    pick = i;
            diag.fallback = true;
        }

        commit(candidates[pick], diag);
    }
    return result;
}

inline SlamResult run_slam(Algorithm algo, const Dataset& d, const SlamConfig& cfg,
                           const StepCallback& on_step = {})
{
    switch (algo) {
        case Algorithm::OdometryPath: return run_algo1(d, cfg, on_step);
        case Algorithm::HardConsistency: return run_algo2(d, cfg, on_step);
        case Algorithm::Agreement: return run_algo3(d, cfg, on_step);
        case Algorithm::DeadReckoning: break;
    }
    cfg.validate();
    return dead_reckon(d, cfg.start, cfg.geometry, on_step);
}

} // namespace gridslam

#endif // GRIDSLAM_ALGORITHMS_HPP
