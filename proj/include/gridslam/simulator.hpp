/* simulator.hpp */

#ifndef GRIDSLAM_SIMULATOR_HPP
#define GRIDSLAM_SIMULATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridslam/dataset.hpp"
#include "gridslam/errors.hpp"
#include "gridslam/geometry.hpp"
#include "gridslam/models.hpp"
#include "gridslam/random.hpp"

namespace gridslam {

/*
 * Ground-truth environment: every cell is free or wall, and the border is
 * wall so every ray terminates.
 */
struct World
{
    GridGeometry geometry;
    /* 1 = wall */
    Grid<std::uint8_t> walls;

    World() = default;
    explicit World(const GridGeometry& g, std::uint8_t fill = 1) :
        geometry(g), walls(g.rows, g.cols, fill) { }

    bool is_wall(CellIndex c) const { return this->walls[c] != 0; }

    bool is_free_point(double x, double y) const
    {
        return this->geometry.contains(x, y) &&
               !this->is_wall(cell_of(x, y, this->geometry));
    }

    void validate() const
    {
        this->geometry.validate();
        const int rows = this->geometry.rows;
        const int cols = this->geometry.cols;
        if (this->walls.rows() != rows || this->walls.cols() != cols)
            throw InvalidWorld("wall grid does not match the geometry");
        for (int c = 0; c < cols; ++c)
            if (!this->walls(0, c) || !this->walls(rows - 1, c))
                throw InvalidWorld("world border must be wall");
        for (int r = 0; r < rows; ++r)
            if (!this->walls(r, 0) || !this->walls(r, cols - 1))
                throw InvalidWorld("world border must be wall");
    }

    /* Mark every cell whose center lies in [x0, x1] x [y0, y1] free */
    void carve(double x0, double y0, double x1, double y1)
    {
        for (int r = 0; r < this->geometry.rows; ++r)
            for (int c = 0; c < this->geometry.cols; ++c) {
                const CellIndex cell { r, c };
                const double cx = this->geometry.center_x(cell);
                const double cy = this->geometry.center_y(cell);
                if (cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1)
                    this->walls[cell] = 0;
            }
    }

    /* Mark every cell whose center lies in [x0, x1] x [y0, y1] wall */
    void fill(double x0, double y0, double x1, double y1)
    {
        for (int r = 0; r < this->geometry.rows; ++r)
            for (int c = 0; c < this->geometry.cols; ++c) {
                const CellIndex cell { r, c };
                const double cx = this->geometry.center_x(cell);
                const double cy = this->geometry.center_y(cell);
                if (cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1)
                    this->walls[cell] = 1;
            }
    }

    friend bool operator==(const World&, const World&) = default;
};

struct Waypoint
{
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

struct SimConfig
{
    Pose start;
    std::vector<Waypoint> waypoints;
    /* Largest forward move per step, meters */
    double step_trans = 0.15;
    /* Largest turn per step, radians */
    double step_rot_cap = 0.15;
    /* Noise added to the recorded odometry */
    MotionParams odo_noise;
    /* Systematic rotation error added to every recorded step */
    double rot_bias = 0.0;
    /* Laser noise standard deviation */
    double laser_sigma = 0.02;
    /* Nominal recording rate; informational */
    double rate_hint = 10.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(this->step_trans > 0.0))
            throw InvalidArgument("step_trans must be positive");
        if (!(this->step_rot_cap > 0.0))
            throw InvalidArgument("step_rot_cap must be positive");
        if (this->laser_sigma < 0.0)
            throw InvalidArgument("laser_sigma must be >= 0");
        this->odo_noise.validate();
    }
};

struct Simulation
{
    Dataset dataset;
    /* True poses Z_0 ... Z_T, one more than the number of records */
    std::vector<Pose> truth;
};

/*
 * Exact distance along the ray to the first wall cell (closed squares),
 * capped at d_max
 */
inline double true_range(const World& w, double x, double y, double dir_x,
                         double dir_y, double d_max)
{
    if (!w.geometry.contains(x, y))
        throw OutOfBounds("pose outside the world");
    if (w.is_wall(cell_of(x, y, w.geometry)))
        throw InsideWall("pose inside a wall cell");

    double range = d_max;
    trace_ray(x, y, dir_x, dir_y, w.geometry, [&](const TracedCell& c) {
        if (c.enter >= d_max)
            return false;
        if (w.is_wall(c.cell)) {
            range = c.enter;
            return false;
        }
        return true;
    });
    return std::min(range, d_max);
}

inline double true_range(const World& w, const Pose& z, double angle,
                         double d_max)
{
    return true_range(w, z.x, z.y, std::cos(angle), std::sin(angle), d_max);
}

namespace detail {

inline void check_segment_free(const World& w, double x0, double y0, double x1,
                               double y1)
{
    const double length = std::hypot(x1 - x0, y1 - y0);
    const double step = w.geometry.resolution * 0.25;
    const int n = static_cast<int>(std::ceil(length / step));
    for (int i = 0; i <= n; ++i) {
        const double a = n == 0 ? 1.0 : static_cast<double>(i) / n;
        if (!w.is_free_point(x0 + a * (x1 - x0), y0 + a * (y1 - y0)))
            throw UnreachableWaypoint(
                "segment to waypoint (" + std::to_string(x1) + ", " +
                std::to_string(y1) + ") is blocked");
    }
}

} // namespace detail

/*
 * Drive the true robot through the waypoints (turn toward the next one in
 * capped increments, then advance in steps of at most step_trans), record
 * noisy and biased odometry plus a noisy scan after every step.
 * `scanner.d_max` is the range limit; the laser noise is sc.laser_sigma.
 */
inline Simulation simulate(const World& w, const SimConfig& sc,
                           const PerceptionParams& scanner, int n_beams)
{
    w.validate();
    sc.validate();
    if (n_beams < 1)
        throw InvalidArgument("n_beams must be >= 1");

    Simulation sim;
    sim.dataset.n_beams = n_beams;
    sim.dataset.d_max = scanner.d_max;
    sim.dataset.resolution = w.geometry.resolution;

    if (!w.geometry.contains(sc.start.x, sc.start.y))
        throw OutOfBounds("start pose outside the world");
    if (w.is_wall(cell_of(sc.start.x, sc.start.y, w.geometry)))
        throw InsideWall("start pose inside a wall cell");

    Rng rng = Rng::stream(sc.seed, StreamTag::Simulate);
    const BeamFan fan(n_beams);
    Pose pose = make_pose(sc.start.x, sc.start.y, sc.start.heading);
    sim.truth.push_back(pose);

    constexpr double arrive_tolerance = 1e-6;
    constexpr std::size_t max_steps = 10'000'000;

    for (const Waypoint& wp : sc.waypoints) {
        if (!w.is_free_point(wp.x, wp.y))
            throw InsideWall("waypoint inside a wall cell");
        detail::check_segment_free(w, pose.x, pose.y, wp.x, wp.y);

        while (true) {
            const double dx = wp.x - pose.x;
            const double dy = wp.y - pose.y;
            const double dist = std::hypot(dx, dy);
            if (dist < arrive_tolerance)
                break;
            if (sim.dataset.records.size() >= max_steps)
                throw InvalidArgument("simulation exceeded the step limit");

            const double diff = normalize_angle(std::atan2(dy, dx) - pose.heading);
            const double rot = std::clamp(diff, -sc.step_rot_cap, sc.step_rot_cap);
            const bool aligned = std::fabs(diff) <= sc.step_rot_cap;
            const double trans = aligned ? std::min(sc.step_trans, dist) : 0.0;

            Pose next = compose(pose, OdometryDelta { rot, trans });
            if (aligned && trans == dist) {
                /* Land exactly on the waypoint */
                next.x = wp.x;
                next.y = wp.y;
            }
            if (w.is_wall(cell_of(next.x, next.y, w.geometry)))
                throw InsideWall("true path entered a wall cell");

            DataRecord record;
            const double rot_std = sc.odo_noise.rot_std_base +
                                   sc.odo_noise.rot_std_per_rad * std::fabs(rot);
            const double trans_std = sc.odo_noise.trans_std_base +
                                     sc.odo_noise.trans_std_per_meter * trans;
            record.u.rot = rot + rot_std * rng.normal() + sc.rot_bias;
            record.u.trans = std::max(0.0, trans + trans_std * rng.normal());

            record.ranges.resize(static_cast<std::size_t>(n_beams));
            const double hc = std::cos(next.heading);
            const double hs = std::sin(next.heading);
            for (int k = 0; k < n_beams; ++k) {
                double dir_x = 0.0;
                double dir_y = 0.0;
                fan.direction(hc, hs, k, dir_x, dir_y);
                const double range = true_range(w, next.x, next.y, dir_x, dir_y,
                                                scanner.d_max);
                const double noise = sc.laser_sigma * rng.normal();
                record.ranges[static_cast<std::size_t>(k)] =
                    range >= scanner.d_max
                        ? scanner.d_max
                        : std::clamp(range + noise, 1e-6, scanner.d_max);
            }

            sim.dataset.records.push_back(std::move(record));
            sim.truth.push_back(next);
            pose = next;
        }
    }
    return sim;
}

/*
 * Fixture worlds
 */

namespace detail {

/*
 * Rectangular alcoves cut into a wall at irregular spacing, so that
 * positions along a corridor are distinguishable
 */
class AlcoveCutter
{
public:
    explicit AlcoveCutter(World& w) : mWorld(w) { }

    /* Wall along x at height y_wall; sign +1 cuts upward, -1 downward */
    void along_x(double y_wall, double sign, double xa, double xb, int phase)
    {
        double x = xa + 0.5 + 0.3 * phase;
        while (true) {
            const double width = kWidth[(this->mIndex + phase) % 6];
            const double depth = kDepth[(this->mIndex * 3 + phase) % 7];
            if (x + width > xb - 0.3)
                break;
            if (sign > 0)
                this->mWorld.carve(x, y_wall, x + width, y_wall + depth);
            else
                this->mWorld.carve(x, y_wall - depth, x + width, y_wall);
            x += width + kGap[(this->mIndex * 5 + phase) % 14];
            ++this->mIndex;
        }
    }

    /* Wall along y at abscissa x_wall; sign +1 cuts rightward, -1 leftward */
    void along_y(double x_wall, double sign, double ya, double yb, int phase)
    {
        double y = ya + 0.5 + 0.3 * phase;
        while (true) {
            const double width = kWidth[(this->mIndex + phase) % 6];
            const double depth = kDepth[(this->mIndex * 3 + phase) % 7];
            if (y + width > yb - 0.3)
                break;
            if (sign > 0)
                this->mWorld.carve(x_wall, y, x_wall + depth, y + width);
            else
                this->mWorld.carve(x_wall - depth, y, x_wall, y + width);
            y += width + kGap[(this->mIndex * 5 + phase) % 14];
            ++this->mIndex;
        }
    }

private:
    static constexpr double kGap[14] = { 1.7, 2.3, 1.4, 2.9, 1.9, 2.6, 1.5,
                                         2.2, 3.1, 1.8, 2.4, 1.6, 2.7, 2.0 };
    static constexpr double kDepth[7] = { 0.6, 0.9, 0.5, 0.8, 1.0, 0.7, 0.6 };
    static constexpr double kWidth[6] = { 0.8, 1.1, 0.6, 0.9, 1.2, 0.7 };

    World& mWorld;
    int mIndex = 0;
};

/* Corridor layout shared by the fixtures: centerlines and clearance */
struct CorridorLayout
{
    static constexpr double margin = 8.0;
    static constexpr double length = 14.0;
    static constexpr double separation = 9.0;
    static constexpr double half_width = 1.5;

    static constexpr double x0 = margin;
    static constexpr double x1 = margin + length;
    static constexpr double y0 = margin;
    static constexpr double y1 = margin + separation;
};

} // namespace detail

/*
 * Two parallel corridors joined at both ends into a loop, with alcoves
 * along every wall, surrounded by solid wall. The robot's route starts
 * in the lower corridor, runs the loop counterclockwise and returns
 * halfway along the lower corridor.
 */
inline World two_corridor_world()
{
    using L = detail::CorridorLayout;
    const double hw = L::half_width;
    World w(GridGeometry { static_cast<int>(std::lround((L::y1 + L::margin) / 0.1)),
                           static_cast<int>(std::lround((L::x1 + L::margin) / 0.1)), 0.1,
                           0.0, 0.0 });
    w.carve(L::x0 - hw, L::y0 - hw, L::x1 + hw, L::y0 + hw);
    w.carve(L::x0 - hw, L::y1 - hw, L::x1 + hw, L::y1 + hw);
    w.carve(L::x0 - hw, L::y0 - hw, L::x0 + hw, L::y1 + hw);
    w.carve(L::x1 - hw, L::y0 - hw, L::x1 + hw, L::y1 + hw);

    detail::AlcoveCutter cut(w);
    cut.along_x(L::y0 + hw, +1, L::x0 + hw, L::x1 - hw, 0);
    cut.along_x(L::y0 - hw, -1, L::x0 - hw, L::x1 + hw, 1);
    cut.along_x(L::y1 + hw, +1, L::x0 - hw, L::x1 + hw, 2);
    cut.along_x(L::y1 - hw, -1, L::x0 + hw, L::x1 - hw, 3);
    cut.along_y(L::x0 - hw, -1, L::y0 + hw, L::y1 - hw, 0);
    cut.along_y(L::x1 + hw, +1, L::y0 + hw, L::y1 - hw, 1);
    return w;
}

/* One corridor with alcoves, the same size as a leg of the loop */
inline World single_corridor_world()
{
    using L = detail::CorridorLayout;
    const double hw = L::half_width;
    World w(GridGeometry { static_cast<int>(std::lround((L::y0 + L::margin) / 0.1)),
                           static_cast<int>(std::lround((L::x1 + L::margin) / 0.1)), 0.1,
                           0.0, 0.0 });
    w.carve(L::x0 - hw, L::y0 - hw, L::x1 + hw, L::y0 + hw);

    detail::AlcoveCutter cut(w);
    cut.along_x(L::y0 + hw, +1, L::x0 - hw, L::x1 + hw, 0);
    cut.along_x(L::y0 - hw, -1, L::x0 - hw, L::x1 + hw, 1);
    return w;
}

/* Default drifting-odometry run around the two-corridor loop */
inline SimConfig two_corridor_sim_config(std::uint64_t seed = 0)
{
    using L = detail::CorridorLayout;
    SimConfig sc;
    sc.start = Pose { L::x0, L::y0, 0.0 };
    sc.waypoints = { { L::x1, L::y0 }, { L::x1, L::y1 }, { L::x0, L::y1 },
                     { L::x0, L::y0 }, { L::x0 + L::length / 2.0, L::y0 } };
    sc.step_trans = 0.095;
    sc.step_rot_cap = 0.15;
    sc.odo_noise = MotionParams { 0.0013, 0.02, 0.0065, 0.02 };
    sc.rot_bias = 0.002;
    sc.laser_sigma = 0.02;
    sc.rate_hint = 10.0;
    sc.seed = seed;
    return sc;
}

/* Out and back along the single corridor with the same drift */
inline SimConfig single_corridor_sim_config(std::uint64_t seed = 0)
{
    using L = detail::CorridorLayout;
    SimConfig sc = two_corridor_sim_config(seed);
    sc.start = Pose { L::x0 - 1.0, L::y0, 0.0 };
    sc.waypoints = { { L::x1 + 1.0, L::y0 }, { L::x0 - 1.0, L::y0 } };
    return sc;
}

} // namespace gridslam

#endif // GRIDSLAM_SIMULATOR_HPP
