/* geometry.hpp */

#ifndef GRIDSLAM_GEOMETRY_HPP
#define GRIDSLAM_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "gridslam/errors.hpp"

namespace gridslam {

inline constexpr double kPi = std::numbers::pi;

/* Wrap an angle into (-pi, pi] */
inline double normalize_angle(double angle)
{
    double wrapped = std::remainder(angle, 2.0 * kPi);
    if (wrapped <= -kPi)
        wrapped += 2.0 * kPi;
    return wrapped;
}

/*
 * Planar robot pose in the world frame
 */
struct Pose
{
    double x = 0.0;
    double y = 0.0;
    /* Radians, kept in (-pi, pi] */
    double heading = 0.0;

    friend bool operator==(const Pose&, const Pose&) = default;
};

inline Pose make_pose(double x, double y, double heading)
{
    return Pose { x, y, normalize_angle(heading) };
}

struct CellIndex
{
    int row = 0;
    int col = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/*
 * Discretization of the plane: `rows` x `cols` square cells of side
 * `resolution`; cell (0, 0) has its lower-left corner at the origin.
 * Rows grow along +y, columns along +x.
 */
struct GridGeometry
{
    int rows = 1;
    int cols = 1;
    double resolution = 0.1;
    double origin_x = 0.0;
    double origin_y = 0.0;

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

    void validate() const
    {
        if (!(this->resolution > 0.0) || !std::isfinite(this->resolution))
            throw InvalidArgument("grid resolution must be positive");
        if (this->rows < 1 || this->cols < 1)
            throw InvalidArgument("grid must have at least one row and column");
    }

    std::size_t cell_count() const
    {
        return static_cast<std::size_t>(this->rows) *
               static_cast<std::size_t>(this->cols);
    }

    bool contains(CellIndex c) const
    {
        return c.row >= 0 && c.row < this->rows &&
               c.col >= 0 && c.col < this->cols;
    }

    bool contains(double x, double y) const
    {
        const double u = (x - this->origin_x) / this->resolution;
        const double v = (y - this->origin_y) / this->resolution;
        return u >= 0.0 && v >= 0.0 && u < this->cols && v < this->rows &&
               std::floor(u) < this->cols && std::floor(v) < this->rows;
    }

    std::size_t flat(CellIndex c) const
    {
        return static_cast<std::size_t>(c.row) *
               static_cast<std::size_t>(this->cols) +
               static_cast<std::size_t>(c.col);
    }

    CellIndex unflat(std::size_t index) const
    {
        return CellIndex { static_cast<int>(index / this->cols),
                           static_cast<int>(index % this->cols) };
    }

    double center_x(CellIndex c) const
    { return this->origin_x + (c.col + 0.5) * this->resolution; }
    double center_y(CellIndex c) const
    { return this->origin_y + (c.row + 0.5) * this->resolution; }
};

/*
 * Dense row-major 2-D array sized from a grid geometry
 */
template <typename T>
class Grid
{
public:
    Grid() = default;
    Grid(int rows, int cols, const T& fill = T {}) :
        mRows(rows), mCols(cols),
        mData(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
              fill) { }

    int rows() const noexcept { return this->mRows; }
    int cols() const noexcept { return this->mCols; }
    std::size_t size() const noexcept { return this->mData.size(); }

    T& operator()(int row, int col)
    { return this->mData[this->index(row, col)]; }
    const T& operator()(int row, int col) const
    { return this->mData[this->index(row, col)]; }
    T& operator[](CellIndex c) { return (*this)(c.row, c.col); }
    const T& operator[](CellIndex c) const { return (*this)(c.row, c.col); }

    T* data() noexcept { return this->mData.data(); }
    const T* data() const noexcept { return this->mData.data(); }
    std::vector<T>& values() noexcept { return this->mData; }
    const std::vector<T>& values() const noexcept { return this->mData; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int row, int col) const
    {
        return static_cast<std::size_t>(row) *
               static_cast<std::size_t>(this->mCols) +
               static_cast<std::size_t>(col);
    }

    int mRows = 0;
    int mCols = 0;
    std::vector<T> mData;
};

/* Cell whose half-open square [corner, corner + resolution) holds (x, y) */
inline CellIndex cell_of(double x, double y, const GridGeometry& g)
{
    if (!g.contains(x, y))
        throw OutOfBounds("point (" + std::to_string(x) + ", " +
                          std::to_string(y) + ") is outside the grid");
    return CellIndex {
        static_cast<int>(std::floor((y - g.origin_y) / g.resolution)),
        static_cast<int>(std::floor((x - g.origin_x) / g.resolution)) };
}

inline CellIndex cell_of(const Pose& p, const GridGeometry& g)
{
    return cell_of(p.x, p.y, g);
}

/*
 * Direction of beam k: a forward 180 degree fan starting at -90 degrees
 * relative to the heading. A single-beam scanner looks straight ahead.
 */
inline double beam_offset(int k, int n_beams)
{
    if (n_beams <= 1)
        return 0.0;
    return -0.5 * kPi + k * (kPi / (n_beams - 1));
}

inline double beam_angle(int k, double heading, int n_beams)
{
    return heading + beam_offset(k, n_beams);
}

/* A cell crossed by a ray together with the distances where the ray enters
 * and leaves it; corner-touched cells have enter == exit */
struct TracedCell
{
    CellIndex cell;
    double enter = 0.0;
    double exit = 0.0;
};

namespace detail {

/* Ties in crossing distance below this (in meters) are corner crossings */
inline constexpr double kCornerTolerance = 1e-9;

} // namespace detail

/*
 * Supercover grid traversal (Amanatides-Woo DDA extended to emit both
 * side cells when the ray passes exactly through a grid corner).
 * Calls visit(const TracedCell&) for every cell after the origin cell in
 * order of entry distance; stops when visit returns false or the ray
 * leaves the grid. Returns the exit distance of the origin cell.
 */
template <typename Visitor>
double trace_ray(double x0, double y0, double dir_x, double dir_y,
                 const GridGeometry& g, Visitor&& visit)
{
    const CellIndex start = cell_of(x0, y0, g);
    int row = start.row;
    int col = start.col;

    constexpr double inf = std::numeric_limits<double>::infinity();
    const double res = g.resolution;
    const int step_col = dir_x > 0.0 ? 1 : (dir_x < 0.0 ? -1 : 0);
    const int step_row = dir_y > 0.0 ? 1 : (dir_y < 0.0 ? -1 : 0);

    double t_max_x = inf;
    double t_delta_x = inf;
    if (step_col != 0) {
        const double edge = g.origin_x + (col + (step_col > 0 ? 1 : 0)) * res;
        t_max_x = (edge - x0) / dir_x;
        t_delta_x = res / std::fabs(dir_x);
    }
    double t_max_y = inf;
    double t_delta_y = inf;
    if (step_row != 0) {
        const double edge = g.origin_y + (row + (step_row > 0 ? 1 : 0)) * res;
        t_max_y = (edge - y0) / dir_y;
        t_delta_y = res / std::fabs(dir_y);
    }

    const double origin_exit = std::min(t_max_x, t_max_y);

    while (true) {
        const bool corner = std::fabs(t_max_x - t_max_y) <= detail::kCornerTolerance;
        const double t = std::min(t_max_x, t_max_y);
        if (!std::isfinite(t))
            return origin_exit;

        if (corner) {
            /* Both side cells are touched at a single point */
            const CellIndex side_x { row, col + step_col };
            const CellIndex side_y { row + step_row, col };
            if (g.contains(side_x) && !visit(TracedCell { side_x, t, t }))
                return origin_exit;
            if (g.contains(side_y) && !visit(TracedCell { side_y, t, t }))
                return origin_exit;
            col += step_col;
            row += step_row;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if (t_max_x < t_max_y) {
            col += step_col;
            t_max_x += t_delta_x;
        } else {
            row += step_row;
            t_max_y += t_delta_y;
        }

        const CellIndex next { row, col };
        if (!g.contains(next))
            return origin_exit;
        if (!visit(TracedCell { next, t, std::min(t_max_x, t_max_y) }))
            return origin_exit;
    }
}

/*
 * Cells traversed by the ray from the origin point, excluding the origin's
 * own cell, truncated at max_cells entries or the grid border.
 */
inline std::vector<CellIndex> raycast(const Pose& origin, double angle,
                                      int max_cells, const GridGeometry& g)
{
    std::vector<CellIndex> cells;
    if (!g.contains(origin.x, origin.y))
        throw OutOfBounds("raycast origin outside the grid");
    if (max_cells <= 0)
        return cells;

    cells.reserve(static_cast<std::size_t>(max_cells));
    trace_ray(origin.x, origin.y, std::cos(angle), std::sin(angle), g,
              [&](const TracedCell& c) {
                  cells.push_back(c.cell);
                  return static_cast<int>(cells.size()) < max_cells;
              });
    return cells;
}

/*
 * A traced cell annotated with the beam steps that land in it. Step j is
 * the point at distance j * resolution along the beam; an integer distance
 * theta selects the cell holding step theta. Steps inside the origin cell
 * belong to no emitted cell.
 */
struct BeamCell
{
    CellIndex cell;
    /* 1-based position in the supercover traversal */
    int ray_index = 0;
    /* Inclusive step range; empty when step_first > step_last */
    int step_first = 1;
    int step_last = 0;

    bool holds_step(int step) const
    { return step >= this->step_first && step <= this->step_last; }
};

/*
 * Walk the beam from (x0, y0) along the unit direction until the cell
 * holding step max_steps has been visited (or the border is reached).
 * visit(const BeamCell&) may return false to stop early.
 */
template <typename Visitor>
void walk_beam(double x0, double y0, double dir_x, double dir_y,
               int max_steps, const GridGeometry& g, Visitor&& visit)
{
    if (max_steps <= 0)
        return;

    const double res = g.resolution;
    int next_step = 1;
    int ray_index = 0;
    bool origin_done = false;

    trace_ray(x0, y0, dir_x, dir_y, g, [&](const TracedCell& c) {
        if (!origin_done) {
            /* Steps before the first emitted cell lie in the origin cell */
            while (next_step <= max_steps && next_step * res < c.enter)
                ++next_step;
            origin_done = true;
            if (next_step > max_steps)
                return false;
        }

        BeamCell beam_cell;
        beam_cell.cell = c.cell;
        beam_cell.ray_index = ++ray_index;
        beam_cell.step_first = next_step;
        while (next_step <= max_steps && next_step * res < c.exit)
            ++next_step;
        beam_cell.step_last = next_step - 1;

        if (!visit(static_cast<const BeamCell&>(beam_cell)))
            return false;
        return next_step <= max_steps;
    });
}

/*
 * Precomputed beam directions of a scanner, relative to the heading
 */
class BeamFan
{
public:
    explicit BeamFan(int n_beams) :
        mCos(static_cast<std::size_t>(std::max(n_beams, 0))),
        mSin(static_cast<std::size_t>(std::max(n_beams, 0)))
    {
        for (int k = 0; k < n_beams; ++k) {
            const double offset = beam_offset(k, n_beams);
            this->mCos[static_cast<std::size_t>(k)] = std::cos(offset);
            this->mSin[static_cast<std::size_t>(k)] = std::sin(offset);
        }
    }

    int size() const noexcept { return static_cast<int>(this->mCos.size()); }

    /* Unit direction of beam k for a robot with the given heading */
    void direction(double heading_cos, double heading_sin, int k,
                   double& dir_x, double& dir_y) const
    {
        const auto i = static_cast<std::size_t>(k);
        dir_x = heading_cos * this->mCos[i] - heading_sin * this->mSin[i];
        dir_y = heading_sin * this->mCos[i] + heading_cos * this->mSin[i];
    }

private:
    std::vector<double> mCos;
    std::vector<double> mSin;
};

/* Number of beam steps covering a range of `meters` */
inline int steps_for_range(double meters, double resolution)
{
    return static_cast<int>(std::ceil(meters / resolution - 1e-9));
}

} // namespace gridslam

#endif // GRIDSLAM_GEOMETRY_HPP
