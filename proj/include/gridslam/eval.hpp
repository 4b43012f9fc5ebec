/* eval.hpp */

#ifndef GRIDSLAM_EVAL_HPP
#define GRIDSLAM_EVAL_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gridslam/errors.hpp"
#include "gridslam/geometry.hpp"
#include "gridslam/mapping.hpp"
#include "gridslam/simulator.hpp"

namespace gridslam {

struct MapScore
{
    long labeled_cells = 0;
    long correct = 0;
    /* correct / labeled_cells, 0 when nothing is labeled */
    double accuracy = 0.0;
};

/* Agreement of the Empty/Occupied cells of an estimate with the truth */
inline MapScore map_accuracy(const Grid<CellLabel>& estimate, const World& truth)
{
    if (estimate.rows() != truth.geometry.rows ||
        estimate.cols() != truth.geometry.cols)
        throw GeometryMismatch("estimated map and world differ in size");

    MapScore score;
    const auto& labels = estimate.values();
    const auto& walls = truth.walls.values();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == CellLabel::Unknown)
            continue;
        ++score.labeled_cells;
        const bool wall = walls[i] != 0;
        if (wall == (labels[i] == CellLabel::Occupied))
            ++score.correct;
    }
    if (score.labeled_cells > 0)
        score.accuracy = static_cast<double>(score.correct) /
                         static_cast<double>(score.labeled_cells);
    return score;
}

struct PathError
{
    double rmse_position = 0.0;
    double final_error = 0.0;
    /* Wrapped into (-pi, pi] */
    double final_heading_error = 0.0;
};

inline PathError path_error(std::span<const Pose> estimate,
                            std::span<const Pose> truth)
{
    if (estimate.size() != truth.size())
        throw LengthMismatch("paths differ in length");

    PathError err;
    if (estimate.empty())
        return err;

    double sum_sq = 0.0;
    for (std::size_t i = 0; i < estimate.size(); ++i) {
        const double dx = estimate[i].x - truth[i].x;
        const double dy = estimate[i].y - truth[i].y;
        sum_sq += dx * dx + dy * dy;
    }
    err.rmse_position = std::sqrt(sum_sq / static_cast<double>(estimate.size()));

    const Pose& a = estimate.back();
    const Pose& b = truth.back();
    err.final_error = std::hypot(a.x - b.x, a.y - b.y);
    err.final_heading_error = normalize_angle(a.heading - b.heading);
    return err;
}

/* Ground truth as a ternary labeling: free cells Empty, walls Occupied */
inline Grid<CellLabel> world_labels(const World& w)
{
    Grid<CellLabel> labels(w.geometry.rows, w.geometry.cols);
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels.values()[i] = w.walls.values()[i] != 0 ? CellLabel::Occupied
                                                      : CellLabel::Empty;
    return labels;
}

/*
 * Number of 4-connected components of Empty cells holding at least
 * min_cells cells. With 4-connectivity an 8-connected line of Occupied
 * cells separates free space.
 */
inline int free_components(const Grid<CellLabel>& labels, std::size_t min_cells)
{
    const int rows = labels.rows();
    const int cols = labels.cols();
    std::vector<std::uint8_t> seen(labels.size(), 0);
    std::vector<std::size_t> stack;
    int count = 0;

    for (std::size_t start = 0; start < labels.size(); ++start) {
        if (seen[start] || labels.values()[start] != CellLabel::Empty)
            continue;
        std::size_t size = 0;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t idx = stack.back();
            stack.pop_back();
            ++size;
            const int r = static_cast<int>(idx / static_cast<std::size_t>(cols));
            const int c = static_cast<int>(idx % static_cast<std::size_t>(cols));
            const int nr[4] = { r - 1, r + 1, r, r };
            const int nc[4] = { c, c, c - 1, c + 1 };
            for (int j = 0; j < 4; ++j) {
                if (nr[j] < 0 || nr[j] >= rows || nc[j] < 0 || nc[j] >= cols)
                    continue;
                const std::size_t n = static_cast<std::size_t>(nr[j]) *
                                      static_cast<std::size_t>(cols) +
                                      static_cast<std::size_t>(nc[j]);
                if (!seen[n] && labels.values()[n] == CellLabel::Empty) {
                    seen[n] = 1;
                    stack.push_back(n);
                }
            }
        }
        if (size >= min_cells)
            ++count;
    }
    return count;
}

} // namespace gridslam

#endif // GRIDSLAM_EVAL_HPP
