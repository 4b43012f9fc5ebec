/* mapping.hpp */

#ifndef GRIDSLAM_MAPPING_HPP
#define GRIDSLAM_MAPPING_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gridslam/errors.hpp"
#include "gridslam/geometry.hpp"
#include "gridslam/models.hpp"

namespace gridslam {

enum class CellLabel : std::uint8_t
{
    Unknown = 0,
    Empty = 1,
    Occupied = 2,
};

/* Per-beam integer distances plus the flags of the beams that take part */
using ThetaList = std::span<const int>;
using BeamMask = std::span<const std::uint8_t>;

/*
 * Deterministic ternary map built from committed (pose, distances) pairs
 */
struct PartialMap
{
    GridGeometry geometry;
    Grid<CellLabel> labels;

    explicit PartialMap(const GridGeometry& g) :
        geometry(g), labels(g.rows, g.cols, CellLabel::Unknown)
    { g.validate(); }

    CellLabel at(CellIndex c) const { return this->labels[c]; }

    friend bool operator==(const PartialMap&, const PartialMap&) = default;
};

/* Labeling threshold: Empty below pi, Occupied at or above 1 - pi */
struct LabelingParams
{
    double pi = 0.2;

    void validate() const
    {
        if (!(this->pi > 0.0 && this->pi < 0.5))
            throw InvalidArgument("labeling threshold pi must lie in (0, 0.5)");
    }
};

/*
 * Count-based relaxed map: for every cell, how many committed scans found
 * it occupied and how many determined it at all.
 */
class ProbabilisticMap
{
public:
    explicit ProbabilisticMap(const GridGeometry& g) :
        geometry(g),
        occupied_count(g.rows, g.cols, 0),
        observed_count(g.rows, g.cols, 0),
        mScratch(g.cell_count(), 0)
    { g.validate(); }

    GridGeometry geometry;
    Grid<std::uint32_t> occupied_count;
    Grid<std::uint32_t> observed_count;

    friend bool operator==(const ProbabilisticMap& a, const ProbabilisticMap& b)
    {
        return a.geometry == b.geometry &&
               a.occupied_count == b.occupied_count &&
               a.observed_count == b.observed_count;
    }

private:
    friend void accumulate_scan(ProbabilisticMap&, const Pose&, ThetaList,
                                BeamMask, const BeamFan&,
                                std::vector<std::size_t>*);

    /* Per-scan cell status while a scan is being accumulated */
    std::vector<std::uint8_t> mScratch;
};

namespace detail {

inline void check_scan_sizes(ThetaList thetas, BeamMask mask, const BeamFan& fan)
{
    if (thetas.size() != mask.size() ||
        thetas.size() != static_cast<std::size_t>(fan.size()))
        throw InvalidArgument("per-beam arrays must match the beam count");
}

/* Visit the cells a beam with integer distance theta determines:
 * visit(cell, is_endpoint) for every cell up to and including the endpoint */
template <typename Visitor>
void walk_determined(const Pose& z, double dir_x, double dir_y, int theta,
                     const GridGeometry& g, Visitor&& visit)
{
    walk_beam(z.x, z.y, dir_x, dir_y, theta, g, [&](const BeamCell& c) {
        visit(c.cell, c.holds_step(theta));
        return true;
    });
}

} // namespace detail

/*
 * Consistency set of beam k from pose z: skip Empty cells, collect Unknown
 * cells, stop at (and include) the first Occupied cell or the range limit.
 */
inline void consistent_set_into(ConsistentSet& out, const PartialMap& m,
                                const Pose& z, double dir_x, double dir_y,
                                int max_steps)
{
    out.clear();
    if (!m.geometry.contains(z.x, z.y))
        throw OutOfBounds("pose outside the grid");

    int unlabeled = 0;
    walk_beam(z.x, z.y, dir_x, dir_y, max_steps, m.geometry,
              [&](const BeamCell& c) {
        const CellLabel label = m.at(c.cell);
        if (label == CellLabel::Empty)
            return true;
        ConsistentSet::Candidate cand;
        cand.cell = c.cell;
        cand.ray_index = c.ray_index;
        cand.unlabeled_before = unlabeled;
        cand.step_first = c.step_first;
        cand.step_last = c.step_last;
        if (label == CellLabel::Occupied) {
            cand.terminal_occupied = true;
            out.candidates.push_back(cand);
            return false;
        }
        out.candidates.push_back(cand);
        ++unlabeled;
        return true;
    });
}

inline ConsistentSet consistent_set(const PartialMap& m, const Pose& z, int k,
                                    const PerceptionParams& pp, int n_beams)
{
    const BeamFan fan(n_beams);
    double dir_x = 0.0;
    double dir_y = 0.0;
    fan.direction(std::cos(z.heading), std::sin(z.heading), k, dir_x, dir_y);

    ConsistentSet out;
    consistent_set_into(out, m, z, dir_x, dir_y,
                        steps_for_range(pp.d_max, m.geometry.resolution));
    return out;
}

/*
 * Commit a scan to the partial map: cells before each endpoint become
 * Empty, endpoints become Occupied; Occupied cells are never demoted.
 */
inline void apply_scan(PartialMap& m, const Pose& z, ThetaList thetas,
                       BeamMask mask, const BeamFan& fan)
{
    detail::check_scan_sizes(thetas, mask, fan);
    if (!m.geometry.contains(z.x, z.y))
        throw OutOfBounds("pose outside the grid");

    const double hc = std::cos(z.heading);
    const double hs = std::sin(z.heading);
    for (int k = 0; k < fan.size(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (mask[i] == 0 || thetas[i] < 1)
            continue;
        double dir_x = 0.0;
        double dir_y = 0.0;
        fan.direction(hc, hs, k, dir_x, dir_y);
        detail::walk_determined(z, dir_x, dir_y, thetas[i], m.geometry,
                                [&](CellIndex cell, bool endpoint) {
            CellLabel& label = m.labels[cell];
            if (endpoint)
                label = CellLabel::Occupied;
            else if (label == CellLabel::Unknown)
                label = CellLabel::Empty;
        });
    }
}

inline void apply_scan(PartialMap& m, const Pose& z, ThetaList thetas,
                       BeamMask mask)
{
    apply_scan(m, z, thetas, mask, BeamFan(static_cast<int>(thetas.size())));
}

/*
 * Add one scan to the counts. Each cell contributes at most once per scan:
 * Occupied if any beam ends in it, Empty otherwise. Optionally reports
 * the flat indices of the touched cells.
 */
inline void accumulate_scan(ProbabilisticMap& pm, const Pose& z,
                            ThetaList thetas, BeamMask mask,
                            const BeamFan& fan,
                            std::vector<std::size_t>* touched = nullptr)
{
    detail::check_scan_sizes(thetas, mask, fan);
    if (!pm.geometry.contains(z.x, z.y))
        throw OutOfBounds("pose outside the grid");

    std::vector<std::size_t> local;
    std::vector<std::size_t>& cells = touched != nullptr ? *touched : local;
    cells.clear();

    const double hc = std::cos(z.heading);
    const double hs = std::sin(z.heading);
    for (int k = 0; k < fan.size(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (mask[i] == 0 || thetas[i] < 1)
            continue;
        double dir_x = 0.0;
        double dir_y = 0.0;
        fan.direction(hc, hs, k, dir_x, dir_y);
        detail::walk_determined(z, dir_x, dir_y, thetas[i], pm.geometry,
                                [&](CellIndex cell, bool endpoint) {
            const std::size_t idx = pm.geometry.flat(cell);
            std::uint8_t& status = pm.mScratch[idx];
            if (status == 0)
                cells.push_back(idx);
            status = std::max<std::uint8_t>(status, endpoint ? 2 : 1);
        });
    }

    auto& occupied = pm.occupied_count.values();
    auto& observed = pm.observed_count.values();
    for (const std::size_t idx : cells) {
        ++observed[idx];
        if (pm.mScratch[idx] == 2)
            ++occupied[idx];
        pm.mScratch[idx] = 0;
    }
}

inline void accumulate_scan(ProbabilisticMap& pm, const Pose& z,
                            ThetaList thetas, BeamMask mask)
{
    accumulate_scan(pm, z, thetas, mask,
                    BeamFan(static_cast<int>(thetas.size())));
}

inline CellLabel label_from_counts(std::uint32_t occupied, std::uint32_t observed,
                                   const LabelingParams& lp)
{
    if (observed == 0)
        return CellLabel::Unknown;
    const double ratio = static_cast<double>(occupied) /
                         static_cast<double>(observed);
    if (ratio < lp.pi)
        return CellLabel::Empty;
    if (ratio >= 1.0 - lp.pi)
        return CellLabel::Occupied;
    return CellLabel::Unknown;
}

inline CellLabel label_cell(const ProbabilisticMap& pm, CellIndex cell,
                            const LabelingParams& lp)
{
    return label_from_counts(pm.occupied_count[cell], pm.observed_count[cell], lp);
}

/* Thresholded labels of every cell */
inline Grid<CellLabel> label_map(const ProbabilisticMap& pm,
                                 const LabelingParams& lp)
{
    Grid<CellLabel> labels(pm.geometry.rows, pm.geometry.cols);
    const auto& occupied = pm.occupied_count.values();
    const auto& observed = pm.observed_count.values();
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels.values()[i] = label_from_counts(occupied[i], observed[i], lp);
    return labels;
}

/*
 * Agreement between the cells a candidate pose's scan determines and a
 * reference labeling. Per beam: agree / (agree + disagree) over cells
 * labeled on both sides, neutral 1 when nothing is comparable.
 */
struct AgreementScore
{
    double logweight = 0.0;
    /* Agreeing cells over all beams (tie-break for degenerate weights) */
    long agree = 0;
    long disagree = 0;
};

template <typename LabelFn>
AgreementScore agreement_score_with(LabelFn&& reference, const GridGeometry& g,
                               const Pose& z, ThetaList thetas, BeamMask mask,
                               const BeamFan& fan)
{
    detail::check_scan_sizes(thetas, mask, fan);
    if (!g.contains(z.x, z.y))
        throw OutOfBounds("pose outside the grid");

    AgreementScore score;
    const double hc = std::cos(z.heading);
    const double hs = std::sin(z.heading);
    for (int k = 0; k < fan.size(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (mask[i] == 0 || thetas[i] < 1)
            continue;
        double dir_x = 0.0;
        double dir_y = 0.0;
        fan.direction(hc, hs, k, dir_x, dir_y);

        long agree = 0;
        long disagree = 0;
        detail::walk_determined(z, dir_x, dir_y, thetas[i], g,
                                [&](CellIndex cell, bool endpoint) {
            const CellLabel ref = reference(cell);
            if (ref == CellLabel::Unknown)
                return;
            const CellLabel mine = endpoint ? CellLabel::Occupied
                                            : CellLabel::Empty;
            if (ref == mine)
                ++agree;
            else
                ++disagree;
        });

        score.agree += agree;
        score.disagree += disagree;
        if (agree + disagree == 0)
            continue;
        if (agree == 0)
            score.logweight = kLogZero;
        else if (!is_log_zero(score.logweight))
            score.logweight += std::log(static_cast<double>(agree) /
                                        static_cast<double>(agree + disagree));
    }
    return score;
}

inline AgreementScore agreement_score(const Grid<CellLabel>& labels,
                                      const GridGeometry& g, const Pose& z,
                                      ThetaList thetas, BeamMask mask,
                                      const BeamFan& fan)
{
    return agreement_score_with([&](CellIndex c) { return labels[c]; },
                           g, z, thetas, mask, fan);
}

/* Sum over active beams of log(omega_k) against the thresholded map */
inline double agreement_logweight(const ProbabilisticMap& pm, const Pose& z,
                                  ThetaList thetas, BeamMask mask,
                                  const LabelingParams& lp)
{
    const BeamFan fan(static_cast<int>(thetas.size()));
    return agreement_score_with([&](CellIndex c) { return label_cell(pm, c, lp); },
                           pm.geometry, z, thetas, mask, fan).logweight;
}

/*
 * Grayscale rendering: Occupied 0, Empty 255, Unknown 127
 */

inline std::uint8_t pixel_of(CellLabel label)
{
    switch (label) {
        case CellLabel::Occupied: return 0;
        case CellLabel::Empty: return 255;
        case CellLabel::Unknown: break;
    }
    return 127;
}

inline Grid<std::uint8_t> render(const Grid<CellLabel>& labels)
{
    Grid<std::uint8_t> image(labels.rows(), labels.cols());
    for (std::size_t i = 0; i < labels.size(); ++i)
        image.values()[i] = pixel_of(labels.values()[i]);
    return image;
}

inline Grid<std::uint8_t> render(const PartialMap& m)
{
    return render(m.labels);
}

inline Grid<std::uint8_t> render(const ProbabilisticMap& pm,
                                 const LabelingParams& lp)
{
    return render(label_map(pm, lp));
}

} // namespace gridslam

#endif // GRIDSLAM_MAPPING_HPP
