/* models.hpp */

#ifndef GRIDSLAM_MODELS_HPP
#define GRIDSLAM_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "gridslam/errors.hpp"
#include "gridslam/geometry.hpp"
#include "gridslam/random.hpp"

namespace gridslam {

/* Designated log-zero */
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double lw) { return lw == kLogZero; }

/*
 * Gaussian odometry noise. Each component has standard deviation
 * base + proportional * |magnitude of the commanded component|.
 */
struct MotionParams
{
    double rot_std_base = 0.0;
    double rot_std_per_rad = 0.0;
    double trans_std_base = 0.0;
    double trans_std_per_meter = 0.0;

    void validate() const
    {
        if (this->rot_std_base < 0.0 || this->rot_std_per_rad < 0.0 ||
            this->trans_std_base < 0.0 || this->trans_std_per_meter < 0.0)
            throw InvalidArgument("motion noise parameters must be >= 0");
    }
};

/* Truncated Gaussian laser model on (0, d_max) */
struct PerceptionParams
{
    double sigma = 0.02;
    double d_max = 10.0;

    void validate() const
    {
        if (!(this->sigma > 0.0) || !(this->d_max > 0.0))
            throw InvalidArgument("sigma and d_max must be positive");
    }
};

/* Independent per-cell occupancy prior */
struct MapPrior
{
    double p = 0.05;

    void validate() const
    {
        if (!(this->p > 0.0 && this->p < 1.0))
            throw InvalidArgument("map prior p must lie in (0, 1)");
    }
};

/* Relative motion between consecutive timesteps: rotate, then translate */
struct OdometryDelta
{
    double rot = 0.0;
    double trans = 0.0;

    friend bool operator==(const OdometryDelta&, const OdometryDelta&) = default;
};

/*
 * Cells along one beam that may hold the nearest obstacle: the unlabeled
 * cells in ray order, closed by the first occupied cell when the beam
 * reaches one. unlabeled_before counts unlabeled cells strictly before
 * the candidate.
 */
struct ConsistentSet
{
    struct Candidate
    {
        CellIndex cell;
        int ray_index = 0;
        int unlabeled_before = 0;
        bool terminal_occupied = false;
        /* Integer distances (beam steps) whose endpoint is this cell */
        int step_first = 1;
        int step_last = 0;
    };

    std::vector<Candidate> candidates;

    bool empty() const noexcept { return this->candidates.empty(); }
    std::size_t size() const noexcept { return this->candidates.size(); }
    void clear() noexcept { this->candidates.clear(); }
};

/*
 * Standard normal
 */

inline double std_normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double std_normal_logpdf(double x)
{
    /* -log(sqrt(2 pi)) */
    constexpr double log_norm = -0.91893853320467274178;
    return log_norm - 0.5 * x * x;
}

/* log Phi(x), accurate far into the lower tail */
inline double log_std_normal_cdf(double x)
{
    if (x > -20.0)
        return std::log(std_normal_cdf(x));

    /* Asymptotic expansion of the Mills ratio */
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) -
                          15.0 / (x2 * x2 * x2);
    return std_normal_logpdf(x) - std::log(-x) + std::log(series);
}

/*
 * Perception model
 */

/* Phi((d_max - theta) / sigma) - Phi(-theta / sigma) */
inline double truncation_normalizer(double theta_m, const PerceptionParams& pp)
{
    return std_normal_cdf((pp.d_max - theta_m) / pp.sigma) -
           std_normal_cdf(-theta_m / pp.sigma);
}

inline double log_truncation_normalizer(double theta_m,
                                        const PerceptionParams& pp)
{
    const double upper = (pp.d_max - theta_m) / pp.sigma;
    const double lower = -theta_m / pp.sigma;
    /* Phi rounds to exactly 0 and 1 beyond 40 standard deviations */
    if (upper > 40.0 && lower < -40.0)
        return 0.0;
    if (upper > -5.0)
        return std::log(std_normal_cdf(upper) - std_normal_cdf(lower));

    /* Both limits deep in the lower tail */
    const double log_upper = log_std_normal_cdf(upper);
    const double log_lower = log_std_normal_cdf(lower);
    return log_upper + std::log1p(-std::exp(log_lower - log_upper));
}

inline bool reading_in_range(double v, const PerceptionParams& pp)
{
    return v > 0.0 && v < pp.d_max;
}

/* Log-density of reading v given the true distance theta_m */
inline double perception_logpdf(double v, double theta_m,
                                const PerceptionParams& pp)
{
    if (!reading_in_range(v, pp))
        throw DomainError("reading outside (0, d_max)");
    return std_normal_logpdf((v - theta_m) / pp.sigma) - std::log(pp.sigma) -
           log_truncation_normalizer(theta_m, pp);
}

/*
 * Integer distances: theta counts distance bins of one cell width, bin
 * theta covering [(theta - 1) res, theta res). Its metric value is the
 * bin center and its endpoint is beam step theta.
 */
inline double theta_meters(int theta, double resolution)
{
    return (theta - 0.5) * resolution;
}

inline int theta_of_range(double meters, double resolution)
{
    const double bins = std::floor(meters / resolution) + 1.0;
    if (!(bins >= 1.0))
        return 1;
    if (bins > static_cast<double>(std::numeric_limits<int>::max() / 2))
        return std::numeric_limits<int>::max() / 2;
    return static_cast<int>(bins);
}

/* Draw theta from Normal(v, sigma), discretized to bins, clamped to >= 1 */
inline int perception_sample(double v, const PerceptionParams& pp,
                             const GridGeometry& g, Rng& rng)
{
    if (!reading_in_range(v, pp))
        throw DomainError("reading outside (0, d_max)");
    return theta_of_range(v + pp.sigma * rng.normal(), g.resolution);
}

/*
 * Motion model
 */

/* Noise-free rotate-then-translate composition */
inline Pose compose(const Pose& prev, const OdometryDelta& u)
{
    const double heading = normalize_angle(prev.heading + u.rot);
    return Pose { prev.x + u.trans * std::cos(heading),
                  prev.y + u.trans * std::sin(heading),
                  heading };
}

inline Pose motion_sample(const Pose& prev, const OdometryDelta& u,
                          const MotionParams& mp, Rng& rng)
{
    const double rot_std = mp.rot_std_base + mp.rot_std_per_rad * std::fabs(u.rot);
    const double trans_std = mp.trans_std_base +
                             mp.trans_std_per_meter * std::fabs(u.trans);
    /* Always draw both so the stream layout is independent of the params */
    const double eps_rot = rot_std * rng.normal();
    const double eps_trans = trans_std * rng.normal();
    return compose(prev, OdometryDelta { u.rot + eps_rot, u.trans + eps_trans });
}

/*
 * Truncated geometric distribution over a consistency set
 */

namespace detail {

/* log of the sum of unnormalized masses */
inline double trgeom_log_normalizer(const ConsistentSet& c, const MapPrior& prior)
{
    const double p = prior.p;
    const double q = 1.0 - p;
    const int u0 = c.candidates.front().unlabeled_before;

    /* Masses decrease with u, so scale by q^u0 and sum in linear domain */
    double sum = 0.0;
    double power = 1.0;
    int prev = u0;
    for (const auto& cand : c.candidates) {
        const int jump = cand.unlabeled_before - prev;
        if (jump > 0) {
            if (jump <= 8) {
                for (int i = 0; i < jump; ++i)
                    power *= q;
            } else {
                power *= std::pow(q, jump);
            }
            prev = cand.unlabeled_before;
        }
        if (power == 0.0)
            break;
        sum += cand.terminal_occupied ? power : p * power;
    }
    return u0 * std::log(q) + std::log(sum);
}

inline double trgeom_log_unnormalized(const ConsistentSet::Candidate& cand,
                                      const MapPrior& prior)
{
    const double log_mass = cand.unlabeled_before * std::log1p(-prior.p);
    return cand.terminal_occupied ? log_mass : log_mass + std::log(prior.p);
}

} // namespace detail

/* Normalized candidate probabilities, in candidate order */
inline std::vector<double> trgeom_pmf(const ConsistentSet& c, const MapPrior& prior)
{
    if (c.empty())
        throw EmptySet("truncated geometric over an empty consistency set");

    const double log_norm = detail::trgeom_log_normalizer(c, prior);
    std::vector<double> pmf;
    pmf.reserve(c.size());
    for (const auto& cand : c.candidates)
        pmf.push_back(std::exp(
            detail::trgeom_log_unnormalized(cand, prior) - log_norm));
    return pmf;
}

/* Candidate whose endpoint steps include theta, or nullptr */
inline const ConsistentSet::Candidate* find_candidate(const ConsistentSet& c,
                                                      int theta)
{
    /* Step ranges increase along the beam */
    const auto it = std::lower_bound(
        c.candidates.begin(), c.candidates.end(), theta,
        [](const ConsistentSet::Candidate& cand, int step) {
            return cand.step_last < step;
        });
    if (it == c.candidates.end() || !(it->step_first <= theta &&
                                      theta <= it->step_last))
        return nullptr;
    return &*it;
}

inline double trgeom_logmass(const ConsistentSet& c, const MapPrior& prior,
                             int theta)
{
    if (c.empty())
        throw EmptySet("truncated geometric over an empty consistency set");

    const auto* cand = find_candidate(c, theta);
    if (cand == nullptr)
        return kLogZero;
    return detail::trgeom_log_unnormalized(*cand, prior) -
           detail::trgeom_log_normalizer(c, prior);
}

/*
 * Importance weights for theta under a Gaussian proposal centered on the
 * reading. The Gaussian factor of the target cancels with the proposal,
 * leaving prior mass over the truncation normalizer.
 */

inline double algo1_theta_logweight(int theta, const ConsistentSet& c,
                                    const PerceptionParams& pp,
                                    const MapPrior& prior,
                                    const GridGeometry& g)
{
    const double log_mass = trgeom_logmass(c, prior, theta);
    if (is_log_zero(log_mass))
        return kLogZero;
    return log_mass -
           log_truncation_normalizer(theta_meters(theta, g.resolution), pp);
}

inline double algo2_theta_logweight(int theta, const PerceptionParams& pp,
                                    const MapPrior& prior,
                                    const GridGeometry& g)
{
    if (theta < 1)
        return kLogZero;
    return (theta - 1) * std::log1p(-prior.p) + std::log(prior.p) -
           log_truncation_normalizer(theta_meters(theta, g.resolution), pp);
}

/*
 * Resampling
 */

/* Draw one index with probability proportional to exp(logweights) */
inline std::size_t resample(std::span<const double> logweights, Rng& rng)
{
    if (logweights.empty())
        throw InvalidArgument("resample over an empty list");

    double max_lw = kLogZero;
    for (const double lw : logweights) {
        if (std::isnan(lw))
            throw DomainError("NaN log-weight");
        max_lw = std::max(max_lw, lw);
    }
    if (is_log_zero(max_lw))
        throw AllZeroWeights("all candidate weights are zero");

    double total = 0.0;
    for (const double lw : logweights)
        total += std::exp(lw - max_lw);

    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < logweights.size(); ++i) {
        if (is_log_zero(logweights[i]))
            continue;
        cumulative += std::exp(logweights[i] - max_lw);
        last_positive = i;
        if (target < cumulative)
            return i;
    }
    return last_positive;
}

/*
 * Map prior
 */

/* Occupancy grid drawn cell-independently from the prior (1 = occupied) */
inline Grid<std::uint8_t> sample_prior_map(int rows, int cols,
                                           const MapPrior& prior, Rng& rng)
{
    prior.validate();
    Grid<std::uint8_t> map(rows, cols, 0);
    for (auto& cell : map.values())
        cell = rng.uniform() < prior.p ? 1 : 0;
    return map;
}

} // namespace gridslam

#endif // GRIDSLAM_MODELS_HPP
