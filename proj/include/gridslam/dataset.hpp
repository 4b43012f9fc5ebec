/* dataset.hpp */

#ifndef GRIDSLAM_DATASET_HPP
#define GRIDSLAM_DATASET_HPP

#include <cmath>
#include <string>
#include <vector>

#include "gridslam/errors.hpp"
#include "gridslam/models.hpp"

namespace gridslam {

/* One timestep: odometry since the previous step, then a laser scan */
struct DataRecord
{
    OdometryDelta u;
    /* One range per beam, meters */
    std::vector<double> ranges;

    friend bool operator==(const DataRecord&, const DataRecord&) = default;
};

/*
 * Odometry + laser log. `resolution` is the grid resolution the log was
 * produced for; it travels with the file so tools can pick a default grid.
 */
struct Dataset
{
    int n_beams = 180;
    double d_max = 10.0;
    double resolution = 0.1;
    std::vector<DataRecord> records;

    std::size_t size() const noexcept { return this->records.size(); }

    void validate() const
    {
        if (this->n_beams < 1)
            throw InvalidArgument("dataset needs at least one beam");
        if (!(this->d_max > 0.0) || !(this->resolution > 0.0))
            throw InvalidArgument("dataset d_max and resolution must be positive");
        for (std::size_t t = 0; t < this->records.size(); ++t) {
            const auto& r = this->records[t];
            if (r.ranges.size() != static_cast<std::size_t>(this->n_beams))
                throw InvalidArgument("record " + std::to_string(t + 1) +
                                      " has the wrong number of beams");
            for (const double v : r.ranges)
                if (!(v > 0.0 && v <= this->d_max))
                    throw InvalidArgument("record " + std::to_string(t + 1) +
                                          " has a reading outside (0, d_max]");
        }
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

} // namespace gridslam

#endif // GRIDSLAM_DATASET_HPP
