/* gridslam.hpp */

#ifndef GRIDSLAM_GRIDSLAM_HPP
#define GRIDSLAM_GRIDSLAM_HPP

#include "gridslam/errors.hpp"
#include "gridslam/geometry.hpp"
#include "gridslam/random.hpp"
#include "gridslam/models.hpp"
#include "gridslam/mapping.hpp"
#include "gridslam/dataset.hpp"
#include "gridslam/algorithms.hpp"
#include "gridslam/simulator.hpp"
#include "gridslam/eval.hpp"
#include "gridslam/io.hpp"
#include "gridslam/config.hpp"

#endif // GRIDSLAM_GRIDSLAM_HPP
