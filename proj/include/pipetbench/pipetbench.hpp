#ifndef PIPETBENCH_PIPETBENCH_HPP
#define PIPETBENCH_PIPETBENCH_HPP

#include "pipetbench/geometry.hpp"
#include "pipetbench/spiral.hpp"
#include "pipetbench/labware.hpp"
#include "pipetbench/kinematics.hpp"
#include "pipetbench/collision.hpp"
#include "pipetbench/goal_search.hpp"
#include "pipetbench/planning.hpp"
#include "pipetbench/correction.hpp"
#include "pipetbench/sim.hpp"
#include "pipetbench/config.hpp"
#include "pipetbench/report.hpp"

#endif  // PIPETBENCH_PIPETBENCH_HPP
