#pragma once

#include <vector>

#include "nudge/matrix.hpp"
#include "nudge/scene.hpp"

namespace nudge {

/// Trajectory flattened to a 1 x 2T row [x1, y1, x2, y2, ...].
Matrix trajectory_to_row(const Polyline& traj);
Polyline row_to_trajectory(const Matrix& row);

/// Per-coordinate weights realizing the weighted L1 trajectory loss: step
/// weight w_t on every coordinate of waypoint t, with the endpoint weight
/// added on the final waypoint.
Matrix loss_weight_row(const std::vector<double>& step_weights, double endpoint_weight);

/// sum_t w_t * |yhat_t - y_t|_1 + lambda_end * |yhat_T - y_T|_1.
double trajectory_loss(const Polyline& prediction, const Polyline& target,
                       const std::vector<double>& step_weights, double endpoint_weight);

}  // namespace nudge
