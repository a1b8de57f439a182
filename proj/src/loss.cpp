#include "nudge/loss.hpp"

#include <cmath>

#include "nudge/errors.hpp"

namespace nudge {

Matrix trajectory_to_row(const Polyline& traj) {
  Matrix row(1, 2 * static_cast<int>(traj.size()));
  for (size_t k = 0; k < traj.size(); ++k) {
    row.at(0, 2 * static_cast<int>(k)) = traj[k].x;
    row.at(0, 2 * static_cast<int>(k) + 1) = traj[k].y;
  }
  return row;
}

Polyline row_to_trajectory(const Matrix& row) {
  if (row.rows != 1 || row.cols % 2 != 0) {
    throw ShapeError("row_to_trajectory: expected 1 x 2T row, got " + shape_string(row));
  }
  Polyline traj(row.cols / 2);
  for (size_t k = 0; k < traj.size(); ++k) {
    traj[k] = {row.at(0, 2 * static_cast<int>(k)), row.at(0, 2 * static_cast<int>(k) + 1)};
  }
  return traj;
}

Matrix loss_weight_row(const std::vector<double>& step_weights, double endpoint_weight) {
  const int horizon = static_cast<int>(step_weights.size());
  if (horizon == 0) throw ConfigError("loss: step_weights must be non-empty");
  for (double w : step_weights) {
    if (!(w > 0.0)) throw ConfigError("loss: step_weights must be positive");
  }
  if (endpoint_weight < 0.0) throw ConfigError("loss: endpoint_weight must be >= 0");
  Matrix row(1, 2 * horizon);
  for (int k = 0; k < horizon; ++k) {
    double w = step_weights[k];
    if (k == horizon - 1) w += endpoint_weight;
    row.at(0, 2 * k) = w;
    row.at(0, 2 * k + 1) = w;
  }
  return row;
}

double trajectory_loss(const Polyline& prediction, const Polyline& target,
                       const std::vector<double>& step_weights, double endpoint_weight) {
  if (prediction.size() != target.size()) {
    throw ShapeError("trajectory_loss: prediction/target length mismatch");
  }
  if (step_weights.size() != prediction.size()) {
    throw ShapeError("trajectory_loss: step_weights length mismatch");
  }
  double loss = 0.0;
  for (size_t k = 0; k < prediction.size(); ++k) {
    const double l1 =
        std::abs(prediction[k].x - target[k].x) + std::abs(prediction[k].y - target[k].y);
    loss += step_weights[k] * l1;
    if (k + 1 == prediction.size()) loss += endpoint_weight * l1;
  }
  return loss;
}

}  // namespace nudge
