#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "multiscout/common.hpp"

namespace multiscout {

struct BistaticMeasurementSet {
  std::vector<double> ranges_m;
  std::vector<double> radial_velocities_mps;  // may be empty when only position is wanted
  std::vector<Vector> receiver_positions;
  Vector transmitter_pos;

  int dims() const { return static_cast<int>(transmitter_pos.size()); }
  std::size_t size() const { return ranges_m.size(); }
  void validate() const;
};

struct SolverSettings {
  int restarts = 20;
  int max_iters = 100;
  double step_tol = 1e-9;
  double grad_tol = 1e-9;
  double mu_init = 1e-3;
  double mu_up = 10.0;
  double mu_down = 0.1;
  double mu_max = 1e12;  // give up on a start once damping reaches this
  double ridge_eps = 1e-3;
  double init_box_margin_m = 200.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PositionFix {
  Vector pos;
  double residual_cost = 0.0;  // 0.5 * sum of squared range residuals
  std::optional<double> clock_bias_s;
  bool converged = false;
  int iterations = 0;
};

struct VelocityFix {
  Vector vel;
  double speed_mps = 0.0;
  double heading_deg = 0.0;  // atan2(v_y, v_x), (-180, 180]
};

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Vector&)>;

struct LmResult {
  Vector x;
  double cost = 0.0;  // 0.5 * |r|^2
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_history;  // cost after every accepted step, starting at x0
};

// Solves (J^T J + mu I) delta = -J^T r.
Vector lm_step(const Eigen::MatrixXd& jacobian, const Vector& residual, double mu);

// Levenberg damping schedule: accepted steps shrink mu by mu_down, rejected
// steps grow it by mu_up. Stops on |delta| <= step_tol, |J^T r|_inf <= grad_tol,
// mu > mu_max or max_iters.
LmResult lm_minimize(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& x0,
                     const SolverSettings& settings);

// Unknowns are x = [p] or [p; b] with b = c * delta_t in metres. The model is
// measured = |p - t| + |p - r_m| + b, residual = model - measured.
Vector trilateration_residuals(const Vector& x, const BistaticMeasurementSet& meas, bool with_bias);
Eigen::MatrixXd trilateration_jacobian(const Vector& x, const BistaticMeasurementSet& meas,
                                       bool with_bias);

int required_receivers(int dims, bool with_bias);

// Throws std::invalid_argument on too few receivers or receivers that do not
// span the space (collinear in 2D, coplanar in 3D).
void check_geometry(const BistaticMeasurementSet& meas, bool with_bias);

// Multi-start LM; starts are drawn uniformly from the bounding box of the
// transmitter and receivers grown by init_box_margin_m.
PositionFix trilaterate(const BistaticMeasurementSet& meas, const SolverSettings& settings,
                        bool estimate_bias);

VelocityFix velocity_fix_from(const Vector& vel);

// Ridge-regularized least squares on the bistatic direction rows at fix.pos.
VelocityFix estimate_velocity(const PositionFix& fix, const BistaticMeasurementSet& meas,
                              double ridge_eps);

}  // namespace multiscout
