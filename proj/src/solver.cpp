#include "multiscout/solver.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "multiscout/rng.hpp"
#include "multiscout/scene.hpp"

namespace multiscout {

void BistaticMeasurementSet::validate() const {
  const auto d = transmitter_pos.size();
  if (d != 2 && d != 3) throw std::invalid_argument("BistaticMeasurementSet: dims must be 2 or 3");
  if (receiver_positions.size() != ranges_m.size())
    throw std::invalid_argument("BistaticMeasurementSet: ranges and receivers differ in length");
  if (!radial_velocities_mps.empty() && radial_velocities_mps.size() != ranges_m.size())
    throw std::invalid_argument("BistaticMeasurementSet: radial velocities and ranges differ in length");
  for (const auto& r : receiver_positions)
    if (r.size() != d) throw std::invalid_argument("BistaticMeasurementSet: receiver dimension mismatch");
}

void SolverSettings::validate() const {
  if (restarts < 1) throw std::invalid_argument("SolverSettings: restarts must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("SolverSettings: max_iters must be >= 1");
  if (!(step_tol > 0.0) || !(grad_tol > 0.0))
    throw std::invalid_argument("SolverSettings: tolerances must be positive");
  if (!(mu_init > 0.0) || !(mu_up > 1.0) || !(mu_down > 0.0 && mu_down < 1.0))
    throw std::invalid_argument("SolverSettings: require mu_init > 0, mu_up > 1, 0 < mu_down < 1");
  if (ridge_eps < 0.0) throw std::invalid_argument("SolverSettings: ridge_eps must be >= 0");
  if (init_box_margin_m < 0.0) throw std::invalid_argument("SolverSettings: init_box_margin_m must be >= 0");
}

Vector lm_step(const Eigen::MatrixXd& jacobian, const Vector& residual, double mu) {
  const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
  const Eigen::MatrixXd a = jtj + mu * Eigen::MatrixXd::Identity(jtj.rows(), jtj.cols());
  return a.ldlt().solve(-(jacobian.transpose() * residual));
}

LmResult lm_minimize(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& x0,
                     const SolverSettings& settings) {
  LmResult res;
  res.x = x0;
  Vector r = residual(res.x);
  if (!r.allFinite()) throw std::invalid_argument("lm_minimize: non-finite residual at x0");
  res.cost = 0.5 * r.squaredNorm();
  res.cost_history.push_back(res.cost);
  double mu = settings.mu_init;

  for (int it = 0; it < settings.max_iters; ++it) {
    res.iterations = it + 1;
    const Eigen::MatrixXd j = jacobian(res.x);
    const Vector grad = j.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= settings.grad_tol) {
      res.converged = true;
      return res;
    }
    bool accepted = false;
    while (!accepted) {
      const Vector delta = lm_step(j, r, mu);
      if (delta.norm() <= settings.step_tol) {
        res.converged = true;
        return res;
      }
      const Vector x_new = res.x + delta;
      const Vector r_new = residual(x_new);
      const double cost_new = 0.5 * r_new.squaredNorm();
      if (r_new.allFinite() && cost_new < res.cost) {
        res.x = x_new;
        r = r_new;
        res.cost = cost_new;
        res.cost_history.push_back(cost_new);
        mu = std::max(mu * settings.mu_down, 1e-15);
        accepted = true;
      } else {
        mu *= settings.mu_up;
        if (mu > settings.mu_max) {
          // No descent left at any damping: numerically stationary.
          res.converged = true;
          return res;
        }
      }
    }
  }
  return res;
}

Vector trilateration_residuals(const Vector& x, const BistaticMeasurementSet& meas, bool with_bias) {
  const int d = meas.dims();
  const Vector p = x.head(d);
  const double b = with_bias ? x(d) : 0.0;
  Vector r(static_cast<Eigen::Index>(meas.size()));
  for (std::size_t m = 0; m < meas.size(); ++m)
    r(static_cast<Eigen::Index>(m)) =
        bistatic_range(p, meas.transmitter_pos, meas.receiver_positions[m]) + b - meas.ranges_m[m];
  return r;
}

Eigen::MatrixXd trilateration_jacobian(const Vector& x, const BistaticMeasurementSet& meas,
                                       bool with_bias) {
  const int d = meas.dims();
  const Vector p = x.head(d);
  Eigen::MatrixXd j(static_cast<Eigen::Index>(meas.size()), d + (with_bias ? 1 : 0));
  for (std::size_t m = 0; m < meas.size(); ++m) {
    const auto row = static_cast<Eigen::Index>(m);
    const Vector dt = p - meas.transmitter_pos;
    const Vector dr = p - meas.receiver_positions[m];
    const double nt = dt.norm();
    const double nr = dr.norm();
    // The gradient of a norm is undefined at its centre; use zero there.
    Vector g = Vector::Zero(d);
    if (nt > 0.0) g += dt / nt;
    if (nr > 0.0) g += dr / nr;
    j.row(row).head(d) = g.transpose();
    if (with_bias) j(row, d) = 1.0;
  }
  return j;
}

int required_receivers(int dims, bool with_bias) {
  if (with_bias) return dims + 1;
  return dims == 3 ? 4 : 3;
}

void check_geometry(const BistaticMeasurementSet& meas, bool with_bias) {
  meas.validate();
  const int d = meas.dims();
  const int need = required_receivers(d, with_bias);
  if (static_cast<int>(meas.size()) < need)
    throw std::invalid_argument("trilaterate: " + std::to_string(d) + "D" + (with_bias ? " with bias" : "") +
                                " needs at least " + std::to_string(need) + " receivers, got " +
                                std::to_string(meas.size()));
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(meas.size()), d);
  for (std::size_t m = 0; m < meas.size(); ++m)
    pts.row(static_cast<Eigen::Index>(m)) = meas.receiver_positions[m].transpose();
  const Eigen::RowVectorXd centre = pts.colwise().mean();
  pts.rowwise() -= centre;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(pts);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0 || s(d - 1) <= 1e-9 * s(0))
    throw std::invalid_argument(d == 2 ? "trilaterate: receivers are collinear"
                                       : "trilaterate: receivers are coplanar");
}

PositionFix trilaterate(const BistaticMeasurementSet& meas, const SolverSettings& settings,
                        bool estimate_bias) {
  settings.validate();
  check_geometry(meas, estimate_bias);
  const int d = meas.dims();

  Vector lo = meas.transmitter_pos;
  Vector hi = meas.transmitter_pos;
  for (const auto& r : meas.receiver_positions) {
    lo = lo.cwiseMin(r);
    hi = hi.cwiseMax(r);
  }
  lo.array() -= settings.init_box_margin_m;
  hi.array() += settings.init_box_margin_m;

  auto residual = [&](const Vector& x) { return trilateration_residuals(x, meas, estimate_bias); };
  auto jacobian = [&](const Vector& x) { return trilateration_jacobian(x, meas, estimate_bias); };

  PositionFix best;
  best.residual_cost = std::numeric_limits<double>::infinity();
  bool have = false;
  for (int s = 0; s < settings.restarts; ++s) {
    Rng rng(derive_seed(settings.seed, SeedStream::Solver, static_cast<std::uint64_t>(s)));
    Vector x0 = Vector::Zero(d + (estimate_bias ? 1 : 0));
    for (int i = 0; i < d; ++i) x0(i) = std::uniform_real_distribution<double>(lo(i), hi(i))(rng);
    const auto res = lm_minimize(residual, jacobian, x0, settings);
    // Prefer converged starts; among equals, the lower cost.
    const bool better = !have || (res.converged && !best.converged) ||
                        (res.converged == best.converged && res.cost < best.residual_cost);
    if (better) {
      have = true;
      best.pos = res.x.head(d);
      best.residual_cost = res.cost;
      best.converged = res.converged;
      best.iterations = res.iterations;
      best.clock_bias_s = estimate_bias ? std::optional<double>(res.x(d) / kSpeedOfLight) : std::nullopt;
    }
  }
  return best;
}

VelocityFix velocity_fix_from(const Vector& vel) {
  VelocityFix v;
  v.vel = vel;
  v.speed_mps = vel.norm();
  v.heading_deg = wrap_degrees(rad2deg(std::atan2(vel(1), vel(0))));
  return v;
}

VelocityFix estimate_velocity(const PositionFix& fix, const BistaticMeasurementSet& meas,
                              double ridge_eps) {
  meas.validate();
  if (meas.radial_velocities_mps.size() != meas.size())
    throw std::invalid_argument("estimate_velocity: radial velocities missing");
  if (ridge_eps < 0.0) throw std::invalid_argument("estimate_velocity: ridge_eps must be >= 0");
  const int d = meas.dims();
  Eigen::MatrixXd a(static_cast<Eigen::Index>(meas.size()), d);
  Vector vr(static_cast<Eigen::Index>(meas.size()));
  for (std::size_t m = 0; m < meas.size(); ++m) {
    a.row(static_cast<Eigen::Index>(m)) =
        bistatic_direction(fix.pos, meas.transmitter_pos, meas.receiver_positions[m]).transpose();
    vr(static_cast<Eigen::Index>(m)) = meas.radial_velocities_mps[m];
  }
  const Eigen::MatrixXd normal = a.transpose() * a + ridge_eps * Eigen::MatrixXd::Identity(d, d);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
  if (!lu.isInvertible())
    throw std::invalid_argument("estimate_velocity: normal matrix is singular; use ridge_eps > 0");
  return velocity_fix_from(lu.solve(a.transpose() * vr));
}

}  // namespace multiscout
