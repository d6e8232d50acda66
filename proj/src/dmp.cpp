#include "teleop/dmp.hpp"

#include "teleop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace teleop {

double canonical_phase(double t, double tau, double alpha_x) {
  if (!(tau > 0.0)) throw ParameterError("canonical_phase: tau must be positive");
  if (!(alpha_x > 0.0)) throw ParameterError("canonical_phase: alpha_x must be positive");
  if (!(t >= 0.0)) throw ParameterError("canonical_phase: t must be non-negative");
  return std::exp(-alpha_x * t / tau);
}

void basis_layout(std::size_t n_basis, double alpha_x, std::vector<double>& centers,
                  std::vector<double>& widths) {
  if (n_basis < 2) throw ParameterError("basis_layout: need at least two basis functions");
  centers.resize(n_basis);
  widths.resize(n_basis);
  const double last = static_cast<double>(n_basis - 1);
  for (std::size_t i = 0; i < n_basis; ++i) {
    centers[i] = std::exp(-alpha_x * static_cast<double>(i) / last);
  }
  for (std::size_t i = 0; i + 1 < n_basis; ++i) {
    const double gap = centers[i + 1] - centers[i];
    widths[i] = 1.0 / (gap * gap);
  }
  widths[n_basis - 1] = widths[n_basis - 2];
}

namespace {

// Fills psi with the basis activations at x and returns their sum.
double activations(const DmpDof& dof, double x, double* psi) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dof.centers.size(); ++i) {
    const double d = x - dof.centers[i];
    psi[i] = std::exp(-dof.widths[i] * d * d);
    sum += psi[i];
  }
  return sum;
}

}  // namespace

double forcing_term(const DmpDof& dof, double x, double scale) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < dof.centers.size(); ++i) {
    const double d = x - dof.centers[i];
    const double psi = std::exp(-dof.widths[i] * d * d);
    num += psi * dof.weights[i];
    den += psi;
  }
  if (den < kForcingDenominatorFloor) return 0.0;
  return x * scale * num / den;
}

double forcing_scale(const DmpDof& dof, double y0_new, double g_new) {
  if (std::abs(dof.g - dof.y0) < kDegenerateAmplitude) return 0.0;
  return g_new - y0_new;
}

Eigen::VectorXd finite_difference(const Eigen::VectorXd& values, double dt) {
  const Eigen::Index n = values.size();
  Eigen::VectorXd out(n);
  if (n < 2) {
    out.setZero();
    return out;
  }
  out[0] = (values[1] - values[0]) / dt;
  out[n - 1] = (values[n - 1] - values[n - 2]) / dt;
  for (Eigen::Index i = 1; i + 1 < n; ++i) out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dt);
  return out;
}

namespace {

void validate_gains(const DmpGains& gains) {
  if (!(gains.alpha_z > 0.0) || !(gains.beta_z > 0.0) || !(gains.alpha_x > 0.0)) {
    throw ParameterError("DMP gains must be positive");
  }
}

std::vector<double> solve_weights(const Eigen::VectorXd& phase, const Eigen::VectorXd& scale,
                                  const Eigen::VectorXd& target, const DmpDof& dof,
                                  WeightSolver solver) {
  const Eigen::Index samples = phase.size();
  const auto n = static_cast<Eigen::Index>(dof.centers.size());
  Eigen::MatrixXd psi(samples, n);
  Eigen::VectorXd psi_sum(samples);
  std::vector<double> row(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < samples; ++k) {
    psi_sum[k] = activations(dof, phase[k], row.data());
    for (Eigen::Index i = 0; i < n; ++i) psi(k, i) = row[static_cast<std::size_t>(i)];
  }

  std::vector<double> weights(static_cast<std::size_t>(n), 0.0);
  if (solver == WeightSolver::LocallyWeighted) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double num = 0.0;
      double den = 0.0;
      for (Eigen::Index k = 0; k < samples; ++k) {
        num += psi(k, i) * scale[k] * target[k];
        den += psi(k, i) * scale[k] * scale[k];
      }
      weights[static_cast<std::size_t>(i)] = den > 0.0 ? num / den : 0.0;
    }
    return weights;
  }

  // Regressors are the normalized activations times the phase-scaled amplitude, so the
  // fitted f reproduces exactly what forcing_term evaluates.
  Eigen::MatrixXd design(samples, n);
  for (Eigen::Index k = 0; k < samples; ++k) {
    if (psi_sum[k] < kForcingDenominatorFloor) {
      design.row(k).setZero();
    } else {
      design.row(k) = psi.row(k) * (scale[k] / psi_sum[k]);
    }
  }
  Eigen::MatrixXd normal = design.transpose() * design;
  const double ridge = 1e-12 * std::max(normal.diagonal().mean(), 1e-300);
  normal.diagonal().array() += ridge;
  const Eigen::VectorXd w = normal.ldlt().solve(design.transpose() * target);
  for (Eigen::Index i = 0; i < n; ++i) weights[static_cast<std::size_t>(i)] = w[i];
  return weights;
}

}  // namespace

DmpModel fit(const Demonstration& demo, const FitOptions& options) {
  validate_gains(options.gains);
  if (options.n_basis < 2) throw ParameterError("fit: n_basis must be at least 2");
  if (!(demo.dt > 0.0) || !std::isfinite(demo.dt)) throw ParameterError("fit: dt must be positive");
  const Eigen::Index samples = demo.positions.rows();
  const Eigen::Index dofs = demo.positions.cols();
  if (samples < 3) throw InsufficientDataError("fit: demonstration needs at least 3 samples");
  if (dofs < 1) throw DataError("fit: demonstration has no degrees of freedom");
  if (!demo.positions.allFinite()) throw DataError("fit: demonstration contains non-finite samples");

  const DmpGains& gains = options.gains;
  DmpModel model;
  model.tau = static_cast<double>(samples - 1) * demo.dt;
  model.dt = demo.dt;
  model.gains = gains;
  model.space = options.space;

  Eigen::VectorXd phase(samples);
  for (Eigen::Index k = 0; k < samples; ++k) {
    phase[k] = canonical_phase(static_cast<double>(k) * demo.dt, model.tau, gains.alpha_x);
  }

  const double tau = model.tau;
  for (Eigen::Index d = 0; d < dofs; ++d) {
    const Eigen::VectorXd y = demo.positions.col(d);
    const Eigen::VectorXd yd = finite_difference(y, demo.dt);
    const Eigen::VectorXd ydd = finite_difference(yd, demo.dt);

    DmpDof dof;
    dof.y0 = y[0];
    dof.g = y[samples - 1];
    basis_layout(options.n_basis, gains.alpha_x, dof.centers, dof.widths);
    const double amplitude = forcing_scale(dof, dof.y0, dof.g);

    Eigen::VectorXd target(samples);
    Eigen::VectorXd scale(samples);
    for (Eigen::Index k = 0; k < samples; ++k) {
      target[k] = tau * tau * ydd[k] - gains.alpha_z * (gains.beta_z * (dof.g - y[k]) - tau * yd[k]);
      scale[k] = phase[k] * amplitude;
    }
    dof.weights = solve_weights(phase, scale, target, dof, options.solver);
    for (double w : dof.weights) {
      if (!std::isfinite(w)) throw FitError("fit: non-finite weight");
    }
    model.dofs.push_back(std::move(dof));
  }
  return model;
}

void validate_model(const DmpModel& model) {
  validate_gains(model.gains);
  if (!(model.tau > 0.0) || !(model.dt > 0.0)) throw DataError("model: tau and dt must be positive");
  if (model.dofs.empty()) throw DataError("model: no degrees of freedom");
  for (const auto& dof : model.dofs) {
    const std::size_t n = dof.centers.size();
    if (n < 2 || dof.weights.size() != n || dof.widths.size() != n) {
      throw DataError("model: basis arrays must share a length of at least 2");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(dof.weights[i])) throw DataError("model: non-finite weight");
      if (!(dof.widths[i] > 0.0)) throw DataError("model: widths must be positive");
      if (!(dof.centers[i] > 0.0 && dof.centers[i] <= 1.0)) {
        throw DataError("model: centers must lie in (0, 1]");
      }
      if (i > 0 && !(dof.centers[i] < dof.centers[i - 1])) {
        throw DataError("model: centers must be strictly decreasing");
      }
    }
    if (!std::isfinite(dof.y0) || !std::isfinite(dof.g)) throw DataError("model: non-finite y0/g");
  }
}

Eigen::MatrixXd rollout(const DmpModel& model, std::span<const double> y0_new,
                        std::span<const double> g_new, double tau_new, double dt) {
  validate_model(model);
  const std::size_t dofs = model.dofs.size();
  if (y0_new.size() != dofs || g_new.size() != dofs) {
    throw ParameterError("rollout: start/goal dimension does not match the model");
  }
  if (!(tau_new > 0.0) || !std::isfinite(tau_new)) throw ParameterError("rollout: tau must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("rollout: dt must be positive");
  for (std::size_t d = 0; d < dofs; ++d) {
    if (!std::isfinite(y0_new[d]) || !std::isfinite(g_new[d])) {
      throw ParameterError("rollout: non-finite start or goal");
    }
  }

  const auto steps = static_cast<Eigen::Index>(std::ceil(1.5 * tau_new / dt - 1e-9));
  Eigen::MatrixXd out(steps + 1, static_cast<Eigen::Index>(dofs));
  const DmpGains& k = model.gains;

  for (std::size_t d = 0; d < dofs; ++d) {
    const DmpDof& dof = model.dofs[d];
    const double g = g_new[d];
    const double scale = forcing_scale(dof, y0_new[d], g);
    double y = y0_new[d];
    double z = 0.0;
    const auto col = static_cast<Eigen::Index>(d);
    out(0, col) = y;
    for (Eigen::Index s = 0; s < steps; ++s) {
      const double x = canonical_phase(static_cast<double>(s) * dt, tau_new, k.alpha_x);
      const double f = forcing_term(dof, x, scale);
      const double z_dot = (k.alpha_z * (k.beta_z * (g - y) - z) + f) / tau_new;
      const double y_dot = z / tau_new;
      y += y_dot * dt;
      z += z_dot * dt;
      out(s + 1, col) = y;
    }
  }
  return out;
}

Eigen::MatrixXd reproduce(const DmpModel& model) {
  std::vector<double> y0;
  std::vector<double> g;
  for (const auto& dof : model.dofs) {
    y0.push_back(dof.y0);
    g.push_back(dof.g);
  }
  return rollout(model, y0, g, model.tau, model.dt);
}

}  // namespace teleop
