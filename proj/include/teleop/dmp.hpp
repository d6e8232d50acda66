#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace teleop {

// Discrete dynamic movement primitives, one transformation system per degree of freedom:
//
//   tau * z' = alpha_z * (beta_z * (g - y) - z) + f(x)
//   tau * y' = z
//   tau * x' = -alpha_x * x
//
// with f(x) = x * (g - y0) * sum_i(psi_i(x) w_i) / sum_i(psi_i(x)) and
// psi_i(x) = exp(-h_i (x - c_i)^2).

struct DmpGains {
  double alpha_z = 25.0;
  double beta_z = 25.0 / 4.0;
  double alpha_x = 25.0 / 3.0;
};

struct DmpDof {
  std::vector<double> weights;
  std::vector<double> centers;
  std::vector<double> widths;
  double y0 = 0.0;
  double g = 0.0;

  bool operator==(const DmpDof&) const = default;
};

enum class DmpSpace { JointSpace, CartesianSpace };

struct DmpModel {
  std::vector<DmpDof> dofs;
  double tau = 0.0;
  double dt = 0.0;
  DmpGains gains;
  std::optional<std::string> object_id;
  DmpSpace space = DmpSpace::JointSpace;

  std::size_t dof_count() const { return dofs.size(); }
};

inline bool operator==(const DmpGains& a, const DmpGains& b) {
  return a.alpha_z == b.alpha_z && a.beta_z == b.beta_z && a.alpha_x == b.alpha_x;
}

inline bool operator==(const DmpModel& a, const DmpModel& b) {
  return a.dofs == b.dofs && a.tau == b.tau && a.dt == b.dt && a.gains == b.gains &&
         a.object_id == b.object_id && a.space == b.space;
}

/// Rows are samples, columns are degrees of freedom.
struct Demonstration {
  Eigen::MatrixXd positions;
  double dt = 0.0;
};

enum class WeightSolver {
  /// Joint least squares over all basis functions (default).
  GlobalLeastSquares,
  /// Independent per-basis weighted regression.
  LocallyWeighted,
};

struct FitOptions {
  std::size_t n_basis = 20;
  DmpGains gains;
  DmpSpace space = DmpSpace::JointSpace;
  WeightSolver solver = WeightSolver::GlobalLeastSquares;
};

inline constexpr double kForcingDenominatorFloor = 1e-10;
inline constexpr double kDegenerateAmplitude = 1e-8;

double canonical_phase(double t, double tau, double alpha_x);

/// Centers exp(-alpha_x * i / (N-1)); widths 1 / (c_{i+1} - c_i)^2, last repeated.
void basis_layout(std::size_t n_basis, double alpha_x, std::vector<double>& centers,
                  std::vector<double>& widths);

double forcing_term(const DmpDof& dof, double x, double scale);

/// Amplitude the forcing term is scaled by when rolling out this dof toward g_new.
/// Degenerate training amplitudes (|g - y0| < 1e-8) switch the forcing off (scale 0).
double forcing_scale(const DmpDof& dof, double y0_new, double g_new);

/// Central differences inside, one-sided at both ends.
Eigen::VectorXd finite_difference(const Eigen::VectorXd& values, double dt);

DmpModel fit(const Demonstration& demo, const FitOptions& options = {});

/// Integrates for 1.5 * tau_new; returns ceil(1.5 * tau_new / dt) + 1 rows.
Eigen::MatrixXd rollout(const DmpModel& model, std::span<const double> y0_new,
                        std::span<const double> g_new, double tau_new, double dt);

/// Rollout toward the training start/goal at the training tau and dt.
Eigen::MatrixXd reproduce(const DmpModel& model);

/// Throws DataError if the model breaks a structural invariant.
void validate_model(const DmpModel& model);

}  // namespace teleop
