#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rscran {

// Conic program in inequality form:
//   minimize    c'x
//   subject to  G x + s = h,  s in K,
// where K stacks n_lin nonnegative rows followed by second-order cones of
// the listed dimensions (each >= 2, with the cone's first row holding the
// radius component). Rows of G are sparse (column, value) lists.
struct SocpProblem {
  int n = 0;
  Eigen::VectorXd c;
  std::vector<std::vector<std::pair<int, double>>> rows;
  Eigen::VectorXd h;
  int n_lin = 0;
  std::vector<int> soc_dims;

  int total_rows() const { return static_cast<int>(rows.size()); }
};

enum class SocpStatus {
  kOptimal,
  kPrimalInfeasible,
  kDualInfeasible,
  kMaxIters,
  kNumericalFailure,
};

const char* to_string(SocpStatus status);

struct SocpSettings {
  double feastol = 1e-8;
  double abstol = 1e-8;
  double reltol = 1e-8;
  // Reduced-accuracy fallback: if a step breaks down numerically or the
  // endgame stalls, the best iterate seen so far is still accepted as optimal
  // when it meets these. Near-degenerate instances (constraint coefficients
  // spanning many decades) hit a floor around 1e-4 in any IPM; callers that
  // need exact feasibility must repair the returned point.
  double feastol_relaxed = 5e-4;
  double gaptol_relaxed = 5e-4;
  // Endgame stall guard: stop once this many consecutive iterations fail to
  // improve the best iterate (step directions at their numerical floor) and
  // fall back to it.
  int stall_iters = 20;
  int max_iters = 200;
  double reg = 1e-13;  // static diagonal regularization of the normal matrix
};

struct SocpResult {
  SocpStatus status = SocpStatus::kNumericalFailure;
  Eigen::VectorXd x, s, z;  // de-homogenized; certificate for infeasible runs
  double objective = 0.0;
  int iterations = 0;
  double pres = 0.0, dres = 0.0, gap = 0.0, relgap = 0.0;
};

// Homogeneous self-dual primal-dual interior-point solve with
// Nesterov-Todd scaling and a predictor-corrector search direction.
// Deterministic: identical inputs give identical iterates.
SocpResult solve_socp(const SocpProblem& problem,
                      const SocpSettings& settings = {});

}  // namespace rscran
