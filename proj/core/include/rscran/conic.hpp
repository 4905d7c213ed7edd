#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rscran/clustering.hpp"
#include "rscran/grouping.hpp"
#include "rscran/scenario.hpp"
#include "rscran/socp.hpp"
#include "rscran/wmmse.hpp"

namespace rscran {

// Static data the convex subproblem needs beyond the auxiliary statistics.
struct SubproblemContext {
  double bandwidth_hz = 1.0;
  double noise_power_w = 1.0;
  Eigen::VectorXd p_max_w;    // per-BS transmit budget, watts
  Eigen::VectorXd c_max_bps;  // per-BS fronthaul capacity
  int n_antennas = 1;
  // Delivered file id per entity; -1 marks never-cacheable content whose
  // traffic always rides the fronthaul.
  std::vector<int> entity_file;
  double psd_floor = 1e-10;   // eigenvalues in [-floor, 0) clamp to zero
  // Capacities at or above this are treated as uncapped (row omitted).
  double fronthaul_uncapped_bps = 1e17;
};

// Where each decision variable lives in the stacked real vector. Beamformer
// blocks hold the supported entries of one stream, ordered by serving BS
// ascending, antenna ascending, with re/im interleaved. Index -1 = absent
// (zero support or a rate pinned to zero by presolve).
struct VariableMap {
  int n_bs = 0;
  int n_antennas = 1;
  std::vector<int> private_start, common_start;      // per entity
  std::vector<std::vector<int>> private_sup, common_sup;  // serving BSs used
  int r_bar = -1;
  std::vector<int> r_private, r_common;  // per entity
  int n_vars = 0;
};

struct ConicProblem {
  SocpProblem socp;  // minimizes -R_bar over the stacked variables
  VariableMap vars;
  double bandwidth_hz = 1.0;        // rate variables are rates / bandwidth
  std::vector<std::string> row_label;  // per constraint row, for diagnostics
};

enum class SubproblemStatus { kOptimal, kInfeasible, kMaxIters,
                              kNumericalFailure };
const char* to_string(SubproblemStatus status);

struct SubproblemSolution {
  SubproblemStatus status = SubproblemStatus::kNumericalFailure;
  Beamformers w;
  RateAllocation rates;   // bit/s, de-normalized
  double objective = 0.0; // delivered min rate, bit/s
  int iterations = 0;
  double pres = 0.0, dres = 0.0, gap = 0.0;
};

// Assembles the max-min rate subproblem at the given auxiliary statistics:
// maximize R_bar subject to, per group, R_bar <= private rate (+ credited
// common rate); per stream and decoding user, the quadratic achievability
// row; per BS, a power cone and a fronthaul row over uncached traffic; and
// nonnegativity of every rate. Quadratic rows are cone-encoded through an
// eigenfactorization of the sample-average outer-product matrix.
//
// Presolve: BSs with no transmit budget contribute no variables; a zero
// fronthaul capacity pins the rates of the uncached streams it would carry
// to zero; capacities >= fronthaul_uncapped_bps drop the row.
//
// Throws std::invalid_argument on inconsistent dimensions and
// std::runtime_error naming the offending stream/user row when an
// outer-product matrix is indefinite beyond psd_floor.
ConicProblem build_subproblem(const AuxiliaryStats& aux,
                              const ClusterAssignment& clusters,
                              const CachePlacement& placement,
                              const ReceiverStructure& rs,
                              const SubproblemContext& ctx);

// Interior-point solve of the assembled problem; deterministic. On
// max_iters the best iterate found is returned.
SubproblemSolution solve_subproblem(const ConicProblem& problem,
                                    double tol = 1e-7, int max_iters = 200);

// Plain-text cone-program interchange:
//   socp v1
//   n <vars> lin <rows> socs <count>
//   dims <d1> ... <dk>          (omitted when no cones)
//   c <n values>
//   h <m values>
//   G <nnz> then one "row col value" line each
// '#' starts a comment; values use round-trippable precision.
void dump_problem(const ConicProblem& problem, std::ostream& out);
SocpProblem parse_socp(std::istream& in);

}  // namespace rscran
