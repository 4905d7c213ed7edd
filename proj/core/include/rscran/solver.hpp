#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rscran/channel.hpp"
#include "rscran/clustering.hpp"
#include "rscran/conic.hpp"
#include "rscran/grouping.hpp"
#include "rscran/scenario.hpp"
#include "rscran/wmmse.hpp"

namespace rscran {

struct SolverOptions {
  // Stop after this relative objective change holds for `hits_required`
  // consecutive outer iterations.
  double rel_tol = 1e-4;
  int hits_required = 3;
  int max_outer_iters = 100;
  double subproblem_tol = 1e-7;
  int subproblem_max_iters = 200;
};

enum class SolveStatus { kConverged, kMaxIters, kSubproblemFailure };
const char* to_string(SolveStatus s);

// Everything recorded about one outer pass, for convergence-trace artifacts.
struct PassRecord {
  double objective_bps = 0.0;
  Eigen::VectorXd r_p, r_c;     // per-entity rates accepted at this pass
  double max_violation = 0.0;   // worst figure of the independent audit
  double wall_ms = 0.0;
};

struct SolveResult {
  Scheme scheme = Scheme::kRsCmd;
  SolveStatus status = SolveStatus::kSubproblemFailure;
  Beamformers w;
  RateAllocation rates;
  std::vector<double> trace;  // delivered min rate after each outer pass, bit/s
  std::vector<PassRecord> detail;      // one record per trace entry
  int iterations = 0;
  FeasibilityReport final_slack;       // audit of the last accepted iterate
  std::vector<StreamRef> dropped;      // streams clustering left unserved
  std::string diagnostic;              // failure / anomaly notes, empty if none

  double objective() const { return trace.empty() ? 0.0 : trace.back(); }
};

// Starting point: each BS spends exactly 90% of its budget, split equally
// across the entities it serves; an entity present with both of its streams
// puts 80% of its slice on the private one, 20% on the common one, and a
// lone stream takes the whole slice. Block directions follow the statistics
// (dominant eigenvector of the audience-averaged covariance, deterministic
// fixed-point iteration), so the construction consumes no randomness.
Beamformers initialize(const ChannelStatistics& stats,
                       const ReceiverStructure& rs,
                       const ClusterAssignment& clusters,
                       const Eigen::VectorXd& p_max_w);

// Alternating ascent: refresh the surrogate statistics at the current point,
// solve the convex restriction, repeat. The trace records the subproblem
// value (bit/s) per pass and is nondecreasing up to solver accuracy. A
// subproblem that fails to solve aborts the loop; the result then carries the
// last accepted iterate and a diagnostic line. physics.entity_file is derived
// from `groups` (entities beyond the list are never cacheable) and
// physics.n_antennas from `stats`; the remaining physics fields are used as
// given. When `warm_start` is null the run begins at initialize().
SolveResult run_wmmse(const ChannelStatistics& stats, const SampleSet& samples,
                      const ReceiverStructure& rs,
                      const ClusterAssignment& clusters,
                      const CachePlacement& placement,
                      const std::vector<MulticastGroup>& groups,
                      const SubproblemContext& physics,
                      const SolverOptions& options = {},
                      const Beamformers* warm_start = nullptr);

// Receiver-side scheme transforms, exposed for tests and tooling.
//
// strip_commons: every common stream removed; users decode nothing beyond
// their private stream and no rate credit remains.
ReceiverStructure strip_commons(const ReceiverStructure& rs);

// add_network_stream: per-entity commons removed and one extra entity
// appended that owns no private stream, is decoded by every user, and is
// credited toward every group's delivered rate.
ReceiverStructure add_network_stream(const ReceiverStructure& rs);

struct StructureOptions {
  double mu_db = 10.0;     // candidate window below the best collective gain
  int d_max_common = 2;    // foreign common streams decoded per user
  int a_max_streams = 8;   // per-BS stream load cap
};

// Full pipeline for one transmission scheme: receiver construction (with the
// scheme transform applied before clustering), candidate windows, load-capped
// clustering (the network-wide stream, when present, is pinned to every BS),
// initialization and the ascent loop.
SolveResult run_scheme(Scheme scheme, const ChannelStatistics& stats,
                       const SampleSet& samples,
                       const std::vector<MulticastGroup>& groups,
                       const CachePlacement& placement,
                       const SubproblemContext& physics,
                       const StructureOptions& structure = {},
                       const SolverOptions& options = {});

// Sample-average delivered min rate at fixed beamformers: for every entity
// with members, the binding private rate plus the binding rate of the
// credited common stream; the minimum over entities. Zero when no entity has
// members.
double sample_mmf(const Beamformers& w, const ReceiverStructure& rs,
                  const SampleSet& samples, double noise_power,
                  double bandwidth_hz);

// Out-of-sample check at fixed beamformers. gap_rel > 0 means the
// optimization draws were optimistic relative to the fresh draws.
struct Evaluation {
  double eval_mmf_bps = 0.0;
  double opt_mmf_bps = 0.0;
  double gap_rel = 0.0;  // (opt - eval) / max(opt, tiny)
};

Evaluation evaluate(const Beamformers& w, const ReceiverStructure& rs,
                    const SampleSet& opt_samples,
                    const SampleSet& fresh_samples, double noise_power,
                    double bandwidth_hz);

}  // namespace rscran
