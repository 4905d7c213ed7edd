#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "rscran/rng.hpp"
#include "rscran/scenario.hpp"

namespace rscran {

// Second-order channel state: per-link large-scale amplitude D_{n,k} and the
// per-link antenna covariance Q_{n,k}. With isotropic small-scale fading
// Q = D^2 I, but the container carries a general PSD matrix per link.
struct ChannelStatistics {
  int n_bs = 0;
  int n_users = 0;
  int n_antennas = 0;
  Eigen::MatrixXd large_scale;             // n_bs x n_users, D_{n,k}
  std::vector<Eigen::MatrixXcd> q;         // per link, L x L
  std::vector<Eigen::MatrixXcd> q_chol;    // lower Cholesky factor per link

  const Eigen::MatrixXcd& q_of(int n, int k) const {
    return q[static_cast<std::size_t>(n) * n_users + k];
  }
  const Eigen::MatrixXcd& chol_of(int n, int k) const {
    return q_chol[static_cast<std::size_t>(n) * n_users + k];
  }
  int aggregate_dim() const { return n_bs * n_antennas; }
};

// Monte-Carlo channel draws. h[m] is the (n_bs*L) x n_users matrix of
// aggregate user channels for sample m; user k's block for BS n occupies rows
// [n*L, (n+1)*L).
struct SampleSet {
  CsitMode mode = CsitMode::kStatistical;
  std::vector<Eigen::MatrixXcd> h;
  int m() const { return static_cast<int>(h.size()); }
};

// 148.1 + 37.6 log10(d_km), with d clamped below at min_distance_m.
double path_loss_db(double distance_m, double min_distance_m);

// Builds D and Q from geometry, log-normal shadowing (one independent draw
// per link) and a flat antenna gain. Deterministic in (scenario, rng).
ChannelStatistics build_statistics(const Scenario& scenario, Rng rng);

// Draws m_samples i.i.d. realizations h_{n,k} = chol(Q_{n,k}) e, e ~ CN(0,I).
// Full CSIT collapses to a single draw that stands for the true channel.
SampleSet draw_samples(const ChannelStatistics& stats, int m_samples,
                       CsitMode mode, Rng rng);

// One row per (sample, user, BS) link; antenna entries interleaved re/im.
void dump_channels(const ChannelStatistics& stats, const SampleSet& samples,
                   std::ostream& out);

}  // namespace rscran
