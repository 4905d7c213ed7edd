#include "rscran/channel.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace rscran {

double path_loss_db(double distance_m, double min_distance_m) {
  const double d_km = std::max(distance_m, min_distance_m) / 1000.0;
  return 148.1 + 37.6 * std::log10(d_km);
}

ChannelStatistics build_statistics(const Scenario& scenario, Rng rng) {
  const auto& c = scenario.config;
  const int n_bs = c.n_bs;
  const int n_users = c.n_users;
  const int l = c.n_antennas;

  ChannelStatistics stats;
  stats.n_bs = n_bs;
  stats.n_users = n_users;
  stats.n_antennas = l;
  stats.large_scale.resize(n_bs, n_users);
  stats.q.resize(static_cast<std::size_t>(n_bs) * n_users);
  stats.q_chol.resize(stats.q.size());

  const double gain_lin = std::pow(10.0, c.channel.antenna_gain_db / 10.0);
  for (int n = 0; n < n_bs; ++n) {
    for (int k = 0; k < n_users; ++k) {
      const double dist =
          (scenario.bs_xy.row(n) - scenario.user_xy.row(k)).norm();
      const double pl_db = path_loss_db(dist, c.channel.min_distance_m);
      Rng link = rng.fork(rng_tag::kShadowing, static_cast<std::uint64_t>(n),
                          static_cast<std::uint64_t>(k));
      const double shadow_db = c.channel.shadow_sigma_db * link.normal();
      const double shadow_lin = std::pow(10.0, shadow_db / 10.0);
      const double d =
          std::pow(10.0, -pl_db / 20.0) * std::sqrt(gain_lin * shadow_lin);
      stats.large_scale(n, k) = d;
      const std::size_t idx = static_cast<std::size_t>(n) * n_users + k;
      stats.q[idx] = d * d * Eigen::MatrixXcd::Identity(l, l);
      stats.q_chol[idx] = d * Eigen::MatrixXcd::Identity(l, l);
    }
  }
  return stats;
}

SampleSet draw_samples(const ChannelStatistics& stats, int m_samples,
                       CsitMode mode, Rng rng) {
  if (m_samples < 1)
    throw std::invalid_argument("draw_samples: m_samples must be >= 1");
  const int m = mode == CsitMode::kFull ? 1 : m_samples;
  const int l = stats.n_antennas;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  SampleSet set;
  set.mode = mode;
  set.h.resize(m);
  Eigen::VectorXcd e(l);
  for (int s = 0; s < m; ++s)
    set.h[s].resize(stats.aggregate_dim(), stats.n_users);
  for (int k = 0; k < stats.n_users; ++k) {
    for (int s = 0; s < m; ++s) {
      Rng draw = rng.fork(rng_tag::kSample, static_cast<std::uint64_t>(k),
                          static_cast<std::uint64_t>(s));
      for (int n = 0; n < stats.n_bs; ++n) {
        for (int a = 0; a < l; ++a) {
          const double re = draw.normal();
          const double im = draw.normal();
          e(a) = std::complex<double>(re * inv_sqrt2, im * inv_sqrt2);
        }
        set.h[s].block(n * l, k, l, 1) = stats.chol_of(n, k) * e;
      }
    }
  }
  return set;
}

void dump_channels(const ChannelStatistics& stats, const SampleSet& samples,
                   std::ostream& out) {
  out << "sample,user,bs";
  for (int a = 0; a < stats.n_antennas; ++a)
    out << ",re" << a << ",im" << a;
  out << "\n";
  out.precision(17);
  for (int s = 0; s < samples.m(); ++s) {
    for (int k = 0; k < stats.n_users; ++k) {
      for (int n = 0; n < stats.n_bs; ++n) {
        out << s << ',' << k << ',' << n;
        for (int a = 0; a < stats.n_antennas; ++a) {
          const auto v = samples.h[s](n * stats.n_antennas + a, k);
          out << ',' << v.real() << ',' << v.imag();
        }
        out << "\n";
      }
    }
  }
}

}  // namespace rscran
