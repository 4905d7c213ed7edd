#include "rscran/wmmse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rscran {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double gain2(const Eigen::VectorXcd& h, const Eigen::VectorXcd& v) {
  return std::norm(h.dot(v));  // |h^H v|^2 (Eigen conjugates the left side)
}

}  // namespace

Beamformers zero_beamformers(int n_entities, int aggregate_dim) {
  Beamformers w;
  w.private_w.assign(n_entities, Eigen::VectorXcd::Zero(aggregate_dim));
  w.common_w.assign(n_entities, Eigen::VectorXcd::Zero(aggregate_dim));
  return w;
}

void apply_support(Beamformers& w, const ClusterAssignment& clusters,
                   int n_antennas) {
  const int dim = w.aggregate_dim();
  const int n_bs = dim / std::max(1, n_antennas);
  const auto mask = [&](Eigen::VectorXcd& v, const std::vector<int>& served) {
    std::vector<char> keep(n_bs, 0);
    for (int n : served) keep[n] = 1;
    for (int n = 0; n < n_bs; ++n)
      if (!keep[n]) v.segment(n * n_antennas, n_antennas).setZero();
  };
  for (int g = 0; g < w.n_entities(); ++g) {
    mask(w.private_w[g], clusters.private_bs[g]);
    mask(w.common_w[g], clusters.common_bs[g]);
  }
}

double bs_power(const Beamformers& w, int bs, int n_antennas) {
  double p = 0.0;
  for (int g = 0; g < w.n_entities(); ++g) {
    p += w.private_w[g].segment(bs * n_antennas, n_antennas).squaredNorm();
    p += w.common_w[g].segment(bs * n_antennas, n_antennas).squaredNorm();
  }
  return p;
}

PowerTerms power_terms(const Eigen::VectorXcd& h_k, int user, StreamRef stream,
                       const Beamformers& w, const ReceiverStructure& rs,
                       double noise_power) {
  PowerTerms out;
  double interference = noise_power;
  if (!stream.common) {
    for (int j = 0; j < rs.n_entities; ++j)
      if (j != stream.group) interference += gain2(h_k, w.private_w[j]);
    for (int l : rs.undecoded_commons(user))
      interference += gain2(h_k, w.common_w[l]);
    out.interference = interference;
    out.total = interference + gain2(h_k, w.private_w[stream.group]);
  } else {
    if (!rs.decodes(user, stream.group))
      throw std::invalid_argument(
          "power_terms: user does not decode the requested common stream");
    for (int j = 0; j < rs.n_entities; ++j)
      interference += gain2(h_k, w.private_w[j]);
    for (int l : rs.undecoded_commons(user))
      interference += gain2(h_k, w.common_w[l]);
    for (int l : rs.decoded_after(stream.group, user))
      interference += gain2(h_k, w.common_w[l]);
    out.interference = interference;
    out.total = interference + gain2(h_k, w.common_w[stream.group]);
  }
  return out;
}

double sinr(const Eigen::VectorXcd& h_k, int user, StreamRef stream,
            const Beamformers& w, const ReceiverStructure& rs,
            double noise_power) {
  const auto p = power_terms(h_k, user, stream, w, rs, noise_power);
  return (p.total - p.interference) / p.interference;
}

std::complex<double> mmse_receiver(const Eigen::VectorXcd& h_k, int user,
                                   StreamRef stream, const Beamformers& w,
                                   const ReceiverStructure& rs,
                                   double noise_power) {
  const auto p = power_terms(h_k, user, stream, w, rs, noise_power);
  const Eigen::VectorXcd& own =
      stream.common ? w.common_w[stream.group] : w.private_w[stream.group];
  return std::conj(h_k.dot(own)) / p.total;
}

double mse(const Eigen::VectorXcd& h_k, int user, StreamRef stream,
           const Beamformers& w, const ReceiverStructure& rs,
           double noise_power, std::complex<double> u) {
  const auto p = power_terms(h_k, user, stream, w, rs, noise_power);
  const Eigen::VectorXcd& own =
      stream.common ? w.common_w[stream.group] : w.private_w[stream.group];
  return std::norm(u) * p.total - 2.0 * std::real(u * h_k.dot(own)) + 1.0;
}

double optimal_weight(double e_mmse) {
  if (!(e_mmse > 0.0))
    throw std::invalid_argument("optimal_weight: mse must be positive");
  return 1.0 / e_mmse;
}

std::pair<double, double> rate_identity_check(const Eigen::VectorXcd& h_k,
                                              int user, StreamRef stream,
                                              const Beamformers& w,
                                              const ReceiverStructure& rs,
                                              double noise_power) {
  const double gamma = sinr(h_k, user, stream, w, rs, noise_power);
  const auto u = mmse_receiver(h_k, user, stream, w, rs, noise_power);
  const double e = mse(h_k, user, stream, w, rs, noise_power, u);
  const double rho = optimal_weight(e);
  const double lhs = std::log1p(gamma) / kLn2;
  const double rhs = (std::log(rho) - rho * e + 1.0) / kLn2;
  return {lhs, rhs};
}

Eigen::VectorXd sample_average_rate(StreamRef stream, const Beamformers& w,
                                    const SampleSet& samples,
                                    const ReceiverStructure& rs,
                                    double noise_power, double bandwidth_hz) {
  const auto& listeners =
      stream.common ? rs.decoders[stream.group] : rs.members[stream.group];
  Eigen::VectorXd rates = Eigen::VectorXd::Zero(listeners.size());
  const int m_total = samples.m();
  for (std::size_t i = 0; i < listeners.size(); ++i) {
    const int k = listeners[i];
    double acc = 0.0;
    for (int m = 0; m < m_total; ++m) {
      const double gamma =
          sinr(samples.h[m].col(k), k, stream, w, rs, noise_power);
      acc += std::log1p(gamma) / kLn2;
    }
    rates(i) = bandwidth_hz * acc / m_total;
  }
  return rates;
}

double binding_rate(StreamRef stream, const Beamformers& w,
                    const SampleSet& samples, const ReceiverStructure& rs,
                    double noise_power, double bandwidth_hz) {
  const auto rates =
      sample_average_rate(stream, w, samples, rs, noise_power, bandwidth_hz);
  return rates.size() == 0 ? 0.0 : rates.minCoeff();
}

std::vector<StreamRow> enumerate_rows(const ReceiverStructure& rs) {
  std::vector<StreamRow> rows;
  for (int g = 0; g < rs.n_entities; ++g)
    for (int k : rs.members[g]) rows.push_back({{g, false}, k});
  for (int g = 0; g < rs.n_entities; ++g)
    for (int k : rs.decoders[g]) rows.push_back({{g, true}, k});
  return rows;
}

std::pair<WmmseState, AuxiliaryStats> update_aux(const Beamformers& w,
                                                 const SampleSet& samples,
                                                 const ReceiverStructure& rs,
                                                 double noise_power) {
  const int dim = w.aggregate_dim();
  const int m_total = samples.m();
  AuxiliaryStats aux;
  aux.rows = enumerate_rows(rs);
  aux.private_row = Eigen::MatrixXi::Constant(rs.n_entities, rs.n_users, -1);
  aux.common_row = Eigen::MatrixXi::Constant(rs.n_entities, rs.n_users, -1);
  aux.data.resize(aux.rows.size());

  WmmseState state;
  state.u = Eigen::MatrixXcd::Zero(aux.rows.size(), m_total);
  state.rho = Eigen::MatrixXd::Zero(aux.rows.size(), m_total);

  constexpr int kChunk = 64;  // fixed-order blocks keep reductions stable
  for (std::size_t r = 0; r < aux.rows.size(); ++r) {
    const auto row = aux.rows[r];
    (row.stream.common ? aux.common_row : aux.private_row)(row.stream.group,
                                                           row.user) =
        static_cast<int>(r);
    const Eigen::VectorXcd& own = row.stream.common
                                      ? w.common_w[row.stream.group]
                                      : w.private_w[row.stream.group];
    AuxRow acc;
    acc.f = Eigen::VectorXcd::Zero(dim);
    acc.y = Eigen::MatrixXcd::Zero(dim, dim);
    for (int base = 0; base < m_total; base += kChunk) {
      const int stop = std::min(base + kChunk, m_total);
      double t = 0.0, z = 0.0;
      Eigen::VectorXcd f = Eigen::VectorXcd::Zero(dim);
      Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(dim, dim);
      for (int m = base; m < stop; ++m) {
        const Eigen::VectorXcd h = samples.h[m].col(row.user);
        const auto p = power_terms(h, row.user, row.stream, w, rs, noise_power);
        const std::complex<double> u = std::conj(h.dot(own)) / p.total;
        const double e = p.interference / p.total;
        const double rho = 1.0 / e;
        state.u(r, m) = u;
        state.rho(r, m) = rho;
        const double tu = rho * std::norm(u);
        t += tu;
        z += 1.0 - rho + std::log(rho);
        f += rho * std::conj(u) * h;
        y.noalias() += tu * (h * h.adjoint());
      }
      acc.t += t;
      acc.z += z;
      acc.f += f;
      acc.y += y;
    }
    acc.t /= m_total;
    acc.z /= m_total;
    acc.f /= m_total;
    acc.y /= m_total;
    aux.data[r] = std::move(acc);
  }
  return {std::move(state), std::move(aux)};
}

double fronthaul_load(int bs, const RateAllocation& rates,
                      const ClusterAssignment& clusters,
                      const CachePlacement& placement,
                      const std::vector<MulticastGroup>& groups) {
  const auto file_of = [&](int g) {
    return g < static_cast<int>(groups.size()) ? groups[g].file : -1;
  };
  double load = 0.0;
  for (int g : clusters.bs_private[bs])
    load += (1.0 - placement.coeff(file_of(g), bs)) * rates.r_p(g);
  for (int g : clusters.bs_common[bs])
    load += (1.0 - placement.coeff(file_of(g), bs)) * rates.r_c(g);
  return load;
}

PowerStages received_power_oracle(int user, const Eigen::VectorXcd& h_k,
                                  const Beamformers& w,
                                  const ReceiverStructure& rs,
                                  double noise_power, int n_symbols, Rng rng) {
  PowerStages out;
  for (int g : rs.decode_order[user]) out.stage.push_back({g, true});
  const int own = rs.own_group[user];
  if (own >= 0) out.stage.push_back({own, false});

  for (const auto s : out.stage)
    out.analytic.push_back(power_terms(h_k, user, s, w, rs, noise_power).total);

  // Complex gains of every transmitted stream at this user.
  std::vector<std::complex<double>> gp(rs.n_entities), gc(rs.n_entities);
  for (int g = 0; g < rs.n_entities; ++g) {
    gp[g] = h_k.dot(w.private_w[g]);
    gc[g] = h_k.dot(w.common_w[g]);
  }

  const std::size_t n_stages = out.stage.size();
  std::vector<double> sum(n_stages, 0.0), sumsq(n_stages, 0.0);
  const double noise_amp = std::sqrt(noise_power / 2.0);
  std::vector<std::complex<double>> sp(rs.n_entities), sc(rs.n_entities);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int t = 0; t < n_symbols; ++t) {
    std::complex<double> y{noise_amp * rng.normal(), noise_amp * rng.normal()};
    for (int g = 0; g < rs.n_entities; ++g) {
      sp[g] = {rng.normal() * inv_sqrt2, rng.normal() * inv_sqrt2};
      sc[g] = {rng.normal() * inv_sqrt2, rng.normal() * inv_sqrt2};
      y += gp[g] * sp[g] + gc[g] * sc[g];
    }
    for (std::size_t i = 0; i < n_stages; ++i) {
      const double p = std::norm(y);
      sum[i] += p;
      sumsq[i] += p * p;
      if (out.stage[i].common) y -= gc[out.stage[i].group] * sc[out.stage[i].group];
    }
  }
  for (std::size_t i = 0; i < n_stages; ++i) {
    const double mean = sum[i] / n_symbols;
    const double var =
        std::max(0.0, sumsq[i] / n_symbols - mean * mean) /
        std::max(1, n_symbols - 1) * n_symbols;
    out.empirical.push_back(mean);
    out.std_error.push_back(std::sqrt(var / n_symbols));
  }
  return out;
}

double FeasibilityReport::worst() const {
  return std::max({power, fronthaul, quadratic, rate_link, support});
}

FeasibilityReport check_feasibility(
    const Beamformers& w, const RateAllocation& rates,
    const AuxiliaryStats& aux, const ReceiverStructure& rs,
    const ClusterAssignment& clusters, const CachePlacement& placement,
    const std::vector<MulticastGroup>& groups, const Eigen::VectorXd& p_max_w,
    const Eigen::VectorXd& c_max_bps, double noise_power, double bandwidth_hz,
    int n_antennas) {
  FeasibilityReport rep;
  const int n_bs = static_cast<int>(p_max_w.size());

  for (int n = 0; n < n_bs; ++n) {
    const double p = bs_power(w, n, n_antennas);
    rep.power = std::max(
        rep.power, (p - p_max_w(n)) / std::max(1.0, std::abs(p_max_w(n))));
    const double load = fronthaul_load(n, rates, clusters, placement, groups);
    rep.fronthaul =
        std::max(rep.fronthaul,
                 (load - c_max_bps(n)) / std::max(1.0, std::abs(c_max_bps(n))));
  }
  rep.power = std::max(rep.power, 0.0);
  rep.fronthaul = std::max(rep.fronthaul, 0.0);

  // Off-cluster leakage.
  for (int g = 0; g < rs.n_entities; ++g) {
    const auto leak = [&](const Eigen::VectorXcd& v,
                          const std::vector<int>& served) {
      std::vector<char> keep(n_bs, 0);
      for (int n : served) keep[n] = 1;
      for (int n = 0; n < n_bs; ++n)
        if (!keep[n])
          rep.support = std::max(
              rep.support,
              v.segment(n * n_antennas, n_antennas).cwiseAbs().maxCoeff());
    };
    leak(w.private_w[g], clusters.private_bs[g]);
    leak(w.common_w[g], clusters.common_bs[g]);
  }

  // Surrogate rows in plain arithmetic.
  for (std::size_t r = 0; r < aux.rows.size(); ++r) {
    const auto row = aux.rows[r];
    const auto& a = aux.data[r];
    std::vector<const Eigen::VectorXcd*> quads;
    for (int j = 0; j < rs.n_entities; ++j) {
      if (!row.stream.common && j == row.stream.group) continue;
      quads.push_back(&w.private_w[j]);
    }
    if (!row.stream.common) quads.push_back(&w.private_w[row.stream.group]);
    for (int l : rs.undecoded_commons(row.user)) quads.push_back(&w.common_w[l]);
    double rate = 0.0;
    const Eigen::VectorXcd* own = nullptr;
    if (row.stream.common) {
      for (int l : rs.decoded_after(row.stream.group, row.user))
        quads.push_back(&w.common_w[l]);
      quads.push_back(&w.common_w[row.stream.group]);
      own = &w.common_w[row.stream.group];
      rate = rates.r_c(row.stream.group);
    } else {
      own = &w.private_w[row.stream.group];
      rate = rates.r_p(row.stream.group);
    }

    double lhs = 0.0, scale = 1.0;
    for (const auto* v : quads) {
      const double q = std::real((*v).dot(a.y * (*v)));
      lhs += q;
      scale += std::abs(q);
    }
    const double lin = -2.0 * std::real(a.f.dot(*own));
    const double rate_term = kLn2 / bandwidth_hz * rate;
    const double noise_term = noise_power * a.t;
    lhs += lin + rate_term + noise_term - a.z;
    scale += std::abs(lin) + std::abs(rate_term) + noise_term + std::abs(a.z);
    rep.quadratic = std::max(rep.quadratic, lhs / scale);
  }
  rep.quadratic = std::max(rep.quadratic, 0.0);

  // Rate linking and sign constraints.
  double link = 0.0;
  for (int g = 0; g < rs.n_entities; ++g) {
    if (!rs.private_active(g)) continue;
    const int credit = rs.common_credit[g];
    const double cap =
        rates.r_p(g) +
        (credit >= 0 && rs.common_active(credit) ? rates.r_c(credit) : 0.0);
    link = std::max(link, (rates.r_bar - cap) / std::max(1.0, std::abs(cap)));
  }
  for (int g = 0; g < rs.n_entities; ++g) {
    link = std::max(link, -rates.r_p(g));
    link = std::max(link, -rates.r_c(g));
  }
  link = std::max(link, -rates.r_bar);
  rep.rate_link = std::max(link, 0.0);
  return rep;
}

}  // namespace rscran
