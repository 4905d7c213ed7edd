#include "rscran/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace rscran {

namespace {

constexpr double kHeadroom = 0.9;      // initial per-BS power usage fraction
constexpr double kPrivateShare = 0.8;  // private share of a full stream pair

// Dominant direction of the audience-averaged covariance at one BS. A fixed
// flat start plus a final phase rotation keeps the result deterministic; for
// isotropic statistics the flat direction is returned unchanged.
Eigen::VectorXcd block_direction(const ChannelStatistics& stats, int bs,
                                 const std::vector<int>& audience) {
  const int l = stats.n_antennas;
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(l, l);
  for (int k : audience) c += stats.q_of(bs, k);
  c /= static_cast<double>(audience.size());

  Eigen::VectorXcd v =
      Eigen::VectorXcd::Constant(l, 1.0 / std::sqrt(static_cast<double>(l)));
  for (int it = 0; it < 64; ++it) {
    const Eigen::VectorXcd next = c * v;
    const double norm = next.norm();
    if (!(norm > 0.0)) return v;  // zero statistics: keep the flat direction
    v = next / norm;
  }
  int j = 0;
  for (int i = 1; i < l; ++i)
    if (std::abs(v(i)) > std::abs(v(j))) j = i;
  if (std::abs(v(j)) > 0.0) v *= std::conj(v(j)) / std::abs(v(j));
  return v;
}

bool serves(const std::vector<int>& serving, int bs) {
  return std::binary_search(serving.begin(), serving.end(), bs);
}

constexpr double kLn2 = 0.6931471805599453;

// Repair a subproblem iterate into an exactly feasible point: shrink the
// beams onto the power budgets, rebuild every stream rate from the largest
// value its surrogate rows admit at that beamformer, then shrink the rates
// onto the fronthaul caps. The returned allocation satisfies all constraints
// to floating-point accuracy whatever accuracy the subproblem reached, and
// its max-min value never flatters the iterate.
struct PolishedIterate {
  Beamformers w;
  RateAllocation rates;
};

PolishedIterate polish_iterate(const Beamformers& w_in,
                               const AuxiliaryStats& aux,
                               const ReceiverStructure& rs,
                               const ClusterAssignment& clusters,
                               const CachePlacement& placement,
                               const std::vector<MulticastGroup>& groups,
                               const SubproblemContext& ctx) {
  PolishedIterate out;
  out.w = w_in;
  const int n_bs = static_cast<int>(ctx.p_max_w.size());

  double shrink = 1.0;
  for (int n = 0; n < n_bs; ++n) {
    const double used = bs_power(out.w, n, ctx.n_antennas);
    if (used > ctx.p_max_w(n) && used > 0.0)
      shrink = std::min(shrink, std::sqrt(ctx.p_max_w(n) / used));
  }
  if (shrink < 1.0) {
    for (auto& v : out.w.private_w) v *= shrink;
    for (auto& v : out.w.common_w) v *= shrink;
  }

  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd r_p = Eigen::VectorXd::Constant(rs.n_entities, inf);
  Eigen::VectorXd r_c = Eigen::VectorXd::Constant(rs.n_entities, inf);
  for (std::size_t r = 0; r < aux.rows.size(); ++r) {
    const auto row = aux.rows[r];
    const auto& a = aux.data[r];
    std::vector<const Eigen::VectorXcd*> quads;
    for (int j = 0; j < rs.n_entities; ++j) {
      if (!row.stream.common && j == row.stream.group) continue;
      quads.push_back(&out.w.private_w[j]);
    }
    if (!row.stream.common) quads.push_back(&out.w.private_w[row.stream.group]);
    for (int l : rs.undecoded_commons(row.user))
      quads.push_back(&out.w.common_w[l]);
    const Eigen::VectorXcd* own = nullptr;
    if (row.stream.common) {
      for (int l : rs.decoded_after(row.stream.group, row.user))
        quads.push_back(&out.w.common_w[l]);
      quads.push_back(&out.w.common_w[row.stream.group]);
      own = &out.w.common_w[row.stream.group];
    } else {
      own = &out.w.private_w[row.stream.group];
    }
    double quad = 0.0;
    for (const auto* v : quads) quad += std::real((*v).dot(a.y * (*v)));
    const double margin = a.z - ctx.noise_power_w * a.t +
                          2.0 * std::real(a.f.dot(*own)) - quad;
    const double bound = std::max(0.0, margin * ctx.bandwidth_hz / kLn2);
    if (row.stream.common)
      r_c(row.stream.group) = std::min(r_c(row.stream.group), bound);
    else
      r_p(row.stream.group) = std::min(r_p(row.stream.group), bound);
  }
  for (int g = 0; g < rs.n_entities; ++g) {
    if (!std::isfinite(r_p(g))) r_p(g) = 0.0;
    if (!std::isfinite(r_c(g))) r_c(g) = 0.0;
  }
  out.rates.r_p = std::move(r_p);
  out.rates.r_c = std::move(r_c);

  double trim = 1.0;
  for (int n = 0; n < n_bs; ++n) {
    const double load =
        fronthaul_load(n, out.rates, clusters, placement, groups);
    if (load > ctx.c_max_bps(n) && load > 0.0)
      trim = std::min(trim, ctx.c_max_bps(n) / load);
  }
  if (trim < 1.0) {
    out.rates.r_p *= trim;
    out.rates.r_c *= trim;
  }

  double r_bar = inf;
  for (int g = 0; g < rs.n_entities; ++g) {
    if (!rs.private_active(g)) continue;
    const int credit = rs.common_credit[g];
    const double cap =
        out.rates.r_p(g) +
        (credit >= 0 && rs.common_active(credit) ? out.rates.r_c(credit)
                                                 : 0.0);
    r_bar = std::min(r_bar, cap);
  }
  out.rates.r_bar = std::isfinite(r_bar) ? r_bar : 0.0;
  return out;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIters: return "max_iters";
    case SolveStatus::kSubproblemFailure: return "subproblem_failure";
  }
  return "unknown";
}

Beamformers initialize(const ChannelStatistics& stats,
                       const ReceiverStructure& rs,
                       const ClusterAssignment& clusters,
                       const Eigen::VectorXd& p_max_w) {
  if (p_max_w.size() != stats.n_bs)
    throw std::invalid_argument(
        "initialize: one power budget per BS required");
  if (static_cast<int>(clusters.private_bs.size()) != rs.n_entities ||
      static_cast<int>(clusters.common_bs.size()) != rs.n_entities)
    throw std::invalid_argument("initialize: clusters/receivers disagree");

  const int l = stats.n_antennas;
  Beamformers w = zero_beamformers(rs.n_entities, stats.aggregate_dim());

  for (int n = 0; n < stats.n_bs; ++n) {
    struct Served {
      int entity;
      bool has_private;
      bool has_common;
    };
    std::vector<Served> served;
    for (int g = 0; g < rs.n_entities; ++g) {
      const bool sp =
          rs.private_active(g) && serves(clusters.private_bs[g], n);
      const bool sc = rs.common_active(g) && serves(clusters.common_bs[g], n);
      if (sp || sc) served.push_back({g, sp, sc});
    }
    if (served.empty() || !(p_max_w(n) > 0.0)) continue;
    const double slice =
        kHeadroom * p_max_w(n) / static_cast<double>(served.size());
    for (const Served& s : served) {
      const double p_target =
          s.has_private ? (s.has_common ? kPrivateShare * slice : slice) : 0.0;
      const double c_target =
          s.has_common ? (s.has_private ? (1.0 - kPrivateShare) * slice : slice)
                       : 0.0;
      if (p_target > 0.0)
        w.private_w[s.entity].segment(n * l, l) =
            std::sqrt(p_target) * block_direction(stats, n, rs.members[s.entity]);
      if (c_target > 0.0)
        w.common_w[s.entity].segment(n * l, l) =
            std::sqrt(c_target) *
            block_direction(stats, n, rs.decoders[s.entity]);
    }
  }
  return w;
}

SolveResult run_wmmse(const ChannelStatistics& stats, const SampleSet& samples,
                      const ReceiverStructure& rs,
                      const ClusterAssignment& clusters,
                      const CachePlacement& placement,
                      const std::vector<MulticastGroup>& groups,
                      const SubproblemContext& physics,
                      const SolverOptions& options,
                      const Beamformers* warm_start) {
  if (samples.m() < 1)
    throw std::invalid_argument("run_wmmse: empty sample set");

  SubproblemContext ctx = physics;
  ctx.n_antennas = stats.n_antennas;
  ctx.entity_file.assign(rs.n_entities, -1);
  for (int g = 0;
       g < rs.n_entities && g < static_cast<int>(groups.size()); ++g)
    ctx.entity_file[g] = groups[g].file;

  SolveResult res;
  res.dropped = clusters.dropped;
  res.w = warm_start ? *warm_start
                     : initialize(stats, rs, clusters, ctx.p_max_w);
  apply_support(res.w, clusters, stats.n_antennas);
  res.rates.r_p = Eigen::VectorXd::Zero(rs.n_entities);
  res.rates.r_c = Eigen::VectorXd::Zero(rs.n_entities);

  const double dip_slack = 1e-6 * std::max(ctx.bandwidth_hz, 1.0);
  int hits = 0;
  double last = 0.0;
  bool have_last = false;

  for (int it = 0; it < options.max_outer_iters; ++it) {
    const auto pass_start = std::chrono::steady_clock::now();
    auto pass = update_aux(res.w, samples, rs, ctx.noise_power_w);
    const ConicProblem problem =
        build_subproblem(pass.second, clusters, placement, rs, ctx);
    const SubproblemSolution sol = solve_subproblem(
        problem, options.subproblem_tol, options.subproblem_max_iters);
    if (sol.status != SubproblemStatus::kOptimal) {
      std::ostringstream msg;
      msg << "subproblem " << to_string(sol.status) << " at outer pass "
          << it + 1 << " (pres " << sol.pres << ", dres " << sol.dres
          << ", gap " << sol.gap << "); keeping the previous iterate. ";
      res.diagnostic += msg.str();
      res.status = SolveStatus::kSubproblemFailure;
      return res;
    }

    Beamformers cand_w = sol.w;
    apply_support(cand_w, clusters, stats.n_antennas);
    PolishedIterate cand = polish_iterate(cand_w, pass.second, rs, clusters,
                                          placement, groups, ctx);
    const double objective = cand.rates.r_bar;
    // The previous iterate stays feasible under the refreshed surrogate, so
    // its value is always attainable; a lower polished value means the
    // subproblem solve hit its accuracy floor and the step is rejected.
    if (have_last && objective < last - 1e-9 * std::max(last, 1.0)) {
      std::ostringstream msg;
      msg << "ascent floor at outer pass " << it + 1 << " (candidate "
          << objective << " below " << last
          << "); keeping the previous iterate. ";
      res.diagnostic += msg.str();
      res.status = SolveStatus::kConverged;
      return res;
    }

    res.w = std::move(cand.w);
    res.rates = std::move(cand.rates);
    res.trace.push_back(objective);
    res.iterations = it + 1;
    res.final_slack = check_feasibility(
        res.w, res.rates, pass.second, rs, clusters, placement, groups,
        ctx.p_max_w, ctx.c_max_bps, ctx.noise_power_w, ctx.bandwidth_hz,
        ctx.n_antennas);
    PassRecord rec;
    rec.objective_bps = objective;
    rec.r_p = res.rates.r_p;
    rec.r_c = res.rates.r_c;
    rec.max_violation = res.final_slack.worst();
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - pass_start)
                      .count();
    res.detail.push_back(std::move(rec));

    if (have_last) {
      if (objective < last - dip_slack) {
        std::ostringstream msg;
        msg << "objective dipped by " << last - objective << " at outer pass "
            << it + 1
            << " despite an optimal subproblem (suspected subproblem "
               "accuracy). ";
        res.diagnostic += msg.str();
      }
      const double scale = std::max({objective, last, 1e-12});
      hits =
          std::abs(objective - last) / scale < options.rel_tol ? hits + 1 : 0;
      if (hits >= options.hits_required) {
        res.status = SolveStatus::kConverged;
        return res;
      }
    }
    last = objective;
    have_last = true;
  }
  res.status = SolveStatus::kMaxIters;
  return res;
}

ReceiverStructure strip_commons(const ReceiverStructure& rs) {
  ReceiverStructure out = rs;
  for (auto& d : out.decoders) d.clear();
  for (auto& o : out.decode_order) o.clear();
  std::fill(out.common_credit.begin(), out.common_credit.end(), -1);
  out.rebuild_flags();
  return out;
}

ReceiverStructure add_network_stream(const ReceiverStructure& rs) {
  ReceiverStructure out = strip_commons(rs);
  const int super = out.n_entities;
  out.n_entities += 1;
  out.members.emplace_back();
  std::vector<int> everyone(out.n_users);
  std::iota(everyone.begin(), everyone.end(), 0);
  out.decoders.push_back(std::move(everyone));
  for (auto& order : out.decode_order) order = {super};
  for (int g = 0; g < super; ++g)
    out.common_credit[g] = out.members[g].empty() ? -1 : super;
  out.common_credit.push_back(-1);
  out.rebuild_flags();
  return out;
}

SolveResult run_scheme(Scheme scheme, const ChannelStatistics& stats,
                       const SampleSet& samples,
                       const std::vector<MulticastGroup>& groups,
                       const CachePlacement& placement,
                       const SubproblemContext& physics,
                       const StructureOptions& structure,
                       const SolverOptions& options) {
  // Interference hints for the receiver build: the private candidate windows,
  // computed on a members-only shell so the rule matches clustering exactly.
  ReceiverStructure shell;
  shell.n_entities = static_cast<int>(groups.size());
  shell.n_users = stats.n_users;
  shell.members.resize(groups.size());
  shell.decoders.resize(groups.size());
  shell.decode_order.resize(stats.n_users);
  shell.own_group.assign(stats.n_users, -1);
  shell.common_credit.assign(groups.size(), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    shell.members[g] = groups[g].members;
    for (int k : groups[g].members) shell.own_group[k] = static_cast<int>(g);
  }
  shell.rebuild_flags();
  const auto hints =
      candidate_clusters(shell, stats, structure.mu_db).private_bs;

  ReceiverStructure rs =
      build_receiver_structure(groups, stats, hints, structure.d_max_common);
  ClusteringOptions copts;
  copts.a_max_streams = structure.a_max_streams;
  switch (scheme) {
    case Scheme::kTin:
      rs = strip_commons(rs);
      break;
    case Scheme::kScmRsma:
      rs = add_network_stream(rs);
      copts.pinned_common_entity = rs.n_entities - 1;
      break;
    case Scheme::kRsCmd:
      break;
  }

  const CandidateClusters cand = candidate_clusters(rs, stats, structure.mu_db);
  const ClusterAssignment clusters = run_clustering(rs, stats, cand, copts);
  SolveResult res = run_wmmse(stats, samples, rs, clusters, placement, groups,
                              physics, options);
  res.scheme = scheme;
  return res;
}

double sample_mmf(const Beamformers& w, const ReceiverStructure& rs,
                  const SampleSet& samples, double noise_power,
                  double bandwidth_hz) {
  double mmf = std::numeric_limits<double>::infinity();
  bool any = false;
  for (int g = 0; g < rs.n_entities; ++g) {
    if (!rs.private_active(g)) continue;
    any = true;
    double rate =
        binding_rate({g, false}, w, samples, rs, noise_power, bandwidth_hz);
    const int credit = rs.common_credit[g];
    if (credit >= 0 && rs.common_active(credit))
      rate += binding_rate({credit, true}, w, samples, rs, noise_power,
                           bandwidth_hz);
    mmf = std::min(mmf, rate);
  }
  return any ? mmf : 0.0;
}

Evaluation evaluate(const Beamformers& w, const ReceiverStructure& rs,
                    const SampleSet& opt_samples,
                    const SampleSet& fresh_samples, double noise_power,
                    double bandwidth_hz) {
  Evaluation ev;
  ev.opt_mmf_bps = sample_mmf(w, rs, opt_samples, noise_power, bandwidth_hz);
  ev.eval_mmf_bps = sample_mmf(w, rs, fresh_samples, noise_power, bandwidth_hz);
  ev.gap_rel =
      (ev.opt_mmf_bps - ev.eval_mmf_bps) / std::max(ev.opt_mmf_bps, 1e-30);
  return ev;
}

}  // namespace rscran
