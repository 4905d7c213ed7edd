#include "rscran/solver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rscran/channel.hpp"
#include "rscran/clustering.hpp"
#include "rscran/conic.hpp"
#include "rscran/grouping.hpp"
#include "rscran/rng.hpp"
#include "rscran/wmmse.hpp"
#include "helpers.hpp"

using namespace rscran;
using namespace rscran::testing;

namespace {

SubproblemContext make_ctx(int n_bs, double b, double noise, double p,
                           double c, int l) {
  SubproblemContext ctx;
  ctx.bandwidth_hz = b;
  ctx.noise_power_w = noise;
  ctx.p_max_w = Eigen::VectorXd::Constant(n_bs, p);
  ctx.c_max_bps = Eigen::VectorXd::Constant(n_bs, c);
  ctx.n_antennas = l;
  return ctx;
}

CachePlacement uniform_placement(int n_files, int n_bs, int value) {
  CachePlacement p;
  p.has_file = Eigen::MatrixXi::Constant(n_files, n_bs, value);
  return p;
}

Eigen::MatrixXd random_gains(Rng rng, int n_bs, int n_users, double lo,
                             double hi) {
  Eigen::MatrixXd d(n_bs, n_users);
  for (int n = 0; n < n_bs; ++n)
    for (int k = 0; k < n_users; ++k) d(n, k) = lo + (hi - lo) * rng.uniform();
  return d;
}

double block_power(const Eigen::VectorXcd& w, int bs, int l) {
  return w.segment(bs * l, l).squaredNorm();
}

void require_monotone(const std::vector<double>& trace, double slack) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] >= trace[i - 1] - slack);
}

}  // namespace

TEST_SUITE_BEGIN("solver");

TEST_CASE("initialization splits headroom power across served entities") {
  Eigen::MatrixXd d(2, 2);
  d << 1.0, 0.8, 0.6, 1.2;
  const int l = 2;
  const auto stats = stats_from_d(d, l);
  const auto rs = make_rs(2, {{0}, {1}}, {{0, 1}, {0, 1}});

  // Hand-built partial clusters: BS0 carries entity 0's full pair, BS1
  // carries entity 0's common plus entity 1's pair.
  ClusterAssignment clusters;
  clusters.private_bs = {{0}, {1}};
  clusters.common_bs = {{0, 1}, {1}};
  clusters.bs_private = {{0}, {1}};
  clusters.bs_common = {{0}, {0, 1}};

  Eigen::VectorXd p_max(2);
  p_max << 2.0, 3.0;

  const Beamformers w = initialize(stats, rs, clusters, p_max);
  REQUIRE(w.n_entities() == 2);
  REQUIRE(w.aggregate_dim() == 4);

  // Exactly 90% of each budget is spent.
  CHECK(bs_power(w, 0, l) == doctest::Approx(0.9 * 2.0).epsilon(1e-12));
  CHECK(bs_power(w, 1, l) == doctest::Approx(0.9 * 3.0).epsilon(1e-12));

  // BS0 serves one entity with both streams: 80/20 split of the full slice.
  CHECK(block_power(w.private_w[0], 0, l) ==
        doctest::Approx(0.8 * 0.9 * 2.0).epsilon(1e-12));
  CHECK(block_power(w.common_w[0], 0, l) ==
        doctest::Approx(0.2 * 0.9 * 2.0).epsilon(1e-12));

  // BS1 serves two entities; entity 0 appears with its common stream only and
  // takes its whole slice, entity 1 splits its slice 80/20.
  CHECK(block_power(w.common_w[0], 1, l) ==
        doctest::Approx(0.45 * 3.0).epsilon(1e-12));
  CHECK(block_power(w.private_w[1], 1, l) ==
        doctest::Approx(0.8 * 0.45 * 3.0).epsilon(1e-12));
  CHECK(block_power(w.common_w[1], 1, l) ==
        doctest::Approx(0.2 * 0.45 * 3.0).epsilon(1e-12));

  // Blocks outside the serving cluster stay zero.
  CHECK(block_power(w.private_w[0], 1, l) == 0.0);
  CHECK(block_power(w.private_w[1], 0, l) == 0.0);
  CHECK(block_power(w.common_w[1], 0, l) == 0.0);

  // Isotropic statistics give equal-entry, real, nonnegative directions.
  for (const auto& vec : {w.private_w[0], w.common_w[0], w.common_w[1]}) {
    for (int n = 0; n < 2; ++n) {
      const Eigen::VectorXcd blk = vec.segment(n * l, l);
      if (blk.norm() == 0.0) continue;
      CHECK(std::abs(blk(0) - blk(1)) < 1e-12);
      CHECK(std::abs(blk(0).imag()) < 1e-12);
      CHECK(blk(0).real() > 0.0);
    }
  }

  // Deterministic: a second call reproduces the same vectors bit for bit.
  const Beamformers w2 = initialize(stats, rs, clusters, p_max);
  for (int g = 0; g < 2; ++g) {
    CHECK(w.private_w[g] == w2.private_w[g]);
    CHECK(w.common_w[g] == w2.common_w[g]);
  }
}

TEST_CASE("common-free receivers initialize with zero common precoders") {
  Eigen::MatrixXd d(2, 4);
  d << 1.0, 0.9, 0.5, 0.4, 0.4, 0.5, 1.1, 0.9;
  const auto stats = stats_from_d(d, 2);
  const auto rs_full = make_rs(4, {{0, 1}, {2, 3}}, {{0, 1, 2, 3}, {0, 1, 2, 3}});

  const ReceiverStructure rs = strip_commons(rs_full);
  CHECK(rs.n_entities == 2);
  for (int g = 0; g < 2; ++g) {
    CHECK(rs.decoders[g].empty());
    CHECK(rs.common_credit[g] == -1);
    CHECK(rs.members[g] == rs_full.members[g]);
  }
  for (int k = 0; k < 4; ++k) CHECK(rs.decode_order[k].empty());
  CHECK(check_receiver(rs).empty());

  const auto clusters = full_clusters(rs, 2);
  Eigen::VectorXd p_max = Eigen::VectorXd::Constant(2, 2.0);
  const Beamformers w = initialize(stats, rs, clusters, p_max);
  for (int g = 0; g < 2; ++g) CHECK(w.common_w[g].norm() == 0.0);
  // Two private-only entities per BS: each takes half of the 90% headroom.
  CHECK(bs_power(w, 0, 2) == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(block_power(w.private_w[0], 0, 2) ==
        doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("single-user link converges to the matched-filter rate") {
  const int l = 3;
  const double b = 5e6, noise = 0.31, p = 2.2;
  const auto stats = stats_from_d(Eigen::MatrixXd::Constant(1, 1, 1.3), l);
  const auto samples = draw_samples(stats, 1, CsitMode::kFull, Rng(7));
  const auto rs = make_rs(1, {{0}}, {{}});
  const auto clusters = full_clusters(rs, 1);
  const std::vector<MulticastGroup> groups = {{0, {0}}};
  const auto placement = uniform_placement(1, 1, 1);
  const auto ctx = make_ctx(1, b, noise, p, 1e18, l);

  const SolveResult res =
      run_wmmse(stats, samples, rs, clusters, placement, groups, ctx);
  REQUIRE(res.status == SolveStatus::kConverged);
  REQUIRE(!res.trace.empty());
  CHECK(res.iterations == static_cast<int>(res.trace.size()));
  CHECK(res.trace.back() == res.objective());
  require_monotone(res.trace, 1e-6 * b);

  const Eigen::VectorXcd h = samples.h[0].col(0);
  const double closed_form = b * std::log2(1.0 + p * h.squaredNorm() / noise);
  CHECK(std::abs(res.objective() - closed_form) < 1e-4 * closed_form);

  CHECK(res.final_slack.worst() < 1e-6);
  CHECK(bs_power(res.w, 0, l) == doctest::Approx(p).epsilon(1e-4));
  CHECK(res.rates.r_bar == res.objective());
  CHECK(res.dropped.empty());

  // One pass record per trace entry, each auditing clean.
  REQUIRE(res.detail.size() == res.trace.size());
  for (std::size_t i = 0; i < res.detail.size(); ++i) {
    CHECK(res.detail[i].objective_bps == res.trace[i]);
    CHECK(res.detail[i].max_violation < 1e-6);
    CHECK(res.detail[i].r_p.size() == 1);
    CHECK(res.detail[i].wall_ms >= 0.0);
  }

  // Same-sample evaluation reproduces the optimized value with zero gap.
  const Evaluation ev = evaluate(res.w, rs, samples, samples, noise, b);
  CHECK(ev.gap_rel == 0.0);
  CHECK(ev.eval_mmf_bps == ev.opt_mmf_bps);
  CHECK(std::abs(ev.eval_mmf_bps - res.objective()) < 1e-4 * closed_form);
}

TEST_CASE("zero transmit budget collapses to a zero-rate fixed point") {
  const auto stats = stats_from_d(Eigen::MatrixXd::Constant(1, 2, 1.0), 2);
  const auto samples = draw_samples(stats, 3, CsitMode::kStatistical, Rng(3));
  const auto rs = make_rs(2, {{0, 1}}, {{0, 1}});
  const auto clusters = full_clusters(rs, 1);
  const std::vector<MulticastGroup> groups = {{0, {0, 1}}};
  const auto placement = uniform_placement(1, 1, 0);
  const auto ctx = make_ctx(1, 1.0, 0.5, 0.0, 10.0, 2);

  const SolveResult res =
      run_wmmse(stats, samples, rs, clusters, placement, groups, ctx);
  REQUIRE(res.status == SolveStatus::kConverged);
  CHECK(res.iterations <= 10);
  for (double v : res.trace) CHECK(std::abs(v) < 1e-6);
  CHECK(res.w.private_w[0].norm() == 0.0);
  CHECK(res.w.common_w[0].norm() == 0.0);
  CHECK(std::abs(res.rates.r_bar) < 1e-6);

  CHECK(sample_mmf(res.w, rs, samples, 0.5, 1.0) == 0.0);
  const Evaluation ev = evaluate(res.w, rs, samples, samples, 0.5, 1.0);
  CHECK(ev.eval_mmf_bps == 0.0);
  CHECK(ev.gap_rel == 0.0);
}

TEST_CASE("ascent traces are monotone and final points pass the audit") {
  const int n_bs = 2, n_users = 4, l = 2, m = 8;
  const auto rs = make_rs(n_users, {{0, 1}, {2, 3}},
                          {{0, 1, 2, 3}, {0, 1, 2, 3}});
  int converged = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(900 + trial);
    const auto d = random_gains(rng.fork(1), n_bs, n_users, 0.5, 1.5);
    const auto stats = stats_from_d(d, l);
    const auto samples =
        draw_samples(stats, m, CsitMode::kStatistical, rng.fork(2));
    const auto clusters = full_clusters(rs, n_bs);
    const std::vector<MulticastGroup> groups = {{0, {0, 1}}, {1, {2, 3}}};
    CachePlacement placement;
    placement.has_file = Eigen::MatrixXi::Zero(2, n_bs);
    for (int f = 0; f < 2; ++f)
      for (int n = 0; n < n_bs; ++n)
        placement.has_file(f, n) = rng.fork(3, f, n).uniform() < 0.5 ? 1 : 0;
    const auto ctx = make_ctx(n_bs, 1.0, 0.4, 1.5, 3.5, l);

    const SolveResult res =
        run_wmmse(stats, samples, rs, clusters, placement, groups, ctx);
    REQUIRE(res.status != SolveStatus::kSubproblemFailure);
    if (res.status == SolveStatus::kConverged) ++converged;
    REQUIRE(!res.trace.empty());
    require_monotone(res.trace, 1e-6);
    CHECK(res.final_slack.worst() < 1e-6);
    CHECK(res.objective() > 0.0);
  }
  CHECK(converged >= 8);
}

TEST_CASE("interference-decoding pipeline equals the hand-stripped pipeline") {
  const int n_bs = 2, n_users = 4, l = 2;
  Rng rng(41);
  const auto d = random_gains(rng.fork(1), n_bs, n_users, 0.4, 1.4);
  const auto stats = stats_from_d(d, l);
  const auto samples =
      draw_samples(stats, 6, CsitMode::kStatistical, rng.fork(2));
  const std::vector<MulticastGroup> groups = {{0, {0, 1}}, {1, {2, 3}}};
  CachePlacement placement;
  placement.has_file = Eigen::MatrixXi::Zero(2, n_bs);
  placement.has_file(0, 0) = 1;
  placement.has_file(1, 1) = 1;
  const auto ctx = make_ctx(n_bs, 1.0, 0.3, 1.2, 4.0, l);
  const StructureOptions so{20.0, 1, 8};

  const SolveResult via_scheme = run_scheme(Scheme::kTin, stats, samples,
                                            groups, placement, ctx, so);
  CHECK(via_scheme.scheme == Scheme::kTin);
  REQUIRE(via_scheme.status != SolveStatus::kSubproblemFailure);

  // Hand-built route: hints from members-only candidates, full receiver
  // build, strip, cluster, solve.
  auto rs_seed = make_rs(n_users, {{0, 1}, {2, 3}}, {{}, {}});
  const auto hints = candidate_clusters(rs_seed, stats, so.mu_db).private_bs;
  const auto rs_tin = strip_commons(
      build_receiver_structure(groups, stats, hints, so.d_max_common));
  const auto cand = candidate_clusters(rs_tin, stats, so.mu_db);
  const auto clusters =
      run_clustering(rs_tin, stats, cand, {so.a_max_streams, -1});
  const SolveResult by_hand =
      run_wmmse(stats, samples, rs_tin, clusters, placement, groups, ctx);

  REQUIRE(via_scheme.trace.size() == by_hand.trace.size());
  for (std::size_t i = 0; i < by_hand.trace.size(); ++i)
    CHECK(via_scheme.trace[i] == by_hand.trace[i]);
  for (int g = 0; g < 2; ++g) {
    CHECK(via_scheme.w.private_w[g] == by_hand.w.private_w[g]);
    CHECK(via_scheme.w.common_w[g].norm() == 0.0);
    CHECK(via_scheme.rates.r_c(g) == 0.0);
  }
}

TEST_CASE("single group: network-wide stream equals the per-group route") {
  const int n_bs = 2, n_users = 3, l = 2;
  Rng rng(52);
  const auto d = random_gains(rng.fork(1), n_bs, n_users, 0.6, 1.3);
  const auto stats = stats_from_d(d, l);
  const auto samples =
      draw_samples(stats, 5, CsitMode::kStatistical, rng.fork(2));
  const std::vector<MulticastGroup> groups = {{0, {0, 1, 2}}};
  const auto placement = uniform_placement(1, n_bs, 0);
  const auto ctx = make_ctx(n_bs, 1.0, 0.4, 1.5, 3.0, l);

  const auto rs_cmd = make_rs(n_users, {{0, 1, 2}}, {{0, 1, 2}});
  const ReceiverStructure rs_scm = add_network_stream(rs_cmd);
  REQUIRE(rs_scm.n_entities == 2);
  CHECK(rs_scm.members[1].empty());
  CHECK(rs_scm.decoders[0].empty());
  CHECK(rs_scm.decoders[1] == std::vector<int>{0, 1, 2});
  CHECK(rs_scm.common_credit[0] == 1);
  CHECK(rs_scm.common_credit[1] == -1);
  for (int k = 0; k < n_users; ++k)
    CHECK(rs_scm.decode_order[k] == std::vector<int>{1});
  CHECK(check_receiver(rs_scm).empty());

  const auto clusters_cmd = full_clusters(rs_cmd, n_bs);
  const auto clusters_scm = full_clusters(rs_scm, n_bs);

  // Identical starting points: the per-group common block becomes the
  // network-wide block.
  const Beamformers w0_cmd =
      initialize(stats, rs_cmd, clusters_cmd, ctx.p_max_w);
  Beamformers w0_scm = zero_beamformers(2, n_bs * l);
  w0_scm.private_w[0] = w0_cmd.private_w[0];
  w0_scm.common_w[1] = w0_cmd.common_w[0];

  const SolveResult res_cmd = run_wmmse(stats, samples, rs_cmd, clusters_cmd,
                                        placement, groups, ctx, {}, &w0_cmd);
  const SolveResult res_scm = run_wmmse(stats, samples, rs_scm, clusters_scm,
                                        placement, groups, ctx, {}, &w0_scm);
  REQUIRE(res_cmd.status == SolveStatus::kConverged);
  REQUIRE(res_scm.status == SolveStatus::kConverged);
  REQUIRE(res_cmd.trace.size() == res_scm.trace.size());
  for (std::size_t i = 0; i < res_cmd.trace.size(); ++i)
    CHECK(res_scm.trace[i] ==
          doctest::Approx(res_cmd.trace[i]).epsilon(1e-12));
  CHECK(res_scm.w.private_w[0].isApprox(res_cmd.w.private_w[0], 1e-9));
  CHECK(res_scm.w.common_w[1].isApprox(res_cmd.w.common_w[0], 1e-9));
}

TEST_CASE("warm start from a converged common-free point is never worse") {
  const int n_bs = 2, n_users = 4, l = 2;
  Rng rng(63);
  const auto d = random_gains(rng.fork(1), n_bs, n_users, 0.5, 1.2);
  const auto stats = stats_from_d(d, l);
  const auto samples =
      draw_samples(stats, 6, CsitMode::kStatistical, rng.fork(2));
  const auto rs_cmd = make_rs(n_users, {{0, 1}, {2, 3}},
                              {{0, 1, 2, 3}, {0, 1, 2, 3}});
  const ReceiverStructure rs_tin = strip_commons(rs_cmd);
  const std::vector<MulticastGroup> groups = {{0, {0, 1}}, {1, {2, 3}}};
  const auto placement = uniform_placement(2, n_bs, 0);
  const auto ctx = make_ctx(n_bs, 1.0, 0.35, 1.2, 4.0, l);

  const SolveResult res_tin = run_wmmse(stats, samples, rs_tin,
                                        full_clusters(rs_tin, n_bs), placement,
                                        groups, ctx);
  REQUIRE(res_tin.status == SolveStatus::kConverged);

  const SolveResult res_rs = run_wmmse(stats, samples, rs_cmd,
                                       full_clusters(rs_cmd, n_bs), placement,
                                       groups, ctx, {}, &res_tin.w);
  REQUIRE(res_rs.status != SolveStatus::kSubproblemFailure);
  CHECK(res_rs.objective() >= res_tin.objective() - 1e-6);
  require_monotone(res_rs.trace, 1e-6);
}

TEST_CASE("scheme pipeline respects load caps and reports dropped streams") {
  const int n_bs = 3, n_users = 5, l = 2;
  Rng rng(77);
  const auto d = random_gains(rng.fork(1), n_bs, n_users, 0.3, 1.5);
  const auto stats = stats_from_d(d, l);
  const auto samples =
      draw_samples(stats, 4, CsitMode::kStatistical, rng.fork(2));
  const std::vector<int> requests = {0, 0, 1, 1, 0};
  const auto groups = form_groups(requests, GroupMode::kGroupPerFile);
  REQUIRE(groups.size() == 2);
  CachePlacement placement;
  placement.has_file = Eigen::MatrixXi::Zero(2, n_bs);
  placement.has_file(0, 1) = 1;
  const auto ctx = make_ctx(n_bs, 1.0, 0.4, 1.0, 2.5, l);
  const StructureOptions so{25.0, 1, 2};

  for (const Scheme scheme :
       {Scheme::kRsCmd, Scheme::kTin, Scheme::kScmRsma}) {
    const SolveResult res =
        run_scheme(scheme, stats, samples, groups, placement, ctx, so);
    CHECK(res.scheme == scheme);
    REQUIRE(res.status != SolveStatus::kSubproblemFailure);
    require_monotone(res.trace, 1e-6);
    CHECK(res.final_slack.worst() < 1e-6);
    CHECK(res.objective() >= 0.0);
    if (scheme == Scheme::kTin) {
      for (int g = 0; g < res.w.n_entities(); ++g)
        CHECK(res.w.common_w[g].norm() == 0.0);
    }
    if (scheme == Scheme::kScmRsma) {
      // The network-wide entity rides along: one extra entity, no private.
      CHECK(res.w.n_entities() == 3);
      CHECK(res.w.private_w[2].norm() == 0.0);
    }
  }
}

TEST_CASE("fresh-sample evaluation reports a sane optimism gap") {
  const int n_bs = 2, n_users = 4, l = 2;
  Rng rng(88);
  const auto d = random_gains(rng.fork(1), n_bs, n_users, 0.5, 1.4);
  const auto stats = stats_from_d(d, l);
  const auto opt_samples =
      draw_samples(stats, 8, CsitMode::kStatistical, rng.fork(2));
  const auto rs = make_rs(n_users, {{0, 1}, {2, 3}},
                          {{0, 1, 2, 3}, {0, 1, 2, 3}});
  const auto clusters = full_clusters(rs, n_bs);
  const std::vector<MulticastGroup> groups = {{0, {0, 1}}, {1, {2, 3}}};
  const auto placement = uniform_placement(2, n_bs, 1);
  const auto ctx = make_ctx(n_bs, 1.0, 0.4, 1.5, 1e18, l);

  const SolveResult res =
      run_wmmse(stats, opt_samples, rs, clusters, placement, groups, ctx);
  REQUIRE(res.status != SolveStatus::kSubproblemFailure);

  const auto fresh =
      draw_samples(stats, 64, CsitMode::kStatistical, rng.fork(3));
  const Evaluation ev = evaluate(res.w, rs, opt_samples, fresh, 0.4, 1.0);
  CHECK(ev.opt_mmf_bps == sample_mmf(res.w, rs, opt_samples, 0.4, 1.0));
  CHECK(ev.eval_mmf_bps == sample_mmf(res.w, rs, fresh, 0.4, 1.0));
  CHECK(ev.eval_mmf_bps > 0.0);
  CHECK(std::abs(ev.gap_rel) < 0.5);
  CHECK(ev.gap_rel ==
        (ev.opt_mmf_bps - ev.eval_mmf_bps) / std::max(ev.opt_mmf_bps, 1e-30));

  // With ample fronthaul the converged surrogate value matches the
  // sample-average value at the final point.
  CHECK(std::abs(ev.opt_mmf_bps - res.objective()) <
        1e-3 * std::max(1.0, res.objective()));
}

TEST_SUITE_END();
