#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rscran/clustering.hpp"

using namespace rscran;
using rscran::testing::make_rs;
using rscran::testing::stats_from_d;

TEST_SUITE_BEGIN("clustering");

TEST_CASE("per-link quality is the mean antenna gain in dB") {
  Eigen::MatrixXd d(1, 2);
  d << 1.0, std::sqrt(10.0);
  for (int l = 1; l <= 3; ++l) {
    const auto stats = stats_from_d(d, l);
    CHECK(channel_quality(stats, 0, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(channel_quality(stats, 0, 1) == doctest::Approx(10.0).epsilon(1e-9));
  }
}

TEST_CASE("collective quality averages in the dB domain") {
  Eigen::MatrixXd d(1, 2);
  d << 1.0, std::pow(10.0, -0.5);  // 0 dB and -10 dB
  const auto stats = stats_from_d(d, 2);
  CHECK(collective_quality(stats, 0, {0}) == doctest::Approx(0.0));
  CHECK(collective_quality(stats, 0, {1}) == doctest::Approx(-10.0));
  CHECK(collective_quality(stats, 0, {0, 1}) == doctest::Approx(-5.0));
  CHECK_THROWS_AS((void)collective_quality(stats, 0, {}),
                  std::invalid_argument);
}

TEST_CASE("candidate clusters apply the quality window") {
  Eigen::MatrixXd d(2, 1);
  d << std::pow(10.0, -100.0 / 20.0), std::pow(10.0, -105.0 / 20.0);
  const auto stats = stats_from_d(d, 1);
  const auto rs = make_rs(1, {{0}}, {{0}});

  const auto wide = candidate_clusters(rs, stats, 10.0);
  CHECK(wide.private_bs[0] == std::vector<int>{0, 1});
  CHECK(wide.common_bs[0] == std::vector<int>{0, 1});

  const auto narrow = candidate_clusters(rs, stats, 3.0);
  CHECK(narrow.private_bs[0] == std::vector<int>{0});

  const auto argmax_only = candidate_clusters(rs, stats, 0.0);
  CHECK(argmax_only.private_bs[0] == std::vector<int>{0});
}

TEST_CASE("zero window keeps exact ties") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(3, 1, 0.25);
  const auto stats = stats_from_d(d, 2);
  const auto rs = make_rs(1, {{0}}, {{0}});
  const auto c = candidate_clusters(rs, stats, 0.0);
  CHECK(c.private_bs[0] == std::vector<int>{0, 1, 2});
}

TEST_CASE("ample caps let every stream take its whole candidate set") {
  Eigen::MatrixXd d(2, 2);
  d << 1.0, 0.5, 0.7, 0.9;
  const auto stats = stats_from_d(d, 2);
  const auto rs = make_rs(2, {{0}, {1}}, {{0, 1}, {0, 1}});
  const auto cand = candidate_clusters(rs, stats, 1000.0);
  const auto clusters = run_clustering(rs, stats, cand, {8, -1});
  CHECK(check_clusters(clusters, rs, cand, {8, -1}).empty());
  for (int g = 0; g < 2; ++g) {
    CHECK(clusters.private_bs[g] == std::vector<int>{0, 1});
    CHECK(clusters.common_bs[g] == std::vector<int>{0, 1});
  }
  CHECK(clusters.dropped.empty());
}

TEST_CASE("an overloaded BS sheds the weakest stream and retires") {
  // Two private-only singleton groups compete for one slot at the only BS.
  Eigen::MatrixXd d(1, 2);
  d << 1.0, 0.5;  // group 1's user is weaker
  const auto stats = stats_from_d(d, 1);
  const auto rs = make_rs(2, {{0}, {1}}, {{}, {}});
  const auto cand = candidate_clusters(rs, stats, 50.0);
  const ClusteringOptions opt{1, -1};
  const auto clusters = run_clustering(rs, stats, cand, opt);
  CHECK(check_clusters(clusters, rs, cand, opt).empty());
  CHECK(clusters.private_bs[0] == std::vector<int>{0});
  CHECK(clusters.private_bs[1].empty());
  REQUIRE(clusters.dropped.size() == 1);
  CHECK(clusters.dropped[0] == StreamRef{1, false});
}

TEST_CASE("overload ties drop the common stream before the private one") {
  Eigen::MatrixXd d(1, 1);
  d << 1.0;
  const auto stats = stats_from_d(d, 1);
  const auto rs = make_rs(1, {{0}}, {{0}});  // same audience for both streams
  const auto cand = candidate_clusters(rs, stats, 10.0);
  const ClusteringOptions opt{1, -1};
  const auto clusters = run_clustering(rs, stats, cand, opt);
  CHECK(clusters.private_bs[0] == std::vector<int>{0});
  CHECK(clusters.common_bs[0].empty());
  REQUIRE(clusters.dropped.size() == 1);
  CHECK(clusters.dropped[0] == StreamRef{0, true});
}

TEST_CASE("overload ties drop the higher group id first") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(1, 2, 1.0);
  const auto stats = stats_from_d(d, 1);
  const auto rs = make_rs(2, {{0}, {1}}, {{}, {}});
  const auto cand = candidate_clusters(rs, stats, 10.0);
  const auto clusters = run_clustering(rs, stats, cand, {1, -1});
  CHECK(clusters.private_bs[0] == std::vector<int>{0});
  CHECK(clusters.private_bs[1].empty());
}

TEST_CASE("an uncontended stream accumulates its whole candidate set") {
  Eigen::MatrixXd d(3, 1);
  d << 0.5, 1.0, 1.0;
  const auto stats = stats_from_d(d, 1);
  const auto rs = make_rs(1, {{0}}, {{}});
  const auto cand = candidate_clusters(rs, stats, 100.0);
  // One slot per BS but only one stream: one grab per round, three rounds.
  ClusteringOptions opt{1, -1};
  auto clusters = run_clustering(rs, stats, cand, opt);
  CHECK(clusters.private_bs[0] == std::vector<int>{0, 1, 2});
  CHECK(clusters.dropped.empty());
}

TEST_CASE("pinned network-wide stream holds a slot at every BS") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(2, 2, 1.0);
  const auto stats = stats_from_d(d, 1);
  // Entity 1 is the network-wide stream: no members, decoded by everyone.
  auto rs = make_rs(2, {{0, 1}, {}}, {{}, {0, 1}});
  const auto cand = candidate_clusters(rs, stats, 100.0);
  const ClusteringOptions opt{2, 1};
  const auto clusters = run_clustering(rs, stats, cand, opt);
  CHECK(check_clusters(clusters, rs, cand, opt).empty());
  CHECK(clusters.common_bs[1] == std::vector<int>{0, 1});
  CHECK(clusters.private_bs[0] == std::vector<int>{0, 1});
  for (int n = 0; n < 2; ++n)
    CHECK(clusters.bs_private[n].size() + clusters.bs_common[n].size() <= 2);
}

TEST_CASE("clustering invariants hold over random instances") {
  int dropped_instances = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    const int n_bs = 2 + rng.uniform_int(5);
    const int n_users = 3 + rng.uniform_int(10);
    Eigen::MatrixXd d(n_bs, n_users);
    for (int n = 0; n < n_bs; ++n)
      for (int k = 0; k < n_users; ++k)
        d(n, k) = std::pow(10.0, -1.0 - 3.0 * rng.uniform());
    const auto stats = stats_from_d(d, 2);

    std::vector<std::vector<int>> members;
    std::vector<int> owner(n_users);
    const int n_groups = 1 + rng.uniform_int(std::max(1, n_users / 2));
    members.resize(n_groups);
    for (int k = 0; k < n_users; ++k) {
      owner[k] = rng.uniform_int(n_groups);
      members[owner[k]].push_back(k);
    }
    std::vector<std::vector<int>> live_members;
    for (auto& m : members)
      if (!m.empty()) live_members.push_back(m);
    auto rs = make_rs(n_users, live_members, live_members);

    const double mu = 3.0 + 10.0 * rng.uniform();
    const auto cand = candidate_clusters(rs, stats, mu);
    const ClusteringOptions opt{1 + rng.uniform_int(6), -1};
    const auto clusters = run_clustering(rs, stats, cand, opt);
    CAPTURE(seed);
    CHECK(check_clusters(clusters, rs, cand, opt).empty());

    // Determinism: a rerun reproduces the assignment exactly.
    const auto again = run_clustering(rs, stats, cand, opt);
    CHECK(again.private_bs == clusters.private_bs);
    CHECK(again.common_bs == clusters.common_bs);
    CHECK(again.dropped == clusters.dropped);
    if (!clusters.dropped.empty()) ++dropped_instances;
  }
  // Tight caps plus narrow windows do drop streams sometimes; the property
  // suite only requires the bookkeeping to stay consistent.
  CHECK(dropped_instances < 100);
}

TEST_CASE("default-scale smoke run rarely drops streams") {
  int clean = 0;
  const int trials = 20;
  for (std::uint64_t seed = 1; seed <= trials; ++seed) {
    Rng rng(seed * 11);
    Eigen::MatrixXd d(7, 15);
    for (int n = 0; n < 7; ++n)
      for (int k = 0; k < 15; ++k)
        d(n, k) = std::pow(10.0, (-60.0 - 40.0 * rng.uniform()) / 20.0);
    const auto stats = stats_from_d(d, 2);
    std::vector<std::vector<int>> members(5);
    for (int k = 0; k < 15; ++k) members[k % 5].push_back(k);
    auto rs = make_rs(15, members, members);
    const auto cand = candidate_clusters(rs, stats, 10.0);
    const auto clusters = run_clustering(rs, stats, cand, {8, -1});
    if (clusters.dropped.empty()) ++clean;
  }
  WARN_MESSAGE(clean >= 19, "dropped streams in ", trials - clean,
               " of 20 default-scale instances");
  CHECK(clean >= 16);
}

TEST_SUITE_END();
