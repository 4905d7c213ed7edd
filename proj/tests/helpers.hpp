#pragma once

#include <utility>
#include <vector>

#include "rscran/channel.hpp"
#include "rscran/clustering.hpp"
#include "rscran/grouping.hpp"

namespace rscran::testing {

// Statistics with Q = D^2 I built from an explicit large-scale matrix.
inline ChannelStatistics stats_from_d(const Eigen::MatrixXd& d, int l) {
  ChannelStatistics s;
  s.n_bs = static_cast<int>(d.rows());
  s.n_users = static_cast<int>(d.cols());
  s.n_antennas = l;
  s.large_scale = d;
  s.q.resize(static_cast<std::size_t>(s.n_bs) * s.n_users);
  s.q_chol.resize(s.q.size());
  for (int n = 0; n < s.n_bs; ++n) {
    for (int k = 0; k < s.n_users; ++k) {
      const std::size_t i = static_cast<std::size_t>(n) * s.n_users + k;
      s.q[i] = d(n, k) * d(n, k) * Eigen::MatrixXcd::Identity(l, l);
      s.q_chol[i] = d(n, k) * Eigen::MatrixXcd::Identity(l, l);
    }
  }
  return s;
}

// Receiver structure assembled by hand. When no explicit decode order is
// given, each user decodes its set in ascending entity id with the own
// common moved last.
inline ReceiverStructure make_rs(int n_users,
                                 std::vector<std::vector<int>> members,
                                 std::vector<std::vector<int>> decoders,
                                 std::vector<std::vector<int>> order = {}) {
  ReceiverStructure rs;
  rs.n_entities = static_cast<int>(members.size());
  rs.n_users = n_users;
  rs.members = std::move(members);
  rs.decoders = std::move(decoders);
  rs.own_group.assign(n_users, -1);
  rs.common_credit.assign(rs.n_entities, -1);
  for (int g = 0; g < rs.n_entities; ++g) {
    rs.common_credit[g] = g;
    for (int k : rs.members[g]) rs.own_group[k] = g;
  }
  if (!order.empty()) {
    rs.decode_order = std::move(order);
  } else {
    rs.decode_order.resize(n_users);
    for (int g = 0; g < rs.n_entities; ++g)
      for (int k : rs.decoders[g]) rs.decode_order[k].push_back(g);
    for (int k = 0; k < n_users; ++k) {
      auto& ord = rs.decode_order[k];
      const int own = rs.own_group[k];
      auto it = std::find(ord.begin(), ord.end(), own);
      if (it != ord.end()) {
        ord.erase(it);
        ord.push_back(own);
      }
    }
  }
  rs.rebuild_flags();
  return rs;
}

// Every active stream served by every BS.
inline ClusterAssignment full_clusters(const ReceiverStructure& rs, int n_bs) {
  ClusterAssignment c;
  c.private_bs.resize(rs.n_entities);
  c.common_bs.resize(rs.n_entities);
  c.bs_private.resize(n_bs);
  c.bs_common.resize(n_bs);
  std::vector<int> all(n_bs);
  for (int n = 0; n < n_bs; ++n) all[n] = n;
  for (int g = 0; g < rs.n_entities; ++g) {
    if (rs.private_active(g)) {
      c.private_bs[g] = all;
      for (int n : all) c.bs_private[n].push_back(g);
    }
    if (rs.common_active(g)) {
      c.common_bs[g] = all;
      for (int n : all) c.bs_common[n].push_back(g);
    }
  }
  return c;
}

}  // namespace rscran::testing
