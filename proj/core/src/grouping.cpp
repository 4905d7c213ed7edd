#include "rscran/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rscran {

std::vector<int> ReceiverStructure::undecoded_commons(int k) const {
  std::vector<int> out;
  for (int g = 0; g < n_entities; ++g)
    if (common_active(g) && !decodes(k, g)) out.push_back(g);
  return out;
}

std::vector<int> ReceiverStructure::decoded_after(int g, int k) const {
  const auto& order = decode_order[k];
  auto it = std::find(order.begin(), order.end(), g);
  if (it == order.end())
    throw std::invalid_argument("decoded_after: user does not decode group " +
                                std::to_string(g));
  return {it + 1, order.end()};
}

std::vector<int> ReceiverStructure::decoded_before(int g, int k) const {
  const auto& order = decode_order[k];
  auto it = std::find(order.begin(), order.end(), g);
  if (it == order.end())
    throw std::invalid_argument("decoded_before: user does not decode group " +
                                std::to_string(g));
  return {order.begin(), it};
}

void ReceiverStructure::rebuild_flags() {
  decode_flag_.assign(static_cast<std::size_t>(n_users) * n_entities, 0);
  for (int g = 0; g < n_entities; ++g)
    for (int k : decoders[g]) decode_flag_[flag_index(k, g)] = 1;
}

Eigen::VectorXd zipf_popularity(int n_files, double exponent) {
  if (n_files < 1)
    throw std::invalid_argument("zipf_popularity: n_files must be >= 1");
  Eigen::VectorXd p(n_files);
  for (int f = 0; f < n_files; ++f)
    p(f) = std::pow(static_cast<double>(f + 1), -exponent);
  p /= p.sum();
  return p;
}

DemandProfile draw_requests(const Eigen::VectorXd& popularity, int n_users,
                            Rng rng) {
  DemandProfile d;
  d.popularity = popularity;
  d.requests.resize(n_users);
  Eigen::VectorXd cdf(popularity.size());
  double acc = 0.0;
  for (int f = 0; f < popularity.size(); ++f) {
    acc += popularity(f);
    cdf(f) = acc;
  }
  cdf(popularity.size() - 1) = 1.0;  // absorb rounding in the last bin
  for (int k = 0; k < n_users; ++k) {
    Rng r = rng.fork(rng_tag::kRequest, static_cast<std::uint64_t>(k));
    const double u = r.uniform();
    int f = 0;
    while (u >= cdf(f)) ++f;
    d.requests[k] = f;
  }
  return d;
}

std::vector<MulticastGroup> form_groups(const std::vector<int>& requests,
                                        GroupMode mode) {
  std::vector<MulticastGroup> groups;
  if (mode == GroupMode::kGroupPerUser) {
    groups.resize(requests.size());
    for (std::size_t k = 0; k < requests.size(); ++k) {
      groups[k].file = requests[k];
      groups[k].members = {static_cast<int>(k)};
    }
    return groups;
  }
  std::map<int, std::vector<int>> by_file;  // ordered by file id
  for (std::size_t k = 0; k < requests.size(); ++k)
    by_file[requests[k]].push_back(static_cast<int>(k));
  for (auto& [file, members] : by_file)
    groups.push_back({file, std::move(members)});
  return groups;
}

double interferer_strength(int g, int k, const ChannelStatistics& stats,
                           const std::vector<int>& candidate_cluster) {
  if (candidate_cluster.empty())
    throw std::invalid_argument("interferer_strength: empty candidate cluster");
  (void)g;
  double acc = 0.0;
  for (int n : candidate_cluster) {
    const double mean_gain = stats.q_of(n, k).real().trace() / stats.n_antennas;
    acc += 10.0 * std::log10(mean_gain);
  }
  return acc / static_cast<double>(candidate_cluster.size());
}

ReceiverStructure build_receiver_structure(
    const std::vector<MulticastGroup>& groups, const ChannelStatistics& stats,
    const std::vector<std::vector<int>>& cluster_hints, int d_max_common) {
  const int n_groups = static_cast<int>(groups.size());
  if (cluster_hints.size() != groups.size())
    throw std::invalid_argument(
        "build_receiver_structure: one cluster hint per group required");

  ReceiverStructure rs;
  rs.n_entities = n_groups;
  rs.n_users = stats.n_users;
  rs.members.resize(n_groups);
  rs.decoders.resize(n_groups);
  rs.decode_order.resize(stats.n_users);
  rs.own_group.assign(stats.n_users, -1);
  rs.common_credit.resize(n_groups);
  for (int g = 0; g < n_groups; ++g) {
    rs.members[g] = groups[g].members;
    rs.common_credit[g] = g;
    for (int k : groups[g].members) {
      if (rs.own_group[k] != -1)
        throw std::invalid_argument(
            "build_receiver_structure: user in two groups");
      rs.own_group[k] = g;
    }
  }

  for (int k = 0; k < stats.n_users; ++k) {
    const int own = rs.own_group[k];
    if (own < 0)
      throw std::invalid_argument(
          "build_receiver_structure: user without a group");
    struct Foreign {
      int g;
      double strength_db;
    };
    std::vector<Foreign> foreign;
    for (int g = 0; g < n_groups; ++g) {
      if (g == own) continue;
      foreign.push_back({g, interferer_strength(g, k, stats, cluster_hints[g])});
    }
    // Selection: strongest first, ties to the lower group id.
    std::sort(foreign.begin(), foreign.end(), [](const Foreign& a, const Foreign& b) {
      if (a.strength_db != b.strength_db) return a.strength_db > b.strength_db;
      return a.g < b.g;
    });
    const int take = std::min<int>(d_max_common, static_cast<int>(foreign.size()));
    std::vector<Foreign> picked(foreign.begin(), foreign.begin() + take);
    // Decode order: ascending strength, strongest foreign last, own last
    // overall. Equal strengths put the lower group id first.
    std::sort(picked.begin(), picked.end(), [](const Foreign& a, const Foreign& b) {
      if (a.strength_db != b.strength_db) return a.strength_db < b.strength_db;
      return a.g < b.g;
    });
    auto& order = rs.decode_order[k];
    for (const auto& f : picked) order.push_back(f.g);
    order.push_back(own);
    for (int g : order) rs.decoders[g].push_back(k);
  }
  for (auto& m : rs.decoders) std::sort(m.begin(), m.end());
  rs.rebuild_flags();
  return rs;
}

std::vector<std::string> check_receiver(const ReceiverStructure& rs) {
  std::vector<std::string> v;
  std::vector<int> group_of(rs.n_users, -1);
  for (int g = 0; g < rs.n_entities; ++g) {
    for (int k : rs.members[g]) {
      if (k < 0 || k >= rs.n_users) {
        v.push_back("group " + std::to_string(g) + " member out of range");
        continue;
      }
      if (group_of[k] != -1)
        v.push_back("user " + std::to_string(k) + " in two groups");
      group_of[k] = g;
    }
    // Members must decode their own common stream whenever it exists.
    if (rs.common_active(g)) {
      for (int k : rs.members[g])
        if (!rs.decodes(k, g))
          v.push_back("user " + std::to_string(k) +
                      " does not decode own common stream");
    }
  }
  for (int k = 0; k < rs.n_users; ++k) {
    if (group_of[k] != rs.own_group[k])
      v.push_back("own_group mismatch for user " + std::to_string(k));
    const auto& order = rs.decode_order[k];
    std::vector<int> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      v.push_back("decode order of user " + std::to_string(k) +
                  " repeats a group");
    for (int g : order) {
      if (g < 0 || g >= rs.n_entities || !rs.decodes(k, g))
        v.push_back("decode order of user " + std::to_string(k) +
                    " disagrees with decoder sets");
    }
    // The final decoded common must be the own group's (or the credited
    // entity when the own group has no common stream).
    const int own = rs.own_group[k];
    if (!order.empty() && own >= 0) {
      const int expect = rs.common_active(own) ? own : rs.common_credit[own];
      if (expect >= 0 && order.back() != expect)
        v.push_back("user " + std::to_string(k) +
                    " does not decode its own common stream last");
    }
  }
  for (int g = 0; g < rs.n_entities; ++g) {
    for (int k : rs.decoders[g]) {
      const auto& order = rs.decode_order[k];
      if (std::find(order.begin(), order.end(), g) == order.end())
        v.push_back("decoder set of group " + std::to_string(g) +
                    " disagrees with decode order of user " +
                    std::to_string(k));
    }
  }
  return v;
}

}  // namespace rscran
