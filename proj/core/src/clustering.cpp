#include "rscran/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rscran {

double channel_quality(const ChannelStatistics& stats, int n, int k) {
  const double mean_gain = stats.q_of(n, k).real().trace() / stats.n_antennas;
  return 10.0 * std::log10(mean_gain);
}

double collective_quality(const ChannelStatistics& stats, int n,
                          const std::vector<int>& users) {
  if (users.empty())
    throw std::invalid_argument("collective_quality: empty user set");
  double acc = 0.0;
  for (int k : users) acc += channel_quality(stats, n, k);
  return acc / static_cast<double>(users.size());
}

namespace {

std::vector<int> within_window(const ChannelStatistics& stats,
                               const std::vector<int>& audience,
                               double mu_db) {
  std::vector<double> q(stats.n_bs);
  double best = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < stats.n_bs; ++n) {
    q[n] = collective_quality(stats, n, audience);
    best = std::max(best, q[n]);
  }
  std::vector<int> out;
  for (int n = 0; n < stats.n_bs; ++n)
    if (q[n] >= best - mu_db) out.push_back(n);
  return out;
}

}  // namespace

CandidateClusters candidate_clusters(const ReceiverStructure& rs,
                                     const ChannelStatistics& stats,
                                     double mu_db) {
  CandidateClusters c;
  c.private_bs.resize(rs.n_entities);
  c.common_bs.resize(rs.n_entities);
  for (int g = 0; g < rs.n_entities; ++g) {
    if (rs.private_active(g))
      c.private_bs[g] = within_window(stats, rs.members[g], mu_db);
    if (rs.common_active(g))
      c.common_bs[g] = within_window(stats, rs.decoders[g], mu_db);
  }
  return c;
}

namespace {

struct StreamState {
  StreamRef ref;
  std::vector<int> candidates;  // remaining candidate BSs, strongest first
  std::vector<double> audience_quality;  // per BS, for overload ranking
  bool live = true;
};

}  // namespace

ClusterAssignment run_clustering(const ReceiverStructure& rs,
                                 const ChannelStatistics& stats,
                                 const CandidateClusters& candidates,
                                 const ClusteringOptions& options) {
  const int n_bs = stats.n_bs;
  ClusterAssignment out;
  out.private_bs.resize(rs.n_entities);
  out.common_bs.resize(rs.n_entities);
  out.bs_private.resize(n_bs);
  out.bs_common.resize(n_bs);

  // Stream roster in group-major order, private before common.
  std::vector<StreamState> streams;
  for (int g = 0; g < rs.n_entities; ++g) {
    for (int pass = 0; pass < 2; ++pass) {
      const bool common = pass == 1;
      if (common && g == options.pinned_common_entity) continue;
      if (!common && !rs.private_active(g)) continue;
      if (common && !rs.common_active(g)) continue;
      StreamState s;
      s.ref = {g, common};
      const auto& audience = common ? rs.decoders[g] : rs.members[g];
      s.audience_quality.resize(n_bs);
      for (int n = 0; n < n_bs; ++n)
        s.audience_quality[n] = collective_quality(stats, n, audience);
      s.candidates =
          common ? candidates.common_bs[g] : candidates.private_bs[g];
      // Strongest candidate first; equal quality breaks to the lower BS id.
      std::stable_sort(s.candidates.begin(), s.candidates.end(),
                       [&](int a, int b) {
                         return s.audience_quality[a] > s.audience_quality[b];
                       });
      streams.push_back(std::move(s));
    }
  }

  std::vector<char> bs_active(n_bs, 1);
  int capacity = options.a_max_streams;
  if (options.pinned_common_entity >= 0) {
    // The pinned network-wide stream occupies one slot everywhere.
    for (int n = 0; n < n_bs; ++n) {
      out.bs_common[n].push_back(options.pinned_common_entity);
      out.common_bs[options.pinned_common_entity].push_back(n);
    }
    capacity -= 1;
  }

  auto assigned_of = [&](const StreamRef& ref) -> std::vector<int>& {
    return ref.common ? out.common_bs[ref.group] : out.private_bs[ref.group];
  };
  auto bs_list_of = [&](const StreamRef& ref, int n) -> std::vector<int>& {
    return ref.common ? out.bs_common[n] : out.bs_private[n];
  };

  int live_streams = static_cast<int>(streams.size());
  int active_bs = n_bs;
  while (live_streams > 0 && active_bs > 0) {
    // Assignment pass: every live stream grabs its strongest remaining
    // candidate; exhausted streams leave the roster.
    for (auto& s : streams) {
      if (!s.live) continue;
      while (!s.candidates.empty() && !bs_active[s.candidates.front()])
        s.candidates.erase(s.candidates.begin());
      if (s.candidates.empty()) {
        s.live = false;
        --live_streams;
        continue;
      }
      const int n = s.candidates.front();
      s.candidates.erase(s.candidates.begin());
      assigned_of(s.ref).push_back(n);
      bs_list_of(s.ref, n).push_back(s.ref.group);
    }
    // Overload pass: a BS past its cap sheds the weakest streams (by its
    // collective quality toward the stream audience; ties drop the higher
    // group id, common before private) and retires.
    for (int n = 0; n < n_bs; ++n) {
      if (!bs_active[n]) continue;
      const int load = static_cast<int>(out.bs_private[n].size() +
                                        out.bs_common[n].size());
      const int pinned =
          options.pinned_common_entity >= 0 ? 1 : 0;  // not sheddable
      if (load - pinned <= capacity) continue;
      struct Entry {
        StreamRef ref;
        double quality;
      };
      std::vector<Entry> entries;
      for (int g : out.bs_private[n])
        entries.push_back({{g, false}, 0.0});
      for (int g : out.bs_common[n])
        if (g != options.pinned_common_entity)
          entries.push_back({{g, true}, 0.0});
      for (auto& e : entries) {
        for (const auto& s : streams)
          if (s.ref == e.ref) e.quality = s.audience_quality[n];
      }
      std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.quality != b.quality) return a.quality < b.quality;
        if (a.ref.group != b.ref.group) return a.ref.group > b.ref.group;
        return a.ref.common && !b.ref.common;
      });
      const int shed = load - pinned - capacity;
      for (int i = 0; i < shed; ++i) {
        const StreamRef ref = entries[i].ref;
        auto& assigned = assigned_of(ref);
        assigned.erase(std::find(assigned.begin(), assigned.end(), n));
        auto& lst = bs_list_of(ref, n);
        lst.erase(std::find(lst.begin(), lst.end(), ref.group));
      }
      bs_active[n] = 0;
      --active_bs;
    }
  }

  for (auto& v : out.private_bs) std::sort(v.begin(), v.end());
  for (auto& v : out.common_bs) std::sort(v.begin(), v.end());
  for (auto& v : out.bs_private) std::sort(v.begin(), v.end());
  for (auto& v : out.bs_common) std::sort(v.begin(), v.end());

  for (int g = 0; g < rs.n_entities; ++g) {
    if (rs.private_active(g) && out.private_bs[g].empty())
      out.dropped.push_back({g, false});
    if (rs.common_active(g) && out.common_bs[g].empty())
      out.dropped.push_back({g, true});
  }
  return out;
}

std::vector<std::string> check_clusters(const ClusterAssignment& clusters,
                                        const ReceiverStructure& rs,
                                        const CandidateClusters& candidates,
                                        const ClusteringOptions& options) {
  std::vector<std::string> v;
  const int n_bs = static_cast<int>(clusters.bs_private.size());
  for (int n = 0; n < n_bs; ++n) {
    const auto load =
        clusters.bs_private[n].size() + clusters.bs_common[n].size();
    if (load > static_cast<std::size_t>(options.a_max_streams))
      v.push_back("BS " + std::to_string(n) + " exceeds the stream cap");
  }
  auto check_side = [&](bool common) {
    const auto& per_group =
        common ? clusters.common_bs : clusters.private_bs;
    const auto& per_bs = common ? clusters.bs_common : clusters.bs_private;
    const char* tag = common ? "common" : "private";
    for (int g = 0; g < static_cast<int>(per_group.size()); ++g) {
      const auto& serving = per_group[g];
      if (std::adjacent_find(serving.begin(), serving.end()) != serving.end())
        v.push_back(std::string(tag) + " cluster of group " +
                    std::to_string(g) + " repeats a BS");
      const bool pinned = common && g == options.pinned_common_entity;
      const auto& cand =
          common ? candidates.common_bs[g] : candidates.private_bs[g];
      for (int n : serving) {
        if (!pinned && !std::binary_search(cand.begin(), cand.end(), n))
          v.push_back(std::string(tag) + " cluster of group " +
                      std::to_string(g) + " uses non-candidate BS " +
                      std::to_string(n));
        const auto& lst = per_bs[n];
        if (!std::binary_search(lst.begin(), lst.end(), g))
          v.push_back("inverse map missing " + std::string(tag) + " (" +
                      std::to_string(g) + ", " + std::to_string(n) + ")");
      }
    }
    for (int n = 0; n < n_bs; ++n) {
      for (int g : per_bs[n]) {
        const auto& serving = per_group[g];
        if (!std::binary_search(serving.begin(), serving.end(), n))
          v.push_back("forward map missing " + std::string(tag) + " (" +
                      std::to_string(g) + ", " + std::to_string(n) + ")");
      }
    }
  };
  check_side(false);
  check_side(true);
  for (const auto& d : clusters.dropped) {
    if (!clusters.serving(d).empty())
      v.push_back("dropped stream has servers (group " +
                  std::to_string(d.group) + ")");
    const bool active = d.common ? rs.common_active(d.group)
                                 : rs.private_active(d.group);
    if (!active)
      v.push_back("dropped stream was never active (group " +
                  std::to_string(d.group) + ")");
  }
  return v;
}

}  // namespace rscran
