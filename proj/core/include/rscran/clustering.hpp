#pragma once

#include <string>
#include <vector>

#include "rscran/channel.hpp"
#include "rscran/grouping.hpp"

namespace rscran {

struct StreamRef {
  int group = -1;
  bool common = false;
  friend bool operator==(const StreamRef&, const StreamRef&) = default;
};

struct CandidateClusters {
  std::vector<std::vector<int>> private_bs;  // N_g^p, ascending BS ids
  std::vector<std::vector<int>> common_bs;   // N_g^c (empty when no common)
};

struct ClusterAssignment {
  std::vector<std::vector<int>> private_bs;  // serving BSs per entity
  std::vector<std::vector<int>> common_bs;
  std::vector<std::vector<int>> bs_private;  // entities per BS (inverse maps)
  std::vector<std::vector<int>> bs_common;
  std::vector<StreamRef> dropped;            // streams left with no server

  const std::vector<int>& serving(StreamRef s) const {
    return s.common ? common_bs[s.group] : private_bs[s.group];
  }
};

// Per-link quality 10 log10(tr Q_{n,k} / L) in dB.
double channel_quality(const ChannelStatistics& stats, int n, int k);

// Collective quality of BS n toward a user set: dB-domain average of the
// per-link qualities. Errors on an empty set.
double collective_quality(const ChannelStatistics& stats, int n,
                          const std::vector<int>& users);

// BSs within mu_db of the best collective quality for each stream audience
// (members for private streams, decoders for common ones).
CandidateClusters candidate_clusters(const ReceiverStructure& rs,
                                     const ChannelStatistics& stats,
                                     double mu_db);

struct ClusteringOptions {
  int a_max_streams = 8;
  // Entity whose common stream is pre-assigned to every BS (network-wide
  // stream); it permanently occupies one slot per BS. -1 disables.
  int pinned_common_entity = -1;
};

// Greedy cluster formation: rounds assign each live stream its strongest
// remaining candidate BS; overloaded BSs shed their weakest streams and
// retire. Streams ending with no server are reported as dropped.
ClusterAssignment run_clustering(const ReceiverStructure& rs,
                                 const ChannelStatistics& stats,
                                 const CandidateClusters& candidates,
                                 const ClusteringOptions& options);

// Invariants: per-BS load cap, inverse-map consistency, candidate
// containment, no duplicates. Empty result = consistent.
std::vector<std::string> check_clusters(const ClusterAssignment& clusters,
                                        const ReceiverStructure& rs,
                                        const CandidateClusters& candidates,
                                        const ClusteringOptions& options);

}  // namespace rscran
