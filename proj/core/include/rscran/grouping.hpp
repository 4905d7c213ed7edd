#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rscran/channel.hpp"
#include "rscran/rng.hpp"
#include "rscran/scenario.hpp"

namespace rscran {

struct DemandProfile {
  Eigen::VectorXd popularity;  // Zipf over files, sums to 1
  std::vector<int> requests;   // per user, requested file id
};

struct MulticastGroup {
  int file = -1;             // -1 marks the network-wide entity
  std::vector<int> members;  // requesting users, ascending
};

// Receiver-side decode structure. Entities 0..n_entities-1 own one private
// and (when decoders are non-empty) one common stream; an entity with no
// members models the network-wide common stream and owns no private stream.
struct ReceiverStructure {
  int n_entities = 0;
  int n_users = 0;
  std::vector<std::vector<int>> members;       // G_g, ascending
  std::vector<std::vector<int>> decoders;      // M_g, ascending
  std::vector<std::vector<int>> decode_order;  // per user: common streams in
                                               // decode order (last = final)
  std::vector<int> own_group;                  // g(k) per user
  std::vector<int> common_credit;              // entity whose common rate
                                               // counts toward this group's
                                               // delivered rate, -1 if none

  bool decodes(int k, int g) const { return decode_flag_[flag_index(k, g)]; }
  bool private_active(int g) const { return !members[g].empty(); }
  bool common_active(int g) const { return !decoders[g].empty(); }

  // Commons the user does not decode (interference it cannot strip).
  std::vector<int> undecoded_commons(int k) const;
  // Commons decoded after g at user k (still interference when decoding g).
  std::vector<int> decoded_after(int g, int k) const;
  // Commons decoded before g at user k (already stripped).
  std::vector<int> decoded_before(int g, int k) const;

  void rebuild_flags();
  std::size_t flag_index(int k, int g) const {
    return static_cast<std::size_t>(k) * n_entities + g;
  }

 private:
  std::vector<char> decode_flag_;  // k x g incidence, kept in sync by
                                   // rebuild_flags()
};

// p_f proportional to f^-gamma over 1-indexed file ranks.
Eigen::VectorXd zipf_popularity(int n_files, double exponent);

// One request per user by inverse-CDF lookup on the popularity vector.
DemandProfile draw_requests(const Eigen::VectorXd& popularity, int n_users,
                            Rng rng);

// kGroupPerFile: one group per distinct requested file (ascending file id).
// kGroupPerUser: one singleton group per user (unicast embedding).
std::vector<MulticastGroup> form_groups(const std::vector<int>& requests,
                                        GroupMode mode);

// Average over the candidate serving BSs of the per-link quality
// 10 log10(tr Q / L) in dB; how loudly group g's streams arrive at user k.
double interferer_strength(int g, int k, const ChannelStatistics& stats,
                           const std::vector<int>& candidate_cluster);

// Builds the decode sets: own group always decoded, plus up to d_max_common
// foreign commons picked by descending strength (ties to the lower group id).
// Decode order is ascending strength -- the strongest foreign common is
// decoded last among foreign ones -- with the own common last overall.
ReceiverStructure build_receiver_structure(
    const std::vector<MulticastGroup>& groups, const ChannelStatistics& stats,
    const std::vector<std::vector<int>>& cluster_hints, int d_max_common);

// Structural invariants (membership symmetry, decode-order bijection, own
// group decoded last, G_g subset of M_g). Empty result = consistent.
std::vector<std::string> check_receiver(const ReceiverStructure& rs);

}  // namespace rscran
