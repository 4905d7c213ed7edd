#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rscran/rng.hpp"

namespace rscran {

enum class CsitMode { kStatistical, kFull };
enum class Scheme { kRsCmd, kTin, kScmRsma };
enum class GroupMode { kGroupPerFile, kGroupPerUser };
enum class CachePolicy { kMostPopular, kUniformRandom };

const char* to_string(CsitMode m);
const char* to_string(Scheme s);
const char* to_string(GroupMode m);
const char* to_string(CachePolicy p);

// Propagation-model knobs that sit outside the core deployment geometry.
struct ChannelParams {
  double shadow_sigma_db = 8.0;
  double antenna_gain_db = 0.0;
  double min_distance_m = 10.0;  // clamp before the path-loss law
};

struct ScenarioConfig {
  int n_bs = 7;
  int n_users = 15;
  int n_files = 50;
  int n_antennas = 2;
  double bandwidth_hz = 10e6;
  double noise_density_dbm_hz = -168.0;
  double p_max_dbm = 28.0;       // per-BS transmit power budget
  double c_max_bps = 30e6;       // per-BS fronthaul capacity
  int cache_size_files = 5;      // files per BS cache
  int a_max_streams = 8;         // per-BS stream cap
  double mu_db = 10.0;           // candidate-cluster quality window
  int d_max_common = 2;          // foreign common messages decoded per user
  double zipf_exponent = 1.0;
  double area_half_width_m = 400.0;
  int m_samples = 1000;
  CsitMode csit_mode = CsitMode::kStatistical;
  Scheme scheme = Scheme::kRsCmd;
  GroupMode group_mode = GroupMode::kGroupPerFile;
  CachePolicy cache_policy = CachePolicy::kMostPopular;
  std::uint64_t rng_seed = 1;
  ChannelParams channel;
};

// Returns human-readable bound violations; empty when the config is usable.
std::vector<std::string> validate_config(const ScenarioConfig& config);

struct Scenario {
  ScenarioConfig config;
  Eigen::MatrixXd bs_xy;    // n_bs x 2, meters
  Eigen::MatrixXd user_xy;  // n_users x 2, meters
  double noise_power_w = 0.0;  // noise density integrated over the bandwidth
  double p_max_w = 0.0;
};

// Draws BS and user positions uniformly on the square and derives the linear
// power quantities. Throws std::invalid_argument listing violated bounds.
Scenario build_scenario(const ScenarioConfig& config);

struct CachePlacement {
  Eigen::MatrixXi has_file;  // n_files x n_bs, 0/1
  // Cache coefficient c_{f,n}. Negative file ids model never-cacheable
  // content (the network-wide common stream) and always return 0.
  double coeff(int file, int bs) const {
    if (file < 0) return 0.0;
    return has_file(file, bs) != 0 ? 1.0 : 0.0;
  }
};

// Fills each BS cache with cache_size_files files: the most popular ones
// (ties to the lower file index) or an independent uniform draw per BS.
CachePlacement place_cache(const Eigen::VectorXd& popularity,
                           CachePolicy policy, const ScenarioConfig& config,
                           Rng rng);

// Cross-checks a built scenario and placement; returns violation strings.
std::vector<std::string> validate_scenario(const Scenario& scenario,
                                           const CachePlacement& placement);

// JSON config file round trip. Missing keys take the defaults above; unknown
// keys raise std::invalid_argument naming the offender.
ScenarioConfig load_config(std::istream& in);
ScenarioConfig load_config_file(const std::string& path);
std::string config_to_json(const ScenarioConfig& config);

}  // namespace rscran
