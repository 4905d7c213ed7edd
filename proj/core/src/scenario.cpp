#include "rscran/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rscran {

namespace {

using nlohmann::json;

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

template <typename T>
T parse_enum(const std::string& s,
             std::initializer_list<std::pair<const char*, T>> table,
             const char* field) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw std::invalid_argument(std::string("config: bad value '") + s +
                              "' for " + field);
}

}  // namespace

const char* to_string(CsitMode m) {
  return m == CsitMode::kStatistical ? "statistical" : "full";
}
const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::kRsCmd: return "rs_cmd";
    case Scheme::kTin: return "tin";
    default: return "scm_rsma";
  }
}
const char* to_string(GroupMode m) {
  return m == GroupMode::kGroupPerFile ? "g_le_k" : "g_eq_k";
}
const char* to_string(CachePolicy p) {
  return p == CachePolicy::kMostPopular ? "most_popular" : "uniform_random";
}

std::vector<std::string> validate_config(const ScenarioConfig& c) {
  std::vector<std::string> v;
  auto require = [&](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  require(c.n_bs >= 1, "n_bs must be >= 1");
  require(c.n_users >= 1, "n_users must be >= 1");
  require(c.n_files >= 1, "n_files must be >= 1");
  require(c.n_antennas >= 1, "n_antennas must be >= 1");
  require(c.bandwidth_hz > 0.0, "bandwidth_hz must be > 0");
  require(std::isfinite(c.noise_density_dbm_hz),
          "noise_density_dbm_hz must be finite");
  require(std::isfinite(c.p_max_dbm), "p_max_dbm must be finite");
  require(c.c_max_bps >= 0.0, "c_max_bps must be >= 0");
  require(c.cache_size_files >= 0 && c.cache_size_files <= c.n_files,
          "cache_size_files must lie in [0, n_files]");
  require(c.a_max_streams >= 1, "a_max_streams must be >= 1");
  require(c.mu_db >= 0.0, "mu_db must be >= 0");
  require(c.d_max_common >= 0, "d_max_common must be >= 0");
  require(c.zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
  require(c.area_half_width_m > 0.0, "area_half_width_m must be > 0");
  require(c.m_samples >= 1, "m_samples must be >= 1");
  require(c.channel.shadow_sigma_db >= 0.0, "channel.shadow_sigma_db must be >= 0");
  require(c.channel.min_distance_m > 0.0, "channel.min_distance_m must be > 0");
  return v;
}

Scenario build_scenario(const ScenarioConfig& config) {
  const auto violations = validate_config(config);
  if (!violations.empty()) {
    std::string msg = "invalid scenario config:";
    for (const auto& s : violations) msg += "\n  " + s;
    throw std::invalid_argument(msg);
  }

  Scenario sc;
  sc.config = config;
  const double a = config.area_half_width_m;
  const Rng base(config.rng_seed);

  sc.bs_xy.resize(config.n_bs, 2);
  for (int n = 0; n < config.n_bs; ++n) {
    Rng r = base.fork(rng_tag::kBsPosition, static_cast<std::uint64_t>(n));
    sc.bs_xy(n, 0) = a * (2.0 * r.uniform() - 1.0);
    sc.bs_xy(n, 1) = a * (2.0 * r.uniform() - 1.0);
  }
  sc.user_xy.resize(config.n_users, 2);
  for (int k = 0; k < config.n_users; ++k) {
    Rng r = base.fork(rng_tag::kUserPosition, static_cast<std::uint64_t>(k));
    sc.user_xy(k, 0) = a * (2.0 * r.uniform() - 1.0);
    sc.user_xy(k, 1) = a * (2.0 * r.uniform() - 1.0);
  }

  sc.noise_power_w =
      dbm_to_watt(config.noise_density_dbm_hz) * config.bandwidth_hz;
  sc.p_max_w = dbm_to_watt(config.p_max_dbm);
  return sc;
}

CachePlacement place_cache(const Eigen::VectorXd& popularity,
                           CachePolicy policy, const ScenarioConfig& config,
                           Rng rng) {
  const int f = config.n_files;
  const int n = config.n_bs;
  const int s = config.cache_size_files;
  if (popularity.size() != f)
    throw std::invalid_argument("place_cache: popularity size != n_files");

  CachePlacement placement;
  placement.has_file = Eigen::MatrixXi::Zero(f, n);

  if (policy == CachePolicy::kMostPopular) {
    std::vector<int> order(f);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return popularity(a) > popularity(b);  // ties keep the lower index
    });
    for (int j = 0; j < s; ++j) placement.has_file.row(order[j]).setOnes();
  } else {
    for (int bs = 0; bs < n; ++bs) {
      Rng r = rng.fork(rng_tag::kCache, static_cast<std::uint64_t>(bs));
      // Partial Fisher-Yates: the first s entries form the cache.
      std::vector<int> deck(f);
      std::iota(deck.begin(), deck.end(), 0);
      for (int j = 0; j < s; ++j) {
        const int pick = j + r.uniform_int(f - j);
        std::swap(deck[j], deck[pick]);
        placement.has_file(deck[j], bs) = 1;
      }
    }
  }
  return placement;
}

std::vector<std::string> validate_scenario(const Scenario& scenario,
                                           const CachePlacement& placement) {
  std::vector<std::string> v = validate_config(scenario.config);
  const auto& c = scenario.config;
  const double a = c.area_half_width_m;

  if (scenario.bs_xy.rows() != c.n_bs || scenario.bs_xy.cols() != 2)
    v.push_back("bs_xy shape mismatch");
  if (scenario.user_xy.rows() != c.n_users || scenario.user_xy.cols() != 2)
    v.push_back("user_xy shape mismatch");
  if (scenario.bs_xy.size() > 0 && scenario.bs_xy.cwiseAbs().maxCoeff() > a)
    v.push_back("BS position outside deployment square");
  if (scenario.user_xy.size() > 0 && scenario.user_xy.cwiseAbs().maxCoeff() > a)
    v.push_back("user position outside deployment square");
  if (!(scenario.noise_power_w > 0.0))
    v.push_back("noise power must be > 0");
  if (!(scenario.p_max_w >= 0.0)) v.push_back("p_max_w must be >= 0");

  if (placement.has_file.rows() != c.n_files ||
      placement.has_file.cols() != c.n_bs) {
    v.push_back("cache placement shape mismatch");
    return v;
  }
  if ((placement.has_file.array() != 0 && placement.has_file.array() != 1)
          .any())
    v.push_back("cache placement entries must be 0/1");
  for (int bs = 0; bs < c.n_bs; ++bs) {
    if (placement.has_file.col(bs).sum() != c.cache_size_files) {
      v.push_back("cache at BS " + std::to_string(bs) +
                  " does not hold exactly cache_size_files files");
      break;
    }
  }
  return v;
}

namespace {

void apply_json(const json& j, ScenarioConfig& c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "n_bs") c.n_bs = value.get<int>();
    else if (key == "n_users") c.n_users = value.get<int>();
    else if (key == "n_files") c.n_files = value.get<int>();
    else if (key == "n_antennas") c.n_antennas = value.get<int>();
    else if (key == "bandwidth_hz") c.bandwidth_hz = value.get<double>();
    else if (key == "noise_density_dbm_hz")
      c.noise_density_dbm_hz = value.get<double>();
    else if (key == "p_max_dbm") c.p_max_dbm = value.get<double>();
    else if (key == "c_max_bps") c.c_max_bps = value.get<double>();
    else if (key == "cache_size_files") c.cache_size_files = value.get<int>();
    else if (key == "a_max_streams") c.a_max_streams = value.get<int>();
    else if (key == "mu_db") c.mu_db = value.get<double>();
    else if (key == "d_max_common") c.d_max_common = value.get<int>();
    else if (key == "zipf_exponent") c.zipf_exponent = value.get<double>();
    else if (key == "area_half_width_m")
      c.area_half_width_m = value.get<double>();
    else if (key == "m_samples") c.m_samples = value.get<int>();
    else if (key == "csit_mode")
      c.csit_mode = parse_enum<CsitMode>(
          value.get<std::string>(),
          {{"statistical", CsitMode::kStatistical}, {"full", CsitMode::kFull}},
          "csit_mode");
    else if (key == "scheme")
      c.scheme = parse_enum<Scheme>(value.get<std::string>(),
                                    {{"rs_cmd", Scheme::kRsCmd},
                                     {"tin", Scheme::kTin},
                                     {"scm_rsma", Scheme::kScmRsma}},
                                    "scheme");
    else if (key == "group_mode")
      c.group_mode = parse_enum<GroupMode>(
          value.get<std::string>(),
          {{"g_le_k", GroupMode::kGroupPerFile},
           {"g_eq_k", GroupMode::kGroupPerUser}},
          "group_mode");
    else if (key == "cache_policy")
      c.cache_policy = parse_enum<CachePolicy>(
          value.get<std::string>(),
          {{"most_popular", CachePolicy::kMostPopular},
           {"uniform_random", CachePolicy::kUniformRandom}},
          "cache_policy");
    else if (key == "rng_seed") c.rng_seed = value.get<std::uint64_t>();
    else if (key == "channel") {
      for (const auto& [ck, cv] : value.items()) {
        if (ck == "shadow_sigma_db")
          c.channel.shadow_sigma_db = cv.get<double>();
        else if (ck == "antenna_gain_db")
          c.channel.antenna_gain_db = cv.get<double>();
        else if (ck == "min_distance_m")
          c.channel.min_distance_m = cv.get<double>();
        else
          throw std::invalid_argument("config: unknown key channel." + ck);
      }
    } else {
      throw std::invalid_argument("config: unknown key " + key);
    }
  }
}

}  // namespace

ScenarioConfig load_config(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected an object");
  ScenarioConfig c;
  apply_json(j, c);
  return c;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  return load_config(in);
}

std::string config_to_json(const ScenarioConfig& c) {
  json j{{"n_bs", c.n_bs},
         {"n_users", c.n_users},
         {"n_files", c.n_files},
         {"n_antennas", c.n_antennas},
         {"bandwidth_hz", c.bandwidth_hz},
         {"noise_density_dbm_hz", c.noise_density_dbm_hz},
         {"p_max_dbm", c.p_max_dbm},
         {"c_max_bps", c.c_max_bps},
         {"cache_size_files", c.cache_size_files},
         {"a_max_streams", c.a_max_streams},
         {"mu_db", c.mu_db},
         {"d_max_common", c.d_max_common},
         {"zipf_exponent", c.zipf_exponent},
         {"area_half_width_m", c.area_half_width_m},
         {"m_samples", c.m_samples},
         {"csit_mode", to_string(c.csit_mode)},
         {"scheme", to_string(c.scheme)},
         {"group_mode", to_string(c.group_mode)},
         {"cache_policy", to_string(c.cache_policy)},
         {"rng_seed", c.rng_seed},
         {"channel",
          json{{"shadow_sigma_db", c.channel.shadow_sigma_db},
               {"antenna_gain_db", c.channel.antenna_gain_db},
               {"min_distance_m", c.channel.min_distance_m}}}};
  return j.dump(2);
}

}  // namespace rscran
