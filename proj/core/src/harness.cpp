#include "rscran/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include <json.hpp>

#include "rscran/channel.hpp"
#include "rscran/grouping.hpp"
#include "rscran/rng.hpp"

namespace rscran {

namespace {

constexpr const char* kCodeVersion = "0.1.0";
constexpr const char* kCsvHeader =
    "param_value,scheme,seed,status,mmf_rate_bps,iterations,wall_ms,"
    "dropped_streams";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// FNV-1a, the usual 64-bit parameters.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct ResultColumns {
  int param_value = -1;
  int scheme = -1;
  int status = -1;
  int mmf = -1;
};

ResultColumns parse_header(const std::string& header) {
  const std::vector<std::string> names = split_line(header);
  ResultColumns cols;
  for (int i = 0; i < static_cast<int>(names.size()); ++i) {
    if (names[i] == "param_value") cols.param_value = i;
    if (names[i] == "scheme") cols.scheme = i;
    if (names[i] == "status") cols.status = i;
    if (names[i] == "mmf_rate_bps") cols.mmf = i;
  }
  auto require = [](int col, const char* name) {
    if (col < 0)
      throw std::invalid_argument(std::string("missing column: ") + name);
  };
  require(cols.param_value, "param_value");
  require(cols.scheme, "scheme");
  require(cols.status, "status");
  require(cols.mmf, "mmf_rate_bps");
  return cols;
}

}  // namespace

ScenarioConfig apply_param(const ScenarioConfig& base, const std::string& name,
                           double value) {
  ScenarioConfig c = base;
  const int iv = static_cast<int>(std::llround(value));
  if (name == "n_bs") c.n_bs = iv;
  else if (name == "n_users") c.n_users = iv;
  else if (name == "n_files") c.n_files = iv;
  else if (name == "n_antennas") c.n_antennas = iv;
  else if (name == "bandwidth_hz") c.bandwidth_hz = value;
  else if (name == "noise_density_dbm_hz") c.noise_density_dbm_hz = value;
  else if (name == "p_max_dbm") c.p_max_dbm = value;
  else if (name == "c_max_bps") c.c_max_bps = value;
  else if (name == "cache_size_files") c.cache_size_files = iv;
  else if (name == "a_max_streams") c.a_max_streams = iv;
  else if (name == "mu_db") c.mu_db = value;
  else if (name == "d_max_common") c.d_max_common = iv;
  else if (name == "zipf_exponent") c.zipf_exponent = value;
  else if (name == "area_half_width_m") c.area_half_width_m = value;
  else if (name == "m_samples") c.m_samples = iv;
  else throw std::invalid_argument("unknown sweep parameter: " + name);
  return c;
}

SweepSpec make_preset(const std::string& name) {
  SweepSpec spec;
  spec.schemes = {Scheme::kRsCmd, Scheme::kTin, Scheme::kScmRsma};
  for (std::uint64_t s = 1; s <= 10; ++s) spec.seeds.push_back(s);
  // The defaulted config already encodes the common deployment: 7 BSs,
  // 15 users, 2 antennas, 50 files with 5 cached, 28 dBm, statistical CSIT.
  if (name == "fig3a") {
    spec.param = "c_max_bps";
    spec.values = {20e6, 30e6, 40e6, 50e6, 60e6, 70e6};
  } else if (name == "fig5") {
    spec.param = "cache_size_files";
    spec.values = {0, 5, 10, 15, 20, 25};
  } else if (name == "fig6") {
    spec.param = "n_antennas";
    spec.values = {1, 2, 3, 4, 5};
  } else if (name == "fig8") {
    spec.param = "n_users";
    spec.values = {8, 10, 12, 14, 16, 18, 20};
    spec.base.c_max_bps = 30e6;
    spec.base.cache_size_files = 10;
    spec.base.n_bs = 7;
    spec.schemes = {Scheme::kRsCmd};
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  spec.out_path = name + ".csv";
  return spec;
}

SolveResult solve_cell(const ScenarioConfig& config, Scheme scheme,
                       std::uint64_t seed) {
  ScenarioConfig cfg = config;
  cfg.rng_seed = seed;
  cfg.scheme = scheme;
  const Scenario scenario = build_scenario(cfg);
  const Rng root(seed);

  const ChannelStatistics stats =
      build_statistics(scenario, root.fork(rng_tag::kShadowing));
  const Eigen::VectorXd popularity =
      zipf_popularity(cfg.n_files, cfg.zipf_exponent);
  const DemandProfile demand =
      draw_requests(popularity, cfg.n_users, root.fork(rng_tag::kRequest));
  const std::vector<MulticastGroup> groups =
      form_groups(demand.requests, cfg.group_mode);
  const CachePlacement placement = place_cache(
      demand.popularity, cfg.cache_policy, cfg, root.fork(rng_tag::kCache));
  const SampleSet samples = draw_samples(stats, cfg.m_samples, cfg.csit_mode,
                                         root.fork(rng_tag::kSample));

  SubproblemContext physics;
  physics.bandwidth_hz = cfg.bandwidth_hz;
  physics.noise_power_w = scenario.noise_power_w;
  physics.p_max_w = Eigen::VectorXd::Constant(cfg.n_bs, scenario.p_max_w);
  physics.c_max_bps = Eigen::VectorXd::Constant(cfg.n_bs, cfg.c_max_bps);

  StructureOptions structure;
  structure.mu_db = cfg.mu_db;
  structure.d_max_common = cfg.d_max_common;
  structure.a_max_streams = cfg.a_max_streams;

  return run_scheme(scheme, stats, samples, groups, placement, physics,
                    structure);
}

CellResult run_cell(const ScenarioConfig& config, Scheme scheme,
                    std::uint64_t seed) {
  CellResult out;
  out.scheme = scheme;
  out.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const SolveResult res = solve_cell(config, scheme, seed);
    out.status = res.status;
    out.mmf_rate_bps = res.objective();
    out.iterations = res.iterations;
    out.dropped_streams = static_cast<int>(res.dropped.size());
  } catch (const std::exception&) {
    out.status = SolveStatus::kSubproblemFailure;
  }
  out.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

std::vector<CellResult> run_sweep(const SweepSpec& spec, int n_threads) {
  if (spec.values.empty())
    throw std::invalid_argument("sweep value list is empty");
  apply_param(spec.base, spec.param, spec.values.front());  // name check

  struct Cell {
    double value;
    Scheme scheme;
    std::uint64_t seed;
  };
  std::vector<Cell> grid;
  for (double v : spec.values)
    for (Scheme s : spec.schemes)
      for (std::uint64_t seed : spec.seeds) grid.push_back({v, s, seed});

  std::vector<CellResult> rows(grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < grid.size();
         i = next.fetch_add(1)) {
      const Cell& cell = grid[i];
      rows[i] = run_cell(apply_param(spec.base, spec.param, cell.value),
                         cell.scheme, cell.seed);
      rows[i].param_value = cell.value;
    }
  };

  const int workers = std::max(1, n_threads);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

void write_csv(const std::vector<CellResult>& rows, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const CellResult& r : rows) {
    out << fmt(r.param_value) << ',' << to_string(r.scheme) << ',' << r.seed
        << ',' << to_string(r.status) << ',' << fmt(r.mmf_rate_bps) << ','
        << r.iterations << ',' << fmt(r.wall_ms) << ',' << r.dropped_streams
        << '\n';
  }
}

std::string run_manifest(const SweepSpec& spec) {
  const std::string config_json = config_to_json(spec.base);
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a(config_json)));
  nlohmann::json j;
  j["code_version"] = kCodeVersion;
  j["config_hash"] = hash;
  j["config"] = nlohmann::json::parse(config_json);
  j["param"] = spec.param;
  j["values"] = spec.values;
  std::vector<std::string> schemes;
  for (Scheme s : spec.schemes) schemes.emplace_back(to_string(s));
  j["schemes"] = schemes;
  j["seeds"] = spec.seeds;
  j["out_path"] = spec.out_path;
  return j.dump(2);
}

std::vector<CellResult> execute_sweep(const SweepSpec& spec, int n_threads) {
  const std::vector<CellResult> rows = run_sweep(spec, n_threads);
  std::ofstream csv(spec.out_path);
  if (!csv) throw std::runtime_error("cannot write " + spec.out_path);
  write_csv(rows, csv);
  const std::string manifest_path = spec.out_path + ".manifest.json";
  std::ofstream mf(manifest_path);
  if (!mf) throw std::runtime_error("cannot write " + manifest_path);
  mf << run_manifest(spec) << '\n';
  return rows;
}

std::vector<SummaryRow> summarize(std::istream& csv) {
  std::string line;
  if (!std::getline(csv, line))
    throw std::invalid_argument("missing column: param_value (empty input)");
  const ResultColumns cols = parse_header(line);

  struct Accum {
    SummaryRow row;
    std::vector<double> samples;
  };
  std::vector<Accum> groups;
  std::map<std::pair<double, std::string>, std::size_t> index;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    const int needed =
        std::max(std::max(cols.param_value, cols.scheme),
                 std::max(cols.status, cols.mmf));
    if (static_cast<int>(cells.size()) <= needed)
      throw std::invalid_argument("short row: " + line);
    const double value = std::stod(cells[cols.param_value]);
    const std::string& scheme = cells[cols.scheme];
    const auto key = std::make_pair(value, scheme);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      groups.push_back({});
      groups.back().row.param_value = value;
      groups.back().row.scheme = scheme;
    }
    Accum& acc = groups[it->second];
    if (cells[cols.status] == to_string(SolveStatus::kSubproblemFailure)) {
      ++acc.row.failed;
    } else {
      acc.samples.push_back(std::stod(cells[cols.mmf]));
    }
  }

  std::vector<SummaryRow> rows;
  rows.reserve(groups.size());
  for (Accum& acc : groups) {
    SummaryRow& r = acc.row;
    r.n = static_cast<int>(acc.samples.size());
    double sum = 0.0;
    for (double x : acc.samples) sum += x;
    r.mean_mmf_bps = r.n > 0 ? sum / r.n : 0.0;
    if (r.n >= 2) {
      double ss = 0.0;
      for (double x : acc.samples) ss += (x - r.mean_mmf_bps) * (x - r.mean_mmf_bps);
      const double sd = std::sqrt(ss / (r.n - 1));
      r.ci95_bps = 1.96 * sd / std::sqrt(static_cast<double>(r.n));
    } else {
      r.ci95_bps = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(r);
  }
  return rows;
}

void write_summary(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "param_value,scheme,n,failed,mean_mmf_bps,ci95_bps\n";
  for (const SummaryRow& r : rows) {
    out << fmt(r.param_value) << ',' << r.scheme << ',' << r.n << ','
        << r.failed << ',' << fmt(r.mean_mmf_bps) << ',';
    if (std::isnan(r.ci95_bps))
      out << "n/a";
    else
      out << fmt(r.ci95_bps);
    out << '\n';
  }
}

std::vector<GainRow> multicast_gain(std::istream& grouped_csv,
                                    std::istream& baseline_csv) {
  const std::vector<SummaryRow> grouped = summarize(grouped_csv);
  const std::vector<SummaryRow> baseline = summarize(baseline_csv);
  std::map<std::pair<double, std::string>, double> base_mean;
  for (const SummaryRow& r : baseline)
    base_mean[{r.param_value, r.scheme}] = r.mean_mmf_bps;

  std::vector<GainRow> rows;
  rows.reserve(grouped.size());
  for (const SummaryRow& g : grouped) {
    const auto it = base_mean.find({g.param_value, g.scheme});
    if (it == base_mean.end()) {
      std::ostringstream msg;
      msg << "no baseline row for param_value=" << g.param_value
          << " scheme=" << g.scheme;
      throw std::invalid_argument(msg.str());
    }
    GainRow row;
    row.param_value = g.param_value;
    row.scheme = g.scheme;
    row.gain_percent = 100.0 * (g.mean_mmf_bps - it->second) / it->second;
    rows.push_back(row);
  }
  return rows;
}

void write_gain(const std::vector<GainRow>& rows, std::ostream& out) {
  out << "param_value,scheme,gain_percent\n";
  for (const GainRow& r : rows)
    out << fmt(r.param_value) << ',' << r.scheme << ','
        << fmt(r.gain_percent) << '\n';
}

void write_trace_csv(const SolveResult& result, std::ostream& out) {
  const int n_entities =
      result.detail.empty() ? 0 : static_cast<int>(result.detail[0].r_p.size());
  out << "iteration,objective_bps,max_violation,wall_ms";
  for (int g = 0; g < n_entities; ++g) out << ",r_p_" << g;
  for (int g = 0; g < n_entities; ++g) out << ",r_c_" << g;
  out << '\n';
  for (std::size_t i = 0; i < result.detail.size(); ++i) {
    const PassRecord& rec = result.detail[i];
    out << (i + 1) << ',' << fmt(rec.objective_bps) << ','
        << fmt(rec.max_violation) << ',' << fmt(rec.wall_ms);
    for (int g = 0; g < rec.r_p.size(); ++g) out << ',' << fmt(rec.r_p[g]);
    for (int g = 0; g < rec.r_c.size(); ++g) out << ',' << fmt(rec.r_c[g]);
    out << '\n';
  }
}

}  // namespace rscran
