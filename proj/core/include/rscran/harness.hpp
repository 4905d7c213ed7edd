#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rscran/scenario.hpp"
#include "rscran/solver.hpp"

namespace rscran {

// One experiment axis: the named config field sweeps over `values`, fully
// crossed with the scheme and seed lists.
struct SweepSpec {
  ScenarioConfig base;
  std::string param;
  std::vector<double> values;
  std::vector<Scheme> schemes;
  std::vector<std::uint64_t> seeds;
  std::string out_path;
};

// Copy of `base` with the named numeric field replaced. Integer fields round
// to nearest; an unrecognized name raises std::invalid_argument naming it.
ScenarioConfig apply_param(const ScenarioConfig& base, const std::string& name,
                           double value);

// Canned sweep axes matching the reported experiments: "fig3a" (fronthaul
// sweep), "fig5" (cache sweep), "fig6" (antenna sweep), "fig8" (user-count
// sweep for the multicast-gain table). Unknown names raise
// std::invalid_argument.
SweepSpec make_preset(const std::string& name);

// One grid cell as it lands in the result CSV.
struct CellResult {
  double param_value = 0.0;
  Scheme scheme = Scheme::kRsCmd;
  std::uint64_t seed = 0;
  SolveStatus status = SolveStatus::kSubproblemFailure;
  double mmf_rate_bps = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  int dropped_streams = 0;
};

// Full pipeline for one (config, scheme, seed) cell: geometry and channel
// statistics, demand and grouping, cache placement, channel draws, then the
// scheme run. Every random stage forks its own sub-stream from the seed, so
// all schemes at one seed see identical draws (common random numbers) and a
// cell is bit-reproducible in isolation.
SolveResult solve_cell(const ScenarioConfig& config, Scheme scheme,
                       std::uint64_t seed);

// solve_cell reduced to the CSV row (param_value is filled by the sweep).
// Pipeline exceptions are folded into a failure-status row so one bad cell
// cannot abort a sweep.
CellResult run_cell(const ScenarioConfig& config, Scheme scheme,
                    std::uint64_t seed);

// Executes the full grid. Rows come back in grid order (value-major, then
// scheme, then seed), exactly |values|*|schemes|*|seeds| of them, regardless
// of `n_threads`; workers pull cells from a shared index.
std::vector<CellResult> run_sweep(const SweepSpec& spec, int n_threads = 1);

// Header `param_value,scheme,seed,status,mmf_rate_bps,iterations,wall_ms,
// dropped_streams` plus one line per cell. Apart from the wall_ms column the
// bytes are a pure function of (spec, seeds).
void write_csv(const std::vector<CellResult>& rows, std::ostream& out);

// JSON run recipe: config hash + full config echo, swept parameter, value /
// scheme / seed lists, code version. Deterministic for a given spec.
std::string run_manifest(const SweepSpec& spec);

// run_sweep + write_csv to spec.out_path + manifest to
// spec.out_path + ".manifest.json". Returns the rows.
std::vector<CellResult> execute_sweep(const SweepSpec& spec,
                                      int n_threads = 1);

// Per-(param_value, scheme) aggregate over seeds. Failure rows are counted
// but excluded from the mean; the half-width uses the normal approximation
// 1.96*sd/sqrt(n) and is NaN (printed "n/a") when fewer than two rows enter.
struct SummaryRow {
  double param_value = 0.0;
  std::string scheme;
  int n = 0;
  int failed = 0;
  double mean_mmf_bps = 0.0;
  double ci95_bps = 0.0;
};

// Groups a result CSV in first-appearance order. A missing required column
// raises std::invalid_argument naming it.
std::vector<SummaryRow> summarize(std::istream& csv);
void write_summary(const std::vector<SummaryRow>& rows, std::ostream& out);

// Relative MMF improvement of a grouped run over a per-user baseline run,
// 100*(mean_grouped - mean_baseline)/mean_baseline, matched on
// (param_value, scheme).
struct GainRow {
  double param_value = 0.0;
  std::string scheme;
  double gain_percent = 0.0;
};

std::vector<GainRow> multicast_gain(std::istream& grouped_csv,
                                    std::istream& baseline_csv);
void write_gain(const std::vector<GainRow>& rows, std::ostream& out);

// Convergence trace of one solve: iteration, objective, audit violation,
// wall time, then the per-entity private and common rates.
void write_trace_csv(const SolveResult& result, std::ostream& out);

}  // namespace rscran
