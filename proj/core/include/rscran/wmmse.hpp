#pragma once

#include <complex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rscran/channel.hpp"
#include "rscran/clustering.hpp"
#include "rscran/grouping.hpp"
#include "rscran/rng.hpp"

namespace rscran {

// Aggregate beamformers, one length-N*L vector per entity. Blocks outside
// the serving cluster stay identically zero; streams that are structurally
// absent (no members / no decoders) keep all-zero vectors.
struct Beamformers {
  std::vector<Eigen::VectorXcd> private_w;
  std::vector<Eigen::VectorXcd> common_w;

  int n_entities() const { return static_cast<int>(private_w.size()); }
  int aggregate_dim() const {
    return private_w.empty() ? 0 : static_cast<int>(private_w[0].size());
  }
};

Beamformers zero_beamformers(int n_entities, int aggregate_dim);

// Zero every per-BS block not in the stream's serving cluster.
void apply_support(Beamformers& w, const ClusterAssignment& clusters,
                   int n_antennas);

// Transmit power spent by one BS across all streams it serves.
double bs_power(const Beamformers& w, int bs, int n_antennas);

// Rate bookkeeping per entity (bit/s).
struct RateAllocation {
  double r_bar = 0.0;   // delivered min rate
  Eigen::VectorXd r_p;  // per-entity private rate
  Eigen::VectorXd r_c;  // per-entity common rate
};

// Received-power decomposition for one (stream, listener) pair: `total` is
// the full received power at the decode stage, `interference` excludes the
// stream's own contribution.
struct PowerTerms {
  double total = 0.0;
  double interference = 0.0;
};

// h_k is the user's aggregate channel (length N*L). For a common stream the
// user must actually decode it (it must appear in decode_order[user]);
// interference then includes every private stream, commons the user never
// decodes, and commons decoded later in its order.
PowerTerms power_terms(const Eigen::VectorXcd& h_k, int user, StreamRef stream,
                       const Beamformers& w, const ReceiverStructure& rs,
                       double noise_power);

double sinr(const Eigen::VectorXcd& h_k, int user, StreamRef stream,
            const Beamformers& w, const ReceiverStructure& rs,
            double noise_power);

// Scalar MMSE receive coefficient u = w^H h / T and the MSE of an arbitrary
// coefficient; mse(mmse_receiver(...)) == interference / total.
std::complex<double> mmse_receiver(const Eigen::VectorXcd& h_k, int user,
                                   StreamRef stream, const Beamformers& w,
                                   const ReceiverStructure& rs,
                                   double noise_power);

double mse(const Eigen::VectorXcd& h_k, int user, StreamRef stream,
           const Beamformers& w, const ReceiverStructure& rs,
           double noise_power, std::complex<double> u);

// rho = 1/e_mmse; throws for e_mmse <= 0.
double optimal_weight(double e_mmse);

// (log2(1 + sinr), (log rho* - rho*·e* + 1) / log 2) -- equal at the optimal
// receiver and weight; exposed as a pair so tests can compare both routes.
std::pair<double, double> rate_identity_check(const Eigen::VectorXcd& h_k,
                                              int user, StreamRef stream,
                                              const Beamformers& w,
                                              const ReceiverStructure& rs,
                                              double noise_power);

// Per-listener sample-average rates (B/M)·sum_m log2(1+gamma_m), ordered as
// rs.members[g] (private) or rs.decoders[g] (common). The stream's
// achievable rate is the minimum entry.
Eigen::VectorXd sample_average_rate(StreamRef stream, const Beamformers& w,
                                    const SampleSet& samples,
                                    const ReceiverStructure& rs,
                                    double noise_power, double bandwidth_hz);

double binding_rate(StreamRef stream, const Beamformers& w,
                    const SampleSet& samples, const ReceiverStructure& rs,
                    double noise_power, double bandwidth_hz);

// One surrogate row per (stream, listener): private streams over their
// members, then common streams over their decoders, group-major.
struct StreamRow {
  StreamRef stream;
  int user = -1;
};

std::vector<StreamRow> enumerate_rows(const ReceiverStructure& rs);

// Per-row, per-sample receiver coefficients and weights.
struct WmmseState {
  Eigen::MatrixXcd u;   // rows x samples
  Eigen::MatrixXd rho;  // rows x samples, > 0
};

// Sample-averaged surrogate statistics for one row.
struct AuxRow {
  double t = 0.0;       // mean rho |u|^2            (scales the noise power)
  double z = 0.0;       // mean (1 - rho + log rho)  (<= 0)
  Eigen::VectorXcd f;   // mean rho conj(u) h        (linear term)
  Eigen::MatrixXcd y;   // mean rho |u|^2 h h^H      (Hermitian PSD)
};

struct AuxiliaryStats {
  std::vector<StreamRow> rows;
  std::vector<AuxRow> data;
  // Row lookup: entity-major index of the row for (stream, user), -1 if the
  // user is not a listener of that stream.
  Eigen::MatrixXi private_row;  // n_entities x n_users
  Eigen::MatrixXi common_row;

  int row_of(StreamRef s, int user) const {
    return s.common ? common_row(s.group, user) : private_row(s.group, user);
  }
};

std::pair<WmmseState, AuxiliaryStats> update_aux(const Beamformers& w,
                                                 const SampleSet& samples,
                                                 const ReceiverStructure& rs,
                                                 double noise_power);

// Fronthaul rate drawn by one BS: cache-adjusted sum of the rates of every
// stream it serves. groups[g].file selects the cache row; entities beyond
// the group list (or with file -1) are never cached.
double fronthaul_load(int bs, const RateAllocation& rates,
                      const ClusterAssignment& clusters,
                      const CachePlacement& placement,
                      const std::vector<MulticastGroup>& groups);

// Monte-Carlo check of the receive chain: unit-power symbols per stream,
// AWGN, ideal successive cancellation in the user's decode order, private
// stream last. One entry per decode stage.
struct PowerStages {
  std::vector<StreamRef> stage;    // decode order, own private last
  std::vector<double> empirical;   // mean residual power per stage
  std::vector<double> analytic;    // matching closed-form totals
  std::vector<double> std_error;   // standard error of each empirical mean
};

PowerStages received_power_oracle(int user, const Eigen::VectorXcd& h_k,
                                  const Beamformers& w,
                                  const ReceiverStructure& rs,
                                  double noise_power, int n_symbols, Rng rng);

// Independent feasibility audit of a subproblem solution, written in plain
// complex arithmetic (no solver internals). Violations are relative to
// max(1, constraint scale); `support` is the largest off-cluster entry.
struct FeasibilityReport {
  double power = 0.0;
  double fronthaul = 0.0;
  double quadratic = 0.0;
  double rate_link = 0.0;
  double support = 0.0;
  double worst() const;
};

FeasibilityReport check_feasibility(
    const Beamformers& w, const RateAllocation& rates,
    const AuxiliaryStats& aux, const ReceiverStructure& rs,
    const ClusterAssignment& clusters, const CachePlacement& placement,
    const std::vector<MulticastGroup>& groups, const Eigen::VectorXd& p_max_w,
    const Eigen::VectorXd& c_max_bps, double noise_power, double bandwidth_hz,
    int n_antennas);

}  // namespace rscran
