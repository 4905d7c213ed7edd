#include "rscran/conic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rscran {

namespace {

constexpr double kLn2 = 0.6931471805599453;

using Triplets = std::vector<std::pair<int, double>>;

// Aggregate (complex) channel indices covered by one serving set.
std::vector<int> aggregate_indices(const std::vector<int>& sup, int l) {
  std::vector<int> idx;
  idx.reserve(sup.size() * l);
  for (int bs : sup)
    for (int a = 0; a < l; ++a) idx.push_back(bs * l + a);
  return idx;
}

// One constraint row under assembly: either a pure linear row or a
// quadratic ||F x||^2 + g'x + d <= 0 destined for a cone.
struct QuadRow {
  Triplets linear;                 // g
  double constant = 0.0;           // d
  std::vector<Triplets> f_rows;    // rows of F (real)
  std::string label;
};

struct Builder {
  const AuxiliaryStats& aux;
  const ClusterAssignment& clusters;
  const CachePlacement& placement;
  const ReceiverStructure& rs;
  const SubproblemContext& ctx;

  int n_bs = 0;
  VariableMap vars;
  std::vector<char> rate_pinned_p, rate_pinned_c;
  // Eigenfactor of each aux row's outer-product matrix: rows sqrt(l) v^H.
  std::vector<Eigen::MatrixXcd> factor;

  void run(ConicProblem& out);
  void presolve_fronthaul();
  void index_variables();
  void factorize();
  QuadRow assemble_row(int row_index) const;
  void add_stream_quadratic(QuadRow& row, StreamRef s,
                            const Eigen::MatrixXcd& f) const;
  std::vector<StreamRef> quad_set(const StreamRow& row) const;

  int stream_start(StreamRef s) const {
    return s.common ? vars.common_start[s.group] : vars.private_start[s.group];
  }
  const std::vector<int>& stream_sup(StreamRef s) const {
    return s.common ? vars.common_sup[s.group] : vars.private_sup[s.group];
  }
  int rate_var(StreamRef s) const {
    return s.common ? vars.r_common[s.group] : vars.r_private[s.group];
  }
};

void Builder::run(ConicProblem& out) {
  const int e = rs.n_entities;
  if (e <= 0 || rs.n_users <= 0)
    throw std::invalid_argument("subproblem: empty receiver structure");
  n_bs = static_cast<int>(clusters.bs_private.size());
  if (n_bs <= 0) throw std::invalid_argument("subproblem: no base stations");
  if (ctx.p_max_w.size() != n_bs || ctx.c_max_bps.size() != n_bs)
    throw std::invalid_argument(
        "subproblem: per-BS budget sizes disagree with the clustering");
  if (static_cast<int>(ctx.entity_file.size()) != e)
    throw std::invalid_argument("subproblem: entity_file size mismatch");
  if (ctx.n_antennas <= 0 || ctx.bandwidth_hz <= 0.0 ||
      ctx.noise_power_w <= 0.0)
    throw std::invalid_argument("subproblem: nonpositive physical constants");
  const int d = n_bs * ctx.n_antennas;
  for (const auto& row : aux.data)
    if (row.f.size() != d || row.y.rows() != d || row.y.cols() != d)
      throw std::invalid_argument(
          "subproblem: auxiliary dimensions disagree with the clustering");

  rate_pinned_p.assign(e, 0);
  rate_pinned_c.assign(e, 0);
  presolve_fronthaul();
  index_variables();
  factorize();

  // Assemble every achievability row; rows without beamformer coefficients
  // degrade to linear rate bounds.
  std::vector<QuadRow> lin_rows, cone_rows;
  for (std::size_t r = 0; r < aux.rows.size(); ++r) {
    QuadRow row = assemble_row(static_cast<int>(r));
    if (row.f_rows.empty() &&
        std::none_of(row.linear.begin(), row.linear.end(),
                     [&](const auto& t) { return t.first != rate_var(aux.rows[r].stream); })) {
      // Pure rate bound a*r + d <= 0 (or constant-only when pinned).
      lin_rows.push_back(std::move(row));
    } else {
      cone_rows.push_back(std::move(row));
    }
  }

  // Power cones for BSs with budget and at least one hosted variable.
  std::vector<QuadRow> power_rows;
  for (int n = 0; n < n_bs; ++n) {
    if (ctx.p_max_w(n) <= 0.0) continue;
    QuadRow row;
    row.label = "power bs " + std::to_string(n);
    row.constant = -ctx.p_max_w(n);
    for (int g = 0; g < e; ++g)
      for (bool common : {false, true}) {
        const StreamRef s{g, common};
        const int start = stream_start(s);
        if (start < 0) continue;
        const auto& sup = stream_sup(s);
        const auto pos = std::find(sup.begin(), sup.end(), n);
        if (pos == sup.end()) continue;
        const int block =
            start + 2 * ctx.n_antennas *
                        static_cast<int>(pos - sup.begin());
        for (int i = 0; i < 2 * ctx.n_antennas; ++i)
          row.f_rows.push_back({{block + i, 1.0}});
      }
    if (row.f_rows.empty()) continue;  // nothing transmits: 0 <= P holds
    power_rows.push_back(std::move(row));
  }

  // Linear block: nonnegativity, min-rate links, fronthaul, rate bounds.
  auto& socp = out.socp;
  auto& labels = out.row_label;
  socp.n = vars.n_vars;
  socp.c = Eigen::VectorXd::Zero(vars.n_vars);
  socp.c(vars.r_bar) = -1.0;

  std::vector<Triplets> g_rows;
  std::vector<double> h;
  const auto lp_row = [&](Triplets t, double rhs, std::string label) {
    g_rows.push_back(std::move(t));
    h.push_back(rhs);
    labels.push_back(std::move(label));
  };

  lp_row({{vars.r_bar, -1.0}}, 0.0, "nonneg r_bar");
  for (int g = 0; g < e; ++g) {
    if (vars.r_private[g] >= 0)
      lp_row({{vars.r_private[g], -1.0}}, 0.0,
             "nonneg r_p " + std::to_string(g));
    if (vars.r_common[g] >= 0)
      lp_row({{vars.r_common[g], -1.0}}, 0.0,
             "nonneg r_c " + std::to_string(g));
  }
  for (int g = 0; g < e; ++g) {
    if (!rs.private_active(g)) continue;
    Triplets t{{vars.r_bar, 1.0}};
    if (vars.r_private[g] >= 0) t.push_back({vars.r_private[g], -1.0});
    const int credit = rs.common_credit[g];
    if (credit >= 0 && rs.common_active(credit) && vars.r_common[credit] >= 0)
      t.push_back({vars.r_common[credit], -1.0});
    lp_row(std::move(t), 0.0, "link group " + std::to_string(g));
  }
  for (int n = 0; n < n_bs; ++n) {
    if (ctx.c_max_bps(n) >= ctx.fronthaul_uncapped_bps) continue;
    Triplets t;
    const auto add_stream = [&](StreamRef s) {
      const int rv = rate_var(s);
      if (rv < 0) return;
      if (placement.coeff(ctx.entity_file[s.group], n) >= 1.0) return;
      const double coef =
          1.0 - placement.coeff(ctx.entity_file[s.group], n);
      t.push_back({rv, coef});
    };
    for (int g : clusters.bs_private[n]) add_stream({g, false});
    for (int g : clusters.bs_common[n]) add_stream({g, true});
    if (t.empty()) continue;
    std::sort(t.begin(), t.end());
    lp_row(std::move(t), ctx.c_max_bps(n) / ctx.bandwidth_hz,
           "fronthaul bs " + std::to_string(n));
  }
  for (auto& row : lin_rows) {
    if (row.linear.empty()) continue;  // constant-only, holds by construction
    lp_row(std::move(row.linear), -row.constant, std::move(row.label));
  }
  socp.n_lin = static_cast<int>(g_rows.size());

  // Cone blocks: the quadratic ||Fx||^2 + g'x + d <= 0 becomes
  //   s0 = 1 - d - g'x,  s_mid = 2 F x,  s_end = -1 - d - g'x.
  const auto emit_cone = [&](QuadRow& row) {
    socp.soc_dims.push_back(static_cast<int>(row.f_rows.size()) + 2);
    g_rows.push_back(row.linear);
    h.push_back(1.0 - row.constant);
    labels.push_back(row.label);
    for (auto& f : row.f_rows) {
      for (auto& t : f) t.second *= -2.0;
      g_rows.push_back(std::move(f));
      h.push_back(0.0);
      labels.push_back(row.label);
    }
    g_rows.push_back(std::move(row.linear));
    h.push_back(-1.0 - row.constant);
    labels.push_back(std::move(row.label));
  };
  for (auto& row : power_rows) emit_cone(row);
  for (auto& row : cone_rows) emit_cone(row);

  socp.rows = std::move(g_rows);
  socp.h = Eigen::Map<const Eigen::VectorXd>(h.data(), h.size());
  out.vars = vars;
  out.bandwidth_hz = ctx.bandwidth_hz;
}

void Builder::presolve_fronthaul() {
  for (int n = 0; n < n_bs; ++n) {
    if (ctx.c_max_bps(n) > 0.0) continue;
    const auto pin = [&](StreamRef s, std::vector<char>& pinned) {
      if (placement.coeff(ctx.entity_file[s.group], n) < 1.0)
        pinned[s.group] = 1;
    };
    for (int g : clusters.bs_private[n]) pin({g, false}, rate_pinned_p);
    for (int g : clusters.bs_common[n]) pin({g, true}, rate_pinned_c);
  }
}

void Builder::index_variables() {
  const int e = rs.n_entities;
  vars.n_bs = n_bs;
  vars.n_antennas = ctx.n_antennas;
  vars.private_start.assign(e, -1);
  vars.common_start.assign(e, -1);
  vars.private_sup.assign(e, {});
  vars.common_sup.assign(e, {});
  vars.r_private.assign(e, -1);
  vars.r_common.assign(e, -1);

  int next = 0;
  const auto add_block = [&](const std::vector<int>& serving, int& start,
                             std::vector<int>& sup) {
    sup.clear();
    for (int n : serving)
      if (ctx.p_max_w(n) > 0.0) sup.push_back(n);
    if (sup.empty()) {
      start = -1;
      return;
    }
    start = next;
    next += 2 * ctx.n_antennas * static_cast<int>(sup.size());
  };
  for (int g = 0; g < e; ++g) {
    if (rs.private_active(g))
      add_block(clusters.private_bs[g], vars.private_start[g],
                vars.private_sup[g]);
    if (rs.common_active(g))
      add_block(clusters.common_bs[g], vars.common_start[g],
                vars.common_sup[g]);
  }
  vars.r_bar = next++;
  for (int g = 0; g < e; ++g) {
    if (rs.private_active(g) && !rate_pinned_p[g]) vars.r_private[g] = next++;
    if (rs.common_active(g) && !rate_pinned_c[g]) vars.r_common[g] = next++;
  }
  vars.n_vars = next;
}

void Builder::factorize() {
  factor.resize(aux.rows.size());
  for (std::size_t r = 0; r < aux.rows.size(); ++r) {
    const auto& row = aux.rows[r];
    const Eigen::MatrixXcd& y = aux.data[r].y;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(y);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("subproblem: eigensolve failed");
    const Eigen::VectorXd& lam = eig.eigenvalues();
    int rank = 0;
    for (int i = 0; i < lam.size(); ++i) {
      if (lam(i) < -ctx.psd_floor) {
        std::ostringstream msg;
        msg << "subproblem: indefinite outer-product matrix for "
            << (row.stream.common ? "common" : "private") << " stream "
            << row.stream.group << " at user " << row.user
            << " (eigenvalue " << lam(i) << ")";
        throw std::runtime_error(msg.str());
      }
      if (lam(i) > 0.0) ++rank;
    }
    Eigen::MatrixXcd f(rank, y.rows());
    int at = 0;
    for (int i = 0; i < lam.size(); ++i)
      if (lam(i) > 0.0)
        f.row(at++) =
            std::sqrt(lam(i)) * eig.eigenvectors().col(i).adjoint();
    factor[r] = std::move(f);
  }
}

std::vector<StreamRef> Builder::quad_set(const StreamRow& row) const {
  std::vector<StreamRef> out;
  for (int j = 0; j < rs.n_entities; ++j)
    if (rs.private_active(j)) out.push_back({j, false});
  for (int c : rs.undecoded_commons(row.user)) out.push_back({c, true});
  if (row.stream.common) {
    for (int c : rs.decoded_after(row.stream.group, row.user))
      out.push_back({c, true});
    out.push_back({row.stream.group, true});
  }
  return out;
}

void Builder::add_stream_quadratic(QuadRow& row, StreamRef s,
                                   const Eigen::MatrixXcd& f) const {
  const int start = stream_start(s);
  if (start < 0) return;
  const auto idx = aggregate_indices(stream_sup(s), ctx.n_antennas);
  for (int r = 0; r < f.rows(); ++r) {
    Triplets re_row, im_row;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const std::complex<double> v = f(r, idx[c]);
      const int base = start + 2 * static_cast<int>(c);
      // (Re + i Im)(w_re + i w_im): real and imaginary parts are two rows.
      if (v.real() != 0.0 || v.imag() != 0.0) {
        re_row.push_back({base, v.real()});
        re_row.push_back({base + 1, -v.imag()});
        im_row.push_back({base, v.imag()});
        im_row.push_back({base + 1, v.real()});
      }
    }
    if (!re_row.empty()) row.f_rows.push_back(std::move(re_row));
    if (!im_row.empty()) row.f_rows.push_back(std::move(im_row));
  }
}

QuadRow Builder::assemble_row(int row_index) const {
  const StreamRow& sr = aux.rows[row_index];
  const AuxRow& data = aux.data[row_index];
  QuadRow row;
  row.label = std::string(sr.stream.common ? "quad common " : "quad private ") +
              std::to_string(sr.stream.group) + " user " +
              std::to_string(sr.user);
  row.constant = ctx.noise_power_w * data.t - data.z;

  for (const StreamRef s : quad_set(sr))
    add_stream_quadratic(row, s, factor[row_index]);

  // Linear part: -2 Re{f^H w_own} and the normalized rate term.
  const int start = stream_start(sr.stream);
  if (start >= 0) {
    const auto idx = aggregate_indices(stream_sup(sr.stream), ctx.n_antennas);
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const std::complex<double> v = data.f(idx[c]);
      const int base = start + 2 * static_cast<int>(c);
      if (v.real() != 0.0) row.linear.push_back({base, -2.0 * v.real()});
      if (v.imag() != 0.0) row.linear.push_back({base + 1, -2.0 * v.imag()});
    }
  }
  const int rv = rate_var(sr.stream);
  if (rv >= 0) row.linear.push_back({rv, kLn2});
  std::sort(row.linear.begin(), row.linear.end());
  return row;
}

}  // namespace

const char* to_string(SubproblemStatus status) {
  switch (status) {
    case SubproblemStatus::kOptimal: return "optimal";
    case SubproblemStatus::kInfeasible: return "infeasible";
    case SubproblemStatus::kMaxIters: return "max_iters";
    case SubproblemStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

ConicProblem build_subproblem(const AuxiliaryStats& aux,
                              const ClusterAssignment& clusters,
                              const CachePlacement& placement,
                              const ReceiverStructure& rs,
                              const SubproblemContext& ctx) {
  ConicProblem out;
  Builder builder{aux, clusters, placement, rs, ctx, 0, {}, {}, {}, {}};
  builder.run(out);
  return out;
}

SubproblemSolution solve_subproblem(const ConicProblem& problem,
                                    double tol, int max_iters) {
  SocpSettings settings;
  settings.feastol = tol;
  settings.abstol = tol;
  settings.reltol = tol;
  settings.max_iters = max_iters;
  const SocpResult r = solve_socp(problem.socp, settings);

  SubproblemSolution sol;
  sol.iterations = r.iterations;
  sol.pres = r.pres;
  sol.dres = r.dres;
  sol.gap = r.gap;
  switch (r.status) {
    case SocpStatus::kOptimal: sol.status = SubproblemStatus::kOptimal; break;
    case SocpStatus::kPrimalInfeasible:
      sol.status = SubproblemStatus::kInfeasible;
      return sol;
    case SocpStatus::kMaxIters: sol.status = SubproblemStatus::kMaxIters; break;
    default: sol.status = SubproblemStatus::kNumericalFailure; return sol;
  }

  const auto& vars = problem.vars;
  const int e = static_cast<int>(vars.private_start.size());
  const int d = vars.n_bs * vars.n_antennas;
  const double b = problem.bandwidth_hz;
  sol.w = zero_beamformers(e, d);
  const auto gather = [&](int start, const std::vector<int>& sup,
                          Eigen::VectorXcd& w) {
    if (start < 0) return;
    const auto idx = aggregate_indices(sup, vars.n_antennas);
    for (int c = 0; c < static_cast<int>(idx.size()); ++c)
      w(idx[c]) = {r.x(start + 2 * c), r.x(start + 2 * c + 1)};
  };
  sol.rates.r_p = Eigen::VectorXd::Zero(e);
  sol.rates.r_c = Eigen::VectorXd::Zero(e);
  for (int g = 0; g < e; ++g) {
    gather(vars.private_start[g], vars.private_sup[g], sol.w.private_w[g]);
    gather(vars.common_start[g], vars.common_sup[g], sol.w.common_w[g]);
    if (vars.r_private[g] >= 0) sol.rates.r_p(g) = b * r.x(vars.r_private[g]);
    if (vars.r_common[g] >= 0) sol.rates.r_c(g) = b * r.x(vars.r_common[g]);
  }
  sol.rates.r_bar = b * r.x(vars.r_bar);
  sol.objective = sol.rates.r_bar;
  return sol;
}

void dump_problem(const ConicProblem& problem, std::ostream& out) {
  const SocpProblem& p = problem.socp;
  out.precision(17);
  out << "socp v1\n";
  out << "n " << p.n << " lin " << p.n_lin << " socs " << p.soc_dims.size()
      << "\n";
  if (!p.soc_dims.empty()) {
    out << "dims";
    for (int d : p.soc_dims) out << " " << d;
    out << "\n";
  }
  out << "c";
  for (int j = 0; j < p.n; ++j) out << " " << p.c(j);
  out << "\nh";
  for (int i = 0; i < p.total_rows(); ++i) out << " " << p.h(i);
  out << "\n";
  std::size_t nnz = 0;
  for (const auto& row : p.rows) nnz += row.size();
  out << "G " << nnz << "\n";
  for (int i = 0; i < p.total_rows(); ++i) {
    if (i < static_cast<int>(problem.row_label.size()) &&
        (i == 0 || problem.row_label[i] != problem.row_label[i - 1]))
      out << "# " << problem.row_label[i] << "\n";
    for (const auto& [col, val] : p.rows[i])
      out << i << " " << col << " " << val << "\n";
  }
}

SocpProblem parse_socp(std::istream& in) {
  SocpProblem p;
  std::string line, tok;
  const auto next_line = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      if (!line.empty() && line[0] != '#') return std::istringstream(line);
    }
    throw std::invalid_argument("socp parse: unexpected end of input");
  };

  {
    auto ls = next_line();
    std::string magic, version;
    ls >> magic >> version;
    if (magic != "socp" || version != "v1")
      throw std::invalid_argument("socp parse: bad header");
  }
  int n_socs = 0;
  {
    auto ls = next_line();
    std::string kn, klin, ksocs;
    ls >> kn >> p.n >> klin >> p.n_lin >> ksocs >> n_socs;
    if (kn != "n" || klin != "lin" || ksocs != "socs" || !ls)
      throw std::invalid_argument("socp parse: bad size line");
  }
  if (n_socs > 0) {
    auto ls = next_line();
    ls >> tok;
    if (tok != "dims") throw std::invalid_argument("socp parse: missing dims");
    p.soc_dims.resize(n_socs);
    for (int& d : p.soc_dims)
      if (!(ls >> d)) throw std::invalid_argument("socp parse: short dims");
  }
  int m = p.n_lin;
  for (int d : p.soc_dims) m += d;
  {
    auto ls = next_line();
    ls >> tok;
    if (tok != "c") throw std::invalid_argument("socp parse: missing c");
    p.c.resize(p.n);
    for (int j = 0; j < p.n; ++j)
      if (!(ls >> p.c(j))) throw std::invalid_argument("socp parse: short c");
  }
  {
    auto ls = next_line();
    ls >> tok;
    if (tok != "h") throw std::invalid_argument("socp parse: missing h");
    p.h.resize(m);
    for (int i = 0; i < m; ++i)
      if (!(ls >> p.h(i))) throw std::invalid_argument("socp parse: short h");
  }
  std::size_t nnz = 0;
  {
    auto ls = next_line();
    ls >> tok >> nnz;
    if (tok != "G") throw std::invalid_argument("socp parse: missing G");
  }
  p.rows.assign(m, {});
  for (std::size_t k = 0; k < nnz; ++k) {
    auto ls = next_line();
    int i = -1, j = -1;
    double v = 0.0;
    ls >> i >> j >> v;
    if (!ls || i < 0 || i >= m || j < 0 || j >= p.n)
      throw std::invalid_argument("socp parse: bad triplet");
    p.rows[i].push_back({j, v});
  }
  return p;
}

}  // namespace rscran
