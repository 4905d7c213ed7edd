#include "rscran/socp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace rscran {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConeRange {
  int offset = 0;
  int dim = 0;
};

// Nesterov-Todd scaling state. For second-order cones W = eta*(2vv' - J)
// with u = Jv, so W^-1 = (1/eta)*(2uu' - J) and
// W^-2 = (1/eta^2)*(I + 4(u'u)uu' - 2uv' - 2vu').
struct ConeScaling {
  double eta = 1.0;
  double uu = 0.0;
  Eigen::VectorXd u, v;
};

struct Workspace {
  std::vector<ConeRange> cones;
  // Per-cone variable support, dense local rows over the support, and the
  // constant local Gram G_c' G_c (reweighted each iteration).
  std::vector<std::vector<int>> support;
  std::vector<Eigen::MatrixXd> local_rows;
  std::vector<Eigen::MatrixXd> gram;
};

Eigen::VectorXd apply_g(const SocpProblem& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(p.total_rows());
  for (int i = 0; i < p.total_rows(); ++i) {
    double acc = 0.0;
    for (const auto& [col, val] : p.rows[i]) acc += val * x(col);
    y(i) = acc;
  }
  return y;
}

Eigen::VectorXd apply_gt(const SocpProblem& p, const Eigen::VectorXd& y) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.n);
  for (int i = 0; i < p.total_rows(); ++i)
    for (const auto& [col, val] : p.rows[i]) x(col) += val * y(i);
  return x;
}

Workspace build_workspace(const SocpProblem& p) {
  Workspace w;
  int offset = p.n_lin;
  for (int dim : p.soc_dims) {
    if (dim < 2) throw std::invalid_argument("socp: cone dimension < 2");
    w.cones.push_back({offset, dim});
    offset += dim;
  }
  if (offset != p.total_rows())
    throw std::invalid_argument("socp: row count mismatch with cone layout");

  for (const auto& cone : w.cones) {
    std::vector<int> sup;
    for (int r = cone.offset; r < cone.offset + cone.dim; ++r)
      for (const auto& [col, val] : p.rows[r]) sup.push_back(col);
    std::sort(sup.begin(), sup.end());
    sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
    std::vector<int> pos(p.n, -1);
    for (std::size_t i = 0; i < sup.size(); ++i) pos[sup[i]] = static_cast<int>(i);

    Eigen::MatrixXd local =
        Eigen::MatrixXd::Zero(cone.dim, static_cast<int>(sup.size()));
    for (int r = 0; r < cone.dim; ++r)
      for (const auto& [col, val] : p.rows[cone.offset + r])
        local(r, pos[col]) += val;
    w.support.push_back(std::move(sup));
    w.gram.push_back(local.transpose() * local);
    w.local_rows.push_back(std::move(local));
  }
  return w;
}

// Largest step alpha with v + alpha*dv staying in the cone (per block).
double lp_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, int n_lin) {
  double alpha = kInf;
  for (int i = 0; i < n_lin; ++i)
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  return alpha;
}

double soc_step(const Eigen::Ref<const Eigen::VectorXd>& v,
                const Eigen::Ref<const Eigen::VectorXd>& dv) {
  const int d = static_cast<int>(v.size());
  const double a = dv(0) * dv(0) - dv.tail(d - 1).squaredNorm();
  const double b = 2.0 * (v(0) * dv(0) - v.tail(d - 1).dot(dv.tail(d - 1)));
  const double c = v(0) * v(0) - v.tail(d - 1).squaredNorm();
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return dv(0) >= 0.0 ? kInf : -v(0) / dv(0);
  const double sq = std::sqrt(disc);
  // Roots of a*t^2 + b*t + c with c > 0 (strict interior).
  double r1, r2;
  if (std::abs(a) < 1e-300) {
    if (std::abs(b) < 1e-300) return kInf;
    r1 = r2 = -c / b;
  } else {
    const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
    r1 = q / a;
    r2 = c / q;
  }
  if (r1 > r2) std::swap(r1, r2);
  double alpha = kInf;
  if (r1 > 0.0)
    alpha = r1;
  else if (r2 > 0.0)
    alpha = r2;
  // Guard the reflected branch: the radius must stay positive too.
  if (dv(0) < 0.0) alpha = std::min(alpha, -v(0) / dv(0));
  return alpha;
}

struct Scaled {
  std::vector<ConeScaling> cones;
  Eigen::VectorXd w_lp;    // sqrt(s/z) on the LP block
  Eigen::VectorXd lambda;  // scaled point, full length
  bool ok = true;
};

Scaled compute_scaling(const Workspace& ws, const Eigen::VectorXd& s,
                       const Eigen::VectorXd& z, int n_lin) {
  Scaled sc;
  sc.w_lp.resize(n_lin);
  sc.lambda.resize(s.size());
  for (int i = 0; i < n_lin; ++i) {
    if (s(i) <= 0.0 || z(i) <= 0.0) {
      sc.ok = false;
      return sc;
    }
    sc.w_lp(i) = std::sqrt(s(i) / z(i));
    sc.lambda(i) = std::sqrt(s(i) * z(i));
  }
  for (const auto& cone : ws.cones) {
    const auto sb = s.segment(cone.offset, cone.dim);
    const auto zb = z.segment(cone.offset, cone.dim);
    const int d = cone.dim;
    const double rs2 = sb(0) * sb(0) - sb.tail(d - 1).squaredNorm();
    const double rz2 = zb(0) * zb(0) - zb.tail(d - 1).squaredNorm();
    if (rs2 <= 0.0 || rz2 <= 0.0 || sb(0) <= 0.0 || zb(0) <= 0.0) {
      sc.ok = false;
      return sc;
    }
    const double rs = std::sqrt(rs2), rz = std::sqrt(rz2);
    Eigen::VectorXd sbar = sb / rs, zbar = zb / rz;
    const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
    Eigen::VectorXd wbar(d);
    wbar(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
    wbar.tail(d - 1) =
        (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
    ConeScaling cs;
    cs.eta = std::sqrt(rs / rz);
    cs.v.resize(d);
    const double denom = std::sqrt(2.0 * (wbar(0) + 1.0));
    cs.v(0) = (wbar(0) + 1.0) / denom;
    cs.v.tail(d - 1) = wbar.tail(d - 1) / denom;
    cs.u = cs.v;
    cs.u.tail(d - 1) = -cs.v.tail(d - 1);  // u = J v
    cs.uu = cs.u.squaredNorm();
    // lambda = W z = eta * (2 v (v'z) - J z)
    const double vz = cs.v.dot(zb);
    Eigen::VectorXd lam = 2.0 * vz * cs.v;
    lam(0) -= zb(0);
    lam.tail(d - 1) += zb.tail(d - 1);
    sc.lambda.segment(cone.offset, cone.dim) = cs.eta * lam;
    sc.cones.push_back(std::move(cs));
  }
  return sc;
}

// y = W^-2 r (block diagonal).
Eigen::VectorXd apply_winv2(const Workspace& ws, const Scaled& sc,
                            const Eigen::VectorXd& r, int n_lin) {
  Eigen::VectorXd y(r.size());
  for (int i = 0; i < n_lin; ++i) y(i) = r(i) / (sc.w_lp(i) * sc.w_lp(i));
  for (std::size_t ci = 0; ci < ws.cones.size(); ++ci) {
    const auto& cone = ws.cones[ci];
    const auto& cs = sc.cones[ci];
    const auto rb = r.segment(cone.offset, cone.dim);
    const double ur = cs.u.dot(rb), vr = cs.v.dot(rb);
    y.segment(cone.offset, cone.dim) =
        (rb + (4.0 * cs.uu * ur - 2.0 * vr) * cs.u - 2.0 * ur * cs.v) /
        (cs.eta * cs.eta);
  }
  return y;
}

// y = W r.
Eigen::VectorXd apply_w(const Workspace& ws, const Scaled& sc,
                        const Eigen::VectorXd& r, int n_lin) {
  Eigen::VectorXd y(r.size());
  for (int i = 0; i < n_lin; ++i) y(i) = sc.w_lp(i) * r(i);
  for (std::size_t ci = 0; ci < ws.cones.size(); ++ci) {
    const auto& cone = ws.cones[ci];
    const auto& cs = sc.cones[ci];
    const auto rb = r.segment(cone.offset, cone.dim);
    const int d = cone.dim;
    Eigen::VectorXd t = 2.0 * cs.v.dot(rb) * cs.v;
    t(0) -= rb(0);
    t.tail(d - 1) += rb.tail(d - 1);
    y.segment(cone.offset, cone.dim) = cs.eta * t;
  }
  return y;
}

// y = W^-1 r.
Eigen::VectorXd apply_winv(const Workspace& ws, const Scaled& sc,
                           const Eigen::VectorXd& r, int n_lin) {
  Eigen::VectorXd y(r.size());
  for (int i = 0; i < n_lin; ++i) y(i) = r(i) / sc.w_lp(i);
  for (std::size_t ci = 0; ci < ws.cones.size(); ++ci) {
    const auto& cone = ws.cones[ci];
    const auto& cs = sc.cones[ci];
    const auto rb = r.segment(cone.offset, cone.dim);
    const int d = cone.dim;
    Eigen::VectorXd t = 2.0 * cs.u.dot(rb) * cs.u;
    t(0) -= rb(0);
    t.tail(d - 1) += rb.tail(d - 1);
    y.segment(cone.offset, cone.dim) = t / cs.eta;
  }
  return y;
}

// Jordan product a o b.
Eigen::VectorXd jordan_mul(const Workspace& ws, const Eigen::VectorXd& a,
                           const Eigen::VectorXd& b, int n_lin) {
  Eigen::VectorXd y(a.size());
  for (int i = 0; i < n_lin; ++i) y(i) = a(i) * b(i);
  for (const auto& cone : ws.cones) {
    const auto ab = a.segment(cone.offset, cone.dim);
    const auto bb = b.segment(cone.offset, cone.dim);
    const int d = cone.dim;
    y(cone.offset) = ab.dot(bb);
    y.segment(cone.offset + 1, d - 1) =
        ab(0) * bb.tail(d - 1) + bb(0) * ab.tail(d - 1);
  }
  return y;
}

// Solve lambda o y = d per block.
Eigen::VectorXd arrow_solve(const Workspace& ws, const Eigen::VectorXd& lambda,
                            const Eigen::VectorXd& d, int n_lin) {
  Eigen::VectorXd y(d.size());
  for (int i = 0; i < n_lin; ++i) y(i) = d(i) / lambda(i);
  for (const auto& cone : ws.cones) {
    const auto lb = lambda.segment(cone.offset, cone.dim);
    const auto db = d.segment(cone.offset, cone.dim);
    const int dd = cone.dim;
    const double det = lb(0) * lb(0) - lb.tail(dd - 1).squaredNorm();
    const double y0 = (lb(0) * db(0) - lb.tail(dd - 1).dot(db.tail(dd - 1))) / det;
    y(cone.offset) = y0;
    y.segment(cone.offset + 1, dd - 1) =
        (db.tail(dd - 1) - y0 * lb.tail(dd - 1)) / lb(0);
  }
  return y;
}

// Identity element of the cone algebra.
Eigen::VectorXd cone_identity(const Workspace& ws, int rows, int n_lin) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(rows);
  e.head(n_lin).setOnes();
  for (const auto& cone : ws.cones) e(cone.offset) = 1.0;
  return e;
}

using MatrixXld =
    Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Extended-precision copies of the scaling data plus the cone/data products
// needed to evaluate step-equation residuals: near convergence the scaled
// products span more than double's working range, and the step refinement
// below needs residuals evaluated beyond it.
struct ScaledLd {
  struct Cone {
    long double eta = 0.0L, uu = 0.0L;
    VectorXld v, u;
  };
  VectorXld w_lp, lambda;
  std::vector<Cone> cones;
};

ScaledLd to_ld(const Scaled& sc) {
  ScaledLd o;
  o.w_lp = sc.w_lp.cast<long double>();
  o.lambda = sc.lambda.cast<long double>();
  o.cones.reserve(sc.cones.size());
  for (const auto& cs : sc.cones) {
    ScaledLd::Cone c;
    c.eta = cs.eta;
    c.uu = cs.uu;
    c.v = cs.v.cast<long double>();
    c.u = cs.u.cast<long double>();
    o.cones.push_back(std::move(c));
  }
  return o;
}

VectorXld apply_g_ld(const SocpProblem& p, const VectorXld& x) {
  VectorXld y(p.total_rows());
  for (int i = 0; i < p.total_rows(); ++i) {
    long double acc = 0.0L;
    for (const auto& [col, val] : p.rows[i])
      acc += static_cast<long double>(val) * x(col);
    y(i) = acc;
  }
  return y;
}

VectorXld apply_gt_ld(const SocpProblem& p, const VectorXld& z) {
  VectorXld y = VectorXld::Zero(p.n);
  for (int i = 0; i < p.total_rows(); ++i)
    for (const auto& [col, val] : p.rows[i])
      y(col) += static_cast<long double>(val) * z(i);
  return y;
}

VectorXld apply_w_ld(const Workspace& ws, const ScaledLd& sc,
                     const VectorXld& r, int n_lin) {
  VectorXld y(r.size());
  for (int i = 0; i < n_lin; ++i) y(i) = sc.w_lp(i) * r(i);
  for (std::size_t ci = 0; ci < ws.cones.size(); ++ci) {
    const auto& cone = ws.cones[ci];
    const auto& cs = sc.cones[ci];
    const int d = cone.dim;
    const VectorXld rb = r.segment(cone.offset, d);
    VectorXld t = 2.0L * cs.v.dot(rb) * cs.v;
    t(0) -= rb(0);
    t.tail(d - 1) += rb.tail(d - 1);
    y.segment(cone.offset, d) = cs.eta * t;
  }
  return y;
}

VectorXld apply_winv_ld(const Workspace& ws, const ScaledLd& sc,
                        const VectorXld& r, int n_lin) {
  VectorXld y(r.size());
  for (int i = 0; i < n_lin; ++i) y(i) = r(i) / sc.w_lp(i);
  for (std::size_t ci = 0; ci < ws.cones.size(); ++ci) {
    const auto& cone = ws.cones[ci];
    const auto& cs = sc.cones[ci];
    const int d = cone.dim;
    const VectorXld rb = r.segment(cone.offset, d);
    VectorXld t = 2.0L * cs.u.dot(rb) * cs.u;
    t(0) -= rb(0);
    t.tail(d - 1) += rb.tail(d - 1);
    y.segment(cone.offset, d) = t / cs.eta;
  }
  return y;
}

VectorXld jordan_mul_ld(const Workspace& ws, const VectorXld& a,
                        const VectorXld& b, int n_lin) {
  VectorXld y(a.size());
  for (int i = 0; i < n_lin; ++i) y(i) = a(i) * b(i);
  for (const auto& cone : ws.cones) {
    const int d = cone.dim;
    const VectorXld ab = a.segment(cone.offset, d);
    const VectorXld bb = b.segment(cone.offset, d);
    y(cone.offset) = ab.dot(bb);
    y.segment(cone.offset + 1, d - 1) =
        ab(0) * bb.tail(d - 1) + bb(0) * ab.tail(d - 1);
  }
  return y;
}

class NormalSolver {
 public:
  NormalSolver(const SocpProblem& p, const Workspace& ws) : p_(p), ws_(ws) {
    m_.resize(p.n, p.n);
  }

  // Assemble M = G' W^-2 G and factor M + reg I. Unit scaling when
  // sc==nullptr. At the interior-point endgame the summands span the whole
  // range of W^-2 (~1e16), so the sums run in extended precision: what
  // double-precision assembly would absorb is exactly what the refinement
  // steps later need.
  bool factor(const Scaled* sc, double reg) {
    m_.setZero();
    for (int i = 0; i < p_.n_lin; ++i) {
      const long double coef =
          sc ? 1.0L / ((long double)sc->w_lp(i) * sc->w_lp(i)) : 1.0L;
      for (const auto& [a, va] : p_.rows[i])
        for (const auto& [b, vb] : p_.rows[i])
          if (a >= b) m_(a, b) += coef * va * vb;
    }
    for (std::size_t ci = 0; ci < ws_.cones.size(); ++ci) {
      const auto& sup = ws_.support[ci];
      const int v = static_cast<int>(sup.size());
      Eigen::MatrixXd local = ws_.gram[ci];
      if (sc) {
        const auto& cs = sc->cones[ci];
        const Eigen::VectorXd t = ws_.local_rows[ci].transpose() * cs.u;
        const Eigen::VectorXd q = ws_.local_rows[ci].transpose() * cs.v;
        local += 4.0 * cs.uu * (t * t.transpose());
        local -= 2.0 * (t * q.transpose() + q * t.transpose());
        local /= cs.eta * cs.eta;
      }
      for (int a = 0; a < v; ++a)
        for (int b = 0; b <= a; ++b) m_(sup[a], sup[b]) += local(a, b);
    }
    reg_ = reg;
    MatrixXld md = m_;
    md.diagonal().array() += (long double)reg;
    llt_.compute(md.selfadjointView<Eigen::Lower>());
    return llt_.info() == Eigen::Success;
  }

  // The endgame normal matrix reaches condition numbers where a double
  // factorization leaves O(1) relative error in the corrections, so both the
  // factorization and the refinement run in extended precision.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    const VectorXld bl = b.cast<long double>();
    VectorXld x = llt_.solve(bl);
    const long double target = 1e-17L * (bl.norm() + 1.0L);
    long double last_norm = std::numeric_limits<long double>::infinity();
    for (int round = 0; round < 10; ++round) {
      const VectorXld r = bl - m_.selfadjointView<Eigen::Lower>() * x;
      const long double rnorm = r.norm();
      if (rnorm <= target || rnorm >= 0.5L * last_norm) break;
      last_norm = rnorm;
      x += llt_.solve(r);
    }
    return x.cast<double>();
  }

 private:
  const SocpProblem& p_;
  const Workspace& ws_;
  MatrixXld m_;
  Eigen::LLT<MatrixXld> llt_;
  double reg_ = 0.0;
};

struct Direction {
  Eigen::VectorXd dx, dz, ds;
  double dtau = 0.0, dkappa = 0.0;
};

// Diagonal data scaling G -> E G D with E uniform inside each second-order
// cone block (so cone membership is preserved). Maps between the spaces:
// x = D x~, s = E^-1 s~, z = E z~; objective and gap are invariant.
struct Equilibration {
  Eigen::VectorXd row;  // e_i: scaled row i = e_i * original row i
  Eigen::VectorXd col;  // d_j: original x_j = d_j * scaled x_j
};

// Ruiz iteration: repeatedly divide rows and columns by the square root of
// their largest absolute coefficient until the spread is modest. Problems
// that are already well scaled pass through untouched.
SocpProblem equilibrate(const SocpProblem& p, Equilibration& eq) {
  const int m = p.total_rows();
  SocpProblem out = p;
  eq.row = Eigen::VectorXd::Ones(m);
  eq.col = Eigen::VectorXd::Ones(p.n);

  std::vector<int> block(m);
  int n_blocks = 0;
  for (int i = 0; i < p.n_lin; ++i) block[i] = n_blocks++;
  int off = p.n_lin;
  for (int dim : p.soc_dims) {
    for (int j = 0; j < dim; ++j) block[off + j] = n_blocks;
    ++n_blocks;
    off += dim;
  }

  for (int round = 0; round < 10; ++round) {
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(n_blocks);
    Eigen::VectorXd cmax = Eigen::VectorXd::Zero(p.n);
    for (int i = 0; i < m; ++i)
      for (const auto& [j, v] : out.rows[i]) {
        const double a = std::abs(v);
        rmax(block[i]) = std::max(rmax(block[i]), a);
        cmax(j) = std::max(cmax(j), a);
      }
    double spread = 1.0;
    for (int b = 0; b < n_blocks; ++b)
      if (rmax(b) > 0.0)
        spread = std::max({spread, rmax(b), 1.0 / rmax(b)});
    for (int j = 0; j < p.n; ++j)
      if (cmax(j) > 0.0)
        spread = std::max({spread, cmax(j), 1.0 / cmax(j)});
    if (spread <= 4.0) break;

    const auto factor = [](double v) {
      return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0;
    };
    for (int i = 0; i < m; ++i) {
      const double ri = factor(rmax(block[i]));
      for (auto& [j, v] : out.rows[i]) v *= ri * factor(cmax(j));
      eq.row(i) *= ri;
    }
    for (int j = 0; j < p.n; ++j) eq.col(j) *= factor(cmax(j));
  }

  out.h = eq.row.cwiseProduct(p.h);
  out.c = eq.col.cwiseProduct(p.c);
  return out;
}

}  // namespace

const char* to_string(SocpStatus status) {
  switch (status) {
    case SocpStatus::kOptimal: return "optimal";
    case SocpStatus::kPrimalInfeasible: return "primal_infeasible";
    case SocpStatus::kDualInfeasible: return "dual_infeasible";
    case SocpStatus::kMaxIters: return "max_iters";
    case SocpStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

SocpResult solve_socp(const SocpProblem& p0, const SocpSettings& settings) {
  SocpResult out;
  const int m = p0.total_rows();
  if (p0.n <= 0 || m <= 0)
    throw std::invalid_argument("socp: empty problem");
  if (p0.c.size() != p0.n || p0.h.size() != m)
    throw std::invalid_argument("socp: inconsistent dimensions");

  // All iterations run on the equilibrated data; residuals and solutions are
  // mapped back to the caller's units at every exit.
  Equilibration eq;
  const SocpProblem p = equilibrate(p0, eq);

  const Workspace ws = build_workspace(p);
  const double nu = p.n_lin + static_cast<double>(ws.cones.size());
  const Eigen::VectorXd e = cone_identity(ws, m, p.n_lin);

  NormalSolver normal(p, ws);

  // Initial point: least-norm primal/dual guesses shifted into the cone.
  if (!normal.factor(nullptr, std::max(settings.reg, 1e-12)))
    return out;  // numerical failure
  Eigen::VectorXd x = normal.solve(apply_gt(p, p.h));
  Eigen::VectorXd s = p.h - apply_g(p, x);
  Eigen::VectorXd z = -apply_g(p, normal.solve(p.c));
  const auto shift_into_cone = [&](Eigen::VectorXd& v) {
    double worst = -kInf;
    for (int i = 0; i < p.n_lin; ++i) worst = std::max(worst, -v(i));
    for (const auto& cone : ws.cones)
      worst = std::max(
          worst, v.segment(cone.offset + 1, cone.dim - 1).norm() - v(cone.offset));
    if (worst >= 0.0) v += (1.0 + worst) * e;
  };
  shift_into_cone(s);
  shift_into_cone(z);
  double tau = 1.0, kappa = 1.0;

  const double hnorm = std::max(1.0, p0.h.norm());
  const double cnorm = std::max(1.0, p0.c.norm());
  const bool trace = std::getenv("SOCP_TRACE") != nullptr;

  // Best iterate seen so far; on a numerical breakdown the solve falls back
  // to it and still reports optimal if it meets the relaxed thresholds.
  SocpResult best;
  double best_score = kInf;
  int since_best = 0;
  const auto record_best = [&](const Eigen::VectorXd& xv,
                               const Eigen::VectorXd& sv,
                               const Eigen::VectorXd& zv, double tv) {
    const double score =
        std::max({out.pres, out.dres, std::min(out.gap, out.relgap)});
    if (score < best_score) {
      best_score = score;
      best = out;
      best.x = eq.col.cwiseProduct(xv) / tv;
      best.s = sv.cwiseQuotient(eq.row) / tv;
      best.z = eq.row.cwiseProduct(zv) / tv;
      since_best = 0;
    } else {
      ++since_best;
    }
  };
  const auto fail_with_best = [&]() {
    best.status = (best.pres <= settings.feastol_relaxed &&
                   best.dres <= settings.feastol_relaxed &&
                   (best.gap <= settings.gaptol_relaxed ||
                    best.relgap <= settings.gaptol_relaxed))
                      ? SocpStatus::kOptimal
                      : SocpStatus::kNumericalFailure;
    return best;
  };

  for (int iter = 0; iter <= settings.max_iters; ++iter) {
    // Residuals of the homogeneous embedding.
    const Eigen::VectorXd gx = apply_g(p, x);
    const Eigen::VectorXd gtz = apply_gt(p, z);
    const Eigen::VectorXd rx = gtz + p.c * tau;
    const Eigen::VectorXd rz = gx + s - p.h * tau;
    const double rtau = kappa + p.c.dot(x) + p.h.dot(z);

    out.pres = rz.cwiseQuotient(eq.row).norm() / tau / hnorm;
    out.dres = rx.cwiseQuotient(eq.col).norm() / tau / cnorm;
    out.gap = s.dot(z) / (tau * tau);
    const double pcost = p.c.dot(x) / tau;
    out.relgap = out.gap / std::max(1.0, std::abs(pcost));
    out.iterations = iter;
    out.objective = pcost;
    record_best(x, s, z, tau);
    if (trace)
      std::fprintf(stderr,
                   "[socp] it=%d tau=%.3e kap=%.3e pres=%.3e dres=%.3e "
                   "gap=%.3e obj=%.6e\n",
                   iter, tau, kappa, out.pres, out.dres, out.gap, pcost);

    if (out.pres <= settings.feastol && out.dres <= settings.feastol &&
        (out.gap <= settings.abstol || out.relgap <= settings.reltol)) {
      out.status = SocpStatus::kOptimal;
      out.x = eq.col.cwiseProduct(x) / tau;
      out.s = s.cwiseQuotient(eq.row) / tau;
      out.z = eq.row.cwiseProduct(z) / tau;
      return out;
    }
    // Certificates of infeasibility (h'z and c'x are scale-invariant).
    const double hz = p.h.dot(z);
    if (hz < -1e-12 &&
        gtz.cwiseQuotient(eq.col).norm() / (-hz) <= settings.feastol) {
      out.status = SocpStatus::kPrimalInfeasible;
      out.z = eq.row.cwiseProduct(z) / -hz;
      out.x = eq.col.cwiseProduct(x);
      out.s = s.cwiseQuotient(eq.row);
      return out;
    }
    const double cx = p.c.dot(x);
    if (cx < -1e-12 &&
        (gx + s).cwiseQuotient(eq.row).norm() / (-cx) <= settings.feastol) {
      out.status = SocpStatus::kDualInfeasible;
      out.x = eq.col.cwiseProduct(x) / -cx;
      out.s = s.cwiseQuotient(eq.row) / -cx;
      out.z = eq.row.cwiseProduct(z);
      return out;
    }
    if (since_best >= settings.stall_iters) {
      if (trace)
        std::fprintf(stderr, "[socp] stalled: %d iterations without progress\n",
                     since_best);
      return fail_with_best();
    }
    if (iter == settings.max_iters) break;

    const double mu = (s.dot(z) + tau * kappa) / (nu + 1.0);

    Scaled sc = compute_scaling(ws, s, z, p.n_lin);
    bool factored = sc.ok;
    if (factored) {
      factored = normal.factor(&sc, settings.reg);
      if (!factored) factored = normal.factor(&sc, settings.reg * 1e4);
      if (!factored) factored = normal.factor(&sc, settings.reg * 1e8);
    }
    if (!factored) {
      if (trace)
        std::fprintf(stderr, "[socp] it=%d FAIL factor (scaling ok=%d)\n", iter,
                     static_cast<int>(sc.ok));
      return fail_with_best();
    }

    // Shared pieces of the two Newton solves.
    const Eigen::VectorXd x2 =
        normal.solve(apply_gt(p, apply_winv2(ws, sc, p.h, p.n_lin)) - p.c);
    const Eigen::VectorXd z2 =
        apply_winv2(ws, sc, apply_g(p, x2) - p.h, p.n_lin);
    // Algebraically c'x2 + h'z2 = -||W^{-1}(G x2 - h)||^2; evaluating the
    // norm form avoids the catastrophic cancellation the inner products
    // suffer near convergence and keeps the sign provably negative.
    const double denom =
        -apply_w(ws, sc, z2, p.n_lin).squaredNorm() - kappa / tau;
    if (!(denom < 0.0)) {
      if (trace)
        std::fprintf(stderr, "[socp] it=%d FAIL denom=%.3e\n", iter, denom);
      return fail_with_best();
    }

    const auto newton = [&](const Eigen::VectorXd& bx, const Eigen::VectorXd& bz,
                            double btau, const Eigen::VectorXd& bs,
                            double bkappa) {
      Direction d;
      const Eigen::VectorXd dtil = arrow_solve(ws, sc.lambda, bs, p.n_lin);
      const Eigen::VectorXd wd = apply_w(ws, sc, dtil, p.n_lin);
      const Eigen::VectorXd x1 = normal.solve(
          bx + apply_gt(p, apply_winv2(ws, sc, bz - wd, p.n_lin)));
      const Eigen::VectorXd z1 =
          apply_winv2(ws, sc, apply_g(p, x1) - bz + wd, p.n_lin);
      d.dtau = (btau - bkappa / tau - p.c.dot(x1) - p.h.dot(z1)) / denom;
      d.dx = x1 + d.dtau * x2;
      d.dz = z1 + d.dtau * z2;
      d.ds = wd - apply_w(ws, sc, apply_w(ws, sc, d.dz, p.n_lin), p.n_lin);
      d.dkappa = (bkappa - kappa * d.dtau) / tau;
      return d;
    };

    // The reduction to the normal equations and the recovery of (ds, dtau)
    // lose roughly as many digits as W^2 has condition number, which caps the
    // achievable accuracy near 1e-8. Two refinement rounds with residuals
    // evaluated in extended precision restore the lost digits; the correction
    // reuses the factorization, so each round costs two back-substitutions.
    const ScaledLd scl = to_ld(sc);
    const VectorXld c_ld = p.c.cast<long double>();
    const VectorXld h_ld = p.h.cast<long double>();
    const auto newton_refined = [&](const Eigen::VectorXd& bx,
                                    const Eigen::VectorXd& bz, double btau,
                                    const Eigen::VectorXd& bs, double bkappa) {
      Direction d = newton(bx, bz, btau, bs, bkappa);
      const long double bnorm = 1.0L + bx.cast<long double>().norm() +
                                bz.cast<long double>().norm() +
                                bs.cast<long double>().norm() +
                                std::abs((long double)btau) +
                                std::abs((long double)bkappa);
      for (int round = 0; round < 2; ++round) {
        const VectorXld dx = d.dx.cast<long double>();
        const VectorXld dz = d.dz.cast<long double>();
        const VectorXld ds = d.ds.cast<long double>();
        const long double dtau = d.dtau, dkappa = d.dkappa;
        const VectorXld ex =
            bx.cast<long double>() - apply_gt_ld(p, dz) - c_ld * dtau;
        const VectorXld ez =
            bz.cast<long double>() - apply_g_ld(p, dx) - ds + h_ld * dtau;
        const long double etau =
            (long double)btau - c_ld.dot(dx) - h_ld.dot(dz) - dkappa;
        const VectorXld es =
            bs.cast<long double>() -
            jordan_mul_ld(ws, scl.lambda,
                          apply_winv_ld(ws, scl, ds, p.n_lin) +
                              apply_w_ld(ws, scl, dz, p.n_lin),
                          p.n_lin);
        const long double ekappa = (long double)bkappa -
                                   (long double)kappa * dtau -
                                   (long double)tau * dkappa;
        if (ex.norm() + ez.norm() + es.norm() + std::abs(etau) +
                std::abs(ekappa) <=
            1e-14L * bnorm)
          break;
        const Direction corr2 =
            newton(ex.cast<double>(), ez.cast<double>(),
                   static_cast<double>(etau), es.cast<double>(),
                   static_cast<double>(ekappa));
        d.dx += corr2.dx;
        d.dz += corr2.dz;
        d.ds += corr2.ds;
        d.dtau += corr2.dtau;
        d.dkappa += corr2.dkappa;
      }
      return d;
    };

    const auto max_step = [&](const Direction& d) {
      double alpha = kInf;
      alpha = std::min(alpha, lp_step(s, d.ds, p.n_lin));
      alpha = std::min(alpha, lp_step(z, d.dz, p.n_lin));
      for (const auto& cone : ws.cones) {
        alpha = std::min(alpha, soc_step(s.segment(cone.offset, cone.dim),
                                         d.ds.segment(cone.offset, cone.dim)));
        alpha = std::min(alpha, soc_step(z.segment(cone.offset, cone.dim),
                                         d.dz.segment(cone.offset, cone.dim)));
      }
      if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
      if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
      return alpha;
    };

    // Predictor.
    const Eigen::VectorXd lam2 = jordan_mul(ws, sc.lambda, sc.lambda, p.n_lin);
    const Direction aff =
        newton_refined(-rx, -rz, -rtau, -lam2, -tau * kappa);
    const double alpha_aff = std::min(1.0, max_step(aff));
    double sigma = std::pow(1.0 - alpha_aff, 3);
    sigma = std::min(1.0, std::max(0.0, sigma));

    // Corrector.
    const Eigen::VectorXd corr = jordan_mul(
        ws, apply_winv(ws, sc, aff.ds, p.n_lin),
        apply_w(ws, sc, aff.dz, p.n_lin), p.n_lin);
    const Eigen::VectorXd bs = -lam2 - corr + sigma * mu * e;
    const double bkappa = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
    const Direction dir =
        newton_refined(-(1.0 - sigma) * rx, -(1.0 - sigma) * rz,
                       -(1.0 - sigma) * rtau, bs, bkappa);

    const double alpha = std::min(1.0, 0.99 * max_step(dir));
    if (trace)
      std::fprintf(stderr, "[socp] it=%d a_aff=%.3e sigma=%.3e alpha=%.3e\n",
                   iter, alpha_aff, sigma, alpha);
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
      if (trace)
        std::fprintf(stderr, "[socp] it=%d FAIL alpha=%.3e\n", iter, alpha);
      return fail_with_best();
    }
    x += alpha * dir.dx;
    s += alpha * dir.ds;
    z += alpha * dir.dz;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;
  }

  best.status = SocpStatus::kMaxIters;
  return best;
}

}  // namespace rscran
