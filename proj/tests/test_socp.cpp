#include <doctest.h>

#include <cmath>

#include "rscran/rng.hpp"
#include "rscran/socp.hpp"

using namespace rscran;

namespace {

// min c'x with rows encoding G x + s = h.
SocpProblem make_problem(int n, std::vector<double> c,
                         std::vector<std::vector<std::pair<int, double>>> rows,
                         std::vector<double> h, int n_lin,
                         std::vector<int> soc_dims) {
  SocpProblem p;
  p.n = n;
  p.c = Eigen::Map<Eigen::VectorXd>(c.data(), c.size());
  p.rows = std::move(rows);
  p.h = Eigen::Map<Eigen::VectorXd>(h.data(), h.size());
  p.n_lin = n_lin;
  p.soc_dims = std::move(soc_dims);
  return p;
}

bool in_cone(const SocpProblem& p, const Eigen::VectorXd& v, double tol) {
  for (int i = 0; i < p.n_lin; ++i)
    if (v(i) < -tol) return false;
  int off = p.n_lin;
  for (int d : p.soc_dims) {
    if (v(off) < v.segment(off + 1, d - 1).norm() - tol) return false;
    off += d;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("socp");

TEST_CASE("a one-variable box LP solves exactly") {
  // min -x subject to x <= 2, -x <= 0.
  const auto p = make_problem(1, {-1.0}, {{{0, 1.0}}, {{0, -1.0}}},
                              {2.0, 0.0}, 2, {});
  const auto r = solve_socp(p);
  REQUIRE(r.status == SocpStatus::kOptimal);
  CHECK(r.x(0) == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(r.objective == doctest::Approx(-2.0).epsilon(1e-7));
  // The upper bound is tight, the lower one slack with zero multiplier.
  CHECK(r.s(0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(r.z(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.z(1) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("a two-variable simplex LP finds the vertex") {
  // min -x-y subject to x+y <= 1, x >= 0, y >= 0.
  const auto p = make_problem(
      2, {-1.0, -1.0},
      {{{0, 1.0}, {1, 1.0}}, {{0, -1.0}}, {{1, -1.0}}},
      {1.0, 0.0, 0.0}, 3, {});
  const auto r = solve_socp(p);
  REQUIRE(r.status == SocpStatus::kOptimal);
  CHECK(r.objective == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK(r.x(0) + r.x(1) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("a unit-ball SOC constraint caps the linear objective") {
  // min -x1 subject to ||(x1, x2)|| <= 1.
  const auto p = make_problem(
      2, {-1.0, 0.0}, {{}, {{0, -1.0}}, {{1, -1.0}}}, {1.0, 0.0, 0.0}, 0, {3});
  const auto r = solve_socp(p);
  REQUIRE(r.status == SocpStatus::kOptimal);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::abs(r.x(1)) < 1e-6);
}

TEST_CASE("mixed LP and SOC rows recover the norm of a pinned point") {
  // min t subject to ||(x1, x2)|| <= t, x1 = 3, x2 = 4 (paired inequalities).
  const auto p = make_problem(
      3, {0.0, 0.0, 1.0},
      {{{0, 1.0}}, {{0, -1.0}}, {{1, 1.0}}, {{1, -1.0}},
       {{2, -1.0}}, {{0, -1.0}}, {{1, -1.0}}},
      {3.0, -3.0, 4.0, -4.0, 0.0, 0.0, 0.0}, 4, {3});
  const auto r = solve_socp(p);
  REQUIRE(r.status == SocpStatus::kOptimal);
  CHECK(r.objective == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(r.x(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(r.x(1) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("contradictory linear rows yield a primal certificate") {
  // x <= -1 and x >= 0 cannot hold together.
  const auto p = make_problem(1, {0.0}, {{{0, 1.0}}, {{0, -1.0}}},
                              {-1.0, 0.0}, 2, {});
  const auto r = solve_socp(p);
  REQUIRE(r.status == SocpStatus::kPrimalInfeasible);
  // Farkas certificate: z >= 0, G'z = 0, h'z < 0.
  CHECK(r.z.minCoeff() >= -1e-9);
  CHECK(std::abs(r.z(0) - r.z(1)) < 1e-7);
  CHECK(p.h.dot(r.z) < 0.0);
}

TEST_CASE("an unbounded objective yields a dual certificate") {
  // min -x subject to x >= 0.
  const auto p = make_problem(1, {-1.0}, {{{0, -1.0}}}, {0.0}, 1, {});
  const auto r = solve_socp(p);
  REQUIRE(r.status == SocpStatus::kDualInfeasible);
  // Improving ray: G x + s = 0, s >= 0, c'x < 0.
  CHECK(p.c.dot(r.x) < 0.0);
  CHECK(std::abs(-r.x(0) + r.s(0)) < 1e-7);
}

TEST_CASE("the iteration cap reports max_iters") {
  const auto p = make_problem(
      2, {-1.0, -1.0},
      {{{0, 1.0}, {1, 1.0}}, {{0, -1.0}}, {{1, -1.0}}},
      {1.0, 0.0, 0.0}, 3, {});
  SocpSettings st;
  st.max_iters = 1;
  const auto r = solve_socp(p, st);
  CHECK(r.status == SocpStatus::kMaxIters);
}

TEST_CASE("random feasible cone programs satisfy the KKT conditions") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 3 + rng.uniform_int(6);
    const int n_lin = 1 + rng.uniform_int(4);
    const int n_cones = 1 + rng.uniform_int(2);
    std::vector<int> dims;
    int m = n_lin;
    for (int i = 0; i < n_cones; ++i) {
      dims.push_back(2 + rng.uniform_int(4));
      m += dims.back();
    }

    SocpProblem p;
    p.n = n;
    p.n_lin = n_lin;
    p.soc_dims = dims;
    p.rows.resize(m);
    Eigen::MatrixXd g(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        g(i, j) = rng.normal();
        p.rows[i].push_back({j, g(i, j)});
      }

    // Interior primal and dual points certify attainment.
    Eigen::VectorXd x0(n);
    for (int j = 0; j < n; ++j) x0(j) = rng.normal();
    Eigen::VectorXd s0(m), z0(m);
    for (int i = 0; i < n_lin; ++i) {
      s0(i) = 0.3 + rng.uniform();
      z0(i) = 0.3 + rng.uniform();
    }
    int off = n_lin;
    for (int d : dims) {
      for (int i = 0; i < d; ++i) {
        s0(off + i) = rng.normal();
        z0(off + i) = rng.normal();
      }
      s0(off) = s0.segment(off + 1, d - 1).norm() + 0.5 + rng.uniform();
      z0(off) = z0.segment(off + 1, d - 1).norm() + 0.5 + rng.uniform();
      off += d;
    }
    p.h = g * x0 + s0;
    p.c = -g.transpose() * z0;

    const auto r = solve_socp(p);
    CAPTURE(trial);
    REQUIRE(r.status == SocpStatus::kOptimal);
    CHECK(in_cone(p, r.s, 1e-7));
    CHECK(in_cone(p, r.z, 1e-7));
    CHECK((g * r.x + r.s - p.h).norm() < 1e-6 * std::max(1.0, p.h.norm()));
    CHECK((g.transpose() * r.z + p.c).norm() <
          1e-6 * std::max(1.0, p.c.norm()));
    CHECK(std::abs(r.s.dot(r.z)) < 1e-5 * std::max(1.0, std::abs(r.objective)));
    // Weak duality sandwich around the reported objective.
    CHECK(p.c.dot(r.x) <= p.c.dot(x0) + 1e-6 * std::max(1.0, std::abs(p.c.dot(x0))));
    CHECK(p.c.dot(r.x) >= -p.h.dot(r.z) - 1e-5 * std::max(1.0, std::abs(r.objective)));
  }
}

TEST_CASE("repeated solves are bit-identical") {
  Rng rng(5);
  SocpProblem p;
  p.n = 4;
  p.n_lin = 2;
  p.soc_dims = {3};
  p.rows.resize(5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) p.rows[i].push_back({j, rng.normal()});
  Eigen::VectorXd x0(4), s0(5), z0(5);
  for (int j = 0; j < 4; ++j) x0(j) = rng.normal();
  s0 << 1.0, 2.0, 3.0, 1.0, -0.5;
  z0 << 0.5, 1.5, 2.0, 0.3, 0.2;
  Eigen::MatrixXd g(5, 4);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = p.rows[i][j].second;
  p.h = g * x0 + s0;
  p.c = -g.transpose() * z0;

  const auto a = solve_socp(p);
  const auto b = solve_socp(p);
  REQUIRE(a.status == b.status);
  CHECK((a.x - b.x).norm() == 0.0);
  CHECK(a.iterations == b.iterations);
}

TEST_SUITE_END();
