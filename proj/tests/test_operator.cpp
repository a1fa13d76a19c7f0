#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "anderlab/operators.hpp"
#include "anderlab/util.hpp"

using namespace anderlab;

namespace {

GridField smooth_1d(const TorusGrid& g, int freq, double amp) {
  GridField f(g);
  for (int i = 0; i < g.n; ++i) f.at(i) = amp * std::cos(2 * M_PI * freq * i / g.n);
  return f;
}

GridField random_smooth(const TorusGrid& g, std::uint64_t seed, int kmax) {
  SpectralField fh(g);
  HashRng rng(seed);
  if (g.dim == 1) {
    for (int k = 1; k <= kmax; ++k) {
      const cplx c(rng.next_gaussian(), rng.next_gaussian());
      fh.at_mode(k) = c;
      fh.at_mode(-k) = std::conj(c);
    }
  } else {
    for (int k0 = -kmax; k0 <= kmax; ++k0)
      for (int k1 = 1; k1 <= kmax; ++k1) {
        const cplx c(rng.next_gaussian(), rng.next_gaussian());
        fh.at_mode(k0, k1) = c;
        fh.at_mode(-k0, -k1) = std::conj(c);
      }
  }
  return to_grid(fh);
}

}  // namespace

TEST_CASE("apply reproduces the Fourier symbol when the noise vanishes") {
  const TorusGrid g(2, 32);
  const auto op = AndersonOperator::free_laplacian(g);
  GridField v(g);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) v.at(i, j) = std::cos(2 * M_PI * (2.0 * i + 3.0 * j) / g.n);
  const GridField av = op.apply(v);
  const double expect = 4 * M_PI * M_PI * 13.0;
  double worst = 0;
  for (std::size_t i = 0; i < v.v.size(); ++i) worst = std::max(worst, std::abs(av.v[i] - expect * v.v[i]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("apply is symmetric on random pairs") {
  const TorusGrid g(2, 32);
  const auto en = enhance(g, 5, Mollifier{0.05});
  const auto op = AndersonOperator::from_noise(en);
  for (int trial = 0; trial < 100; ++trial) {
    GridField v(g), w(g);
    HashRng rng(900 + trial);
    for (auto& x : v.v) x = rng.next_gaussian();
    for (auto& x : w.v) x = rng.next_gaussian();
    const double lhs = op.apply(v).l2_inner(w);
    const double rhs = v.l2_inner(op.apply(w));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * v.l2_norm() * w.l2_norm() *
                                     std::max(1.0, op.potential.max_abs() + 4e5));
  }
}

TEST_CASE("matrix-free action equals the dense assembly at N=8, d=1") {
  const TorusGrid g(1, 8);
  const auto en = enhance(g, 2, Mollifier{0.02});
  const auto op = AndersonOperator::from_noise(en);
  const Eigen::MatrixXd A = dense_matrix(op);
  GridField v(g);
  HashRng rng(77);
  for (auto& x : v.v) x = rng.next_gaussian();
  const GridField av = op.apply(v);
  Eigen::VectorXd vv(8);
  for (int i = 0; i < 8; ++i) vv(i) = v.v[i];
  const Eigen::VectorXd dense = A * vv;
  for (int i = 0; i < 8; ++i) CHECK(av.v[i] == doctest::Approx(dense(i)).epsilon(1e-12));
}

TEST_CASE("laplacian spectrum on the torus, d=1") {
  const TorusGrid g(1, 64);
  const auto es = eigensolve(AndersonOperator::free_laplacian(g), 5);
  const double w = 4 * M_PI * M_PI;
  const std::vector<double> expect = {0.0, w, w, 4 * w, 4 * w};
  for (int k = 0; k < 5; ++k)
    CHECK(std::abs(es.lambda[k] - expect[k]) <= 1e-8 * std::max(1.0, expect[k]));
  for (int k = 0; k < 5; ++k) CHECK(es.residual[k] <= 1e-8 * std::max(1.0, std::abs(es.lambda[k])));
  CHECK(es.orth_defect <= 1e-8);
}

TEST_CASE("laplacian multiplicity 4 at 4 pi^2 in d=2") {
  const TorusGrid g(2, 16);
  const auto es = eigensolve(AndersonOperator::free_laplacian(g), 6);
  const double w = 4 * M_PI * M_PI;
  CHECK(std::abs(es.lambda[0]) <= 1e-9 * w);
  for (int k = 1; k <= 4; ++k) CHECK(es.lambda[k] == doctest::Approx(w).epsilon(1e-9));
  CHECK(es.lambda[5] == doctest::Approx(2 * w).epsilon(1e-9));
}

TEST_CASE("iterative eigensolve matches dense diagonalization, d=2 N=16") {
  const TorusGrid g(2, 16);
  const auto en = enhance(g, 31, Mollifier{0.08});
  const auto op = AndersonOperator::from_noise(en);
  const auto es = eigensolve(op, 10);
  const auto dense = dense_eigenvalues(op, 10);
  for (int k = 0; k < 10; ++k)
    CHECK(std::abs(es.lambda[k] - dense[k]) <= 1e-8 * std::max(1.0, std::abs(dense[k])));
}

TEST_CASE("eigensolve is deterministic") {
  const TorusGrid g(2, 16);
  const auto en = enhance(g, 8, Mollifier{0.1});
  const auto op = AndersonOperator::from_noise(en);
  const auto a = eigensolve(op, 4);
  const auto b = eigensolve(op, 4);
  CHECK(a.lambda == b.lambda);
  for (int k = 0; k < 4; ++k) CHECK(a.u[k].v == b.u[k].v);
}

TEST_CASE("non-convergence raises with the worst residual attached") {
  const TorusGrid g(2, 16);
  const auto en = enhance(g, 3, Mollifier{0.08});
  const auto op = AndersonOperator::from_noise(en);
  EigensolveOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-14;
  CHECK_THROWS_AS(eigensolve(op, 4, opt), EigensolveError);
  try {
    eigensolve(op, 4, opt);
  } catch (const EigensolveError& e) {
    CHECK(e.worst_residual > 0.0);
  }
}

TEST_CASE("spectral mapping and shift covariance") {
  const TorusGrid g(2, 16);
  const auto en = enhance(g, 12, Mollifier{0.08});
  auto op = AndersonOperator::from_noise(en);
  const auto es = eigensolve(op, 6);
  for (int k = 0; k < 6; ++k) {
    const double rayleigh = op.apply(es.u[k]).l2_inner(es.u[k]);
    CHECK(std::abs(rayleigh - es.lambda[k]) <= 1e-8 * std::max(1.0, std::abs(es.lambda[k])));
  }
  // c -> c + s shifts every eigenvalue by s and keeps eigenfunctions
  auto op2 = op;
  const double s = 3.25;
  op2.shift += s;
  const auto es2 = eigensolve(op2, 6);
  for (int k = 0; k < 6; ++k) {
    CHECK(std::abs(es2.lambda[k] - es.lambda[k] - s) <= 1e-7 * std::max(1.0, std::abs(es.lambda[k])));
    CHECK(std::abs(std::abs(es2.u[k].l2_inner(es.u[k])) - 1.0) <= 1e-5);
  }
}

TEST_CASE("min-max monotonicity under a nonnegative potential bump") {
  const TorusGrid g(1, 64);
  const auto en = enhance(g, 14, Mollifier{0.05});
  auto op = AndersonOperator::from_noise(en);
  const auto es = eigensolve(op, 5);
  auto op2 = op;
  for (int i = 0; i < g.n; ++i) {
    const double c = std::cos(2 * M_PI * i / g.n);
    op2.potential.at(i) -= 1.0 + c * c;  // A -> A + q with q >= 0
  }
  const auto es2 = eigensolve(op2, 5);
  for (int k = 0; k < 5; ++k) CHECK(es2.lambda[k] >= es.lambda[k] - 1e-8);
}

TEST_CASE("ground gauge") {
  SUBCASE("free operator has flat ground state") {
    const TorusGrid g(1, 32);
    const auto es = eigensolve(AndersonOperator::free_laplacian(g), 3);
    const auto gg = ground_gauge(es);
    CHECK(gg.lambda0 == doctest::Approx(0.0).epsilon(1e-10));
    for (double x : gg.u0.v) CHECK(x == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(gg.Z.max_abs() <= 1e-8);
    for (std::size_t i = 0; i < gg.u0.v.size(); ++i)
      CHECK(std::exp(gg.Z.v[i]) == doctest::Approx(gg.u0.v[i]).epsilon(1e-12));
  }
  SUBCASE("cosine potential keeps a positive ground state (dense cross-check)") {
    const TorusGrid g(1, 64);
    AndersonOperator op;
    op.grid = g;
    op.potential = smooth_1d(g, 1, 1.0);
    op.shift = 0.0;
    op.seed = 1;
    const auto es = eigensolve(op, 3);
    const auto gg = ground_gauge(es);
    CHECK(gg.u0.min_value() > 0.0);
    // Perron eigenvector from the dense route is positive as well
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(dense_matrix(op));
    Eigen::VectorXd v0 = dense.eigenvectors().col(0);
    if (v0.sum() < 0) v0 = -v0;
    CHECK(v0.minCoeff() > 0.0);
    CHECK(std::abs(dense.eigenvalues()(0) - gg.lambda0) <= 1e-8 * std::max(1.0, std::abs(gg.lambda0)));
  }
}

TEST_CASE("conjugation to divergence form") {
  const TorusGrid g(1, 128);
  const auto en = enhance(g, 9, Mollifier{0.05});
  const auto op = AndersonOperator::from_noise(en);
  const auto es = eigensolve(op, 6);
  const auto gg = ground_gauge(es);

  SUBCASE("constants map to lambda0") {
    GridField one(g);
    for (auto& x : one.v) x = 1.0;
    const GridField hw = conjugate_apply(gg, one);
    for (double x : hw.v) CHECK(x == doctest::Approx(gg.lambda0).epsilon(1e-9));
  }
  SUBCASE("direct identity against (1/u0) A (u0 w)") {
    const GridField w = random_smooth(g, 17, 6);
    GridField u0w(g);
    for (std::size_t i = 0; i < w.v.size(); ++i) u0w.v[i] = gg.u0.v[i] * w.v[i];
    const GridField lhs_raw = op.apply(u0w);
    GridField lhs(g);
    for (std::size_t i = 0; i < w.v.size(); ++i) lhs.v[i] = lhs_raw.v[i] / gg.u0.v[i];
    const GridField rhs = conjugate_apply(gg, w);
    double err2 = 0.0;
    for (std::size_t i = 0; i < w.v.size(); ++i) err2 += (lhs.v[i] - rhs.v[i]) * (lhs.v[i] - rhs.v[i]);
    const double rel = std::sqrt(err2 * g.cell_volume()) / w.l2_norm();
    CHECK(rel <= 1e-6);
  }
  SUBCASE("quotients of eigenfunctions are eigenfunctions of the conjugated operator") {
    for (int k = 1; k < 4; ++k) {
      GridField w(g);
      for (std::size_t i = 0; i < w.v.size(); ++i) w.v[i] = es.u[k].v[i] / gg.u0.v[i];
      const GridField hw = conjugate_apply(gg, w);
      double err2 = 0.0;
      for (std::size_t i = 0; i < w.v.size(); ++i) {
        const double r = hw.v[i] - es.lambda[k] * w.v[i];
        err2 += r * r;
      }
      const double rel = std::sqrt(err2 * g.cell_volume()) /
                         (std::max(1.0, std::abs(es.lambda[k])) * w.l2_norm());
      CHECK(rel <= 1e-6);
      // Rayleigh quotient in the weighted inner product reproduces lambda_k
      CompensatedSum num, den;
      for (std::size_t i = 0; i < w.v.size(); ++i) {
        num.add(gg.e2z.v[i] * hw.v[i] * w.v[i]);
        den.add(gg.e2z.v[i] * w.v[i] * w.v[i]);
      }
      CHECK(num.value() / den.value() ==
            doctest::Approx(es.lambda[k]).epsilon(1e-6 * std::max(1.0, std::abs(es.lambda[k]))));
    }
  }
}

TEST_CASE("resolvent probe") {
  SUBCASE("zeroed noise gives eps-independent eigenvalues") {
    const TorusGrid g(1, 64);
    const auto probe = resolvent_probe(g, 4, {0.25, 0.125, 0.0625}, 3, false, 0.0);
    for (std::size_t j = 1; j < probe.lambda.size(); ++j)
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs(probe.lambda[j][k] - probe.lambda[0][k]) <= 1e-8);
  }
  SUBCASE("1D eigenvalues stabilize under dyadic mollification") {
    const TorusGrid g(1, 256);
    std::vector<double> eps;
    for (int j = 0; j <= 5; ++j) eps.push_back(std::pow(2.0, -j));
    const auto probe = resolvent_probe(g, 21, eps, 3, true);
    const auto d = probe.consecutive_diffs();
    // differences decreasing from j = 3 on (1D needs no renormalization)
    for (int k = 0; k < 3; ++k) {
      CHECK(d[4][k] < d[3][k]);
      CHECK(d[3][k] < d[2][k]);
    }
  }
}
