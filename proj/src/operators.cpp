#include "anderlab/operators.hpp"

#include <cmath>

#include "anderlab/util.hpp"

namespace anderlab {

AndersonOperator AndersonOperator::from_noise(const EnhancedNoise& en) {
  AndersonOperator op;
  op.grid = en.grid;
  op.potential = en.xi_eps;
  op.shift = en.c_eps;
  op.seed = en.seed;
  return op;
}

AndersonOperator AndersonOperator::free_laplacian(const TorusGrid& g, std::uint64_t seed) {
  AndersonOperator op;
  op.grid = g;
  op.potential = GridField(g);
  op.shift = 0.0;
  op.seed = seed;
  return op;
}

GridField AndersonOperator::apply(const GridField& v) const {
  if (!(v.grid == grid)) throw std::invalid_argument("AndersonOperator::apply: grid mismatch");
  GridField out = to_grid(neg_laplacian(to_spectral(v)));
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += (shift - potential.v[i]) * v.v[i];
  return out;
}

Eigen::MatrixXd dense_matrix(const AndersonOperator& op) {
  const int n = op.grid.n;
  const std::size_t sz = op.grid.size();
  Eigen::MatrixXd A(sz, sz);
  const double w = 4.0 * M_PI * M_PI;
  if (op.grid.dim == 1) {
    // translation kernel of -Lap: K(t) = (1/n) sum_k w k^2 cos(2 pi k t / n)
    std::vector<double> K(n, 0.0);
    for (int t = 0; t < n; ++t) {
      CompensatedSum s;
      for (int b = 0; b < n; ++b) {
        const double k = op.grid.mode_of_bin(b);
        s.add(w * k * k * std::cos(2.0 * M_PI * k * t / n));
      }
      K[t] = s.value() / n;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = K[((i - j) % n + n) % n];
  } else {
    std::vector<double> K(sz, 0.0);
    for (int t0 = 0; t0 < n; ++t0)
      for (int t1 = 0; t1 < n; ++t1) {
        CompensatedSum s;
        for (int b0 = 0; b0 < n; ++b0) {
          const double k0 = op.grid.mode_of_bin(b0);
          for (int b1 = 0; b1 < n; ++b1) {
            const double k1 = op.grid.mode_of_bin(b1);
            s.add(w * (k0 * k0 + k1 * k1) *
                  std::cos(2.0 * M_PI * (k0 * t0 + k1 * t1) / n));
          }
        }
        K[static_cast<std::size_t>(t0) * n + t1] = s.value() / static_cast<double>(sz);
      }
    for (int i0 = 0; i0 < n; ++i0)
      for (int i1 = 0; i1 < n; ++i1)
        for (int j0 = 0; j0 < n; ++j0)
          for (int j1 = 0; j1 < n; ++j1) {
            const std::size_t r = static_cast<std::size_t>(i0) * n + i1;
            const std::size_t c = static_cast<std::size_t>(j0) * n + j1;
            const int d0 = ((i0 - j0) % n + n) % n, d1 = ((i1 - j1) % n + n) % n;
            A(r, c) = K[static_cast<std::size_t>(d0) * n + d1];
          }
  }
  for (std::size_t i = 0; i < sz; ++i) A(i, i) += op.shift - op.potential.v[i];
  return A;
}

std::vector<double> dense_eigenvalues(const AndersonOperator& op, int m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_matrix(op), Eigen::EigenvaluesOnly);
  std::vector<double> out(m);
  for (int k = 0; k < m; ++k) out[k] = es.eigenvalues()(k);
  return out;
}

GroundGauge ground_gauge(const EigenSystem& es) {
  if (es.count() == 0) throw std::invalid_argument("ground_gauge: empty eigensystem");
  GroundGauge g;
  g.lambda0 = es.lambda[0];
  g.u0 = es.u[0];
  if (g.u0.mean() < 0.0)
    for (double& x : g.u0.v) x = -x;
  const double mn = g.u0.min_value(), mx = g.u0.max_value();
  if (mn <= 0.0 || mn / std::max(mx, 1e-300) < 1e-6)
    throw std::runtime_error("ground state positivity violated");
  g.Z = GridField(g.u0.grid);
  g.e2z = GridField(g.u0.grid);
  for (std::size_t i = 0; i < g.u0.v.size(); ++i) {
    g.Z.v[i] = std::log(g.u0.v[i]);
    g.e2z.v[i] = g.u0.v[i] * g.u0.v[i];
  }
  return g;
}

GridField conjugate_apply(const GroundGauge& g, const GridField& w) {
  if (!(w.grid == g.u0.grid)) throw std::invalid_argument("conjugate_apply: grid mismatch");
  const TorusGrid& grid = w.grid;
  const SpectralField wh = to_spectral(w);
  SpectralField div_hat(grid);
  for (int axis = 0; axis < grid.dim; ++axis) {
    GridField q = to_grid(derivative(wh, axis));
    for (std::size_t i = 0; i < q.v.size(); ++i) q.v[i] *= g.e2z.v[i];
    const SpectralField dq = derivative(to_spectral(q), axis);
    for (std::size_t i = 0; i < div_hat.c.size(); ++i) div_hat.c[i] += dq.c[i];
  }
  GridField out = to_grid(div_hat);
  for (std::size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = -out.v[i] / g.e2z.v[i] + g.lambda0 * w.v[i];
  return out;
}

std::vector<std::vector<double>> ResolventProbe::consecutive_diffs() const {
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j + 1 < lambda.size(); ++j) {
    std::vector<double> row(lambda[j].size());
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = std::abs(lambda[j + 1][k] - lambda[j][k]);
    out.push_back(std::move(row));
  }
  return out;
}

ResolventProbe resolvent_probe(const TorusGrid& grid, std::uint64_t seed,
                               const std::vector<double>& eps_list, int m, bool renormalize,
                               double noise_amplitude) {
  for (std::size_t j = 0; j + 1 < eps_list.size(); ++j)
    if (!(eps_list[j + 1] < eps_list[j]))
      throw std::invalid_argument("resolvent_probe: eps_list must be decreasing");
  SpectralField xi = sample_white_noise(grid, seed);
  for (cplx& z : xi.c) z *= noise_amplitude;
  ResolventProbe probe;
  EigenSystem prev;
  for (const double eps : eps_list) {
    const Mollifier mol{eps};
    AndersonOperator op;
    op.grid = grid;
    op.potential = to_grid(mollify(xi, mol));
    op.shift = renormalize ? renorm_constant(grid, mol) * noise_amplitude * noise_amplitude : 0.0;
    op.seed = seed;
    EigensolveOptions opt;
    if (prev.count() > 0) opt.warm_start = &prev;
    EigenSystem es = eigensolve(op, m, opt);
    probe.eps.push_back(eps);
    probe.c.push_back(op.shift);
    probe.lambda.push_back(es.lambda);
    prev = std::move(es);
  }
  return probe;
}

}  // namespace anderlab
