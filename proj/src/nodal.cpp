#include "anderlab/nodal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "anderlab/util.hpp"

namespace anderlab {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

NodalDecomposition nodal_domains(const GridField& u, double delta) {
  if (delta < 0.0 || delta > 0.1) throw std::invalid_argument("nodal_domains: delta outside [0, 0.1]");
  const double umax = u.max_abs();
  if (umax == 0.0) throw std::invalid_argument("nodal_domains: field is identically zero");
  const double thr = delta * umax;
  const TorusGrid& g = u.grid;
  const int n = g.n;
  const std::size_t sz = g.size();

  std::vector<signed char> sign(sz, 0);
  for (std::size_t i = 0; i < sz; ++i)
    if (std::abs(u.v[i]) > thr) sign[i] = u.v[i] > 0.0 ? 1 : -1;

  UnionFind uf(sz);
  if (g.dim == 1) {
    for (int i = 0; i < n; ++i) {
      const int j = (i + 1) % n;
      if (sign[i] != 0 && sign[i] == sign[j]) uf.unite(i, j);
    }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::size_t a = static_cast<std::size_t>(i) * n + j;
        const std::size_t right = static_cast<std::size_t>(i) * n + (j + 1) % n;
        const std::size_t down = static_cast<std::size_t>((i + 1) % n) * n + j;
        if (sign[a] != 0 && sign[a] == sign[right]) uf.unite(static_cast<int>(a), static_cast<int>(right));
        if (sign[a] != 0 && sign[a] == sign[down]) uf.unite(static_cast<int>(a), static_cast<int>(down));
      }
  }

  NodalDecomposition out;
  out.grid = g;
  out.delta = delta;
  out.label.assign(sz, 0);
  std::vector<int> root_label(sz, 0);
  int next = 0;
  for (std::size_t i = 0; i < sz; ++i) {
    if (sign[i] == 0) continue;
    const int r = uf.find(static_cast<int>(i));
    if (root_label[r] == 0) root_label[r] = ++next;  // row-major first touch
    out.label[i] = root_label[r];
  }
  out.domain_count = next;
  return out;
}

CourantReport courant_check(const EigenSystem& es, double delta) {
  CourantReport report;
  report.delta = delta;
  const int m = es.count();
  // degenerate clusters share the weakest (highest) rank
  std::vector<int> rank_bound(m);
  int start = 0;
  while (start < m) {
    int end = start;
    while (end + 1 < m) {
      const double scale = std::max({1.0, std::abs(es.lambda[end]), std::abs(es.lambda[end + 1])});
      if (es.lambda[end + 1] - es.lambda[end] < 1e-6 * scale)
        ++end;
      else
        break;
    }
    for (int k = start; k <= end; ++k) rank_bound[k] = end + 1;  // 1-based
    start = end + 1;
  }
  for (int k = 0; k < m; ++k) {
    CourantRow row;
    row.index = k;
    row.rank_bound = rank_bound[k];
    row.domains = nodal_domains(es.u[k], delta).domain_count;
    row.pass = row.domains <= row.rank_bound;
    report.all_pass = report.all_pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

DoublingReport doubling_index(const GridField& u, const Point& x0, const std::vector<double>& radii) {
  DoublingReport rep;
  rep.x0 = x0;
  GridField usq(u.grid);
  for (std::size_t i = 0; i < u.v.size(); ++i) usq.v[i] = u.v[i] * u.v[i];
  for (const double r : radii) {
    if (r <= 0.0 || r > 0.25 || 2.0 * r >= 0.5)
      throw std::invalid_argument("doubling_index: radius outside (0, 1/4] or 2r >= 1/2");
    const double q = ball_integral(usq, x0, r);
    const double q2 = ball_integral(usq, x0, 2.0 * r);
    rep.radii.push_back(r);
    rep.Q.push_back(q);
    rep.Q_doubled.push_back(q2);
    if (q < 1e-30) {
      rep.numerically_zero = true;
      rep.beta.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      rep.beta.push_back(std::log2(q2 / q));
    }
  }
  return rep;
}

std::vector<std::pair<double, double>> caccioppoli_verify(const GroundGauge& g, const GridField& u,
                                                          const Point& x0,
                                                          const std::vector<double>& radii) {
  const TorusGrid& grid = u.grid;
  const SpectralField uh = to_spectral(u);
  const SpectralField zh = to_spectral(g.Z);

  GridField grad_sq(grid);  // e^{2Z} |grad u|^2
  GridField drift_sq(grid);  // e^{2Z} (Lap u + 2 grad Z . grad u)^2
  GridField mass(grid);      // e^{2Z} u^2
  GridField lap_u = to_grid(neg_laplacian(uh));
  for (double& x : lap_u.v) x = -x;
  std::vector<GridField> du, dz;
  for (int a = 0; a < grid.dim; ++a) {
    du.push_back(to_grid(derivative(uh, a)));
    dz.push_back(to_grid(derivative(zh, a)));
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double gsq = 0.0, drift = lap_u.v[i];
    for (int a = 0; a < grid.dim; ++a) {
      gsq += du[a].v[i] * du[a].v[i];
      drift += 2.0 * dz[a].v[i] * du[a].v[i];
    }
    grad_sq.v[i] = g.e2z.v[i] * gsq;
    drift_sq.v[i] = g.e2z.v[i] * drift * drift;
    mass.v[i] = g.e2z.v[i] * u.v[i] * u.v[i];
  }

  std::vector<std::pair<double, double>> out;
  for (const double r : radii) {
    if (r <= 0.0 || 2.0 * r >= 0.5) throw std::invalid_argument("caccioppoli_verify: bad radius");
    const double lhs = ball_integral(grad_sq, x0, 0.5 * r);
    const double rhs = ball_integral(mass, x0, r) / (r * r) + r * r * ball_integral(drift_sq, x0, r);
    if (rhs == 0.0) {
      if (lhs != 0.0) throw std::runtime_error("caccioppoli_verify: zero RHS with nonzero LHS");
      out.emplace_back(r, 0.0);
    } else {
      out.emplace_back(r, lhs / rhs);
    }
  }
  return out;
}

double aronszajn_verify(const GridField& w, double r, double beta) {
  if (beta < 0.0) throw std::invalid_argument("aronszajn_verify: beta must be nonnegative");
  if (r <= 0.0 || r > 0.25) throw std::invalid_argument("aronszajn_verify: r outside (0, 1/4]");
  const TorusGrid& g = w.grid;
  const int n = g.n;
  const double h = g.spacing();
  const double wmax = w.max_abs();
  if (wmax == 0.0) throw std::invalid_argument("aronszajn_verify: w identically zero");

  // support precondition: w vanishes outside B(0,r) and on a neighborhood
  // of the origin (4 cells keeps the difference stencils clear of it)
  auto radius_of = [&](int i, int j) {
    const double x = torus_delta(static_cast<double>(i) / n, 0.0);
    const double y = g.dim == 2 ? torus_delta(static_cast<double>(j) / n, 0.0) : 0.0;
    return std::sqrt(x * x + y * y);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < (g.dim == 2 ? n : 1); ++j) {
      const double rad = radius_of(i, j);
      const double val = g.dim == 1 ? std::abs(w.at(i)) : std::abs(w.at(i, j));
      if ((rad > r || rad <= 4.0 * h) && val > 1e-14 * wmax)
        throw std::invalid_argument("aronszajn_verify: support condition violated");
    }

  // centered differences: identically zero off the support, unlike a
  // spectral derivative whose ringing the singular weight would amplify
  auto wat = [&](int i, int j) {
    const int ii = (i % n + n) % n, jj = (j % n + n) % n;
    return g.dim == 1 ? w.at(ii) : w.at(ii, jj);
  };
  CompensatedSum lhs_sum, rhs_sum;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < (g.dim == 2 ? n : 1); ++j) {
      const double rad = radius_of(i, j);
      if (rad == 0.0) continue;  // excluded cell at the singularity
      const double val = wat(i, j);
      double grad_sq, lap;
      if (g.dim == 1) {
        const double wp = wat(i + 1, 0), wm = wat(i - 1, 0);
        const double d = (wp - wm) / (2 * h);
        grad_sq = d * d;
        lap = (wp - 2 * val + wm) / (h * h);
      } else {
        const double we = wat(i + 1, j), ww = wat(i - 1, j), wn = wat(i, j + 1), ws = wat(i, j - 1);
        const double dx = (we - ww) / (2 * h), dy = (wn - ws) / (2 * h);
        grad_sq = dx * dx + dy * dy;
        lap = (we + ww + wn + ws - 4 * val) / (h * h);
      }
      if (val == 0.0 && grad_sq == 0.0 && lap == 0.0) continue;
      const double weight = std::pow(rad, -2.0 * beta);
      lhs_sum.add((val * val + grad_sq) * weight);
      rhs_sum.add(lap * lap * weight);
    }
  const double cell = g.cell_volume();
  const double denom = r * r * rhs_sum.value() * cell;
  if (denom == 0.0) throw std::runtime_error("aronszajn_verify: zero denominator");
  return lhs_sum.value() * cell / denom;
}

namespace {

// exact cumulative integral of a trig polynomial from 0 to the grid points;
// the mean contributes a linear (non-periodic) part
GridField spectral_cumint(const GridField& f) {
  const TorusGrid& g = f.grid;
  const SpectralField fh = to_spectral(f);
  SpectralField anti(g);
  for (int b = 0; b < g.n; ++b) {
    const double k = g.mode_of_bin(b);
    if (k != 0.0) anti.c[b] = fh.c[b] / cplx(0.0, 2.0 * M_PI * k);
  }
  const GridField F = to_grid(anti);
  const double mean = fh.c[0].real();
  GridField out(g);
  for (int i = 0; i < g.n; ++i)
    out.at(i) = F.at(i) - F.at(0) + mean * static_cast<double>(i) / g.n;
  return out;
}

}  // namespace

FluxResult flux_variable_1d(const GroundGauge& g, const GridField& u, double lambda) {
  if (u.grid.dim != 1) throw std::invalid_argument("flux_variable_1d: 1D only");
  const TorusGrid& grid = u.grid;
  FluxResult res;

  const GridField du = to_grid(derivative(to_spectral(u), 0));
  GridField flux(grid);  // e^{2Z} u'
  for (int i = 0; i < grid.n; ++i) flux.at(i) = g.e2z.v[i] * du.at(i);
  res.v = spectral_cumint(flux);
  res.v_prime = flux;

  const double kappa = lambda - g.lambda0;
  if (kappa != 0.0) {
    // (e^{2Z} u')' = -e^{2Z}(lambda - lambda0) u
    const GridField dflux = to_grid(derivative(to_spectral(flux), 0));
    CompensatedSum num, den;
    for (int i = 0; i < grid.n; ++i) {
      const double target = g.e2z.v[i] * kappa * u.at(i);
      const double rsd = dflux.at(i) + target;
      num.add(rsd * rsd);
      den.add(target * target);
    }
    res.residual = std::sqrt(num.value() / std::max(den.value(), 1e-300));
  }

  // u(x) = u(0) + int_0^x e^{-2Z} v'
  GridField integrand(grid);
  for (int i = 0; i < grid.n; ++i) integrand.at(i) = flux.at(i) / g.e2z.v[i];
  const GridField rec = spectral_cumint(integrand);
  double worst = 0.0;
  for (int i = 0; i < grid.n; ++i) worst = std::max(worst, std::abs(u.at(0) + rec.at(i) - u.at(i)));
  res.reconstruction_error = worst;
  return res;
}

}  // namespace anderlab
