// Nodal-domain decomposition and the Courant bound, vanishing-order
// (doubling) diagnostics, the Caccioppoli and Aronszajn inequality checks,
// and the 1D flux-variable identity.
#pragma once

#include <optional>
#include <vector>

#include "anderlab/grid.hpp"
#include "anderlab/operators.hpp"

namespace anderlab {

struct NodalDecomposition {
  TorusGrid grid;
  std::vector<int> label;  // 0 = zero band, domains numbered 1..domain_count
  int domain_count = 0;
  double delta = 0.0;      // threshold relative to |u|_inf
};

// connected components of {|u| > delta |u|_inf} by sign, 4-neighbor
// adjacency with torus wraparound
NodalDecomposition nodal_domains(const GridField& u, double delta);

struct CourantRow {
  int index = 0;       // 0-based position in the computed spectrum
  int rank_bound = 0;  // 1-based rank; ties resolved to the top of the cluster
  int domains = 0;
  bool pass = false;
};

struct CourantReport {
  double delta = 0.0;
  std::vector<CourantRow> rows;
  bool all_pass = true;
};

CourantReport courant_check(const EigenSystem& es, double delta);

struct DoublingReport {
  Point x0 = {0, 0};
  std::vector<double> radii;
  std::vector<double> Q;          // mass of u^2 on B(x0, r)
  std::vector<double> Q_doubled;  // mass on B(x0, 2r)
  std::vector<double> beta;       // log2(Q(2r) / Q(r))
  bool numerically_zero = false;  // some Q fell below 1e-30
};

DoublingReport doubling_index(const GridField& u, const Point& x0, const std::vector<double>& radii);

// per radius: (r, LHS/RHS) for the weighted gradient bound
// LHS = int_{B(r/2)} e^{2Z} |grad u|^2
// RHS = r^{-2} int_{B(r)} e^{2Z} u^2 + r^2 int_{B(r)} e^{2Z} |Lap u + 2 grad Z . grad u|^2
std::vector<std::pair<double, double>> caccioppoli_verify(const GroundGauge& g, const GridField& u,
                                                          const Point& x0,
                                                          const std::vector<double>& radii);

// weighted LHS / (r^2 weighted RHS) with weight |x|^{-2 beta}; w must vanish
// outside B(0,r) and near 0 (checked); derivatives by centered differences so
// the integrand is exactly zero off the support
double aronszajn_verify(const GridField& w, double r, double beta);

struct FluxResult {
  GridField v;                      // v(x) = int_0^x e^{2Z} u' ds, v(0) = 0
  GridField v_prime;                // e^{2Z} u' (exact derivative of v)
  std::optional<double> residual;   // |v'' + e^{2Z}(lambda-lambda0) u| relative;
                                    // empty when lambda == lambda0
  double reconstruction_error = 0;  // sup |u(0) + int_0^x e^{-2Z} v' - u(x)|
};

FluxResult flux_variable_1d(const GroundGauge& g, const GridField& u, double lambda);

}  // namespace anderlab
