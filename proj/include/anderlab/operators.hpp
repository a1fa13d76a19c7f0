// The renormalized Anderson operator A v = -Lap v - xi^eps v + c_eps v,
// its low spectrum, the positive ground state, and the ground-state
// conjugation to divergence form.
//
// Sign convention: the operator is bounded below with spectrum increasing to
// +infinity, so eigenvalue gaps lambda_k - lambda_0 are nonnegative
// throughout the pipeline.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "anderlab/grid.hpp"
#include "anderlab/noise.hpp"

namespace anderlab {

struct AndersonOperator {
  TorusGrid grid;
  GridField potential;      // xi^eps values, subtracted pointwise
  double shift = 0.0;       // c_eps, added pointwise
  std::uint64_t seed = 0;   // start-vector seed for the eigensolver

  static AndersonOperator from_noise(const EnhancedNoise& en);
  static AndersonOperator free_laplacian(const TorusGrid& g, std::uint64_t seed = 0);

  GridField apply(const GridField& v) const;
};

struct EigenSystem {
  TorusGrid grid;
  std::vector<double> lambda;     // sorted non-decreasing
  std::vector<GridField> u;       // unit L2 norm
  std::vector<double> residual;   // |A u_k - lambda_k u_k|_{L2}
  double orth_defect = 0.0;       // max |<u_k,u_l> - delta_kl|
  int iterations = 0;

  int count() const { return static_cast<int>(lambda.size()); }
};

class EigensolveError : public std::runtime_error {
 public:
  EigensolveError(const std::string& msg, double worst)
      : std::runtime_error(msg), worst_residual(worst) {}
  double worst_residual;
};

struct EigensolveOptions {
  double tol = 1e-9;        // relative residual target, per eigenpair
  int max_iter = 800;
  int block_pad = -1;       // -1: max(4, m/2)
  const EigenSystem* warm_start = nullptr;
};

// Matrix-free preconditioned block solver for the m lowest eigenpairs.
// Deterministic given (operator, m, options). Throws EigensolveError on
// non-convergence.
EigenSystem eigensolve(const AndersonOperator& op, int m, const EigensolveOptions& opt = {});

// Dense oracle: assembles the operator by direct symbol sums (no FFT path)
Eigen::MatrixXd dense_matrix(const AndersonOperator& op);
std::vector<double> dense_eigenvalues(const AndersonOperator& op, int m);

struct GroundGauge {
  GridField u0;       // min u0 > 0, unit L2, positive mean
  GridField Z;        // log u0
  GridField e2z;      // exp(2 Z), cached for the conjugated operator
  double lambda0 = 0.0;
};

GroundGauge ground_gauge(const EigenSystem& es);

// H~ w = -exp(-2Z) div(exp(2Z) grad w) + lambda0 w
GridField conjugate_apply(const GroundGauge& g, const GridField& w);

struct ResolventProbe {
  std::vector<double> eps;                  // dyadic decreasing
  std::vector<double> c;                    // constant actually subtracted
  std::vector<std::vector<double>> lambda;  // [eps index][k]
  // |lambda_k(eps_{j+1}) - lambda_k(eps_j)| for each k
  std::vector<std::vector<double>> consecutive_diffs() const;
};

// noise_amplitude scales the sampled noise (0 reproduces the free operator)
ResolventProbe resolvent_probe(const TorusGrid& grid, std::uint64_t seed,
                               const std::vector<double>& eps_list, int m,
                               bool renormalize = true, double noise_amplitude = 1.0);

}  // namespace anderlab
