// Spectral projectors, the cosh cylinder extension, the spectral-inequality
// probe, HUM band controls, the dyadic control driver, and the exact
// eigenbasis simulator for the controlled 1D parabolic problem.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "anderlab/grid.hpp"
#include "anderlab/operators.hpp"

namespace anderlab {

// open sub-interval of the 1D torus, realized as an index mask
struct OmegaInterval {
  double a = 0.0;
  double b = 0.2;

  bool contains(double x) const {
    const double t = x - std::floor(x);
    return a <= b ? (t > a && t < b) : (t > a || t < b);
  }
  std::vector<int> mask(const TorusGrid& g) const;  // indices of cells inside
};

// P_lambda u = sum_{lambda_k <= lambda} <u, u_k> u_k
GridField project(const EigenSystem& es, double lambda, const GridField& u);
std::vector<int> retained_modes(const EigenSystem& es, double lambda);

struct CylinderExtension {
  std::vector<int> modes;       // retained indices
  std::vector<double> coeff;    // a_k
  double Y = 0.0;
  int ny = 0;                   // y-nodes on [-Y, Y], odd so y = 0 is a node
  double pde_residual = 0.0;    // relative L2 over the cylinder

  double y_node(int iy) const { return -Y + 2.0 * Y * iy / (ny - 1); }
  // f(x_i, y) for one y level
  std::vector<double> slice(const EigenSystem& es, const GroundGauge& g, double y) const;
};

CylinderExtension cylinder_extension(const EigenSystem& es, const GroundGauge& g,
                                     const GridField& u, double lambda, double Y, int ny = 129);

struct SpectralIneqReport {
  std::vector<double> lambda;    // probe grid
  std::vector<double> ratio;     // R(lambda), max over trials (incl. the
                                 // deterministic least-observable trial)
  std::vector<bool> saturated;   // ratio at the double-precision floor,
                                 // excluded from the growth fit
  double C_fit = 0.0;            // envelope slope in sqrt(lambda - lambda0)
  double c0 = 0.0;               // envelope intercept
  double fit_residual = 0.0;     // rms LS residual over trusted points,
                                 // relative to their log-range
  int violations = 0;            // points above the reported envelope
};

SpectralIneqReport spectral_inequality_probe(const EigenSystem& es, const OmegaInterval& omega,
                                             const std::vector<double>& lambda_grid, int trials,
                                             std::uint64_t seed);

struct HumControl {
  std::vector<int> band;
  double tau = 0.0;
  Eigen::VectorXd c;             // coefficients of the exponential ansatz
  Eigen::MatrixXd omega_gram;    // O_kl = int_omega u_k u_l
  double cost = 0.0;             // L2(omega x (0,tau)) norm of the control
  double gramian_cond = 0.0;
  double steering_defect = 0.0;  // |G c + target defect|
  bool regularized = false;
};

// minimal-L2 control steering the band coefficients to zero at time tau,
// f(t,x) = 1_omega(x) sum_l c_l e^{-lambda_l (tau - t)} u_l(x)
HumControl hum_control(const EigenSystem& es, const OmegaInterval& omega,
                       const std::vector<int>& band, double tau, const Eigen::VectorXd& a0);

// control sampled on a time grid in mode-source form:
// b_k(t) = <f(t,.) 1_omega, u_k>
struct SampledControl {
  std::vector<double> t;
  Eigen::MatrixXd b;  // rows: modes of the eigensystem, cols: time nodes
  double sq_cost = 0.0;
};

struct ControlProblem {
  OmegaInterval omega;
  double T = 1.0;
  GridField g0;
  int m = 0;  // mode truncation
};

struct StageInfo {
  int index = 0;
  double t_begin = 0.0, t_mid = 0.0, t_end = 0.0;
  std::vector<int> band;
  double gramian_cond = 0.0;
  double cost = 0.0;
};

struct ControlResult {
  SampledControl control;
  std::vector<double> t;         // trajectory time grid
  Eigen::MatrixXd a;             // mode coefficients along the trajectory
  double terminal_norm = 0.0;
  double cost = 0.0;
  double cost_ratio = 0.0;       // cost / |g0|
  std::vector<StageInfo> stages;
};

// dyadic band strategy: stage j controls {k : lambda_k - lambda_0 < 4^{j+1}}
// on the first half of a duration proportional to 2^{-j/2}, then relaxes
ControlResult lebeau_rousseau_drive(const EigenSystem& es, const ControlProblem& problem);

// exact exponential integration per mode with 4-point Gauss source quadrature
// (cubic interpolation of the sampled sources between time nodes)
struct Trajectory {
  std::vector<double> t;
  Eigen::MatrixXd a;
  double terminal_norm = 0.0;
};

Trajectory pam_simulate(const EigenSystem& es, const Eigen::VectorXd& a0,
                        const SampledControl& control, double T, int substeps = 1);

}  // namespace anderlab
