// Local complex-analytic machinery on a disc patch: the adjoint gauge, the
// stream function, the Beltrami coefficient, a Neumann-series Beltrami
// solver (Beurling multiplier on a doubled periodic patch), the holomorphic
// factorization, Mori exponent fits, three-circles checks, and the
// nodal-set correspondence.
#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <vector>

#include "anderlab/grid.hpp"
#include "anderlab/operators.hpp"

namespace anderlab {

struct DiscPatch {
  Point center = {0.5, 0.5};  // torus coordinates
  double radius = 1.0 / 16;   // working disc, <= 1/8
  int m = 256;                // nodes per axis, power of two >= 64

  DiscPatch() = default;
  DiscPatch(const Point& c, double r, int m_);

  // chart geometry: square [-L, L)^2 with a node exactly at the origin
  double half_width() const { return 1.1 * radius; }
  double spacing() const { return 2.0 * half_width() / m; }
  double coord(int i) const { return -half_width() + i * spacing(); }
  std::size_t size() const { return static_cast<std::size_t>(m) * m; }

  // radii of the nested working regions
  double taper_inner() const { return 0.70 * radius; }  // taper == 1 inside
  double taper_outer() const { return 0.95 * radius; }  // taper == 0 outside
  double eval_radius() const { return 0.60 * radius; }  // residuals measured here

  double taper(double rad) const;  // smooth partition profile
  double node_radius(int i, int j) const;
};

// complex values on the patch grid, row-major with axis 0 (x) major
struct PatchField {
  DiscPatch patch;
  std::vector<cplx> v;

  PatchField() = default;
  explicit PatchField(const DiscPatch& p) : patch(p), v(p.size(), cplx(0, 0)) {}
  cplx& at(int i, int j) { return v[static_cast<std::size_t>(i) * patch.m + j]; }
  cplx at(int i, int j) const { return v[static_cast<std::size_t>(i) * patch.m + j]; }
};

// exact sampling of a torus trig interpolant on the patch nodes
PatchField sample_patch(const SpectralField& torus_field, const DiscPatch& p);

// spectral Wirtinger derivatives of the taper-periodized field; accurate
// where the taper is 1
struct WirtingerPair {
  PatchField d;      // del f
  PatchField dbar;   // del-bar f
};
WirtingerPair wirtinger(const PatchField& f);

// positive solution of div(e^{2Z} grad psi) + kappa e^{2Z} psi = 0 on the
// disc with psi = 1 on the boundary ring. Throws when kappa reaches the
// first Dirichlet eigenvalue ("patch too large for lambda").
std::vector<double> adjoint_gauge(const std::vector<double>& z_patch, const DiscPatch& p,
                                  double kappa);

// first Dirichlet eigenvalue of -div(e^{2Z} grad .)/e^{2Z} on the disc,
// same discretization as adjoint_gauge (inverse power iteration)
double dirichlet_ground_eigenvalue(const std::vector<double>& z_patch, const DiscPatch& p);

struct StreamResult {
  std::vector<double> s;   // stream function, s(center) = 0, valid on r < 0.9 R
  double residual = 0.0;   // gradient-system residual over the eval disc
};

// least-squares solve of grad s = (-a v_y, a v_x) with a = e^{2 z_eff};
// throws when the input is not divergence-free in the weighted sense
StreamResult stream_function(const std::vector<double>& z_eff, const std::vector<double>& v,
                             const DiscPatch& p);

struct BeltramiField {
  DiscPatch patch;
  std::vector<cplx> mu;   // compactly supported (collar cutoff applied)
  double k_sup = 0.0;
};

// mu = (1 - e^{2Z})/(1 + e^{2Z}) * (v_x + i v_y)/(v_x - i v_y) where the
// gradient is nonzero, 0 elsewhere, times the collar cutoff
BeltramiField beltrami_coefficient(const std::vector<double>& z_eff, const std::vector<double>& v,
                                   const DiscPatch& p);

struct QCMap {
  DiscPatch patch;
  std::vector<cplx> chi;       // normalized chi(0) = 0
  std::vector<cplx> dchi;      // del chi = 1 + S g
  std::vector<cplx> dbar_chi;  // del-bar chi = g
  double residual_beltrami = 0.0;
  double jacobian_min = 0.0;
  double contraction = 0.0;    // worst late-stage increment ratio
  int iterations = 0;
};

struct SolveBeltramiOptions {
  double tol = 1e-10;
  int max_iter = 400;
  int oversample = 1;  // internal refinement factor; needs mu_fn
  // resample mu analytically on the doubled solver grid when provided
  std::function<cplx(cplx)> mu_fn;
};

QCMap solve_beltrami(const BeltramiField& mu, const SolveBeltramiOptions& opt = {});

struct QCFactorization {
  // h = w o chi^{-1} on a square image grid [-a, a]^2
  double image_half_width = 0.0;
  int image_m = 0;
  std::vector<cplx> h;
  double residual_cr = 0.0;        // |dbar h| / |d h| over the image grid
  double harmonicity = 0.0;        // a |Lap Re h| / |grad Re h|
  double refactor_sup_error = 0.0; // sup |w - h o chi| / sup |w| on the eval disc
  int newton_failures = 0;

  cplx eval(const cplx& zeta) const;  // bicubic on the image grid
};

QCFactorization factorize(const PatchField& w, const QCMap& map);

struct MoriFit {
  double alpha = 0.0;
  double C = 0.0;
  int violations = 0;
};

// largest alpha in (0,1] whose two-sided bound holds over the sampled pairs
// with constant below the calibrated cap; distances normalized by diameters
MoriFit mori_estimate(const QCMap& map, int npairs, std::uint64_t seed, bool inverse = false);

// Hadamard three-circles ratio m(r) / (m(r1)^theta m(r2)^{1-theta}) with
// r = r1^theta r2^{1-theta}
double three_circles_holo(const std::function<cplx(cplx)>& h, double r1, double r2, double theta);

// same ratio with sup over the deformed balls {z : |chi(z)| <= r}
double three_circles_chi(const std::vector<double>& f, const QCMap& map, double r1, double r2,
                         double theta);

struct CorrespondenceReport {
  double agreement = 0.0;    // sign match fraction outside the delta band
  double harmonicity = 0.0;  // of Re h, copied from the factorization
};

CorrespondenceReport nodal_correspondence(const std::vector<double>& v, const QCMap& map,
                                          const QCFactorization& fact, double delta);

// ---------------------------------------------------------------------------
// end-to-end pipeline for one computed eigenfunction
// ---------------------------------------------------------------------------
struct QCPipelineResult {
  DiscPatch patch;              // final patch (radius may have been halved)
  int retries = 0;
  double kappa = 0.0;
  double div_residual = 0.0;    // weighted-divergence cancellation on the disc
  double stream_residual = 0.0;
  double beltrami_check = 0.0;  // |dbar w - mu del w| / |del w| on the eval disc
  double k_sup = 0.0;
  std::vector<double> v;        // conjugated, gauge-divided eigenfunction
  std::vector<double> z_eff;
  QCMap map;
  QCFactorization fact;
  CorrespondenceReport corr;
  MoriFit mori_fwd, mori_inv;
};

QCPipelineResult qc_pipeline(const EigenSystem& es, const GroundGauge& g, int k,
                             const DiscPatch& patch, double delta = 1e-2);

}  // namespace anderlab
