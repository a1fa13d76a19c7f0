// Preconditioned block eigensolver (LOBPCG with full basis orthonormalization
// each sweep). The preconditioner is the shifted inverse Laplacian applied
// spectrally; every dense reduction is handled by Eigen on small matrices, so
// results are deterministic for fixed (operator, m, options).
#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "anderlab/operators.hpp"
#include "anderlab/util.hpp"

namespace anderlab {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// spectral scratch: -Lap + diag and (-Lap + beta)^{-1} on raw columns
class SpectralKernel {
 public:
  explicit SpectralKernel(const TorusGrid& g) : grid_(g), buf_(g.size()), hat_(g.size()), symbol_(g.size()) {
    const int n = g.n;
    const double w = 4.0 * M_PI * M_PI;
    if (g.dim == 1) {
      for (int b = 0; b < n; ++b) {
        const double k = g.mode_of_bin(b);
        symbol_[b] = w * k * k;
      }
    } else {
      for (int bi = 0; bi < n; ++bi) {
        const double k0 = g.mode_of_bin(bi);
        for (int bj = 0; bj < n; ++bj) {
          const double k1 = g.mode_of_bin(bj);
          symbol_[static_cast<std::size_t>(bi) * n + bj] = w * (k0 * k0 + k1 * k1);
        }
      }
    }
  }

  // out = (-Lap) in + veff .* in
  void apply_operator(const std::vector<double>& veff, const double* in, double* out) {
    const std::size_t sz = grid_.size();
    for (std::size_t i = 0; i < sz; ++i) buf_[i] = cplx(in[i], 0.0);
    fft_forward(grid_.dim, grid_.n, buf_.data(), hat_.data());
    for (std::size_t i = 0; i < sz; ++i) hat_[i] *= symbol_[i];
    fft_backward(grid_.dim, grid_.n, hat_.data(), buf_.data());
    const double scale = 1.0 / static_cast<double>(sz);
    for (std::size_t i = 0; i < sz; ++i) out[i] = buf_[i].real() * scale + veff[i] * in[i];
  }

  // out = (-Lap + beta)^{-1} in
  void apply_preconditioner(double beta, const double* in, double* out) {
    const std::size_t sz = grid_.size();
    for (std::size_t i = 0; i < sz; ++i) buf_[i] = cplx(in[i], 0.0);
    fft_forward(grid_.dim, grid_.n, buf_.data(), hat_.data());
    for (std::size_t i = 0; i < sz; ++i) hat_[i] /= (symbol_[i] + beta);
    fft_backward(grid_.dim, grid_.n, hat_.data(), buf_.data());
    const double scale = 1.0 / static_cast<double>(sz);
    for (std::size_t i = 0; i < sz; ++i) out[i] = buf_[i].real() * scale;
  }

 private:
  TorusGrid grid_;
  std::vector<cplx> buf_, hat_;
  std::vector<double> symbol_;
};

// Two-pass modified Gram-Schmidt over the columns of S; near-dependent
// columns are dropped. Returns the surviving column count. The operator
// product is recomputed on the survivors afterwards (projections cancel
// near-converged directions almost completely, so a mirrored product would
// amplify rounding noise by the normalization).
int mgs_drop(Mat& S) {
  const int n_in = static_cast<int>(S.cols());
  int kept = 0;
  for (int j = 0; j < n_in; ++j) {
    Vec s = S.col(j);
    const double orig = s.norm();
    if (orig == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < kept; ++i) s -= S.col(i).dot(s) * S.col(i);
    const double nrm = s.norm();
    if (nrm < 1e-8 * orig) continue;  // numerically dependent, drop
    S.col(kept) = s / nrm;
    ++kept;
  }
  S.conservativeResize(Eigen::NoChange, kept);
  return kept;
}

// plain MGS for the start block (no tracked product yet)
void mgs_single(Mat& S) {
  const int cols = static_cast<int>(S.cols());
  for (int j = 0; j < cols; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < j; ++i) S.col(j) -= S.col(i).dot(S.col(j)) * S.col(i);
    const double nrm = S.col(j).norm();
    if (nrm < 1e-14) {
      // refill degenerate start column deterministically
      HashRng rng(0xC0FFEEULL + static_cast<std::uint64_t>(j));
      for (Eigen::Index r = 0; r < S.rows(); ++r) S(r, j) = rng.next_gaussian();
      for (int i = 0; i < j; ++i) S.col(j) -= S.col(i).dot(S.col(j)) * S.col(i);
      S.col(j).normalize();
    } else {
      S.col(j) /= nrm;
    }
  }
}

}  // namespace

EigenSystem eigensolve(const AndersonOperator& op, int m, const EigensolveOptions& opt) {
  const std::size_t n = op.grid.size();
  if (m < 1) throw std::invalid_argument("eigensolve: m must be positive");
  if (static_cast<std::size_t>(m) > n / 4) throw std::invalid_argument("eigensolve: m exceeds N^d/4");

  const int pad = opt.block_pad >= 0 ? opt.block_pad : std::max(4, m / 2);
  const int p = std::min<int>(m + pad, static_cast<int>(n / 2));

  std::vector<double> veff(n);
  for (std::size_t i = 0; i < n; ++i) veff[i] = op.shift - op.potential.v[i];
  double vmin = veff[0], vmax = veff[0];
  for (double v : veff) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const double beta = std::max(1.0, 0.5 * (vmax - vmin));

  SpectralKernel kernel(op.grid);
  auto apply_block = [&](const Mat& in, Mat& out) {
    out.resize(in.rows(), in.cols());
    for (int j = 0; j < in.cols(); ++j)
      kernel.apply_operator(veff, in.col(j).data(), out.col(j).data());
  };

  // deterministic start block: warm-start vectors first, then seeded noise
  Mat X(n, p);
  int filled = 0;
  if (opt.warm_start != nullptr) {
    for (int k = 0; k < opt.warm_start->count() && filled < p; ++k, ++filled)
      for (std::size_t i = 0; i < n; ++i) X(i, filled) = opt.warm_start->u[k].v[i];
  }
  for (int j = filled; j < p; ++j) {
    HashRng rng(op.seed ^ 0x5EEDB10CULL, j);
    for (std::size_t i = 0; i < n; ++i) X(i, j) = rng.next_gaussian();
  }
  mgs_single(X);

  Mat AX;
  apply_block(X, AX);
  Mat P(n, 0);

  Vec theta = Vec::Zero(p);
  Vec resid = Vec::Constant(p, 1e30);
  bool converged = false;
  int it = 0;

  auto ritz_on_x = [&]() {
    Mat H = X.transpose() * AX;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    theta = es.eigenvalues();
    X = (X * es.eigenvectors()).eval();
    AX = (AX * es.eigenvectors()).eval();
  };

  auto check = [&]() {
    converged = true;
    for (int k = 0; k < m; ++k) {
      resid(k) = (AX.col(k) - theta(k) * X.col(k)).norm();
      if (resid(k) > opt.tol * std::max(1.0, std::abs(theta(k)))) converged = false;
    }
  };

  for (it = 1; it <= opt.max_iter; ++it) {
    ritz_on_x();
    // guard against drift in the tracked product AX
    if (it % 25 == 0) apply_block(X, AX);
    check();
    if (converged) {
      apply_block(X, AX);  // certify with a fresh product
      ritz_on_x();
      check();
      if (converged) break;
    }

    Mat R(n, p);
    for (int k = 0; k < p; ++k) R.col(k) = AX.col(k) - theta(k) * X.col(k);
    Mat W(n, p);
    for (int k = 0; k < p; ++k) {
      kernel.apply_preconditioner(beta, R.col(k).data(), W.col(k).data());
      const double nrm = W.col(k).norm();
      if (nrm > 0.0) W.col(k) /= nrm;
    }

    const int cols = p + static_cast<int>(W.cols()) + static_cast<int>(P.cols());
    Mat S(n, cols);
    S << X, W, P;
    const int kept = mgs_drop(S);
    if (kept <= p) continue;  // no new directions survived; try a fresh sweep

    // operator product: X columns are untouched by MGS, the rest is fresh
    Mat AS(n, kept);
    AS.leftCols(p) = AX;
    for (int j = p; j < kept; ++j)
      kernel.apply_operator(veff, S.col(j).data(), AS.col(j).data());

    Mat Hs = S.transpose() * AS;
    Hs = 0.5 * (Hs + Hs.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(Hs);
    const Mat Y = es.eigenvectors().leftCols(p);

    const Mat Xn = S * Y;
    const Mat AXn = AS * Y;
    // correction directions: the non-X part of the new Ritz vectors
    const int tail = kept - p;
    Mat Pn = S.rightCols(tail) * Y.bottomRows(tail);
    X = Xn;
    AX = AXn;
    P = Pn;
    if (P.cols() > p) P.conservativeResize(Eigen::NoChange, p);
  }

  if (!converged) {
    double worst = 0.0;
    for (int k = 0; k < m; ++k) worst = std::max(worst, resid(k) / std::max(1.0, std::abs(theta(k))));
    throw EigensolveError("eigensolve: no convergence within iteration budget", worst);
  }

  // package: unit-L2 eigenfunctions, honest residuals via a fresh apply
  EigenSystem out;
  out.grid = op.grid;
  out.iterations = it;
  const double to_l2 = std::sqrt(static_cast<double>(n));  // euclid-unit -> L2-unit
  for (int k = 0; k < m; ++k) {
    GridField uk(op.grid);
    for (std::size_t i = 0; i < n; ++i) uk.v[i] = X(i, k) * to_l2;
    out.lambda.push_back(theta(k));
    out.u.push_back(std::move(uk));
  }
  for (int k = 0; k < m; ++k) {
    const GridField Au = op.apply(out.u[k]);
    CompensatedSum s;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = Au.v[i] - out.lambda[k] * out.u[k].v[i];
      s.add(r * r);
    }
    out.residual.push_back(std::sqrt(s.value() * op.grid.cell_volume()));
  }
  double defect = 0.0;
  for (int k = 0; k < m; ++k)
    for (int l = k; l < m; ++l) {
      const double dot = out.u[k].l2_inner(out.u[l]);
      defect = std::max(defect, std::abs(dot - (k == l ? 1.0 : 0.0)));
    }
  out.orth_defect = defect;
  return out;
}

}  // namespace anderlab
