// Frozen calibrated constants. The inequality verifiers carry unspecified
// constants; these values were calibrated once on the reference corpus
// (fixed seeds, desk-scale grids) and are regression-tested against it.
#pragma once

namespace anderlab::calib {

// weighted gradient bound: corpus max ratio 0.985 over 10 seeds,
// k in {1,2,3}, N = 128, r in {1/32, 1/16, 1/8}
inline constexpr double kCaccioppoliBound = 1.5;

// singular-weight bound: corpus max ratio 1.1e-3 over annular bumps in
// d = 1, 2 with beta in {0,...,10}
inline constexpr double kAronszajnBound = 0.01;
inline constexpr double kAronszajnSlopeBound = 0.01;

// three-circles convexity over deformed balls: corpus max 1.015 over the
// five-seed pipeline with theta in {0.3, 0.5, 0.7}
inline constexpr double kThreeCirclesChiBound = 1.5;

// distortion fits snap to alpha = 1 below this worst-pair constant
inline constexpr double kMoriBiLipschitzSnap = 2.0;

// default relative zero-band threshold for nodal counting
inline constexpr double kNodalDelta = 1e-3;

}  // namespace anderlab::calib
