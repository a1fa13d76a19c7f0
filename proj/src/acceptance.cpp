#include "anderlab/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <mutex>
#include <sstream>

#include "anderlab/calibration.hpp"
#include "anderlab/control.hpp"
#include "anderlab/io.hpp"
#include "anderlab/nodal.hpp"
#include "anderlab/qc.hpp"
#include "anderlab/util.hpp"

namespace anderlab::acceptance {

namespace {

using nlohmann::json;

constexpr double kEps = 0.05;  // mollification scale of the reference corpus

struct Ctx {
  std::filesystem::path out;
  int jobs = 1;
  SuiteResult* suite = nullptr;
  std::mutex mtx;

  void record_artifact(const std::filesystem::path& p) {
    std::lock_guard<std::mutex> lock(mtx);
    suite->artifact_hashes[std::filesystem::relative(p, out).string()] = io::sha256_file(p);
  }
};

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(3);
  ss << x;
  return ss.str();
}

Point min_abs_point(const GridField& v) {
  std::size_t arg = 0;
  for (std::size_t i = 0; i < v.v.size(); ++i)
    if (std::abs(v.v[i]) < std::abs(v.v[arg])) arg = i;
  const int n = v.grid.n;
  return {static_cast<double>(arg / n) / n, static_cast<double>(arg % n) / n};
}

GridField conjugated(const EigenSystem& es, const GroundGauge& g, int k) {
  GridField v(es.grid);
  for (std::size_t i = 0; i < v.v.size(); ++i) v.v[i] = es.u[k].v[i] / g.u0.v[i];
  return v;
}

// shared corpus for criteria 4, 6, and 11: one eigensystem per seed
struct Corpus2D {
  std::vector<EigenSystem> systems;  // seeds 1..20, d=2, N=128, m=10
  static const Corpus2D& get(int jobs) {
    static Corpus2D corpus;
    static std::once_flag once;
    std::call_once(once, [&]() {
      corpus.systems.resize(20);
      parallel_for(20, jobs, [&](std::size_t s) {
        const TorusGrid g(2, 128);
        const auto en = enhance(g, s + 1, Mollifier{kEps});
        corpus.systems[s] = eigensolve(AndersonOperator::from_noise(en), 10);
      });
    });
    return corpus;
  }
};

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

CriterionResult criterion_1(Ctx& ctx) {
  CriterionResult r{1, "laplacian baseline (d = 1, 2)", true, 0, ""};
  const double w = 4 * M_PI * M_PI;
  double worst = 0.0;
  {
    const auto es = eigensolve(AndersonOperator::free_laplacian(TorusGrid(1, 64)), 10);
    const std::vector<double> expect = {0, w, w, 4 * w, 4 * w, 9 * w, 9 * w, 16 * w, 16 * w, 25 * w};
    for (int k = 0; k < 10; ++k)
      worst = std::max(worst, std::abs(es.lambda[k] - expect[k]) / std::max(1.0, expect[k]));
    io::write_eigenvalues_csv(ctx.out / "criterion_01" / "eigenvalues_1d.csv", es);
    ctx.record_artifact(ctx.out / "criterion_01" / "eigenvalues_1d.csv");
  }
  {
    const auto es = eigensolve(AndersonOperator::free_laplacian(TorusGrid(2, 16)), 10);
    const std::vector<double> expect = {0, w, w, w, w, 2 * w, 2 * w, 2 * w, 2 * w, 4 * w};
    for (int k = 0; k < 10; ++k)
      worst = std::max(worst, std::abs(es.lambda[k] - expect[k]) / std::max(1.0, expect[k]));
    io::write_eigenvalues_csv(ctx.out / "criterion_01" / "eigenvalues_2d.csv", es);
    ctx.record_artifact(ctx.out / "criterion_01" / "eigenvalues_2d.csv");
  }
  r.pass = worst <= 1e-8;
  r.detail = "worst relative eigenvalue error " + fmt(worst);
  return r;
}

CriterionResult criterion_2(Ctx& ctx) {
  CriterionResult r{2, "dense oracle at N = 16, d = 2", true, 0, ""};
  const TorusGrid g(2, 16);
  const auto en = enhance(g, 31, Mollifier{0.08});
  const auto op = AndersonOperator::from_noise(en);
  const auto es = eigensolve(op, 10);
  const auto dense = dense_eigenvalues(op, 10);
  double worst = 0.0;
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < 10; ++k) {
    worst = std::max(worst, std::abs(es.lambda[k] - dense[k]) / std::max(1.0, std::abs(dense[k])));
    rows.push_back({static_cast<double>(k), es.lambda[k], dense[k]});
  }
  io::write_csv(ctx.out / "criterion_02" / "dense_vs_iterative.csv", {"index", "iterative", "dense"},
                rows);
  ctx.record_artifact(ctx.out / "criterion_02" / "dense_vs_iterative.csv");
  r.pass = worst <= 1e-8;
  r.detail = "worst relative deviation " + fmt(worst);
  return r;
}

CriterionResult criterion_3(Ctx& ctx) {
  CriterionResult r{3, "renormalization necessity (d = 2, N = 256)", true, 0, ""};
  const TorusGrid g(2, 256);
  std::vector<double> eps;
  for (int j = 2; j <= 6; ++j) eps.push_back(std::pow(2.0, -j));
  const auto ren = resolvent_probe(g, 1, eps, 2, true);
  const auto raw = resolvent_probe(g, 1, eps, 2, false);
  const auto dr = ren.consecutive_diffs();
  const auto dw = raw.consecutive_diffs();
  bool mono = true;
  for (std::size_t j = 1; j < dr.size(); ++j) mono = mono && dr[j][0] < dr[j - 1][0];
  const bool cauchy = dr.back()[0] <= 0.25 * dr.front()[0];
  const double target = std::log(2.0) / (2 * M_PI);
  const double raw_err = std::abs(dw.back()[0] - target) / target;

  for (const char* name : {"renormalized", "unrenormalized"}) {
    const auto& probe = name == std::string("renormalized") ? ren : raw;
    std::vector<std::vector<double>> rows;
    for (std::size_t j = 0; j < probe.eps.size(); ++j) {
      std::vector<double> row = {probe.eps[j], probe.c[j]};
      row.insert(row.end(), probe.lambda[j].begin(), probe.lambda[j].end());
      rows.push_back(row);
    }
    const auto path = ctx.out / "criterion_03" / (std::string("resolvent_") + name + ".csv");
    io::write_csv(path, {"epsilon", "c", "lambda0", "lambda1"}, rows);
    ctx.record_artifact(path);
  }
  r.pass = mono && cauchy && raw_err <= 0.20;
  r.detail = "drift monotone=" + std::string(mono ? "yes" : "no") +
             ", last/first=" + fmt(dr.back()[0] / dr.front()[0]) +
             ", raw step vs log2/2pi off by " + fmt(raw_err);
  return r;
}

CriterionResult criterion_4(Ctx& ctx) {
  CriterionResult r{4, "ground-state positivity over 20 seeds", true, 0, ""};
  const auto& corpus = Corpus2D::get(ctx.jobs);
  double worst_min = 1e300;
  for (const auto& es : corpus.systems) {
    const auto gg = ground_gauge(es);  // throws when positivity fails
    worst_min = std::min(worst_min, gg.u0.min_value());
  }
  r.pass = worst_min > 0.0;
  r.detail = "smallest ground-state value across seeds " + fmt(worst_min);
  return r;
}

CriterionResult criterion_5(Ctx& ctx) {
  CriterionResult r{5, "conjugation identity residuals", true, 0, ""};
  double worst1 = 0.0, worst2 = 0.0;
  auto run = [&](int dim, int n, double tol) {
    const TorusGrid g(dim, n);
    const auto en = enhance(g, 5, Mollifier{kEps});
    const auto es = eigensolve(AndersonOperator::from_noise(en), 10);
    const auto gg = ground_gauge(es);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
      const GridField w = conjugated(es, gg, k);
      const GridField hw = conjugate_apply(gg, w);
      CompensatedSum err;
      for (std::size_t i = 0; i < w.v.size(); ++i) {
        const double d = hw.v[i] - es.lambda[k] * w.v[i];
        err.add(d * d);
      }
      const double rel = std::sqrt(err.value() * g.cell_volume()) /
                         (std::max(1.0, std::abs(es.lambda[k])) * w.l2_norm());
      worst = std::max(worst, rel);
    }
    (dim == 1 ? worst1 : worst2) = worst;
    return worst <= tol;
  };
  const bool ok1 = run(1, 256, 1e-5);
  const bool ok2 = run(2, 128, 1e-4);
  json rep;
  rep["d1_worst"] = worst1;
  rep["d2_worst"] = worst2;
  io::write_text(ctx.out / "criterion_05" / "conjugation.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_05" / "conjugation.json");
  r.pass = ok1 && ok2;
  r.detail = "worst residual d=1: " + fmt(worst1) + ", d=2: " + fmt(worst2);
  return r;
}

CriterionResult criterion_6(Ctx& ctx) {
  CriterionResult r{6, "courant bound over 20 seeds x 10 eigenfunctions", true, 0, ""};
  const auto& corpus = Corpus2D::get(ctx.jobs);
  int violations = 0, verdict_flips = 0;
  json rep = json::array();
  for (std::size_t s = 0; s < corpus.systems.size(); ++s) {
    const auto base = courant_check(corpus.systems[s], calib::kNodalDelta);
    for (const auto& row : base.rows)
      if (!row.pass) ++violations;
    for (const double delta : {1e-4, 1e-2}) {
      const auto sweep = courant_check(corpus.systems[s], delta);
      for (std::size_t k = 0; k < sweep.rows.size(); ++k)
        if (sweep.rows[k].pass != base.rows[k].pass) ++verdict_flips;
    }
    json per_seed;
    per_seed["seed"] = s + 1;
    for (const auto& row : base.rows)
      per_seed["rows"].push_back({{"index", row.index},
                                  {"rank_bound", row.rank_bound},
                                  {"domains", row.domains},
                                  {"pass", row.pass}});
    rep.push_back(per_seed);
  }
  io::write_text(ctx.out / "criterion_06" / "courant.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_06" / "courant.json");
  {
    // one label image for the record
    const auto labels = nodal_domains(corpus.systems[0].u[9], calib::kNodalDelta);
    io::write_pgm(ctx.out / "criterion_06" / "nodal_seed1_u9.pgm", labels);
    ctx.record_artifact(ctx.out / "criterion_06" / "nodal_seed1_u9.pgm");
  }
  r.pass = violations == 0 && verdict_flips == 0;
  r.detail = std::to_string(violations) + " violations, " + std::to_string(verdict_flips) +
             " delta-sweep verdict changes";
  return r;
}

CriterionResult criterion_7(Ctx& ctx) {
  CriterionResult r{7, "doubling indices stable under refinement", true, 0, ""};
  double worst_change = 0.0, sup_beta = 0.0;
  json rep = json::array();
  for (const std::uint64_t seed : {11, 21}) {
    // resolve both grids; the hash-seeded noise shares resolved modes
    EigenSystem es128, es256;
    GroundGauge g128, g256;
    {
      const TorusGrid g(2, 128);
      es128 = eigensolve(AndersonOperator::from_noise(enhance(g, seed, Mollifier{kEps})), 6);
      g128 = ground_gauge(es128);
    }
    {
      const TorusGrid g(2, 256);
      es256 = eigensolve(AndersonOperator::from_noise(enhance(g, seed, Mollifier{kEps})), 6);
      g256 = ground_gauge(es256);
    }
    for (int k = 1; k <= 5; ++k) {
      // skip near-degenerate clusters: their vectors are basis-dependent
      const double gap_lo = es128.lambda[k] - es128.lambda[k - 1];
      const double gap_hi = k + 1 < es128.count() ? es128.lambda[k + 1] - es128.lambda[k] : 1e9;
      const double scale = std::max(1.0, std::abs(es128.lambda[k]));
      if (gap_lo < 1e-3 * scale || gap_hi < 1e-3 * scale) continue;
      const GridField v128 = conjugated(es128, g128, k);
      const GridField v256 = conjugated(es256, g256, k);
      const Point x0 = min_abs_point(v128);
      const auto rep128 = doubling_index(v128, x0, {1.0 / 32, 1.0 / 16});
      const auto rep256 = doubling_index(v256, x0, {1.0 / 32, 1.0 / 16});
      double s128 = 0, s256 = 0;
      for (double b : rep128.beta) s128 = std::max(s128, b);
      for (double b : rep256.beta) s256 = std::max(s256, b);
      const double change = std::abs(s256 - s128) / std::max(std::abs(s128), 1e-300);
      worst_change = std::max(worst_change, change);
      sup_beta = std::max(sup_beta, std::max(s128, s256));
      rep.push_back({{"seed", seed}, {"k", k}, {"beta128", s128}, {"beta256", s256}});
    }
  }
  io::write_text(ctx.out / "criterion_07" / "doubling.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_07" / "doubling.json");
  r.pass = std::isfinite(sup_beta) && worst_change <= 0.20;
  r.detail = "sup beta " + fmt(sup_beta) + ", worst refinement change " + fmt(worst_change);
  return r;
}

CriterionResult criterion_8(Ctx& ctx) {
  CriterionResult r{8, "beltrami radial-stretch oracle", true, 0, ""};
  const double K = 1.5, q = (K - 1) / (K + 1), rho = 0.07;
  const DiscPatch p({0.5, 0.5}, 0.125, 256);
  BeltramiField mu;
  mu.patch = p;
  mu.mu.assign(p.size(), cplx(0, 0));
  mu.k_sup = q;
  SolveBeltramiOptions opt;
  opt.oversample = 2;
  opt.mu_fn = [&](cplx z) -> cplx {
    if (std::abs(z) >= rho || z == cplx(0, 0)) return {0, 0};
    return q * z / std::conj(z);
  };
  const QCMap map = solve_beltrami(mu, opt);
  auto exact = [&](cplx z) -> cplx {
    const double rad = std::abs(z);
    if (rad <= rho) return rad > 0 ? z * std::pow(rad, K - 1.0) : cplx(0, 0);
    return std::pow(rho, K - 1.0) * z;
  };
  cplx sx(0, 0), se(0, 0), sxx(0, 0), sxe(0, 0);
  double np = 0, sup_exact = 0;
  std::vector<std::pair<cplx, cplx>> pts;
  for (int i = 0; i < p.m; ++i)
    for (int j = 0; j < p.m; ++j) {
      const cplx z(p.coord(i), p.coord(j));
      if (std::abs(z) > 0.9 * p.half_width()) continue;
      const cplx c = map.chi[static_cast<std::size_t>(i) * p.m + j], e = exact(z);
      pts.emplace_back(c, e);
      sx += c;
      se += e;
      sxx += c * std::conj(c);
      sxe += e * std::conj(c);
      np += 1;
      sup_exact = std::max(sup_exact, std::abs(e));
    }
  const cplx a = (sxe - se * std::conj(sx) / np) / (sxx - sx * std::conj(sx) / np);
  const cplx b = se / np - a * sx / np;
  double sup_err = 0;
  for (const auto& [c, e] : pts) sup_err = std::max(sup_err, std::abs(a * c + b - e));
  const double rel = sup_err / sup_exact;
  json rep;
  rep["sup_rel_error"] = rel;
  rep["contraction"] = map.contraction;
  rep["iterations"] = map.iterations;
  io::write_text(ctx.out / "criterion_08" / "beltrami_oracle.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_08" / "beltrami_oracle.json");
  r.pass = rel <= 1e-3 && map.contraction <= q + 0.02;
  r.detail = "sup error " + fmt(rel) + ", contraction " + fmt(map.contraction);
  return r;
}

struct PipelineBatch {
  std::vector<QCPipelineResult> results;  // five pinned seeds
  static const PipelineBatch& get(int jobs) {
    static PipelineBatch batch;
    static std::once_flag once;
    std::call_once(once, [&]() {
      const std::vector<std::uint64_t> seeds = {101, 202, 303, 404, 505};
      batch.results.resize(seeds.size());
      parallel_for(seeds.size(), jobs, [&](std::size_t s) {
        const TorusGrid g(2, 128);
        const auto en = enhance(g, seeds[s], Mollifier{kEps});
        const auto es = eigensolve(AndersonOperator::from_noise(en), 4);
        const auto gg = ground_gauge(es);
        const int k = 2;
        const GridField v = conjugated(es, gg, k);
        const DiscPatch patch(min_abs_point(v), 1.0 / 16, 256);
        batch.results[s] = qc_pipeline(es, gg, k, patch);
      });
    });
    return batch;
  }
};

CriterionResult criterion_9(Ctx& ctx) {
  CriterionResult r{9, "factorization quality over 5 seeds", true, 0, ""};
  const auto& batch = PipelineBatch::get(ctx.jobs);
  json rep = json::array();
  double worst_cr = 0, worst_harm = 0, worst_agree = 1, worst_belt = 0, min_jac = 1e300;
  double worst_circles = 0, worst_refactor = 0;
  for (const auto& res : batch.results) {
    worst_refactor = std::max(worst_refactor, res.fact.refactor_sup_error);
    worst_belt = std::max(worst_belt, res.map.residual_beltrami);
    min_jac = std::min(min_jac, res.map.jacobian_min);
    worst_cr = std::max(worst_cr, res.fact.residual_cr);
    worst_harm = std::max(worst_harm, res.fact.harmonicity);
    worst_agree = std::min(worst_agree, res.corr.agreement);
    const double a = res.fact.image_half_width;
    for (const double th : {0.3, 0.5, 0.7})
      worst_circles =
          std::max(worst_circles, three_circles_chi(res.v, res.map, 0.3 * a, 0.9 * a, th));
    rep.push_back({{"kappa", res.kappa},
                   {"retries", res.retries},
                   {"divergence_residual", res.div_residual},
                   {"stream_residual", res.stream_residual},
                   {"beltrami_check", res.beltrami_check},
                   {"k_sup", res.k_sup},
                   {"residual_beltrami", res.map.residual_beltrami},
                   {"jacobian_min", res.map.jacobian_min},
                   {"residual_cr", res.fact.residual_cr},
                   {"harmonicity", res.fact.harmonicity},
                   {"refactor_sup_error", res.fact.refactor_sup_error},
                   {"agreement", res.corr.agreement}});
  }
  io::write_text(ctx.out / "criterion_09" / "pipeline.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_09" / "pipeline.json");
  r.pass = worst_belt <= 1e-6 && min_jac > 0 && worst_cr <= 1e-2 && worst_harm <= 1e-2 &&
           worst_agree >= 0.99 && worst_refactor <= 1e-3 &&
           worst_circles <= calib::kThreeCirclesChiBound;
  r.detail = "CR " + fmt(worst_cr) + ", harmonicity " + fmt(worst_harm) + ", agreement " +
             fmt(worst_agree) + ", three-circles " + fmt(worst_circles);
  return r;
}

CriterionResult criterion_10(Ctx& ctx) {
  CriterionResult r{10, "mori exponents for chi and its inverse", true, 0, ""};
  const auto& batch = PipelineBatch::get(ctx.jobs);
  bool ok = true;
  double amin = 1e300;
  int viols = 0;
  for (const auto& res : batch.results) {
    for (const auto& fit : {res.mori_fwd, res.mori_inv}) {
      ok = ok && fit.alpha > 0.0 && fit.alpha <= 1.0 && fit.violations == 0;
      amin = std::min(amin, fit.alpha);
      viols += fit.violations;
    }
    ok = ok && res.mori_fwd.alpha * res.mori_inv.alpha <= 1.0 + 1e-6;
  }
  r.pass = ok;
  r.detail = "min alpha " + fmt(amin) + ", total violations " + std::to_string(viols);
  return r;
}

CriterionResult criterion_11(Ctx& ctx) {
  CriterionResult r{11, "caccioppoli and aronszajn within frozen constants", true, 0, ""};
  const auto& corpus = Corpus2D::get(ctx.jobs);
  double cmax = 0.0;
  for (int s = 0; s < 10; ++s) {
    const auto& es = corpus.systems[s];
    const auto gg = ground_gauge(es);
    for (int k = 1; k <= 3; ++k) {
      const GridField w = conjugated(es, gg, k);
      const Point x0 = min_abs_point(w);
      for (const auto& [rad, ratio] : caccioppoli_verify(gg, w, x0, {1.0 / 32, 1.0 / 16, 1.0 / 8}))
        cmax = std::max(cmax, ratio);
    }
  }
  // annular bumps in both dimensions, beta sweep 0..10
  double amax = 0.0, slope_worst = -1e300;
  for (const int dim : {1, 2}) {
    const TorusGrid g(dim, dim == 1 ? 1024 : 256);
    const double rad = 1.0 / 8;
    GridField w(g);
    const double mid = 0.375 * rad, half = 0.125 * rad;
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < (dim == 2 ? g.n : 1); ++j) {
        const double x = torus_delta(static_cast<double>(i) / g.n, 0.0);
        const double y = dim == 2 ? torus_delta(static_cast<double>(j) / g.n, 0.0) : 0.0;
        const double t = (std::sqrt(x * x + y * y) - mid) / half;
        const double val = std::abs(t) < 1 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
        if (dim == 1)
          w.at(i) = val;
        else
          w.at(i, j) = val;
      }
    std::vector<double> ratios;
    for (int b = 0; b <= 10; ++b) ratios.push_back(aronszajn_verify(w, rad, b));
    for (double q : ratios) amax = std::max(amax, q);
    double sb = 0, sr = 0, sbb = 0, sbr = 0;
    const double nn = ratios.size();
    for (std::size_t i = 0; i < ratios.size(); ++i) {
      sb += static_cast<double>(i);
      sr += ratios[i];
      sbb += static_cast<double>(i) * i;
      sbr += static_cast<double>(i) * ratios[i];
    }
    slope_worst = std::max(slope_worst, (nn * sbr - sb * sr) / (nn * sbb - sb * sb));
  }
  json rep;
  rep["caccioppoli_max"] = cmax;
  rep["caccioppoli_bound"] = calib::kCaccioppoliBound;
  rep["aronszajn_max"] = amax;
  rep["aronszajn_bound"] = calib::kAronszajnBound;
  rep["aronszajn_slope"] = slope_worst;
  io::write_text(ctx.out / "criterion_11" / "inequalities.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_11" / "inequalities.json");
  r.pass = cmax <= calib::kCaccioppoliBound && amax <= calib::kAronszajnBound &&
           slope_worst <= calib::kAronszajnSlopeBound;
  r.detail = "caccioppoli " + fmt(cmax) + " <= " + fmt(calib::kCaccioppoliBound) + ", aronszajn " +
             fmt(amax) + ", slope " + fmt(slope_worst);
  return r;
}

struct Control1D {
  EigenSystem es;       // seed 5, N = 256, m = 22
  GroundGauge gauge;
  static const Control1D& get() {
    static Control1D c;
    static std::once_flag once;
    std::call_once(once, [&]() {
      const TorusGrid g(1, 256);
      const auto en = enhance(g, 5, Mollifier{kEps});
      c.es = eigensolve(AndersonOperator::from_noise(en), 22);
      c.gauge = ground_gauge(c.es);
    });
    return c;
  }
};

CriterionResult criterion_12(Ctx& ctx) {
  CriterionResult r{12, "cylinder extension PDE residual", true, 0, ""};
  const auto& c = Control1D::get();
  GridField u(c.es.grid);
  HashRng rng(3);
  for (int k = 0; k < 10; ++k) {
    const double a = rng.next_gaussian();
    for (std::size_t i = 0; i < u.v.size(); ++i) u.v[i] += a * c.es.u[k].v[i];
  }
  const auto ext = cylinder_extension(c.es, c.gauge, u, c.es.lambda[9] + 1e-9, 2.0);
  json rep;
  rep["modes"] = ext.modes.size();
  rep["pde_residual"] = ext.pde_residual;
  io::write_text(ctx.out / "criterion_12" / "cylinder.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_12" / "cylinder.json");
  r.pass = ext.modes.size() == 10 && ext.pde_residual <= 1e-4;
  r.detail = "residual " + fmt(ext.pde_residual) + " over " + std::to_string(ext.modes.size()) +
             " modes";
  return r;
}

CriterionResult criterion_13(Ctx& ctx) {
  CriterionResult r{13, "spectral inequality envelope", true, 0, ""};
  const auto& c = Control1D::get();
  std::vector<double> grid;
  for (int k = 0; k < 20; ++k) grid.push_back(c.es.lambda[k] + 1e-9);
  const auto rep = spectral_inequality_probe(c.es, {0.0, 0.2}, grid, 100, 2024);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < rep.lambda.size(); ++i)
    rows.push_back({rep.lambda[i], rep.ratio[i], rep.saturated[i] ? 1.0 : 0.0});
  io::write_csv(ctx.out / "criterion_13" / "spectral_inequality.csv",
                {"lambda", "ratio", "saturated"}, rows);
  ctx.record_artifact(ctx.out / "criterion_13" / "spectral_inequality.csv");
  json sum;
  sum["C_fit"] = rep.C_fit;
  sum["c0"] = rep.c0;
  sum["fit_residual"] = rep.fit_residual;
  sum["violations"] = rep.violations;
  io::write_text(ctx.out / "criterion_13" / "summary.json", sum.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_13" / "summary.json");
  r.pass = rep.violations == 0 && rep.fit_residual <= 0.10 && rep.C_fit > 0.0;
  r.detail = "C_fit " + fmt(rep.C_fit) + ", fit residual " + fmt(rep.fit_residual) + ", " +
             std::to_string(rep.violations) + " violations";
  return r;
}

CriterionResult criterion_14(Ctx& ctx) {
  CriterionResult r{14, "null control of the truncated system", true, 0, ""};
  bool ok = true;
  double worst_rel = 0.0;
  json rep = json::array();
  for (const std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const TorusGrid g(1, 256);
    const auto en = enhance(g, seed, Mollifier{kEps});
    const auto es = eigensolve(AndersonOperator::from_noise(en), 20);
    ControlProblem prob;
    prob.omega = {0.0, 0.2};
    prob.T = 1.0;
    prob.m = 20;
    prob.g0 = GridField(g);
    HashRng rng(seed * 31 + 7);
    for (auto& x : prob.g0.v) x = rng.next_gaussian();
    const auto res = lebeau_rousseau_drive(es, prob);
    double g0n = 0.0;
    for (int k = 0; k < 20; ++k) {
      const double a = prob.g0.l2_inner(es.u[k]);
      g0n += a * a;
    }
    g0n = std::sqrt(g0n);
    const double rel = res.terminal_norm / g0n;
    worst_rel = std::max(worst_rel, rel);
    ok = ok && rel <= 1e-6 && std::isfinite(res.cost_ratio);
    rep.push_back({{"seed", seed},
                   {"terminal_relative", rel},
                   {"cost_ratio", res.cost_ratio},
                   {"stages", res.stages.size()}});

    if (seed == 1) {
      // trajectory and summary artifacts for the record
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < res.t.size(); ++i) {
        std::vector<double> row = {res.t[i]};
        for (int k = 0; k < res.a.rows(); ++k) row.push_back(res.a(k, i));
        rows.push_back(row);
      }
      std::vector<std::string> header = {"t"};
      for (int k = 0; k < res.a.rows(); ++k) header.push_back("a" + std::to_string(k));
      io::write_csv(ctx.out / "criterion_14" / "trajectory_seed1.csv", header, rows);
      ctx.record_artifact(ctx.out / "criterion_14" / "trajectory_seed1.csv");

      // HUM sanity: absolute homogeneity of the cost
      Eigen::VectorXd a2(3);
      a2 << 1.0, -0.4, 0.8;
      const auto h1 = hum_control(es, prob.omega, {0, 1, 2}, 0.5, a2);
      const auto h2 = hum_control(es, prob.omega, {0, 1, 2}, 0.5, (2.5 * a2).eval());
      ok = ok && std::abs(h2.cost - 2.5 * h1.cost) <= 1e-10 * std::max(1.0, h1.cost);

      // minimality: compensated perturbations never lower the cost
      const std::vector<int> band = {0, 1, 2};
      const double tau = 0.5;
      const int nb = 3;
      Eigen::MatrixXd G(nb, nb), E(nb, nb);
      for (int rr = 0; rr < nb; ++rr)
        for (int ss = 0; ss < nb; ++ss) {
          const double sig = es.lambda[band[rr]] + es.lambda[band[ss]];
          G(rr, ss) = h1.omega_gram(rr, ss) *
                      (std::abs(sig) < 1e-12 ? tau : (1.0 - std::exp(-sig * tau)) / sig);
          const double lr = es.lambda[band[rr]];
          E(rr, ss) = h1.omega_gram(rr, ss) *
                      (std::abs(lr) < 1e-12 ? tau : (1.0 - std::exp(-lr * tau)) / lr);
        }
      auto cost_sq = [&](const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta) {
        return gamma.dot(G * gamma) + 2.0 * gamma.dot(E * beta) +
               tau * beta.dot(h1.omega_gram * beta);
      };
      const double base = cost_sq(h1.c, Eigen::VectorXd::Zero(nb));
      HashRng prng(17);
      for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd dvec(nb);
        for (int i = 0; i < nb; ++i) dvec(i) = prng.next_gaussian();
        const Eigen::VectorXd comp = -G.ldlt().solve(E * dvec);
        for (const double eta : {1e-3, -1e-3})
          ok = ok && cost_sq(h1.c + eta * comp, (eta * dvec).eval()) >= base * (1 - 1e-9);
      }

      // single-band equivalence at m = 1
      ControlProblem one = prob;
      one.m = 1;
      one.g0 = es.u[0];
      const auto single = lebeau_rousseau_drive(es, one);
      Eigen::VectorXd a1(1);
      a1 << 1.0;
      const auto hc = hum_control(es, prob.omega, {0}, 0.5 * prob.T, a1);
      ok = ok && single.stages.size() == 1 &&
           std::abs(single.stages[0].cost - hc.cost) <= 1e-10 * std::max(1.0, hc.cost) &&
           single.terminal_norm <= 1e-8;
    }
  }
  io::write_text(ctx.out / "criterion_14" / "control.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_14" / "control.json");
  r.pass = ok;
  r.detail = "worst terminal/initial " + fmt(worst_rel);
  return r;
}

CriterionResult criterion_15(Ctx& ctx) {
  CriterionResult r{15, "byte-identical artifacts on rerun", true, 0, ""};
  // two independent passes over the artifact-emitting stages
  auto emit = [&](const std::filesystem::path& dir) {
    std::map<std::string, std::string> hashes;
    {
      const TorusGrid g(2, 64);
      const auto en = enhance(g, 42, Mollifier{kEps});
      io::save_enhanced(dir / "noise", en);
      for (const char* f : {"xi_eps.raw", "xi_eps.json", "second_order.raw", "manifest.json"})
        hashes[f] = io::sha256_file(dir / "noise" / f);
    }
    {
      const TorusGrid g(1, 64);
      const auto en = enhance(g, 1, Mollifier{kEps});
      const auto es = eigensolve(AndersonOperator::from_noise(en), 5);
      io::write_eigenvalues_csv(dir / "eigenvalues.csv", es);
      hashes["eigenvalues.csv"] = io::sha256_file(dir / "eigenvalues.csv");
      const auto labels = nodal_domains(es.u[3], calib::kNodalDelta);
      io::write_labels_csv(dir / "labels.csv", labels);
      hashes["labels.csv"] = io::sha256_file(dir / "labels.csv");
    }
    {
      const TorusGrid g(2, 128);
      const auto en = enhance(g, 7, Mollifier{kEps});
      const auto es = eigensolve(AndersonOperator::from_noise(en), 6);
      io::write_eigenvalues_csv(dir / "eigenvalues_2d.csv", es);
      hashes["eigenvalues_2d.csv"] = io::sha256_file(dir / "eigenvalues_2d.csv");
      const auto labels = nodal_domains(es.u[5], calib::kNodalDelta);
      io::write_pgm(dir / "nodal.pgm", labels);
      hashes["nodal.pgm"] = io::sha256_file(dir / "nodal.pgm");
    }
    return hashes;
  };
  const auto h1 = emit(ctx.out / "criterion_15" / "run1");
  const auto h2 = emit(ctx.out / "criterion_15" / "run2");
  int mismatches = 0;
  for (const auto& [name, hash] : h1)
    if (h2.at(name) != hash) ++mismatches;
  json rep;
  rep["files"] = h1.size();
  rep["mismatches"] = mismatches;
  for (const auto& [name, hash] : h1) rep["hashes"][name] = hash;
  io::write_text(ctx.out / "criterion_15" / "determinism.json", rep.dump(2) + "\n");
  ctx.record_artifact(ctx.out / "criterion_15" / "determinism.json");
  r.pass = mismatches == 0;
  r.detail = std::to_string(h1.size()) + " artifacts compared, " + std::to_string(mismatches) +
             " mismatches";
  return r;
}

}  // namespace

SuiteResult run_suite(const std::filesystem::path& out_dir, int jobs, const std::vector<int>& only) {
  std::filesystem::create_directories(out_dir);
  SuiteResult suite;
  Ctx ctx;
  ctx.out = out_dir;
  ctx.jobs = std::max(1, jobs);
  ctx.suite = &suite;

  using Fn = CriterionResult (*)(Ctx&);
  const std::vector<Fn> criteria = {criterion_1,  criterion_2,  criterion_3,  criterion_4,
                                    criterion_5,  criterion_6,  criterion_7,  criterion_8,
                                    criterion_9,  criterion_10, criterion_11, criterion_12,
                                    criterion_13, criterion_14, criterion_15};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    WallTimer timer;
    CriterionResult res;
    try {
      res = criteria[i](ctx);
    } catch (const std::exception& e) {
      res.id = id;
      res.name = "criterion " + std::to_string(id);
      res.pass = false;
      res.detail = std::string("exception: ") + e.what();
    }
    res.seconds = timer.seconds();
    suite.criteria.push_back(std::move(res));
  }
  return suite;
}

}  // namespace anderlab::acceptance
