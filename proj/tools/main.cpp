// Reproducible experiment runner. Subcommands: noise, spectrum, nodal, qc,
// control, verify, report. Configuration is flat key = value text; every run
// writes a manifest with wall-clock, constants, and artifact hashes.
// Exit codes: 0 success, 1 numeric failure, 2 usage error.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <thread>

#include "anderlab/acceptance.hpp"
#include "anderlab/calibration.hpp"
#include "anderlab/control.hpp"
#include "anderlab/io.hpp"
#include "anderlab/nodal.hpp"
#include "anderlab/qc.hpp"
#include "anderlab/util.hpp"

namespace {

using namespace anderlab;
using nlohmann::json;

constexpr const char* kVersion = "anderlab 1.0.0";

// flat key = value configuration; '#' starts a comment, [sections] are
// allowed and ignored
std::map<std::string, std::string> parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!key.empty() && key.front() != '[') kv[key] = value;
  }
  return kv;
}

struct Run {
  std::map<std::string, std::string> cfg;
  std::filesystem::path out;
  json manifest;
  std::map<std::string, std::string> hashes;
  WallTimer total;
  WallTimer stage_timer;

  double num(const std::string& key, double fallback) const {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : std::stod(it->second);
  }
  std::uint64_t seed(std::uint64_t fallback) const {
    const auto it = cfg.find("seed");
    return it == cfg.end() ? fallback : std::stoull(it->second);
  }
  void stage_done(const std::string& name) {
    manifest["wall_clock_seconds"][name] = stage_timer.seconds();
    stage_timer = WallTimer();
  }
  void artifact(const std::filesystem::path& p) {
    hashes[std::filesystem::relative(p, out).string()] = io::sha256_file(p);
  }
  void finalize(const std::string& status) {
    manifest["status"] = status;
    manifest["version"] = kVersion;
    manifest["total_seconds"] = total.seconds();
    for (const auto& [k, v] : cfg) manifest["config"][k] = v;
    manifest["constants"]["caccioppoli_bound"] = calib::kCaccioppoliBound;
    manifest["constants"]["aronszajn_bound"] = calib::kAronszajnBound;
    manifest["constants"]["aronszajn_slope_bound"] = calib::kAronszajnSlopeBound;
    manifest["constants"]["three_circles_chi_bound"] = calib::kThreeCirclesChiBound;
    manifest["constants"]["mori_bilipschitz_snap"] = calib::kMoriBiLipschitzSnap;
    manifest["constants"]["nodal_delta"] = calib::kNodalDelta;
    for (const auto& [k, v] : hashes) manifest["artifacts"][k] = v;
    io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
  }
};

EigenSystem solve_from_config(const Run& run, int dim_default = 1) {
  const TorusGrid g(static_cast<int>(run.num("dimension", dim_default)),
                    static_cast<int>(run.num("n", 128)));
  const auto en = enhance(g, run.seed(1), Mollifier{run.num("epsilon", 0.05)});
  return eigensolve(AndersonOperator::from_noise(en), static_cast<int>(run.num("num_eigs", 8)));
}

int cmd_noise(Run& run) {
  const TorusGrid g(static_cast<int>(run.num("dimension", 2)), static_cast<int>(run.num("n", 128)));
  const auto en = enhance(g, run.seed(1), Mollifier{run.num("epsilon", 0.05)});
  io::save_enhanced(run.out / "noise", en);
  for (const char* f : {"xi_eps.raw", "xi_eps.json", "second_order.raw", "second_order.json",
                        "manifest.json"})
    run.artifact(run.out / "noise" / f);
  run.stage_done("noise");
  std::printf("enhanced noise written: c_eps = %s\n", io::format_full(en.c_eps).c_str());
  return 0;
}

int cmd_spectrum(Run& run) {
  const auto es = solve_from_config(run);
  io::write_eigenvalues_csv(run.out / "eigenvalues.csv", es);
  run.artifact(run.out / "eigenvalues.csv");
  run.stage_done("spectrum");
  std::printf("lambda0 = %s, worst residual = %s\n", io::format_full(es.lambda[0]).c_str(),
              io::format_full(*std::max_element(es.residual.begin(), es.residual.end())).c_str());
  return 0;
}

int cmd_nodal(Run& run) {
  const auto es = solve_from_config(run, 2);
  const double delta = run.num("delta", calib::kNodalDelta);
  const auto report = courant_check(es, delta);
  json rep;
  rep["delta"] = delta;
  rep["all_pass"] = report.all_pass;
  for (const auto& row : report.rows) {
    rep["rows"].push_back({{"index", row.index},
                           {"rank_bound", row.rank_bound},
                           {"domains", row.domains},
                           {"pass", row.pass}});
    const auto labels = nodal_domains(es.u[row.index], delta);
    const auto name = "labels_" + std::to_string(row.index);
    if (es.grid.dim == 2) {
      io::write_pgm(run.out / (name + ".pgm"), labels);
      run.artifact(run.out / (name + ".pgm"));
    } else {
      io::write_labels_csv(run.out / (name + ".csv"), labels);
      run.artifact(run.out / (name + ".csv"));
    }
  }
  io::write_text(run.out / "courant.json", rep.dump(2) + "\n");
  run.artifact(run.out / "courant.json");
  run.stage_done("nodal");
  std::printf("courant: %s\n", report.all_pass ? "all pass" : "violations present");
  return report.all_pass ? 0 : 1;
}

int cmd_qc(Run& run) {
  const TorusGrid g(2, static_cast<int>(run.num("n", 128)));
  const auto en = enhance(g, run.seed(101), Mollifier{run.num("epsilon", 0.05)});
  const auto es = eigensolve(AndersonOperator::from_noise(en),
                             static_cast<int>(run.num("num_eigs", 4)));
  const auto gg = ground_gauge(es);
  const int k = static_cast<int>(run.num("eigenfunction", 2));
  GridField v(g);
  for (std::size_t i = 0; i < g.size(); ++i) v.v[i] = es.u[k].v[i] / gg.u0.v[i];
  std::size_t arg = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(v.v[i]) < std::abs(v.v[arg])) arg = i;
  Point center{static_cast<double>(arg / g.n) / g.n, static_cast<double>(arg % g.n) / g.n};
  if (run.cfg.count("patch_center_x")) center[0] = run.num("patch_center_x", center[0]);
  if (run.cfg.count("patch_center_y")) center[1] = run.num("patch_center_y", center[1]);
  const DiscPatch patch(center, run.num("patch_radius", 1.0 / 16),
                        static_cast<int>(run.num("patch_m", 256)));
  const auto res = qc_pipeline(es, gg, k, patch, run.num("delta", 1e-2));

  // paired real/imaginary raw grids with sidecars
  auto save_complex = [&](const std::string& name, const std::vector<cplx>& vals) {
    const TorusGrid pg(2, patch.m);
    GridField re(pg), im(pg);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      re.v[i] = vals[i].real();
      im.v[i] = vals[i].imag();
    }
    io::FieldMeta meta{2, patch.m, name, run.seed(101), run.num("epsilon", 0.05)};
    meta.kind = name + "_re";
    io::save_field(run.out / (name + "_re"), re, meta);
    meta.kind = name + "_im";
    io::save_field(run.out / (name + "_im"), im, meta);
    for (const std::string suffix : {"_re.raw", "_re.json", "_im.raw", "_im.json"})
      run.artifact(run.out / (name + suffix));
  };
  save_complex("chi", res.map.chi);
  save_complex("h", res.fact.h);
  BeltramiField mu_out = beltrami_coefficient(res.z_eff, res.v, res.patch);
  save_complex("mu", mu_out.mu);

  json rep;
  rep["kappa"] = res.kappa;
  rep["retries"] = res.retries;
  rep["divergence_residual"] = res.div_residual;
  rep["stream_residual"] = res.stream_residual;
  rep["beltrami_check"] = res.beltrami_check;
  rep["k_sup"] = res.k_sup;
  rep["residual_beltrami"] = res.map.residual_beltrami;
  rep["jacobian_min"] = res.map.jacobian_min;
  rep["residual_cr"] = res.fact.residual_cr;
  rep["harmonicity"] = res.fact.harmonicity;
  rep["refactor_sup_error"] = res.fact.refactor_sup_error;
  rep["agreement"] = res.corr.agreement;
  rep["mori_forward"] = {{"alpha", res.mori_fwd.alpha}, {"C", res.mori_fwd.C}};
  rep["mori_inverse"] = {{"alpha", res.mori_inv.alpha}, {"C", res.mori_inv.C}};
  io::write_text(run.out / "qc_report.json", rep.dump(2) + "\n");
  run.artifact(run.out / "qc_report.json");

  // nodal overlay: white where sign(v) matches sign(Re h o chi), gray in
  // the zero band, black on mismatches or outside the evaluation disc
  {
    const auto& p = res.patch;
    NodalDecomposition overlay;
    overlay.grid = TorusGrid(2, p.m);
    overlay.label.assign(p.m * static_cast<std::size_t>(p.m), 0);
    overlay.domain_count = 2;
    double vmax = 0.0;
    for (int i = 0; i < p.m; ++i)
      for (int j = 0; j < p.m; ++j)
        if (p.node_radius(i, j) <= p.eval_radius())
          vmax = std::max(vmax, std::abs(res.v[static_cast<std::size_t>(i) * p.m + j]));
    for (int i = 0; i < p.m; ++i)
      for (int j = 0; j < p.m; ++j) {
        if (p.node_radius(i, j) > p.eval_radius()) continue;
        const std::size_t c = static_cast<std::size_t>(i) * p.m + j;
        const cplx chi_z = res.map.chi[c];
        if (std::max(std::abs(chi_z.real()), std::abs(chi_z.imag())) >
            0.9 * res.fact.image_half_width)
          continue;
        if (std::abs(res.v[c]) <= run.num("delta", 1e-2) * vmax) {
          overlay.label[c] = 1;  // zero band
        } else {
          const bool match = (res.v[c] > 0) == (res.fact.eval(chi_z).real() > 0);
          overlay.label[c] = match ? 2 : 0;
        }
      }
    io::write_pgm(run.out / "nodal_overlay.pgm", overlay);
    run.artifact(run.out / "nodal_overlay.pgm");
  }
  run.stage_done("qc");
  std::printf("qc pipeline: CR residual %s, agreement %s\n",
              io::format_full(res.fact.residual_cr).c_str(),
              io::format_full(res.corr.agreement).c_str());
  return 0;
}

int cmd_control(Run& run) {
  const TorusGrid g(1, static_cast<int>(run.num("n", 256)));
  const auto en = enhance(g, run.seed(1), Mollifier{run.num("epsilon", 0.05)});
  const int m = static_cast<int>(run.num("modes", 20));
  const auto es = eigensolve(AndersonOperator::from_noise(en), m);
  ControlProblem prob;
  prob.omega = {run.num("omega_a", 0.0), run.num("omega_b", 0.2)};
  prob.T = run.num("T", 1.0);
  prob.m = m;
  prob.g0 = GridField(g);
  HashRng rng(run.seed(1) * 31 + 7);
  for (auto& x : prob.g0.v) x = rng.next_gaussian();
  const auto res = lebeau_rousseau_drive(es, prob);

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < res.t.size(); ++i) {
    std::vector<double> row = {res.t[i]};
    for (int k = 0; k < res.a.rows(); ++k) row.push_back(res.a(k, i));
    rows.push_back(row);
  }
  std::vector<std::string> header = {"t"};
  for (int k = 0; k < res.a.rows(); ++k) header.push_back("a" + std::to_string(k));
  io::write_csv(run.out / "trajectory.csv", header, rows);
  run.artifact(run.out / "trajectory.csv");

  rows.clear();
  for (std::size_t i = 0; i < res.control.t.size(); ++i) {
    std::vector<double> row = {res.control.t[i]};
    for (int k = 0; k < res.control.b.rows(); ++k) row.push_back(res.control.b(k, i));
    rows.push_back(row);
  }
  header[0] = "t";
  for (int k = 0; k < res.control.b.rows(); ++k) header[k + 1] = "b" + std::to_string(k);
  io::write_csv(run.out / "control.csv", header, rows);
  run.artifact(run.out / "control.csv");

  double g0n = 0.0;
  for (int k = 0; k < m; ++k) {
    const double a = prob.g0.l2_inner(es.u[k]);
    g0n += a * a;
  }
  std::vector<double> lam_grid;
  for (int k = 0; k < m; ++k) lam_grid.push_back(es.lambda[k] + 1e-9);
  const auto ineq = spectral_inequality_probe(es, prob.omega, lam_grid,
                                              static_cast<int>(run.num("trials", 100)),
                                              run.seed(1) ^ 0x51EULL);
  json rep;
  rep["terminal_norm"] = res.terminal_norm;
  rep["terminal_relative"] = res.terminal_norm / std::sqrt(g0n);
  rep["cost"] = res.cost;
  rep["cost_ratio"] = res.cost_ratio;
  rep["C_fit"] = ineq.C_fit;
  rep["fit_residual"] = ineq.fit_residual;
  rep["stages"] = json::array();
  for (const auto& s : res.stages)
    rep["stages"].push_back({{"index", s.index},
                             {"band", s.band.size()},
                             {"gramian_cond", s.gramian_cond},
                             {"cost", s.cost}});
  io::write_text(run.out / "summary.json", rep.dump(2) + "\n");
  run.artifact(run.out / "summary.json");
  run.stage_done("control");
  std::printf("terminal norm %s (relative %s), cost ratio %s\n",
              io::format_full(res.terminal_norm).c_str(),
              io::format_full(res.terminal_norm / std::sqrt(g0n)).c_str(),
              io::format_full(res.cost_ratio).c_str());
  return 0;
}

int cmd_verify(Run& run, int jobs, const std::vector<int>& only) {
  const auto suite = anderlab::acceptance::run_suite(run.out, jobs, only);
  for (const auto& c : suite.criteria) {
    std::printf("[%s] criterion %2d: %-48s %7.1fs  %s\n", c.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), c.seconds, c.detail.c_str());
    run.manifest["criteria"].push_back({{"id", c.id},
                                        {"name", c.name},
                                        {"pass", c.pass},
                                        {"seconds", c.seconds},
                                        {"detail", c.detail}});
  }
  for (const auto& [path, hash] : suite.artifact_hashes) run.hashes[path] = hash;
  run.stage_done("verify");
  return suite.all_pass() ? 0 : 1;
}

int cmd_report(Run& run, const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest: " + manifest_path);
  const json man = json::parse(in);
  std::printf("version: %s\nstatus:  %s\n", man.value("version", "?").c_str(),
              man.value("status", "?").c_str());
  if (man.contains("criteria"))
    for (const auto& c : man["criteria"])
      std::printf("[%s] criterion %2d: %s\n", c.value("pass", false) ? "PASS" : "FAIL",
                  c.value("id", 0), c.value("detail", std::string()).c_str());
  if (man.contains("artifacts"))
    std::printf("%zu artifacts hashed\n", man["artifacts"].size());
  run.stage_done("report");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for the renormalized Anderson operator on the torus"};
  app.set_version_flag("--version", kVersion);
  std::string config_path, out_dir = "out", manifest_path = "manifest.json", only_list;
  std::uint64_t seed_override = 0;
  bool have_seed = false;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--config", config_path, "path to a key = value configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads for batch stages");
  auto* seed_opt = app.add_option("--seed", seed_override, "seed override");
  app.require_subcommand(1);
  const std::vector<std::string> names = {"noise", "spectrum", "nodal", "qc", "control", "verify",
                                          "report"};
  for (const auto& n : names) app.add_subcommand(n);
  app.get_subcommand("verify")->add_option("--only", only_list, "comma-separated criterion ids");
  app.get_subcommand("report")->add_option("--manifest", manifest_path, "manifest to summarize");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  have_seed = seed_opt->count() > 0;

  Run run;
  try {
    if (!config_path.empty()) run.cfg = parse_config(config_path);
    if (have_seed) run.cfg["seed"] = std::to_string(seed_override);
    if (const char* env_out = std::getenv("ANDERLAB_OUT"); env_out && out_dir == "out")
      out_dir = env_out;
    run.out = out_dir;
    std::filesystem::create_directories(run.out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  int rc = 0;
  std::string failure;
  try {
    if (app.got_subcommand("noise")) rc = cmd_noise(run);
    else if (app.got_subcommand("spectrum")) rc = cmd_spectrum(run);
    else if (app.got_subcommand("nodal")) rc = cmd_nodal(run);
    else if (app.got_subcommand("qc")) rc = cmd_qc(run);
    else if (app.got_subcommand("control")) rc = cmd_control(run);
    else if (app.got_subcommand("verify")) {
      std::vector<int> only;
      std::size_t pos = 0;
      while (pos < only_list.size()) {
        const std::size_t comma = only_list.find(',', pos);
        only.push_back(std::atoi(only_list.substr(pos, comma - pos).c_str()));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      rc = cmd_verify(run, jobs, only);
    } else if (app.got_subcommand("report")) {
      rc = cmd_report(run, manifest_path);
    }
  } catch (const std::exception& e) {
    failure = e.what();
    rc = 1;
  }

  try {
    run.finalize(rc == 0 ? "ok" : (failure.empty() ? "failed" : "failed: " + failure));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "manifest write failed: %s\n", e.what());
    rc = rc == 0 ? 1 : rc;
  }
  if (!failure.empty()) std::fprintf(stderr, "error: %s\n", failure.c_str());
  return rc;
}
