#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <set>
#include <filesystem>
#include <fstream>

#include "anderlab/calibration.hpp"
#include "anderlab/io.hpp"
#include "anderlab/util.hpp"

using namespace anderlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("anderlab_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ANDERLAB_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("field round trip preserves bytes and metadata") {
  const auto dir = temp_dir("field");
  const TorusGrid g(2, 16);
  GridField f(g);
  HashRng rng(5);
  for (auto& x : f.v) x = rng.next_gaussian();
  io::save_field(dir / "field", f, {2, 16, "test", 5, 0.25});
  const GridField back = io::load_field(dir / "field");
  CHECK(back.grid == g);
  CHECK(back.v == f.v);
  // sidecar shape agrees with the raw byte length
  CHECK(fs::file_size(dir / "field.raw") == g.size() * 8);
}

TEST_CASE("csv uses 17 significant digits round-trippably") {
  const auto dir = temp_dir("csv");
  const std::vector<double> xs = {1.0 / 3.0, M_PI, 6.62607015e-34, -0.1};
  std::vector<std::vector<double>> rows;
  for (double x : xs) rows.push_back({x});
  io::write_csv(dir / "t.csv", {"x"}, rows);
  std::ifstream in(dir / "t.csv");
  std::string line;
  std::getline(in, line);  // header
  for (double x : xs) {
    std::getline(in, line);
    CHECK(std::stod(line) == x);  // exact after decimal round trip
  }
}

TEST_CASE("pgm of the checkerboard has exactly 4 distinct nonzero grays") {
  const auto dir = temp_dir("pgm");
  const TorusGrid g(2, 64);
  GridField f(g);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      f.at(i, j) = std::sin(2 * M_PI * i / g.n) * std::sin(2 * M_PI * j / g.n);
  const auto labels = nodal_domains(f, calib::kNodalDelta);
  REQUIRE(labels.domain_count == 4);
  io::write_pgm(dir / "l.pgm", labels);
  std::ifstream in(dir / "l.pgm");
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P2");
  CHECK(w == 64);
  CHECK(maxval == 255);
  std::set<int> grays;
  int v;
  while (in >> v)
    if (v != 0) grays.insert(v);
  CHECK(grays.size() == 4);
}

TEST_CASE("sha256 is stable and content sensitive") {
  const auto dir = temp_dir("sha");
  io::write_text(dir / "a.txt", "abc");
  CHECK(io::sha256_file(dir / "a.txt") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  io::write_text(dir / "b.txt", "abd");
  CHECK(io::sha256_file(dir / "b.txt") != io::sha256_file(dir / "a.txt"));
}

TEST_CASE("cli exit codes and usage") {
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("golden spectrum run is byte-identical across invocations") {
  const auto dir = temp_dir("golden");
  std::ofstream cfg(dir / "run.cfg");
  cfg << "dimension = 1\nn = 64\nseed = 1\nepsilon = 0.05\nnum_eigs = 5\n";
  cfg.close();
  const auto out1 = dir / "run1", out2 = dir / "run2";
  REQUIRE(run_cli("--config " + (dir / "run.cfg").string() + " --out " + out1.string() +
                  " spectrum") == 0);
  REQUIRE(run_cli("--config " + (dir / "run.cfg").string() + " --out " + out2.string() +
                  " spectrum") == 0);
  CHECK(io::sha256_file(out1 / "eigenvalues.csv") == io::sha256_file(out2 / "eigenvalues.csv"));
  // manifests exist and carry the artifact hash
  CHECK(fs::exists(out1 / "manifest.json"));
  std::ifstream man(out1 / "manifest.json");
  const std::string text((std::istreambuf_iterator<char>(man)), std::istreambuf_iterator<char>());
  CHECK(text.find("eigenvalues.csv") != std::string::npos);
  CHECK(text.find("\"status\": \"ok\"") != std::string::npos);
}

TEST_CASE("seed override changes the artifact") {
  const auto dir = temp_dir("seedover");
  std::ofstream cfg(dir / "run.cfg");
  cfg << "dimension = 1\nn = 64\nseed = 1\nepsilon = 0.05\nnum_eigs = 3\n";
  cfg.close();
  const auto out1 = dir / "a", out2 = dir / "b";
  REQUIRE(run_cli("--config " + (dir / "run.cfg").string() + " --out " + out1.string() +
                  " spectrum") == 0);
  REQUIRE(run_cli("--config " + (dir / "run.cfg").string() + " --seed 2 --out " + out2.string() +
                  " spectrum") == 0);
  CHECK(io::sha256_file(out1 / "eigenvalues.csv") != io::sha256_file(out2 / "eigenvalues.csv"));
}

TEST_CASE("verify subcommand runs a criterion subset and reports it") {
  const auto dir = temp_dir("verify");
  REQUIRE(run_cli("--out " + dir.string() + " --jobs 2 verify --only 1") == 0);
  std::ifstream man(dir / "manifest.json");
  const std::string text((std::istreambuf_iterator<char>(man)), std::istreambuf_iterator<char>());
  CHECK(text.find("laplacian baseline") != std::string::npos);
  CHECK(text.find("\"pass\": true") != std::string::npos);
}

TEST_CASE("noise subcommand emits the enhanced pair with manifest") {
  const auto dir = temp_dir("noisecmd");
  std::ofstream cfg(dir / "run.cfg");
  cfg << "dimension = 2\nn = 32\nseed = 9\nepsilon = 0.1\n";
  cfg.close();
  REQUIRE(run_cli("--config " + (dir / "run.cfg").string() + " --out " + (dir / "out").string() +
                  " noise") == 0);
  const GridField xi = io::load_field(dir / "out" / "noise" / "xi_eps");
  CHECK(xi.grid.dim == 2);
  CHECK(xi.grid.n == 32);
  const auto en = enhance(TorusGrid(2, 32), 9, Mollifier{0.1});
  CHECK(xi.v == en.xi_eps.v);
}
