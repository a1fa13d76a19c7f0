// Acceptance runner: one pass/fail line per criterion, nonzero exit on any
// failure. Artifacts land under the directory given as argv[1] (default:
// ./acceptance_out).
#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "anderlab/acceptance.hpp"

int main(int argc, char** argv) {
  std::string out = "acceptance_out";
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--jobs" && i + 1 < argc)
      jobs = std::atoi(argv[++i]);
    else if (arg == "--only" && i + 1 < argc) {
      std::string list = argv[++i];
      std::size_t pos = 0;
      while (pos < list.size()) {
        const std::size_t comma = list.find(',', pos);
        only.push_back(std::atoi(list.substr(pos, comma - pos).c_str()));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    } else {
      out = arg;
    }
  }

  const auto suite = anderlab::acceptance::run_suite(out, jobs, only);
  for (const auto& c : suite.criteria)
    std::printf("[%s] criterion %2d: %-48s %7.1fs  %s\n", c.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), c.seconds, c.detail.c_str());
  const bool ok = suite.all_pass();
  std::printf("%s (%zu criteria)\n", ok ? "ALL PASS" : "FAILURES PRESENT", suite.criteria.size());
  return ok ? 0 : 1;
}
