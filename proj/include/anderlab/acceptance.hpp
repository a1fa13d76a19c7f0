// The desk-scale verification suite: one entry per acceptance criterion,
// shared by the `verify` subcommand and the acceptance test binary.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace anderlab::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

struct SuiteResult {
  std::vector<CriterionResult> criteria;
  std::map<std::string, std::string> artifact_hashes;  // path -> sha256
  bool all_pass() const {
    for (const auto& c : criteria)
      if (!c.pass) return false;
    return !criteria.empty();
  }
};

// Runs criteria 1..15 at the pinned desk-scale configuration, emitting
// artifacts under out_dir. `only` restricts to a subset of ids (empty = all).
SuiteResult run_suite(const std::filesystem::path& out_dir, int jobs,
                      const std::vector<int>& only = {});

}  // namespace anderlab::acceptance
