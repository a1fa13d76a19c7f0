// Artifact persistence: raw little-endian float grids with JSON sidecars,
// CSV tables at full precision, PGM label images, and SHA-256 digests.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "anderlab/grid.hpp"
#include "anderlab/nodal.hpp"
#include "anderlab/noise.hpp"
#include "anderlab/operators.hpp"

namespace anderlab::io {

struct FieldMeta {
  int dimension = 1;
  int n = 8;
  std::string kind;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
};

// writes base.raw (row-major 8-byte IEEE-754 little-endian) and base.json
void save_field(const std::filesystem::path& base, const GridField& f, const FieldMeta& meta);
GridField load_field(const std::filesystem::path& base);

// directory with the two fields plus a manifest carrying c_eps
void save_enhanced(const std::filesystem::path& dir, const EnhancedNoise& en);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
void write_eigenvalues_csv(const std::filesystem::path& path, const EigenSystem& es);

void write_pgm(const std::filesystem::path& path, const NodalDecomposition& labels);
void write_labels_csv(const std::filesystem::path& path, const NodalDecomposition& labels);

void write_text(const std::filesystem::path& path, const std::string& content);

std::string sha256_file(const std::filesystem::path& path);
std::string format_full(double x);  // 17 significant digits

}  // namespace anderlab::io
