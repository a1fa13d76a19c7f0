#include "anderlab/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace anderlab::io {

namespace {

using nlohmann::json;

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

void write_raw(const std::filesystem::path& path, const std::vector<double>& v) {
  static_assert(std::endian::native == std::endian::little,
                "raw field format is little-endian; byte-swap before porting");
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

}  // namespace

std::string format_full(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void save_field(const std::filesystem::path& base, const GridField& f, const FieldMeta& meta) {
  write_raw(base.string() + ".raw", f.v);
  json side;
  side["dimension"] = meta.dimension;
  side["N"] = meta.n;
  side["kind"] = meta.kind;
  side["seed"] = meta.seed;
  side["epsilon"] = meta.epsilon;
  write_text(base.string() + ".json", side.dump(2) + "\n");
}

GridField load_field(const std::filesystem::path& base) {
  std::ifstream meta_in(base.string() + ".json");
  if (!meta_in) throw std::runtime_error("missing sidecar: " + base.string() + ".json");
  json side = json::parse(meta_in);
  const TorusGrid grid(side.at("dimension").get<int>(), side.at("N").get<int>());
  std::ifstream in(base.string() + ".raw", std::ios::binary);
  if (!in) throw std::runtime_error("missing raw file: " + base.string() + ".raw");
  GridField f(grid);
  in.read(reinterpret_cast<char*>(f.v.data()), static_cast<std::streamsize>(f.v.size() * 8));
  if (static_cast<std::size_t>(in.gcount()) != f.v.size() * 8)
    throw std::runtime_error("raw byte length disagrees with sidecar shape: " + base.string());
  return f;
}

void save_enhanced(const std::filesystem::path& dir, const EnhancedNoise& en) {
  std::filesystem::create_directories(dir);
  FieldMeta meta{en.grid.dim, en.grid.n, "xi_eps", en.seed, en.eps};
  save_field(dir / "xi_eps", en.xi_eps, meta);
  meta.kind = "second_order";
  save_field(dir / "second_order", en.second_order, meta);
  json man;
  man["seed"] = en.seed;
  man["epsilon"] = en.eps;
  man["dimension"] = en.grid.dim;
  man["N"] = en.grid.n;
  man["c_eps"] = format_full(en.c_eps);
  write_text(dir / "manifest.json", man.dump(2) + "\n");
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_full(row[i]);
    out << "\n";
  }
}

void write_eigenvalues_csv(const std::filesystem::path& path, const EigenSystem& es) {
  std::vector<std::vector<double>> rows;
  for (int k = 0; k < es.count(); ++k)
    rows.push_back({static_cast<double>(k), es.lambda[k], es.residual[k]});
  write_csv(path, {"index", "lambda", "residual"}, rows);
}

void write_pgm(const std::filesystem::path& path, const NodalDecomposition& labels) {
  if (labels.grid.dim != 2) throw std::invalid_argument("write_pgm: 2D label grids only");
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  const int n = labels.grid.n;
  out << "P2\n" << n << " " << n << "\n255\n";
  const int count = std::max(labels.domain_count, 1);
  for (int j = n - 1; j >= 0; --j) {  // row-major image, top row = largest y
    for (int i = 0; i < n; ++i) {
      const int lab = labels.label[static_cast<std::size_t>(i) * n + j];
      const int gray = lab == 0 ? 0 : (lab * 255) / count;
      out << gray << (i + 1 < n ? ' ' : '\n');
    }
  }
}

void write_labels_csv(const std::filesystem::path& path, const NodalDecomposition& labels) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < labels.label.size(); ++i)
    rows.push_back({static_cast<double>(i), static_cast<double>(labels.label[i])});
  write_csv(path, {"cell", "label"}, rows);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 init failed");
  char buf[65536];
  while (in.good()) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof(b), "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

}  // namespace anderlab::io
