#include "knobo/fmat.hpp"

#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "knobo/error.hpp"

namespace knobo {

void write_fmat(std::ostream& out, const Matrix& m) {
  for (double v : m.values()) {
    if (!std::isfinite(static_cast<float>(v))) throw DataError("FMAT values must be finite in single precision");
  }
  out.write("FMAT", 4);
  detail::write_le<std::uint32_t>(out, kFmatVersion);
  detail::write_le<std::uint64_t>(out, m.rows());
  detail::write_le<std::uint64_t>(out, m.cols());
  for (double v : m.values()) detail::write_le<float>(out, static_cast<float>(v));
}

Matrix read_fmat(std::istream& in) {
  detail::expect_magic(in, "FMAT");
  const auto version = detail::read_le<std::uint32_t>(in, "FMAT version");
  if (version != kFmatVersion) {
    throw DataError("unsupported FMAT version " + std::to_string(version));
  }
  const auto rows = detail::read_le<std::uint64_t>(in, "FMAT rows");
  const auto cols = detail::read_le<std::uint64_t>(in, "FMAT cols");
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) throw DataError("FMAT shape too large");
  Matrix m(rows, cols);
  for (double& v : m.values()) {
    const auto f = detail::read_le<float>(in, "FMAT payload");
    if (!std::isfinite(f)) throw DataError("FMAT contains a non-finite value");
    v = f;
  }
  return m;
}

void save_fmat(const std::filesystem::path& path, const Matrix& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    write_fmat(out, m);
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Matrix load_fmat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_fmat(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace knobo
