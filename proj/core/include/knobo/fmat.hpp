#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "knobo/matrix.hpp"

namespace knobo {

/// FMAT feature matrix container, all fields little-endian:
///
///   bytes 0..3   magic "FMAT"
///   u32          version (1)
///   u64          rows
///   u64          cols
///   f32[rows*cols] row-major values
///
/// Values are stored as float32; reading widens them to double.
inline constexpr std::uint32_t kFmatVersion = 1;

void write_fmat(std::ostream& out, const Matrix& m);
Matrix read_fmat(std::istream& in);

void save_fmat(const std::filesystem::path& path, const Matrix& m);
Matrix load_fmat(const std::filesystem::path& path);

}  // namespace knobo
