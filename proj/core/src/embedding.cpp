#include "knobo/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>

#include "knobo/error.hpp"

namespace knobo {
namespace {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::vector<double> TrigramEmbedder::embed(std::string_view text) const {
  if (text.empty()) throw UsageError("cannot embed empty text");
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

  std::vector<double> v(dim_, 0.0);
  const std::string_view s = lower;
  if (s.size() < 3) {
    v[fnv1a(s) % dim_] += 1.0;
  } else {
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) v[fnv1a(s.substr(i, 3)) % dim_] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

const Embedder& default_embedder() {
  static const TrigramEmbedder embedder;
  return embedder;
}

std::vector<double> embed_concept(std::string_view text) { return default_embedder().embed(text); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("cosine_similarity: dimension mismatch");
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace knobo
