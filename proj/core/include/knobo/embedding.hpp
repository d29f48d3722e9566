#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace knobo {

/// Maps text to a unit-norm vector. Implementations must be deterministic.
class Embedder {
 public:
  virtual ~Embedder() = default;
  [[nodiscard]] virtual std::vector<double> embed(std::string_view text) const = 0;
  [[nodiscard]] virtual std::size_t dim() const noexcept = 0;
};

/// Hashed character trigram counts. The text is ASCII-lowercased; each
/// 3-byte window is hashed with 64-bit FNV-1a and counted in bucket
/// hash % dim. Texts shorter than three bytes contribute one gram (the whole
/// text). The count vector is L2-normalized.
class TrigramEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 256;

  explicit TrigramEmbedder(std::size_t dim = kDefaultDim) : dim_(dim) {}

  [[nodiscard]] std::vector<double> embed(std::string_view text) const override;
  [[nodiscard]] std::size_t dim() const noexcept override { return dim_; }

 private:
  std::size_t dim_;
};

const Embedder& default_embedder();

/// Default concept embedding (256-dim trigram hash).
std::vector<double> embed_concept(std::string_view text);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace knobo
