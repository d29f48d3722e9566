#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "knobo/matrix.hpp"
#include "knobo/predictor.hpp"

namespace knobo {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

/// Binary PGM ("P5") with maxval <= 255. '#' comments are allowed in the header.
GrayImage parse_pgm(std::string_view bytes);
GrayImage read_pgm(const std::string& path);
std::string encode_pgm(const GrayImage& img);

inline constexpr std::size_t kProbeSide = 28;
inline constexpr std::size_t kProbeDim = 768;

/// Bilinear resize with half-pixel centers: output pixel i samples the source
/// at (i + 0.5) * (in / out) - 0.5, clamped to the image. Values stay in [0, 255].
std::vector<double> resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h);

/// 28x28 resize, divided by 255, flattened row-major, first 768 values.
std::vector<double> pixel_features(const GrayImage& img);

/// Untrained bias-free MLP 784 -> 1024 -> 768 with ReLU after each layer.
/// Weights ~ N(0, 2 / fan_in), drawn once from a SplitMix64 stream seeded
/// with `seed`, first layer row-major then second.
class RandomNet {
 public:
  explicit RandomNet(std::uint64_t seed);

  [[nodiscard]] std::vector<double> operator()(std::span<const double> input) const;

  static constexpr std::size_t kIn = kProbeSide * kProbeSide;
  static constexpr std::size_t kHidden = 1024;
  static constexpr std::size_t kOut = kProbeDim;

 private:
  std::vector<float> w1_;  // kHidden x kIn
  std::vector<float> w2_;  // kOut x kHidden
};

/// Resize to 28x28, scale to [0, 1], then run RandomNet(seed).
std::vector<double> random_net_features(const GrayImage& img, std::uint64_t seed);
std::vector<double> random_net_features(std::span<const double> flat_28x28, std::uint64_t seed);

enum class FeaturizerKind { pixel, random_net };

struct Featurizer {
  FeaturizerKind kind = FeaturizerKind::pixel;
  std::size_t d = kProbeDim;
  std::uint64_t seed = 0;

  void check() const;
  [[nodiscard]] Matrix featurize(const std::vector<GrayImage>& images) const;
  /// Rows are already-resized 28x28 images with values in [0, 1].
  [[nodiscard]] Matrix featurize_flat(const Matrix& flat) const;
};

FeaturizerKind featurizer_kind_from_string(std::string_view s);

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Linear probe (prior disabled) over precomputed features.
ProbeResult probe(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                  std::span<const int> test_y, std::size_t n_classes, const TrainConfig& cfg);

ProbeResult probe(const Featurizer& featurizer, const std::vector<GrayImage>& train_images,
                  std::span<const int> train_y, const std::vector<GrayImage>& test_images,
                  std::span<const int> test_y, std::size_t n_classes, const TrainConfig& cfg);

}  // namespace knobo
