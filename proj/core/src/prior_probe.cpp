#include "knobo/prior_probe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "knobo/error.hpp"
#include "knobo/io.hpp"
#include "knobo/parallel.hpp"
#include "knobo/rng.hpp"

namespace knobo {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t next_number(const char* what) {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (1u << 30)) throw DataError(std::string("PGM ") + what + " is too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw DataError(std::string("malformed PGM header: expected ") + what);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      throw DataError("malformed PGM header: no separator before pixel data");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

GrayImage parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw DataError("not a PGM file");
  if (bytes[1] != '5') throw DataError(std::string("unsupported PGM format P") + bytes[1] + "; only binary P5 is read");
  HeaderReader header(bytes);
  GrayImage img;
  img.width = header.next_number("width");
  img.height = header.next_number("height");
  const std::size_t maxval = header.next_number("maxval");
  if (img.width == 0 || img.height == 0) throw DataError("PGM image has zero size");
  if (maxval == 0 || maxval > 255) {
    throw DataError("unsupported PGM maxval " + std::to_string(maxval) + "; only 8-bit images are read");
  }
  const std::size_t start = header.raster_start();
  const std::size_t n = img.width * img.height;
  if (bytes.size() - std::min(bytes.size(), start) < n) {
    throw DataError("truncated PGM payload: expected " + std::to_string(n) + " bytes");
  }
  img.pixels.assign(reinterpret_cast<const std::uint8_t*>(bytes.data() + start),
                    reinterpret_cast<const std::uint8_t*>(bytes.data() + start + n));
  if (maxval != 255) {
    for (auto& p : img.pixels) {
      if (p > maxval) throw DataError("PGM pixel exceeds maxval");
      p = static_cast<std::uint8_t>(std::lround(255.0 * p / static_cast<double>(maxval)));
    }
  }
  return img;
}

GrayImage read_pgm(const std::string& path) {
  try {
    return parse_pgm(io::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

std::vector<double> resize_bilinear(const GrayImage& img, std::size_t out_w, std::size_t out_h) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height) {
    throw DataError("image is empty or its pixel count does not match its size");
  }
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  auto axis = [](std::size_t i, double scale, std::size_t extent, std::size_t& lo, std::size_t& hi, double& t) {
    double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(extent - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, extent - 1);
    t = s - static_cast<double>(lo);
  };
  std::vector<double> out(out_w * out_h);
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double ty;
    axis(y, sy, img.height, y0, y1, ty);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double tx;
      axis(x, sx, img.width, x0, x1, tx);
      auto px = [&](std::size_t yy, std::size_t xx) { return static_cast<double>(img.pixels[yy * img.width + xx]); };
      const double top = px(y0, x0) * (1.0 - tx) + px(y0, x1) * tx;
      const double bottom = px(y1, x0) * (1.0 - tx) + px(y1, x1) * tx;
      out[y * out_w + x] = top * (1.0 - ty) + bottom * ty;
    }
  }
  return out;
}

std::vector<double> pixel_features(const GrayImage& img) {
  auto resized = resize_bilinear(img, kProbeSide, kProbeSide);
  resized.resize(kProbeDim);
  for (double& v : resized) v /= 255.0;
  return resized;
}

RandomNet::RandomNet(std::uint64_t seed) : w1_(kHidden * kIn), w2_(kOut * kHidden) {
  SplitMix64 rng(seed);
  const double s1 = std::sqrt(2.0 / static_cast<double>(kIn));
  const double s2 = std::sqrt(2.0 / static_cast<double>(kHidden));
  for (auto& w : w1_) w = static_cast<float>(s1 * rng.normal());
  for (auto& w : w2_) w = static_cast<float>(s2 * rng.normal());
}

std::vector<double> RandomNet::operator()(std::span<const double> input) const {
  if (input.size() != kIn) {
    throw DataError("random net expects " + std::to_string(kIn) + " inputs, got " + std::to_string(input.size()));
  }
  std::vector<double> hidden(kHidden);
  for (std::size_t h = 0; h < kHidden; ++h) {
    const float* w = &w1_[h * kIn];
    double acc = 0.0;
    for (std::size_t i = 0; i < kIn; ++i) acc += static_cast<double>(w[i]) * input[i];
    hidden[h] = std::max(acc, 0.0);
  }
  std::vector<double> out(kOut);
  for (std::size_t o = 0; o < kOut; ++o) {
    const float* w = &w2_[o * kHidden];
    double acc = 0.0;
    for (std::size_t h = 0; h < kHidden; ++h) acc += static_cast<double>(w[h]) * hidden[h];
    out[o] = std::max(acc, 0.0);
  }
  return out;
}

std::vector<double> random_net_features(std::span<const double> flat_28x28, std::uint64_t seed) {
  return RandomNet(seed)(flat_28x28);
}

std::vector<double> random_net_features(const GrayImage& img, std::uint64_t seed) {
  auto resized = resize_bilinear(img, kProbeSide, kProbeSide);
  for (double& v : resized) v /= 255.0;
  return random_net_features(resized, seed);
}

void Featurizer::check() const {
  if (d == 0) throw UsageError("featurizer dimension must be positive");
  if (kind == FeaturizerKind::pixel && d > kProbeSide * kProbeSide) {
    throw UsageError("pixel featurizer dimension cannot exceed 784");
  }
  if (kind == FeaturizerKind::random_net && d > RandomNet::kOut) {
    throw UsageError("random_net featurizer dimension cannot exceed 768");
  }
}

Matrix Featurizer::featurize_flat(const Matrix& flat) const {
  check();
  if (flat.cols() != kProbeSide * kProbeSide) {
    throw DataError("flattened images must have 784 columns, got " + std::to_string(flat.cols()));
  }
  Matrix out(flat.rows(), d);
  if (kind == FeaturizerKind::pixel) {
    for (std::size_t r = 0; r < flat.rows(); ++r) {
      for (std::size_t c = 0; c < d; ++c) out(r, c) = flat(r, c);
    }
    return out;
  }
  const RandomNet net(seed);
  parallel_for(flat.rows(), [&](std::size_t r) {
    const auto f = net(flat.row(r));
    std::copy_n(f.begin(), d, out.row(r).begin());
  });
  return out;
}

Matrix Featurizer::featurize(const std::vector<GrayImage>& images) const {
  Matrix flat(images.size(), kProbeSide * kProbeSide);
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto resized = resize_bilinear(images[i], kProbeSide, kProbeSide);
    for (std::size_t j = 0; j < resized.size(); ++j) flat(i, j) = resized[j] / 255.0;
  }
  return featurize_flat(flat);
}

FeaturizerKind featurizer_kind_from_string(std::string_view s) {
  if (s == "pixel") return FeaturizerKind::pixel;
  if (s == "random_net") return FeaturizerKind::random_net;
  throw UsageError("unknown featurizer '" + std::string(s) + "' (expected pixel or random_net)");
}

ProbeResult probe(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                  std::span<const int> test_y, std::size_t n_classes, const TrainConfig& cfg) {
  if (n_classes < 2) throw UsageError("probe needs at least 2 classes");
  TrainConfig plain = cfg;
  plain.prior_enabled = false;
  const auto fit = train_head(train_x, train_y, n_classes, plain);
  return {head_accuracy(fit.head, train_x, train_y), head_accuracy(fit.head, test_x, test_y)};
}

ProbeResult probe(const Featurizer& featurizer, const std::vector<GrayImage>& train_images,
                  std::span<const int> train_y, const std::vector<GrayImage>& test_images,
                  std::span<const int> test_y, std::size_t n_classes, const TrainConfig& cfg) {
  return probe(featurizer.featurize(train_images), train_y, featurizer.featurize(test_images), test_y,
               n_classes, cfg);
}

}  // namespace knobo
