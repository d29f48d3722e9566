#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Each is written directly from the formula it checks, without
// reusing the library code path under test.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// ASCII-only tokenizer: lowercase alphanumeric runs.
inline std::vector<std::string> ascii_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct Scored {
  std::string id;
  double score;
};

/// Brute-force Okapi BM25 over (id, text) pairs: every snippet scored from
/// scratch, zero scores dropped, sorted by score then id, truncated to k.
inline std::vector<Scored> bm25(const std::vector<std::pair<std::string, std::string>>& docs,
                                const std::string& query, std::size_t k, double k1 = 1.2, double b = 0.75) {
  std::vector<std::vector<std::string>> toks;
  double total = 0;
  for (const auto& d : docs) {
    toks.push_back(ascii_tokens(d.second));
    total += static_cast<double>(toks.back().size());
  }
  const double n = static_cast<double>(docs.size());
  const double avgdl = docs.empty() ? 0.0 : total / n;
  auto q = ascii_tokens(query);
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());
  std::vector<Scored> out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double s = 0;
    for (const auto& t : q) {
      double df = 0;
      for (const auto& dt : toks) df += std::count(dt.begin(), dt.end(), t) > 0 ? 1 : 0;
      const double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), t));
      if (tf == 0) continue;
      const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
      const double len = static_cast<double>(toks[i].size());
      s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl));
    }
    if (s > 0) out.push_back({docs[i].first, s});
  }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& c) {
    return a.score != c.score ? a.score > c.score : a.id < c.id;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

/// Diversity as the literal double sum over ordered pairs.
inline double diversity(const std::vector<std::vector<double>>& e) {
  const std::size_t n = e.size();
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t t = 0; t < e[i].size(); ++t) {
        dot += e[i][t] * e[j][t];
        ni += e[i][t] * e[i][t];
        nj += e[j][t] * e[j][t];
      }
      sum += 1.0 - dot / std::sqrt(ni * nj);
    }
  }
  return sum / static_cast<double>(n * n - n);
}

/// Bilinear sample of a row-major byte image at continuous (x, y), written
/// as an explicit four-neighbour weighted sum with edge clamping.
inline double bilinear_at(const std::vector<unsigned char>& px, int w, int h, double x, double y) {
  x = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
  y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  auto p = [&](int yy, int xx) { return static_cast<double>(px[static_cast<std::size_t>(yy * w + xx)]); };
  return (1 - fx) * (1 - fy) * p(y0, x0) + fx * (1 - fy) * p(y0, x1) + (1 - fx) * fy * p(y1, x0) + fx * fy * p(y1, x1);
}

/// Half-pixel-centre resize to out_w x out_h, values in [0, 255].
inline std::vector<double> resize(const std::vector<unsigned char>& px, int w, int h, int out_w, int out_h) {
  std::vector<double> out;
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      const double sx = (j + 0.5) * w / static_cast<double>(out_w) - 0.5;
      const double sy = (i + 0.5) * h / static_cast<double>(out_h) - 0.5;
      out.push_back(bilinear_at(px, w, h, sx, sy));
    }
  }
  return out;
}

/// Central finite difference of f along coordinate i of x.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double h = 1e-6) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2 * h);
}

/// |a - b| / max(|a|, |b|, floor), the relative error used by the gradient checks.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
