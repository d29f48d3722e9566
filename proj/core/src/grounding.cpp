#include "knobo/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "knobo/concept_gen.hpp"
#include "knobo/corpus_index.hpp"
#include "knobo/error.hpp"
#include "knobo/parallel.hpp"
#include "knobo/rng.hpp"

namespace knobo {
namespace {

const std::set<std::string>& question_scaffolding() {
  static const std::set<std::string> words = {
      "is",  "are",   "there", "the",  "a",       "an",       "any",     "of",   "in",
      "on",  "with",  "does",  "do",   "show",    "shows",    "image",   "seen", "visible",
      "present", "sign", "signs", "evidence", "have", "has", "this", "lesion's"};
  return words;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::uint64_t text_hash(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

double accuracy(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                std::span<const double> w, double b) {
  if (rows.empty()) return 0.0;
  std::size_t correct = 0;
  for (auto r : rows) {
    const int pred = dot(x.row(r), w) + b > 0.0 ? 1 : 0;
    if (pred == y[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace

const char* to_string(AnnotationLabel label) noexcept {
  switch (label) {
    case AnnotationLabel::positive: return "positive";
    case AnnotationLabel::negative: return "negative";
    case AnnotationLabel::unknown: return "unknown";
  }
  return "unknown";
}

KeywordAnnotationOracle::KeywordAnnotationOracle(std::map<std::string, std::vector<std::string>> keywords)
    : keywords_(std::move(keywords)) {}

std::vector<std::string> KeywordAnnotationOracle::keywords_for(const std::string& concept_question) const {
  if (const auto it = keywords_.find(concept_question); it != keywords_.end()) return it->second;
  std::vector<std::string> out;
  for (auto& t : tokenize(concept_question)) {
    if (!question_scaffolding().contains(t)) out.push_back(std::move(t));
  }
  return out;
}

AnnotationLabel KeywordAnnotationOracle::annotate(const std::string& report,
                                                  const std::string& concept_question) {
  const auto keywords = keywords_for(concept_question);
  if (keywords.empty()) return AnnotationLabel::unknown;
  const auto report_tokens = tokenize(report);
  for (const auto& k : keywords) {
    if (!contains_phrase(report_tokens, tokenize(k))) return AnnotationLabel::negative;
  }
  return AnnotationLabel::positive;
}

AnnotationLabel annotate(const std::string& report, const std::string& concept_question,
                         AnnotationOracle& oracle) {
  try {
    return oracle.annotate(report, concept_question);
  } catch (const std::exception&) {
    return AnnotationLabel::unknown;
  }
}

ReportSample sample_reports_for_concept(const std::string& concept_question,
                                        std::span<const PretrainPair> pairs, std::size_t n_sim,
                                        std::size_t n_rand, std::uint64_t seed,
                                        const Embedder& embedder) {
  // One candidate per distinct pair_id, first occurrence wins.
  std::vector<std::size_t> candidates;
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (seen.insert(pairs[i].pair_id).second) candidates.push_back(i);
  }

  ReportSample sample;
  if (n_sim + n_rand >= candidates.size()) {
    sample.clamped = n_sim + n_rand > candidates.size();
    n_sim = std::min(n_sim, candidates.size());
    n_rand = candidates.size() - n_sim;
  }
  if (n_sim + n_rand == 0) return sample;

  const auto query = embedder.embed(concept_question);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(candidates.size());
  for (auto i : candidates) {
    const auto& text = pairs[i].report_text;
    const double sim = text.empty() ? 0.0 : cosine_similarity(query, embedder.embed(text));
    scored.emplace_back(sim, i);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  for (std::size_t i = 0; i < n_sim; ++i) sample.indices.push_back(scored[i].second);
  sample.n_similar = n_sim;

  std::vector<std::size_t> rest;
  for (std::size_t i = n_sim; i < scored.size(); ++i) rest.push_back(scored[i].second);
  std::sort(rest.begin(), rest.end());
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n_rand; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(rest.size() - i));
    std::swap(rest[i], rest[j]);
    sample.indices.push_back(rest[i]);
  }
  return sample;
}

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_loss(const Matrix& x, std::span<const int> y, std::span<const double> w, double b) {
  if (x.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z = dot(x.row(i), w) + b;
    total += y[i] == 1 ? softplus(-z) : softplus(z);
  }
  return total / static_cast<double>(x.rows());
}

void bce_gradient(const Matrix& x, std::span<const int> y, std::span<const double> w, double b,
                  std::span<double> grad_w, double& grad_b) {
  std::fill(grad_w.begin(), grad_w.end(), 0.0);
  grad_b = 0.0;
  if (x.rows() == 0) return;
  const double scale = 1.0 / static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double err = (sigmoid(dot(row, w) + b) - y[i]) * scale;
    for (std::size_t j = 0; j < row.size(); ++j) grad_w[j] += err * row[j];
    grad_b += err;
  }
}

LogisticFit train_logistic(const Matrix& x, std::span<const int> y, const LogisticConfig& cfg) {
  if (x.rows() != y.size()) throw UsageError("train_logistic: features and labels differ in length");
  if (cfg.learning_rate <= 0 || cfg.batch_size == 0) throw UsageError("train_logistic: bad config");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();

  LogisticFit fit;
  fit.weights.assign(d, 0.0);
  fit.epoch_loss.push_back(bce_loss(x, y, fit.weights, fit.bias));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(d);
  SplitMix64 rng(cfg.seed);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double grad_b = 0.0;
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const auto row = x.row(order[k]);
        const double err = (sigmoid(dot(row, fit.weights) + fit.bias) - y[order[k]]) * scale;
        for (std::size_t j = 0; j < d; ++j) grad[j] += err * row[j];
        grad_b += err;
      }
      for (std::size_t j = 0; j < d; ++j) fit.weights[j] -= cfg.learning_rate * grad[j];
      if (cfg.use_bias) fit.bias -= cfg.learning_rate * grad_b;
    }
    fit.epoch_loss.push_back(bce_loss(x, y, fit.weights, fit.bias));
  }
  return fit;
}

double GroundingModel::activate(std::span<const double> features) const {
  if (features.size() != weights.size()) {
    throw DataError("feature dimension " + std::to_string(features.size()) +
                    " does not match grounder \"" + concept_text + "\" (" +
                    std::to_string(weights.size()) + ")");
  }
  return sigmoid(dot(features, weights) + bias);
}

GroundingModel train_grounder(const std::string& concept_text, const Matrix& features,
                              std::span<const int> labels, const LogisticConfig& cfg) {
  if (features.rows() != labels.size()) {
    throw UsageError("train_grounder: features and labels differ in length");
  }
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw DataError("concept \"" + concept_text + "\" has only one label class in its training data");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 split_rng(derive_seed(cfg.seed, 0x5eedULL));
  split_rng.shuffle(std::span(order));
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(order.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());

  Matrix x_train(0, features.cols());
  std::vector<int> y_train;
  for (auto r : train) {
    x_train.append_row(features.row(r));
    y_train.push_back(labels[r]);
  }
  const auto fit = train_logistic(x_train, y_train, cfg);

  GroundingModel model{concept_text, fit.weights, fit.bias, 0.0};
  model.val_accuracy = val.empty() ? accuracy(features, labels, train, fit.weights, fit.bias)
                                   : accuracy(features, labels, val, fit.weights, fit.bias);
  return model;
}

GroundingSet build_grounding_set(const std::string& concept_question,
                                 std::span<const PretrainPair> pairs, AnnotationOracle& oracle,
                                 const SamplingConfig& sampling) {
  const auto sample = sample_reports_for_concept(concept_question, pairs, sampling.n_similar,
                                                 sampling.n_random, sampling.seed);
  GroundingSet set;
  set.clamped = sample.clamped;
  std::vector<std::size_t> rows = sample.indices;
  std::sort(rows.begin(), rows.end());
  for (auto i : rows) {
    const auto label = annotate(pairs[i].report_text, concept_question, oracle);
    if (label == AnnotationLabel::unknown) {
      ++set.unknown;
      continue;
    }
    if (!set.features.empty() && pairs[i].image_features.size() != set.features.cols()) {
      throw DataError("pair " + pairs[i].pair_id + " has inconsistent feature dimension");
    }
    set.features.append_row(pairs[i].image_features);
    const int y = label == AnnotationLabel::positive ? 1 : 0;
    set.labels.push_back(y);
    (y == 1 ? set.positives : set.negatives)++;
  }
  return set;
}

std::vector<GroundingModel> train_grounders(const std::vector<std::string>& concepts,
                                            std::span<const PretrainPair> pairs,
                                            AnnotationOracle& oracle, const SamplingConfig& sampling,
                                            const LogisticConfig& cfg, unsigned threads) {
  // Annotation runs serially (the oracle may be stateful); training fans out.
  std::vector<GroundingSet> sets;
  sets.reserve(concepts.size());
  for (const auto& c : concepts) {
    SamplingConfig s = sampling;
    s.seed = derive_seed(sampling.seed, text_hash(c));
    sets.push_back(build_grounding_set(c, pairs, oracle, s));
  }
  std::vector<GroundingModel> models(concepts.size());
  parallel_for(
      concepts.size(),
      [&](std::size_t i) {
        LogisticConfig c = cfg;
        c.seed = derive_seed(cfg.seed, text_hash(concepts[i]));
        models[i] = train_grounder(concepts[i], sets[i].features, sets[i].labels, c);
      },
      threads);
  return models;
}

std::vector<double> ground(std::span<const double> features, const std::vector<GroundingModel>& models) {
  std::vector<double> out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(m.activate(features));
  return out;
}

Matrix ground_all(const Matrix& features, const std::vector<GroundingModel>& models) {
  Matrix out(features.rows(), models.size());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto row = features.row(i);
    for (std::size_t j = 0; j < models.size(); ++j) out(i, j) = models[j].activate(row);
  }
  return out;
}

std::vector<GroundingModel> select_top_k(std::vector<GroundingModel> models, std::size_t k) {
  if (k > models.size()) {
    throw UsageError("select_top_k: k=" + std::to_string(k) + " exceeds " +
                     std::to_string(models.size()) + " models");
  }
  std::stable_sort(models.begin(), models.end(), [](const auto& a, const auto& b) {
    if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
    return a.concept_text < b.concept_text;
  });
  models.resize(k);
  return models;
}

nlohmann::json grounders_to_json(const std::vector<GroundingModel>& models) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : models) {
    arr.push_back({{"concept", m.concept_text},
                   {"weights", m.weights},
                   {"bias", m.bias},
                   {"val_accuracy", m.val_accuracy}});
  }
  return {{"grounders", std::move(arr)}};
}

std::vector<GroundingModel> grounders_from_json(const nlohmann::json& j) {
  std::vector<GroundingModel> out;
  try {
    for (const auto& m : j.at("grounders")) {
      GroundingModel g{m.at("concept").get<std::string>(), m.at("weights").get<std::vector<double>>(),
                       m.at("bias").get<double>(), m.at("val_accuracy").get<double>()};
      for (double w : g.weights) {
        if (!std::isfinite(w)) throw DataError("non-finite weight in grounder " + g.concept_text);
      }
      if (!out.empty() && out.front().weights.size() != g.weights.size()) {
        throw DataError("grounders disagree on feature dimension");
      }
      out.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed grounders file: ") + e.what());
  }
  return out;
}

}  // namespace knobo
