#include "knobo/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knobo/error.hpp"
#include "knobo/rng.hpp"

namespace knobo {
namespace {

void check_inputs(const LinearHead& head, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows() != labels.size()) throw UsageError("inputs and labels differ in length");
  if (inputs.rows() > 0 && inputs.cols() != head.n_inputs()) {
    throw DataError("input width " + std::to_string(inputs.cols()) + " does not match head width " +
                    std::to_string(head.n_inputs()));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= head.n_classes()) {
      throw DataError("label " + std::to_string(y) + " out of range");
    }
  }
}

const PriorMatrix* active_prior(const LinearHead& head, const PriorMatrix* prior, const TrainConfig& cfg) {
  if (!cfg.prior_enabled) return nullptr;
  if (prior == nullptr) throw UsageError("prior loss enabled but no prior matrix given");
  if (prior->rows() != head.weights.rows() || prior->cols() != head.weights.cols()) {
    throw DataError("prior matrix shape does not match the head");
  }
  return prior;
}

// Softmax probabilities for one row, written into probs.
void softmax_scores(const LinearHead& head, std::span<const double> x, std::span<double> probs) {
  for (std::size_t c = 0; c < head.n_classes(); ++c) {
    probs[c] = dot(head.weights.row(c), x) + (head.bias.empty() ? 0.0 : head.bias[c]);
  }
  const double mx = *std::max_element(probs.begin(), probs.end());
  double total = 0.0;
  for (double& p : probs) {
    p = std::exp(p - mx);
    total += p;
  }
  for (double& p : probs) p /= total;
}

// Accumulates d(mean CE)/dW over rows [first, last) of `order`.
void accumulate_ce_gradient(const LinearHead& head, const Matrix& inputs, std::span<const int> labels,
                            std::span<const std::size_t> rows, HeadGradients& g) {
  std::vector<double> probs(head.n_classes());
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    const auto x = inputs.row(r);
    softmax_scores(head, x, probs);
    probs[static_cast<std::size_t>(labels[r])] -= 1.0;
    for (std::size_t c = 0; c < head.n_classes(); ++c) {
      const double err = probs[c] * scale;
      auto gw = g.weights.row(c);
      for (std::size_t j = 0; j < x.size(); ++j) gw[j] += err * x[j];
      if (!g.bias.empty()) g.bias[c] += err;
    }
  }
}

void add_regularizer_gradients(const LinearHead& head, const PriorMatrix* prior, const TrainConfig& cfg,
                               HeadGradients& g) {
  if (prior != nullptr) {
    const auto pg = prior_gradient(head.weights, *prior);
    for (std::size_t i = 0; i < g.weights.size(); ++i) {
      g.weights.values()[i] += cfg.prior_weight * pg.values()[i];
    }
  }
  if (cfg.l2 != 0.0) {
    for (std::size_t i = 0; i < g.weights.size(); ++i) {
      g.weights.values()[i] += cfg.l2 * head.weights.values()[i];
    }
  }
}

}  // namespace

LinearHead LinearHead::zeros(std::size_t n_classes, std::size_t n_inputs, bool with_bias) {
  LinearHead head;
  head.weights = Matrix(n_classes, n_inputs);
  if (with_bias) head.bias.assign(n_classes, 0.0);
  return head;
}

PriorMatrix::PriorMatrix(Matrix signs) : signs_(std::move(signs)) {
  for (double v : signs_.values()) {
    if (v != 1.0 && v != -1.0) throw DataError("prior matrix entries must be +1 or -1");
  }
}

void TrainConfig::check() const {
  if (!(learning_rate > 0) || batch_size == 0) {
    throw UsageError("learning rate and batch size must be positive");
  }
  if (l2 < 0 || prior_weight < 0) throw UsageError("l2 and prior weight must be non-negative");
}

int argmax(std::span<const double> scores) noexcept {
  int best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> forward(const LinearHead& head, std::span<const double> activations) {
  if (activations.size() != head.n_inputs()) {
    throw DataError("activation width " + std::to_string(activations.size()) +
                    " does not match head width " + std::to_string(head.n_inputs()));
  }
  std::vector<double> scores(head.n_classes());
  for (std::size_t c = 0; c < head.n_classes(); ++c) {
    scores[c] = dot(head.weights.row(c), activations) + (head.bias.empty() ? 0.0 : head.bias[c]);
  }
  return scores;
}

int predict(const LinearHead& head, std::span<const double> activations) {
  return argmax(forward(head, activations));
}

double loss_prior(const Matrix& weights, const PriorMatrix& prior) {
  if (weights.rows() != prior.rows() || weights.cols() != prior.cols()) {
    throw DataError("loss_prior: shape mismatch");
  }
  if (weights.empty()) return 0.0;
  double total = 0.0;
  const auto w = weights.values();
  const auto p = prior.signs().values();
  for (std::size_t i = 0; i < w.size(); ++i) total += std::abs(std::tanh(w[i]) - p[i]);
  return total / static_cast<double>(w.size());
}

Matrix prior_gradient(const Matrix& weights, const PriorMatrix& prior) {
  if (weights.rows() != prior.rows() || weights.cols() != prior.cols()) {
    throw DataError("prior_gradient: shape mismatch");
  }
  Matrix g(weights.rows(), weights.cols());
  if (weights.empty()) return g;
  const double scale = 1.0 / static_cast<double>(weights.size());
  const auto w = weights.values();
  const auto p = prior.signs().values();
  auto out = g.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double t = std::tanh(w[i]);
    const double diff = t - p[i];
    const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    out[i] = sign * (1.0 - t * t) * scale;
  }
  return g;
}

double loss_ce(const LinearHead& head, const Matrix& inputs, std::span<const int> labels) {
  check_inputs(head, inputs, labels);
  if (inputs.rows() == 0) return 0.0;
  double total = 0.0;
  std::vector<double> scores(head.n_classes());
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    const auto x = inputs.row(r);
    for (std::size_t c = 0; c < head.n_classes(); ++c) {
      scores[c] = dot(head.weights.row(c), x) + (head.bias.empty() ? 0.0 : head.bias[c]);
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double lse = 0.0;
    for (double s : scores) lse += std::exp(s - mx);
    total += mx + std::log(lse) - scores[static_cast<std::size_t>(labels[r])];
  }
  return total / static_cast<double>(inputs.rows());
}

double loss_total(const LinearHead& head, const Matrix& inputs, std::span<const int> labels,
                  const PriorMatrix* prior, const TrainConfig& cfg) {
  const PriorMatrix* p = active_prior(head, prior, cfg);
  double loss = loss_ce(head, inputs, labels);
  if (p != nullptr) loss += cfg.prior_weight * loss_prior(head.weights, *p);
  if (cfg.l2 != 0.0) {
    double sq = 0.0;
    for (double w : head.weights.values()) sq += w * w;
    loss += 0.5 * cfg.l2 * sq;
  }
  return loss;
}

HeadGradients gradients(const LinearHead& head, const Matrix& inputs, std::span<const int> labels,
                        const PriorMatrix* prior, const TrainConfig& cfg) {
  check_inputs(head, inputs, labels);
  const PriorMatrix* p = active_prior(head, prior, cfg);
  HeadGradients g{Matrix(head.n_classes(), head.n_inputs()), std::vector<double>(head.bias.size(), 0.0)};
  if (inputs.rows() > 0) {
    std::vector<std::size_t> rows(inputs.rows());
    std::iota(rows.begin(), rows.end(), 0);
    accumulate_ce_gradient(head, inputs, labels, rows, g);
  }
  add_regularizer_gradients(head, p, cfg, g);
  return g;
}

double head_accuracy(const LinearHead& head, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows() == 0) throw DataError("accuracy of an empty split is undefined");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    if (predict(head, inputs.row(r)) == labels[r]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(inputs.rows());
}

HeadTrainResult train_head(const Matrix& inputs, std::span<const int> labels, std::size_t n_classes,
                           const TrainConfig& cfg, const PriorMatrix* prior,
                           std::optional<ValidationSet> validation) {
  cfg.check();
  if (n_classes < 2) throw UsageError("a linear head needs at least two classes");
  if (inputs.rows() == 0) throw DataError("empty training set");

  HeadTrainResult result;
  result.head = LinearHead::zeros(n_classes, inputs.cols(), cfg.use_bias);
  auto& head = result.head;
  check_inputs(head, inputs, labels);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (std::find(labels.begin(), labels.end(), static_cast<int>(c)) == labels.end()) {
      throw DataError("class " + std::to_string(c) + " has no training examples");
    }
  }
  const PriorMatrix* p = active_prior(head, prior, cfg);
  if (validation && validation->inputs == nullptr) validation.reset();

  result.epoch_loss.push_back(loss_total(head, inputs, labels, p, cfg));
  LinearHead best = head;

  std::vector<std::size_t> order(inputs.rows());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(cfg.seed);
  HeadGradients g{Matrix(n_classes, inputs.cols()), std::vector<double>(head.bias.size())};
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(g.weights.values().begin(), g.weights.values().end(), 0.0);
      std::fill(g.bias.begin(), g.bias.end(), 0.0);
      accumulate_ce_gradient(head, inputs, labels, std::span(order).subspan(start, stop - start), g);
      add_regularizer_gradients(head, p, cfg, g);
      auto w = head.weights.values();
      const auto gw = g.weights.values();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * gw[i];
      for (std::size_t c = 0; c < head.bias.size(); ++c) head.bias[c] -= cfg.learning_rate * g.bias[c];
    }
    result.epoch_loss.push_back(loss_total(head, inputs, labels, p, cfg));
    if (validation) {
      const double acc = head_accuracy(head, *validation->inputs, validation->labels);
      if (acc >= result.best_val_accuracy) {
        result.best_val_accuracy = acc;
        result.best_epoch = epoch;
        best = head;
      }
    }
  }
  if (validation && cfg.epochs > 0) {
    head = std::move(best);
  } else {
    result.best_epoch = cfg.epochs;
  }
  return result;
}

double contrastive_loss(int y, double s, double margin) {
  if (s < -1.0 || s > 1.0) throw UsageError("cosine similarity must lie in [-1, 1]");
  if (y != 0 && y != 1) throw UsageError("contrastive label must be 0 or 1");
  return y * std::max(0.0, margin - s) + (1 - y) * s;
}

TablePriorOracle::TablePriorOracle(std::vector<std::string> class_names,
                                   std::map<std::string, std::vector<int>> signs_by_concept, int fallback)
    : class_names_(std::move(class_names)), signs_(std::move(signs_by_concept)), fallback_(fallback) {
  for (const auto& [concept_text, row] : signs_) {
    if (row.size() != class_names_.size()) {
      throw DataError("prior table row for \"" + concept_text + "\" has the wrong number of classes");
    }
  }
}

int TablePriorOracle::sign(const std::string& class_name, const std::string& concept_question) {
  const auto cls = std::find(class_names_.begin(), class_names_.end(), class_name);
  if (cls == class_names_.end()) throw DataError("unknown class " + class_name);
  const auto it = signs_.find(concept_question);
  if (it == signs_.end()) return fallback_;
  return it->second[static_cast<std::size_t>(cls - class_names_.begin())];
}

PriorMatrix build_prior(const std::vector<std::string>& class_names,
                        const std::vector<std::string>& concepts, PriorOracle& oracle) {
  Matrix signs(class_names.size(), concepts.size());
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    for (std::size_t k = 0; k < concepts.size(); ++k) {
      signs(c, k) = oracle.sign(class_names[c], concepts[k]) >= 0 ? 1.0 : -1.0;
    }
  }
  return PriorMatrix(std::move(signs));
}

PriorMatrix empirical_sign_prior(const Matrix& activations, std::span<const int> labels,
                                 std::size_t n_classes) {
  if (activations.rows() != labels.size() || activations.rows() == 0) {
    throw DataError("empirical prior needs matching, non-empty activations and labels");
  }
  const auto n = static_cast<double>(activations.rows());
  Matrix signs(n_classes, activations.cols());
  for (std::size_t k = 0; k < activations.cols(); ++k) {
    double mean_a = 0.0;
    for (std::size_t r = 0; r < activations.rows(); ++r) mean_a += activations(r, k);
    mean_a /= n;
    for (std::size_t c = 0; c < n_classes; ++c) {
      double mean_y = 0.0;
      for (int y : labels) mean_y += (y == static_cast<int>(c)) ? 1.0 : 0.0;
      mean_y /= n;
      double cov = 0.0;
      for (std::size_t r = 0; r < activations.rows(); ++r) {
        cov += (activations(r, k) - mean_a) * ((labels[r] == static_cast<int>(c) ? 1.0 : 0.0) - mean_y);
      }
      signs(c, k) = cov < 0 ? -1.0 : 1.0;
    }
  }
  return PriorMatrix(std::move(signs));
}

nlohmann::json head_to_json(const LinearHead& head) {
  return {{"n_classes", head.n_classes()},
          {"n_inputs", head.n_inputs()},
          {"weights", std::vector<double>(head.weights.values().begin(), head.weights.values().end())},
          {"bias", head.bias},
          {"class_names", head.class_names},
          {"concepts", head.concept_texts}};
}

LinearHead head_from_json(const nlohmann::json& j) {
  try {
    const auto rows = j.at("n_classes").get<std::size_t>();
    const auto cols = j.at("n_inputs").get<std::size_t>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != rows * cols) throw DataError("head weights do not match the declared shape");
    LinearHead head;
    head.weights = Matrix(rows, cols);
    std::copy(w.begin(), w.end(), head.weights.values().begin());
    head.bias = j.value("bias", std::vector<double>{});
    if (!head.bias.empty() && head.bias.size() != rows) throw DataError("head bias has wrong length");
    head.class_names = j.value("class_names", std::vector<std::string>{});
    head.concept_texts = j.value("concepts", std::vector<std::string>{});
    for (double v : w) {
      if (!std::isfinite(v)) throw DataError("head contains non-finite weights");
    }
    return head;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed head file: ") + e.what());
  }
}

nlohmann::json prior_to_json(const PriorMatrix& prior, const std::vector<std::string>& class_names,
                             const std::vector<std::string>& concepts) {
  std::vector<int> values;
  for (double v : prior.signs().values()) values.push_back(static_cast<int>(v));
  return {{"n_classes", prior.rows()},
          {"n_concepts", prior.cols()},
          {"signs", values},
          {"class_names", class_names},
          {"concepts", concepts}};
}

PriorMatrix prior_from_json(const nlohmann::json& j, const std::vector<std::string>* expected_concepts) {
  try {
    const auto rows = j.at("n_classes").get<std::size_t>();
    const auto cols = j.at("n_concepts").get<std::size_t>();
    const auto v = j.at("signs").get<std::vector<int>>();
    if (v.size() != rows * cols) throw DataError("prior signs do not match the declared shape");
    if (expected_concepts != nullptr && j.contains("concepts") &&
        j.at("concepts").get<std::vector<std::string>>() != *expected_concepts) {
      throw DataError("prior matrix columns do not match the bottleneck concepts");
    }
    Matrix m(rows, cols);
    std::transform(v.begin(), v.end(), m.values().begin(), [](int s) { return static_cast<double>(s); });
    return PriorMatrix(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed prior file: ") + e.what());
  }
}

}  // namespace knobo
