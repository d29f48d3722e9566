#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knobo/matrix.hpp"

namespace knobo {

/// Class scores = activations . W^T + bias, with W of shape N x N_C.
struct LinearHead {
  Matrix weights;
  std::vector<double> bias;  // empty when the head has no bias
  std::vector<std::string> class_names;
  std::vector<std::string> concept_texts;  // column labels, for alignment checks

  [[nodiscard]] std::size_t n_classes() const noexcept { return weights.rows(); }
  [[nodiscard]] std::size_t n_inputs() const noexcept { return weights.cols(); }

  static LinearHead zeros(std::size_t n_classes, std::size_t n_inputs, bool with_bias = true);
};

/// Sign matrix of expected class/concept correlations; entries are exactly +-1.
class PriorMatrix {
 public:
  PriorMatrix() = default;
  explicit PriorMatrix(Matrix signs);

  [[nodiscard]] const Matrix& signs() const noexcept { return signs_; }
  [[nodiscard]] std::size_t rows() const noexcept { return signs_.rows(); }
  [[nodiscard]] std::size_t cols() const noexcept { return signs_.cols(); }
  double operator()(std::size_t r, std::size_t c) const noexcept { return signs_(r, c); }

 private:
  Matrix signs_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  bool prior_enabled = false;
  double prior_weight = 1.0;  // lambda on the prior term
  double l2 = 0.0;
  bool use_bias = true;

  void check() const;
};

std::vector<double> forward(const LinearHead& head, std::span<const double> activations);
/// argmax of the scores; the lowest index wins ties.
int predict(const LinearHead& head, std::span<const double> activations);
int argmax(std::span<const double> scores) noexcept;

/// (1 / (N * N_C)) * sum |tanh(w_ij) - p_ij|
double loss_prior(const Matrix& weights, const PriorMatrix& prior);

/// d loss_prior / d w_ij = sign(tanh(w_ij) - p_ij) * (1 - tanh^2(w_ij)) / (N * N_C),
/// with sign(0) = 0.
Matrix prior_gradient(const Matrix& weights, const PriorMatrix& prior);

/// Mean softmax cross-entropy over the batch.
double loss_ce(const LinearHead& head, const Matrix& inputs, std::span<const int> labels);

/// Terms of the training objective. `prior` must be non-null when
/// cfg.prior_enabled; it is ignored otherwise.
double loss_total(const LinearHead& head, const Matrix& inputs, std::span<const int> labels,
                  const PriorMatrix* prior, const TrainConfig& cfg);

struct HeadGradients {
  Matrix weights;
  std::vector<double> bias;
};

HeadGradients gradients(const LinearHead& head, const Matrix& inputs, std::span<const int> labels,
                        const PriorMatrix* prior, const TrainConfig& cfg);

struct ValidationSet {
  const Matrix* inputs = nullptr;
  std::span<const int> labels;
};

struct HeadTrainResult {
  LinearHead head;
  double best_val_accuracy = -1.0;  // -1 when no validation set was given
  std::size_t best_epoch = 0;       // 1-based epoch of the kept checkpoint
  std::vector<double> epoch_loss;   // objective on the training data, [0] = initial
};

/// Mini-batch gradient descent on loss_total from a zero head. With a
/// validation set the checkpoint with the highest validation accuracy is
/// returned (later epochs win ties); otherwise the final weights.
HeadTrainResult train_head(const Matrix& inputs, std::span<const int> labels, std::size_t n_classes,
                           const TrainConfig& cfg, const PriorMatrix* prior = nullptr,
                           std::optional<ValidationSet> validation = std::nullopt);

/// Accuracy in percent.
double head_accuracy(const LinearHead& head, const Matrix& inputs, std::span<const int> labels);

/// Margin loss y * max(0, m - s) + (1 - y) * s for a concept/image cosine s.
double contrastive_loss(int y, double s, double margin = 0.6);

/// Supplies the expected sign (+1 / -1) of the class/concept correlation.
class PriorOracle {
 public:
  virtual ~PriorOracle() = default;
  virtual int sign(const std::string& class_name, const std::string& concept_question) = 0;
};

/// Mock backed by known signs; concepts missing from the table get
/// `fallback` for every class.
class TablePriorOracle final : public PriorOracle {
 public:
  TablePriorOracle(std::vector<std::string> class_names,
                   std::map<std::string, std::vector<int>> signs_by_concept, int fallback = -1);
  int sign(const std::string& class_name, const std::string& concept_question) override;

 private:
  std::vector<std::string> class_names_;
  std::map<std::string, std::vector<int>> signs_;
  int fallback_;
};

PriorMatrix build_prior(const std::vector<std::string>& class_names,
                        const std::vector<std::string>& concepts, PriorOracle& oracle);

/// Sign of the correlation between each class indicator and each concept
/// activation on labelled data (zero correlation maps to +1). This learns
/// from the very data that may carry the confound, so it is never a
/// substitute for a knowledge-derived prior in robustness evaluations.
PriorMatrix empirical_sign_prior(const Matrix& activations, std::span<const int> labels,
                                 std::size_t n_classes);

nlohmann::json head_to_json(const LinearHead& head);
LinearHead head_from_json(const nlohmann::json& j);
nlohmann::json prior_to_json(const PriorMatrix& prior, const std::vector<std::string>& class_names,
                             const std::vector<std::string>& concepts);
PriorMatrix prior_from_json(const nlohmann::json& j, const std::vector<std::string>* expected_concepts = nullptr);

}  // namespace knobo
