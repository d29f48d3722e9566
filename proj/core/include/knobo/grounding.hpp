#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knobo/embedding.hpp"
#include "knobo/matrix.hpp"

namespace knobo {

/// An image (as a feature vector) with its free-text report.
struct PretrainPair {
  std::vector<double> image_features;
  std::string report_text;
  std::string pair_id;
};

enum class AnnotationLabel { positive, negative, unknown };

const char* to_string(AnnotationLabel label) noexcept;

/// Judges whether a report implies a concept.
class AnnotationOracle {
 public:
  virtual ~AnnotationOracle() = default;
  virtual AnnotationLabel annotate(const std::string& report, const std::string& concept_question) = 0;
};

/// Mock annotator: positive iff every keyword of the concept occurs in the
/// report (as token phrases). Keywords come from an explicit per-concept
/// table, or default to the question's tokens minus question scaffolding
/// ("is", "there", "the", ...).
class KeywordAnnotationOracle final : public AnnotationOracle {
 public:
  KeywordAnnotationOracle() = default;
  explicit KeywordAnnotationOracle(std::map<std::string, std::vector<std::string>> keywords);

  AnnotationLabel annotate(const std::string& report, const std::string& concept_question) override;

  [[nodiscard]] std::vector<std::string> keywords_for(const std::string& concept_question) const;

 private:
  std::map<std::string, std::vector<std::string>> keywords_;
};

/// Never throws: transport failures surface as unknown.
AnnotationLabel annotate(const std::string& report, const std::string& concept_question,
                         AnnotationOracle& oracle);

struct ReportSample {
  std::vector<std::size_t> indices;  // similarity half first, then the random half
  std::size_t n_similar = 0;
  bool clamped = false;  // fewer pairs than requested; everything was taken
};

/// Picks the n_sim reports most similar to the concept (cosine of default
/// embeddings, ties by index) plus n_rand drawn without replacement from the
/// rest. Pairs sharing a pair_id are sampled once.
ReportSample sample_reports_for_concept(const std::string& concept_question,
                                        std::span<const PretrainPair> pairs, std::size_t n_sim,
                                        std::size_t n_rand, std::uint64_t seed,
                                        const Embedder& embedder = default_embedder());

struct LogisticConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  bool use_bias = true;
  double val_fraction = 0.2;
};

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> epoch_loss;  // [0] before training, then after each epoch
};

double sigmoid(double z) noexcept;

/// Mean binary cross-entropy of sigma(x.w + b) and its gradient.
double bce_loss(const Matrix& x, std::span<const int> y, std::span<const double> w, double b);
void bce_gradient(const Matrix& x, std::span<const int> y, std::span<const double> w, double b,
                  std::span<double> grad_w, double& grad_b);

/// Plain mini-batch gradient descent from zero weights with seeded shuffling.
LogisticFit train_logistic(const Matrix& x, std::span<const int> y, const LogisticConfig& cfg);

/// g_c(x) = sigma(x . W_c + b_c).
struct GroundingModel {
  std::string concept_text;
  std::vector<double> weights;
  double bias = 0.0;
  double val_accuracy = 0.0;

  [[nodiscard]] double activate(std::span<const double> features) const;
};

/// Trains on a seeded 80% of the examples and reports accuracy on the rest.
/// Throws if either label is absent.
GroundingModel train_grounder(const std::string& concept_text, const Matrix& features,
                              std::span<const int> labels, const LogisticConfig& cfg);

/// One concept's annotated training set drawn from the pretraining pairs.
struct GroundingSet {
  Matrix features;
  std::vector<int> labels;
  int positives = 0;
  int negatives = 0;
  int unknown = 0;
  bool clamped = false;
};

struct SamplingConfig {
  std::size_t n_similar = 1000;
  std::size_t n_random = 1000;
  std::uint64_t seed = 0;
};

GroundingSet build_grounding_set(const std::string& concept_question,
                                 std::span<const PretrainPair> pairs, AnnotationOracle& oracle,
                                 const SamplingConfig& sampling);

/// Trains one grounder per concept, up to `threads` at a time. Each concept
/// uses a seed derived from cfg.seed and its position, so the result does not
/// depend on scheduling.
std::vector<GroundingModel> train_grounders(const std::vector<std::string>& concepts,
                                            std::span<const PretrainPair> pairs,
                                            AnnotationOracle& oracle, const SamplingConfig& sampling,
                                            const LogisticConfig& cfg, unsigned threads = 0);

/// Concept activations in bottleneck order.
std::vector<double> ground(std::span<const double> features, const std::vector<GroundingModel>& models);
Matrix ground_all(const Matrix& features, const std::vector<GroundingModel>& models);

/// Highest val_accuracy first, ties by concept text; keeps k.
std::vector<GroundingModel> select_top_k(std::vector<GroundingModel> models, std::size_t k);

nlohmann::json grounders_to_json(const std::vector<GroundingModel>& models);
std::vector<GroundingModel> grounders_from_json(const nlohmann::json& j);

}  // namespace knobo
