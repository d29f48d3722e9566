#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knobo/matrix.hpp"

namespace knobo {

struct LabeledExample {
  std::string pair_id;
  std::vector<double> features;
  int label = 0;
  int group = 0;
  std::string report_text;
};

/// Binary confounded benchmark: during train/validation each class appears
/// mostly with its paired group; the test split reverses the pairing.
struct ConfoundSpec {
  std::array<std::string, 2> class_names{"class_0", "class_1"};
  std::array<std::string, 2> group_names{"group_0", "group_1"};
  std::array<int, 2> train_pairing{0, 1};  // class -> group
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  double strength = 1.0;  // share of each class drawn from its paired cell

  [[nodiscard]] int test_group(int label) const noexcept { return 1 - train_pairing[label]; }
};

struct Splits {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> val;
  std::vector<LabeledExample> test;
};

/// Sampling is without replacement and seeded; every split is class-balanced
/// (so split sizes must be even). Throws naming the (class, group) cell that
/// runs short.
Splits make_confounded_splits(const std::vector<LabeledExample>& pool, const ConfoundSpec& spec,
                              std::uint64_t seed);

/// Class-balanced split with groups balanced inside each class, drawn from
/// examples not listed in `exclude` (matched by pair_id).
std::vector<LabeledExample> make_unconfounded_split(const std::vector<LabeledExample>& pool, std::size_t n,
                                                    std::uint64_t seed,
                                                    const std::vector<LabeledExample>* exclude = nullptr);

struct Metrics {
  double id_acc = 0.0;
  double ood_acc = 0.0;
  double delta = 0.0;
  double avg = 0.0;
  std::optional<double> unconfounded_acc;
  std::optional<double> overall;
};

Metrics compute_metrics(double id_acc, double ood_acc, std::optional<double> unconfounded_acc = std::nullopt);

/// Round half away from zero to one decimal (74.25 -> 74.3). Internal math
/// stays unrounded; this is for display only.
double round_display(double value);
std::string format_display(double value);

/// "ID  OOD  Delta  Avg [Unconfd  Overall]" header and value row.
std::string metrics_table(const Metrics& m, const std::string& label = {});
nlohmann::json metrics_to_json(const Metrics& m);

using PredictFn = std::function<int(std::span<const double>)>;

/// Percentage of examples whose prediction equals the label.
double evaluate(const PredictFn& predict, const std::vector<LabeledExample>& split);

Matrix features_of(const std::vector<LabeledExample>& split);
std::vector<int> labels_of(const std::vector<LabeledExample>& split);

/// Split persistence: <prefix>.fmat holds the features, <prefix>.jsonl one
/// {"pair_id","label","group","split","report_text"} record per row.
void save_split(const std::filesystem::path& prefix, const std::vector<LabeledExample>& split,
                const std::string& split_name);
std::vector<LabeledExample> load_split(const std::filesystem::path& prefix);

}  // namespace knobo
