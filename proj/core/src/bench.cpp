#include "knobo/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "knobo/error.hpp"
#include "knobo/fmat.hpp"
#include "knobo/io.hpp"
#include "knobo/rng.hpp"

namespace knobo {
namespace {

using Cell = std::pair<int, int>;  // (label, group)

std::map<Cell, std::vector<std::size_t>> cells_of(const std::vector<LabeledExample>& pool,
                                                  SplitMix64& rng,
                                                  const std::set<std::string>* exclude = nullptr) {
  std::map<Cell, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& e = pool[i];
    if (e.label < 0 || e.label > 1 || e.group < 0 || e.group > 1) {
      throw DataError("example " + e.pair_id + " has a label or group outside {0, 1}");
    }
    if (exclude != nullptr && exclude->contains(e.pair_id)) continue;
    cells[{e.label, e.group}].push_back(i);
  }
  for (auto& [cell, members] : cells) rng.shuffle(std::span(members));
  return cells;
}

class CellDrawer {
 public:
  CellDrawer(const std::vector<LabeledExample>& pool, std::map<Cell, std::vector<std::size_t>> cells,
             const ConfoundSpec* spec)
      : pool_(pool), cells_(std::move(cells)), spec_(spec) {}

  void draw(int label, int group, std::size_t n, std::vector<LabeledExample>& out) {
    auto& members = cells_[{label, group}];
    auto& used = used_[{label, group}];
    if (used + n > members.size()) {
      std::string name = "(label " + std::to_string(label) + ", group " + std::to_string(group) + ")";
      if (spec_ != nullptr) name = "(" + spec_->class_names[label] + ", " + spec_->group_names[group] + ")";
      throw DataError("cell " + name + " has " + std::to_string(members.size() - used) +
                      " unused examples, " + std::to_string(n) + " required");
    }
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool_[members[used + i]]);
    used += n;
  }

 private:
  const std::vector<LabeledExample>& pool_;
  std::map<Cell, std::vector<std::size_t>> cells_;
  std::map<Cell, std::size_t> used_;
  const ConfoundSpec* spec_;
};

std::size_t half_of(std::size_t n, const char* what) {
  if (n % 2 != 0) throw UsageError(std::string(what) + " size must be even for class balance");
  return n / 2;
}

}  // namespace

Splits make_confounded_splits(const std::vector<LabeledExample>& pool, const ConfoundSpec& spec,
                              std::uint64_t seed) {
  if (!(spec.strength >= 0.0 && spec.strength <= 1.0)) throw UsageError("confound strength must be in [0, 1]");
  if (spec.train_pairing[0] == spec.train_pairing[1]) throw UsageError("train pairing must be a bijection");
  SplitMix64 rng(seed);
  CellDrawer drawer(pool, cells_of(pool, rng), &spec);

  Splits s;
  auto fill = [&](std::vector<LabeledExample>& out, std::size_t n, bool reversed, const char* what) {
    const std::size_t per_class = half_of(n, what);
    const auto paired = static_cast<std::size_t>(std::llround(spec.strength * static_cast<double>(per_class)));
    for (int label = 0; label < 2; ++label) {
      const int home = reversed ? spec.test_group(label) : spec.train_pairing[label];
      drawer.draw(label, home, paired, out);
      drawer.draw(label, 1 - home, per_class - paired, out);
    }
    rng.shuffle(std::span(out));
  };
  fill(s.train, spec.n_train, false, "train");
  fill(s.val, spec.n_val, false, "validation");
  fill(s.test, spec.n_test, true, "test");
  return s;
}

std::vector<LabeledExample> make_unconfounded_split(const std::vector<LabeledExample>& pool, std::size_t n,
                                                    std::uint64_t seed,
                                                    const std::vector<LabeledExample>* exclude) {
  std::set<std::string> excluded;
  if (exclude != nullptr) {
    for (const auto& e : *exclude) excluded.insert(e.pair_id);
  }
  SplitMix64 rng(seed);
  CellDrawer drawer(pool, cells_of(pool, rng, &excluded), nullptr);
  const std::size_t per_class = half_of(n, "unconfounded");
  std::vector<LabeledExample> out;
  for (int label = 0; label < 2; ++label) {
    drawer.draw(label, 0, per_class / 2, out);
    drawer.draw(label, 1, per_class - per_class / 2, out);
  }
  rng.shuffle(std::span(out));
  return out;
}

Metrics compute_metrics(double id_acc, double ood_acc, std::optional<double> unconfounded_acc) {
  for (double v : {id_acc, ood_acc, unconfounded_acc.value_or(0.0)}) {
    if (!(v >= 0.0 && v <= 100.0)) throw UsageError("accuracies must lie in [0, 100]");
  }
  Metrics m;
  m.id_acc = id_acc;
  m.ood_acc = ood_acc;
  m.delta = std::abs(id_acc - ood_acc);
  m.avg = (id_acc + ood_acc) / 2.0;
  if (unconfounded_acc) {
    m.unconfounded_acc = unconfounded_acc;
    m.overall = (m.avg + *unconfounded_acc) / 2.0;
  }
  return m;
}

double round_display(double value) {
  // The nudge absorbs representation error so that a value written as 74.25
  // but stored as 74.2499999... still rounds up.
  const double magnitude = std::floor(std::abs(value) * 10.0 + 0.5 + 1e-9) / 10.0;
  return std::signbit(value) ? -magnitude : magnitude;
}

std::string format_display(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", round_display(value));
  return buf;
}

std::string metrics_table(const Metrics& m, const std::string& label) {
  auto cell = [](const std::string& s) {
    std::string out = s;
    if (out.size() < 9) out.insert(0, 9 - out.size(), ' ');
    return out;
  };
  std::string header = label.empty() ? std::string() : std::string(std::max<std::size_t>(label.size(), 6), ' ');
  if (!label.empty()) header.replace(0, 6, "Method");
  std::string row = label;
  if (!label.empty() && row.size() < header.size()) row.append(header.size() - row.size(), ' ');
  header += cell("ID") + cell("OOD") + cell("Delta") + cell("Avg");
  row += cell(format_display(m.id_acc)) + cell(format_display(m.ood_acc)) + cell(format_display(m.delta)) +
         cell(format_display(m.avg));
  if (m.unconfounded_acc) {
    header += cell("Unconfd") + cell("Overall");
    row += cell(format_display(*m.unconfounded_acc)) + cell(format_display(*m.overall));
  }
  return header + "\n" + row + "\n";
}

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j = {{"id", m.id_acc}, {"ood", m.ood_acc}, {"delta", m.delta}, {"avg", m.avg}};
  if (m.unconfounded_acc) {
    j["unconfounded"] = *m.unconfounded_acc;
    j["overall"] = *m.overall;
  }
  nlohmann::json display = {{"id", format_display(m.id_acc)},
                            {"ood", format_display(m.ood_acc)},
                            {"delta", format_display(m.delta)},
                            {"avg", format_display(m.avg)}};
  if (m.unconfounded_acc) {
    display["unconfounded"] = format_display(*m.unconfounded_acc);
    display["overall"] = format_display(*m.overall);
  }
  j["display"] = std::move(display);
  return j;
}

double evaluate(const PredictFn& predict, const std::vector<LabeledExample>& split) {
  if (split.empty()) throw DataError("cannot evaluate on an empty split");
  std::size_t correct = 0;
  for (const auto& e : split) {
    if (predict(e.features) == e.label) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(split.size());
}

Matrix features_of(const std::vector<LabeledExample>& split) {
  Matrix m;
  for (const auto& e : split) m.append_row(e.features);
  return m;
}

std::vector<int> labels_of(const std::vector<LabeledExample>& split) {
  std::vector<int> y;
  y.reserve(split.size());
  for (const auto& e : split) y.push_back(e.label);
  return y;
}

void save_split(const std::filesystem::path& prefix, const std::vector<LabeledExample>& split,
                const std::string& split_name) {
  auto fmat_path = prefix;
  fmat_path += ".fmat";
  auto meta_path = prefix;
  meta_path += ".jsonl";
  save_fmat(fmat_path, features_of(split));
  std::vector<nlohmann::json> records;
  for (const auto& e : split) {
    records.push_back({{"pair_id", e.pair_id},
                       {"label", e.label},
                       {"group", e.group},
                       {"split", split_name},
                       {"report_text", e.report_text}});
  }
  io::write_file_atomic(meta_path, io::to_jsonl(records));
}

std::vector<LabeledExample> load_split(const std::filesystem::path& prefix) {
  auto fmat_path = prefix;
  fmat_path += ".fmat";
  auto meta_path = prefix;
  meta_path += ".jsonl";
  const auto features = load_fmat(fmat_path);
  const auto meta = io::read_jsonl(meta_path);
  if (meta.size() != features.rows()) {
    throw DataError(meta_path.string() + " has " + std::to_string(meta.size()) + " records but " +
                    fmat_path.string() + " has " + std::to_string(features.rows()) + " rows");
  }
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    try {
      const auto row = features.row(i);
      out.push_back({meta[i].at("pair_id").get<std::string>(), {row.begin(), row.end()},
                     meta[i].at("label").get<int>(), meta[i].value("group", 0),
                     meta[i].value("report_text", std::string{})});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(meta_path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace knobo
