#include "knobo/synth.hpp"

#include <array>
#include <string_view>

#include "knobo/error.hpp"
#include "knobo/fmat.hpp"
#include "knobo/io.hpp"
#include "knobo/rng.hpp"

namespace knobo {
namespace {

constexpr std::array<std::string_view, 12> kFindingWords = {
    "opacity",     "effusion",     "nodule",   "edema",    "consolidation", "atelectasis",
    "pneumothorax", "cardiomegaly", "infiltrate", "fibrosis", "emphysema",    "calcification"};
constexpr std::array<std::string_view, 2> kDistractors = {"fracture", "granuloma"};
constexpr std::array<std::string_view, 2> kNonVisual = {"fever", "cough"};

constexpr std::array<std::string_view, 16> kModifiers = {
    "patchy", "focal",  "diffuse", "bilateral", "nodular", "linear",   "reticular", "cystic",
    "streaky", "hazy",  "dense",   "subtle",    "confluent", "cavitary", "apical",  "spiculated"};
constexpr std::array<std::string_view, 14> kNouns = {
    "opacity", "effusion",   "nodule", "consolidation", "atelectasis", "thickening",  "lucency",
    "infiltrate", "scarring", "mass",  "calcification", "edema",       "emphysema",   "bronchiectasis"};

std::string question_for(std::string_view keyword) { return "Is there " + std::string(keyword) + "?"; }

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 32);
  return s;
}

struct Sampler {
  const SyntheticConfig& cfg;
  SplitMix64& rng;

  std::vector<double> features(const std::vector<int>& z, int g) {
    std::vector<double> x(cfg.d);
    for (double& v : x) v = cfg.noise_std * rng.normal();
    for (std::size_t k = 0; k < z.size(); ++k) {
      for (std::size_t j = 0; j < cfg.dims_per_concept; ++j) {
        x[k * cfg.dims_per_concept + j] += cfg.concept_scale * (2.0 * z[k] - 1.0);
      }
    }
    const std::size_t base = z.size() * cfg.dims_per_concept;
    for (std::size_t j = 0; j < cfg.confound_dims; ++j) x[base + j] += cfg.confound_scale * (2.0 * g - 1.0);
    return x;
  }
};

std::string report_for(const std::vector<int>& z, const std::vector<std::string>& keywords) {
  std::string findings;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k] == 0) continue;
    findings += (findings.empty() ? "" : ", ") + keywords[k];
  }
  return findings.empty() ? "No acute findings." : "Findings: " + findings + ".";
}

}  // namespace

void SyntheticConfig::check() const {
  if (n_true_concepts == 0) throw UsageError("n_true_concepts must be at least 1");
  if (n_true_concepts > kFindingWords.size()) {
    throw UsageError("at most " + std::to_string(kFindingWords.size()) + " true concepts are supported");
  }
  if (n_true_concepts * dims_per_concept + confound_dims > d) {
    throw UsageError("feature dimension too small for the concept and confound blocks");
  }
  if (!(confound_strength >= 0.0 && confound_strength <= 1.0)) {
    throw UsageError("confound_strength must lie in [0, 1]");
  }
  if (!(pretrain_group_corr >= 0.0 && pretrain_group_corr <= 1.0)) {
    throw UsageError("pretrain_group_corr must lie in [0, 1]");
  }
  if (noise_std < 0.0) throw UsageError("noise_std must be non-negative");
}

SyntheticWorld synth_generate(const SyntheticConfig& cfg) {
  cfg.check();
  const std::size_t K = cfg.n_true_concepts;
  SyntheticWorld w;
  w.class_names = {"normal", "pneumonia"};
  w.group_names = {"hospital_a", "hospital_b"};
  for (std::size_t k = 0; k < K; ++k) {
    w.concept_keywords.emplace_back(kFindingWords[k]);
    w.concept_questions.push_back(question_for(kFindingWords[k]));
    w.rule.push_back(k < (K + 1) / 2 ? 1 : -1);
    w.prior_signs[w.concept_questions.back()] = {-w.rule.back(), w.rule.back()};
  }

  SplitMix64 pool_rng(derive_seed(cfg.seed, 1));
  SplitMix64 pretrain_rng(derive_seed(cfg.seed, 2));

  auto label_of = [&](const std::vector<int>& z) {
    int s = 0;
    for (std::size_t k = 0; k < K; ++k) s += w.rule[k] * z[k];
    return s >= 1 ? 1 : 0;
  };

  // Labelled pool: rejection-sample until every (label, group) cell is full.
  {
    Sampler sampler{cfg, pool_rng};
    std::array<std::size_t, 4> filled{};
    std::size_t id = 0;
    std::vector<int> z(K);
    while (filled[0] + filled[1] + filled[2] + filled[3] < 4 * cfg.n_per_cell) {
      for (auto& zk : z) zk = pool_rng.bernoulli(0.5) ? 1 : 0;
      const int g = pool_rng.bernoulli(0.5) ? 1 : 0;
      const int y = label_of(z);
      auto& count = filled[static_cast<std::size_t>(2 * y + g)];
      if (count >= cfg.n_per_cell) continue;
      ++count;
      w.pool.push_back({"ex-" + std::to_string(id++), sampler.features(z, g), y, g,
                        report_for(z, w.concept_keywords)});
    }
  }

  {
    Sampler sampler{cfg, pretrain_rng};
    std::vector<int> z(K);
    for (std::size_t i = 0; i < cfg.n_pretrain; ++i) {
      const int g = pretrain_rng.bernoulli(0.5) ? 1 : 0;
      const double p = 0.5 + cfg.pretrain_group_corr * (g - 0.5);
      for (auto& zk : z) zk = pretrain_rng.bernoulli(p) ? 1 : 0;
      w.pretrain.push_back({sampler.features(z, g), report_for(z, w.concept_keywords), "pre-" + std::to_string(i)});
    }
  }

  // Knowledge corpus: class documents cite the concepts that drive them,
  // concept documents chain to their neighbours and mention distractors.
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  for (std::size_t k = 0; k < K; ++k) (w.rule[k] > 0 ? positives : negatives).push_back(w.concept_keywords[k]);
  auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i == 0 ? "" : i + 1 == items.size() ? " and " : ", ") + items[i];
    return s;
  };
  w.corpus.push_back({"kb-pneumonia", "Pneumonia",
                      "Pneumonia is an infection of the lung parenchyma. Pneumonia commonly presents with " +
                          join(positives) + " on chest radiographs. Patients with pneumonia often report " +
                          std::string(kNonVisual[0]) + "."});
  w.corpus.push_back({"kb-normal", "Normal chest radiograph",
                      "A normal chest radiograph shows clear lungs. " +
                          (negatives.empty() ? std::string("Normal studies lack focal findings.")
                                             : "Normal studies may still show " + join(negatives) +
                                                   " without infection.") +
                          " A normal study can coexist with " + std::string(kNonVisual[1]) + "."});
  for (std::size_t k = 0; k < K; ++k) {
    const auto& kw = w.concept_keywords[k];
    const auto& next = w.concept_keywords[(k + 1) % K];
    const auto distractor = std::string(kDistractors[k % kDistractors.size()]);
    w.corpus.push_back({"kb-" + kw, capitalized(kw),
                        capitalized(kw) + " is a radiographic finding. " + capitalized(kw) +
                            " is frequently reported together with " + next + ". " + capitalized(kw) +
                            " should be distinguished from " + distractor + "."});
  }
  for (const auto& kw : w.concept_keywords) {
    w.proposer_lexicon.push_back(kw);
    w.visual_lexicon.push_back(kw);
  }
  for (auto d : kDistractors) {
    w.proposer_lexicon.emplace_back(d);
    w.visual_lexicon.emplace_back(d);
  }
  for (auto n : kNonVisual) w.proposer_lexicon.emplace_back(n);
  return w;
}

ConfoundSpec synth_confound_spec(const SyntheticWorld& world, std::size_t n_train, std::size_t n_val,
                                 std::size_t n_test, double strength) {
  ConfoundSpec spec;
  spec.class_names = {world.class_names[0], world.class_names[1]};
  spec.group_names = {world.group_names[0], world.group_names[1]};
  spec.train_pairing = {0, 1};
  spec.n_train = n_train;
  spec.n_val = n_val;
  spec.n_test = n_test;
  spec.strength = strength;
  return spec;
}

std::vector<std::string> synth_finding_terms(std::size_t n) {
  if (n > kModifiers.size() * kNouns.size()) throw UsageError("finding vocabulary too small");
  std::vector<std::string> terms;
  // Walk nouns fastest so neighbouring terms differ in the noun.
  for (std::size_t i = 0; i < n; ++i) {
    terms.push_back(std::string(kModifiers[(i / kNouns.size()) % kModifiers.size()]) + " " +
                    std::string(kNouns[i % kNouns.size()]));
  }
  return terms;
}

std::vector<Document> synth_knowledge_corpus(const std::vector<std::string>& class_names,
                                             const std::vector<std::string>& terms) {
  std::vector<Document> docs;
  const std::size_t n = terms.size();
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::string text = capitalized(class_names[c]) + " is a diagnostic category.";
    for (std::size_t i = c; i < n && i < c + 6; i += 2) {
      text += " " + capitalized(class_names[c]) + " can present with " + terms[i] + ".";
    }
    docs.push_back({"class-" + std::to_string(c), class_names[c], text});
  }
  for (std::size_t i = 0; i < n; ++i) {
    docs.push_back({"term-" + std::to_string(i), terms[i],
                    capitalized(terms[i]) + " is described in imaging reports. " + capitalized(terms[i]) +
                        " often accompanies " + terms[(i + 1) % n] + ". " + capitalized(terms[i]) +
                        " may progress to " + terms[(i + 2) % n] + "."});
  }
  return docs;
}

void save_pretrain(const std::filesystem::path& prefix, const std::vector<PretrainPair>& pairs) {
  Matrix features;
  std::vector<nlohmann::json> meta;
  for (const auto& p : pairs) {
    features.append_row(p.image_features);
    meta.push_back({{"pair_id", p.pair_id}, {"report_text", p.report_text}});
  }
  auto fmat_path = prefix;
  fmat_path += ".fmat";
  auto meta_path = prefix;
  meta_path += ".jsonl";
  save_fmat(fmat_path, features);
  io::write_file_atomic(meta_path, io::to_jsonl(meta));
}

std::vector<PretrainPair> load_pretrain(const std::filesystem::path& prefix) {
  auto fmat_path = prefix;
  fmat_path += ".fmat";
  auto meta_path = prefix;
  meta_path += ".jsonl";
  const auto features = load_fmat(fmat_path);
  const auto meta = io::read_jsonl(meta_path);
  if (meta.size() != features.rows()) {
    throw DataError(meta_path.string() + " is not aligned with " + fmat_path.string());
  }
  std::vector<PretrainPair> out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    try {
      const auto row = features.row(i);
      out.push_back({{row.begin(), row.end()}, meta[i].at("report_text").get<std::string>(),
                     meta[i].at("pair_id").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(meta_path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

void save_world(const std::filesystem::path& dir, const SyntheticWorld& world) {
  std::vector<nlohmann::json> docs;
  for (const auto& d : world.corpus) docs.push_back({{"id", d.id}, {"title", d.title}, {"text", d.text}});
  io::write_file_atomic(dir / "corpus.jsonl", io::to_jsonl(docs));
  save_split(dir / "pool", world.pool, "pool");
  save_pretrain(dir / "pretrain", world.pretrain);
  io::write_json(dir / "world.json", {{"class_names", world.class_names},
                                      {"group_names", world.group_names},
                                      {"concept_keywords", world.concept_keywords},
                                      {"concept_questions", world.concept_questions},
                                      {"rule", world.rule},
                                      {"prior_signs", world.prior_signs},
                                      {"proposer_lexicon", world.proposer_lexicon},
                                      {"visual_lexicon", world.visual_lexicon}});
}

}  // namespace knobo
