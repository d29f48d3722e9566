#include "config.hpp"

#include "knobo/error.hpp"
#include "knobo/io.hpp"

namespace knobo::cli {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& defaults, const json& given, const std::string& where) {
  if (!given.is_object()) throw UsageError("config" + where + " must be a JSON object");
  for (const auto& [key, value] : given.items()) {
    if (!defaults.contains(key)) throw UsageError("unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
    if (defaults[key].is_object()) reject_unknown_keys(defaults[key], value, where.empty() ? key : where + "." + key);
  }
}

template <class T>
T get(const json& cfg, const std::string& section, const std::string& key) {
  try {
    return cfg.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config " + section + "." + key + ": " + e.what());
  }
}

}  // namespace

json default_config() {
  const SyntheticConfig s;
  const GenerationConfig g;
  const SamplingConfig sm;
  const LogisticConfig lc;
  const TrainConfig tc;
  return {
      {"seed", 0},
      {"oracle_mode", "mock"},
      {"endpoint_env", "KNOBO_ENDPOINT"},
      {"threads", 0},
      {"synth",
       {{"d", s.d},
        {"n_per_cell", s.n_per_cell},
        {"n_true_concepts", s.n_true_concepts},
        {"confound_strength", s.confound_strength},
        {"noise_std", s.noise_std},
        {"concept_scale", s.concept_scale},
        {"confound_scale", s.confound_scale},
        {"dims_per_concept", s.dims_per_concept},
        {"confound_dims", s.confound_dims},
        {"n_pretrain", s.n_pretrain},
        {"pretrain_group_corr", s.pretrain_group_corr},
        {"n_train", 2000},
        {"n_val", 400},
        {"n_test", 1000},
        {"n_unconfounded", 1000}}},
      {"index", {{"max_tokens", 128}, {"overlap", 32}}},
      {"generate",
       {{"target_size", g.target_size},
        {"docs_per_query", g.docs_per_query},
        {"bm25_k1", g.bm25.k1},
        {"bm25_b", g.bm25.b},
        {"dedup_similarity_threshold", g.validation.dedup_similarity_threshold},
        {"min_support_pos", g.validation.min_support_pos},
        {"min_support_neg", g.validation.min_support_neg},
        {"max_retries", g.max_retries},
        {"mock_max_per_query", 3}}},
      {"ground",
       {{"n_similar", sm.n_similar},
        {"n_random", sm.n_random},
        {"learning_rate", lc.learning_rate},
        {"batch_size", lc.batch_size},
        {"epochs", lc.epochs},
        {"use_bias", lc.use_bias},
        {"val_fraction", lc.val_fraction}}},
      {"train",
       {{"learning_rate", tc.learning_rate},
        {"batch_size", tc.batch_size},
        {"epochs", tc.epochs},
        {"prior", true},
        {"prior_weight", tc.prior_weight},
        {"l2", tc.l2},
        {"use_bias", tc.use_bias},
        {"top_k", 0}}},
      {"probe",
       {{"featurizer", "pixel"},
        {"d", 768},
        {"learning_rate", tc.learning_rate},
        {"batch_size", tc.batch_size},
        {"epochs", tc.epochs},
        {"l2", 0.0},
        {"use_bias", true}}},
  };
}

json load_config(const std::optional<std::filesystem::path>& path) {
  auto cfg = default_config();
  if (path) {
    const auto given = io::read_json(*path);
    reject_unknown_keys(cfg, given, "");
    cfg.merge_patch(given);
  }
  return cfg;
}

SyntheticConfig synth_config(const json& cfg) {
  SyntheticConfig s;
  s.d = get<std::size_t>(cfg, "synth", "d");
  s.n_per_cell = get<std::size_t>(cfg, "synth", "n_per_cell");
  s.n_true_concepts = get<std::size_t>(cfg, "synth", "n_true_concepts");
  s.confound_strength = get<double>(cfg, "synth", "confound_strength");
  s.noise_std = get<double>(cfg, "synth", "noise_std");
  s.concept_scale = get<double>(cfg, "synth", "concept_scale");
  s.confound_scale = get<double>(cfg, "synth", "confound_scale");
  s.dims_per_concept = get<std::size_t>(cfg, "synth", "dims_per_concept");
  s.confound_dims = get<std::size_t>(cfg, "synth", "confound_dims");
  s.n_pretrain = get<std::size_t>(cfg, "synth", "n_pretrain");
  s.pretrain_group_corr = get<double>(cfg, "synth", "pretrain_group_corr");
  s.seed = cfg.at("seed").get<std::uint64_t>();
  s.check();
  return s;
}

GenerationConfig generation_config(const json& cfg) {
  GenerationConfig g;
  g.target_size = get<std::size_t>(cfg, "generate", "target_size");
  g.docs_per_query = get<std::size_t>(cfg, "generate", "docs_per_query");
  g.bm25.k1 = get<double>(cfg, "generate", "bm25_k1");
  g.bm25.b = get<double>(cfg, "generate", "bm25_b");
  g.validation.dedup_similarity_threshold = get<double>(cfg, "generate", "dedup_similarity_threshold");
  g.validation.min_support_pos = get<int>(cfg, "generate", "min_support_pos");
  g.validation.min_support_neg = get<int>(cfg, "generate", "min_support_neg");
  g.max_retries = get<int>(cfg, "generate", "max_retries");
  g.retrieval_threads = cfg.at("threads").get<unsigned>();
  g.validation.check();
  return g;
}

SamplingConfig sampling_config(const json& cfg) {
  SamplingConfig s;
  s.n_similar = get<std::size_t>(cfg, "ground", "n_similar");
  s.n_random = get<std::size_t>(cfg, "ground", "n_random");
  s.seed = cfg.at("seed").get<std::uint64_t>();
  return s;
}

LogisticConfig grounding_config(const json& cfg) {
  LogisticConfig c;
  c.learning_rate = get<double>(cfg, "ground", "learning_rate");
  c.batch_size = get<std::size_t>(cfg, "ground", "batch_size");
  c.epochs = get<std::size_t>(cfg, "ground", "epochs");
  c.use_bias = get<bool>(cfg, "ground", "use_bias");
  c.val_fraction = get<double>(cfg, "ground", "val_fraction");
  c.seed = cfg.at("seed").get<std::uint64_t>();
  return c;
}

TrainConfig train_config(const json& cfg, const std::string& section) {
  TrainConfig t;
  t.learning_rate = get<double>(cfg, section, "learning_rate");
  t.batch_size = get<std::size_t>(cfg, section, "batch_size");
  t.epochs = get<std::size_t>(cfg, section, "epochs");
  t.l2 = get<double>(cfg, section, "l2");
  t.use_bias = get<bool>(cfg, section, "use_bias");
  if (section == "train") {
    t.prior_enabled = get<bool>(cfg, section, "prior");
    t.prior_weight = get<double>(cfg, section, "prior_weight");
  }
  t.seed = cfg.at("seed").get<std::uint64_t>();
  t.check();
  return t;
}

bool mock_mode(const json& cfg) {
  const auto mode = cfg.at("oracle_mode").get<std::string>();
  if (mode == "mock") return true;
  if (mode == "remote") return false;
  throw UsageError("oracle_mode must be \"mock\" or \"remote\", got \"" + mode + "\"");
}

}  // namespace knobo::cli
