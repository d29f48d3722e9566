#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "knobo/bench.hpp"
#include "knobo/corpus_index.hpp"
#include "knobo/grounding.hpp"

namespace knobo {

/// Desk-scale stand-in for a confounded imaging dataset.
///
/// Each example has K latent binary concepts z and a group g. The label is
/// 1 iff sum_k r_k z_k >= 1, where r_k = +1 for the first ceil(K/2) concepts
/// and -1 for the rest. Feature layout:
///
///   [K blocks of dims_per_concept]  concept_scale * (2 z_k - 1) + noise
///   [confound_dims]                 confound_scale * (2 g - 1) + noise
///   [remaining dims]                noise
///
/// The labelled pool draws z independently of g, filling every (label, group)
/// cell with n_per_cell examples; confounding is imposed later by
/// make_confounded_splits. The pretraining pairs (images with reports) come
/// from a population where each concept is more common in group 1:
/// P(z_k = 1 | g) = 0.5 + pretrain_group_corr * (g - 0.5). Grounders trained
/// on them therefore pick up some group signal, as they would on real
/// multi-site report data.
struct SyntheticConfig {
  std::size_t d = 64;
  std::size_t n_per_cell = 1500;
  std::size_t n_true_concepts = 4;
  double confound_strength = 1.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  double concept_scale = 1.55;
  double confound_scale = 3.0;
  std::size_t dims_per_concept = 4;
  std::size_t confound_dims = 8;
  std::size_t n_pretrain = 2000;
  double pretrain_group_corr = 0.9;

  void check() const;
};

struct SyntheticWorld {
  std::vector<std::string> class_names;  // index = label
  std::vector<std::string> group_names;
  std::vector<std::string> concept_keywords;
  std::vector<std::string> concept_questions;
  std::vector<int> rule;  // r_k
  /// Ground-truth prior rows, keyed by concept question, one sign per class.
  std::map<std::string, std::vector<int>> prior_signs;

  std::vector<LabeledExample> pool;
  std::vector<PretrainPair> pretrain;
  std::vector<Document> corpus;
  std::vector<std::string> proposer_lexicon;  // everything the corpus talks about
  std::vector<std::string> visual_lexicon;    // the subset that is visually groundable
};

SyntheticWorld synth_generate(const SyntheticConfig& cfg);

/// ConfoundSpec over the world's classes and groups (class i pairs with group i).
ConfoundSpec synth_confound_spec(const SyntheticWorld& world, std::size_t n_train, std::size_t n_val,
                                 std::size_t n_test, double strength);

/// Findings vocabulary of distinct "<modifier> <noun>" phrases.
std::vector<std::string> synth_finding_terms(std::size_t n);

/// Knowledge corpus in which each term's document mentions the next two
/// terms, and each class document mentions the first few, so iterative
/// retrieval can walk the whole vocabulary.
std::vector<Document> synth_knowledge_corpus(const std::vector<std::string>& class_names,
                                             const std::vector<std::string>& terms);

/// Writes corpus.jsonl, pool.{fmat,jsonl}, pretrain.{fmat,jsonl} and
/// world.json (names, lexicons, prior table) under dir.
void save_world(const std::filesystem::path& dir, const SyntheticWorld& world);

std::vector<PretrainPair> load_pretrain(const std::filesystem::path& prefix);
void save_pretrain(const std::filesystem::path& prefix, const std::vector<PretrainPair>& pairs);

}  // namespace knobo
