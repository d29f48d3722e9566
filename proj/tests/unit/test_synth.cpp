#include <doctest.h>

#include <set>

#include "knobo/bench.hpp"
#include "knobo/error.hpp"
#include "knobo/predictor.hpp"
#include "knobo/synth.hpp"

using namespace knobo;

TEST_CASE("synth_generate is deterministic per seed") {
  SyntheticConfig cfg;
  cfg.n_per_cell = 20;
  cfg.n_pretrain = 50;
  const auto a = synth_generate(cfg);
  const auto b = synth_generate(cfg);
  REQUIRE(a.pool.size() == 80);
  for (std::size_t i = 0; i < a.pool.size(); ++i) {
    CHECK(a.pool[i].features == b.pool[i].features);
    CHECK(a.pool[i].label == b.pool[i].label);
  }
  cfg.seed = 1;
  CHECK(synth_generate(cfg).pool[0].features != a.pool[0].features);
}

TEST_CASE("synthetic world contents") {
  SyntheticConfig cfg;
  cfg.n_per_cell = 25;
  cfg.n_pretrain = 200;
  const auto w = synth_generate(cfg);
  CHECK(w.class_names.size() == 2);
  CHECK(w.concept_questions.size() == 4);
  CHECK(w.rule == std::vector<int>{1, 1, -1, -1});
  CHECK(w.prior_signs.at(w.concept_questions[0]) == std::vector<int>{-1, 1});
  CHECK(w.prior_signs.at(w.concept_questions[3]) == std::vector<int>{1, -1});
  for (const auto& e : w.pool) CHECK(e.features.size() == cfg.d);

  // Reports list exactly the concepts present; the rule is recoverable from them.
  for (const auto& e : w.pool) {
    int s = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      if (e.report_text.find(w.concept_keywords[k]) != std::string::npos) s += w.rule[k];
    }
    CHECK(e.label == (s >= 1 ? 1 : 0));
  }
  std::set<std::string> visual(w.visual_lexicon.begin(), w.visual_lexicon.end());
  for (const auto& kw : w.concept_keywords) CHECK(visual.contains(kw));
  CHECK(w.proposer_lexicon.size() > w.visual_lexicon.size());
}

TEST_CASE("noise-free, confound-free features are linearly separable") {
  SyntheticConfig cfg;
  cfg.noise_std = 0.0;
  cfg.confound_scale = 0.0;
  cfg.n_per_cell = 1000;
  cfg.n_pretrain = 10;
  const auto w = synth_generate(cfg);
  const auto s = make_confounded_splits(w.pool, synth_confound_spec(w, 1000, 500, 100, 1.0), 0);
  const auto x = features_of(s.train);
  const auto y = labels_of(s.train);
  const auto xv = features_of(s.val);
  const auto yv = labels_of(s.val);
  TrainConfig tc;
  const auto fit = train_head(x, y, 2, tc, nullptr, ValidationSet{&xv, yv});
  CHECK(head_accuracy(fit.head, xv, yv) >= 99.0);
}

TEST_CASE("full confounding makes the group a perfect train-set predictor") {
  SyntheticConfig cfg;
  cfg.n_per_cell = 200;
  cfg.n_pretrain = 10;
  const auto w = synth_generate(cfg);
  const auto s = make_confounded_splits(w.pool, synth_confound_spec(w, 200, 0, 100, 1.0), 0);
  for (const auto& e : s.train) CHECK(e.group == e.label);
  for (const auto& e : s.test) CHECK(e.group != e.label);
}

TEST_CASE("pretraining concepts lean towards group 1") {
  SyntheticConfig cfg;
  cfg.n_per_cell = 1;
  cfg.n_pretrain = 4000;
  const auto w = synth_generate(cfg);
  // The confound block (dims 16..23) reveals the group.
  int with_g1 = 0, with_g0 = 0, g1 = 0, g0 = 0;
  for (const auto& p : w.pretrain) {
    const bool group1 = p.image_features[16] > 0;
    const bool has = p.report_text.find(w.concept_keywords[0]) != std::string::npos;
    (group1 ? g1 : g0)++;
    (group1 ? with_g1 : with_g0) += has;
  }
  CHECK(static_cast<double>(with_g1) / g1 > 0.85);
  CHECK(static_cast<double>(with_g0) / g0 < 0.15);
}

TEST_CASE("config validation") {
  SyntheticConfig bad;
  bad.d = 10;
  CHECK_THROWS_AS(bad.check(), UsageError);
  SyntheticConfig strength;
  strength.confound_strength = 1.5;
  CHECK_THROWS_AS(strength.check(), UsageError);
}

TEST_CASE("finding vocabulary and knowledge corpus") {
  const auto terms = synth_finding_terms(200);
  CHECK(std::set<std::string>(terms.begin(), terms.end()).size() == 200);
  CHECK_THROWS_AS(synth_finding_terms(100000), UsageError);
  const auto docs = synth_knowledge_corpus({"normal", "pneumonia"}, terms);
  CHECK(docs.size() == 202);
  CHECK(docs[2].text.find(terms[1]) != std::string::npos);
}
