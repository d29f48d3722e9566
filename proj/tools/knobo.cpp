// knobo: command-line driver for the concept-bottleneck pipeline.
//
//   synth -> index -> generate -> ground -> train -> eval
//
// plus `probe` (linear probes over image featurizers) and `diversity`.
// Exit codes: 0 success, 1 usage, 2 data, 3 remote oracle failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "knobo/bench.hpp"
#include "knobo/concept_gen.hpp"
#include "knobo/corpus_index.hpp"
#include "knobo/error.hpp"
#include "knobo/fmat.hpp"
#include "knobo/grounding.hpp"
#include "knobo/io.hpp"
#include "knobo/pipeline.hpp"
#include "knobo/predictor.hpp"
#include "knobo/prior_probe.hpp"
#include "knobo/remote.hpp"
#include "knobo/rng.hpp"
#include "knobo/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace knobo::cli {
namespace {

struct GlobalOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  bool mock = false;
  std::optional<std::string> endpoint_env;
  std::optional<unsigned> threads;
};

json resolve(const GlobalOptions& g) {
  auto cfg = load_config(g.config);
  if (g.seed) cfg["seed"] = *g.seed;
  if (g.mock) cfg["oracle_mode"] = "mock";
  if (g.endpoint_env) cfg["endpoint_env"] = *g.endpoint_env;
  if (g.threads) cfg["threads"] = *g.threads;
  return cfg;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path manifest_path_for(const fs::path& out) {
  if (fs::is_directory(out)) return out / "manifest.json";
  auto p = out;
  p += ".manifest.json";
  return p;
}

void write_manifest(const fs::path& out, const std::string& command, const json& cfg, const json& inputs,
                    const json& result) {
  io::write_json(manifest_path_for(out), {{"command", command},
                                          {"version", "0.1.0"},
                                          {"created_at", utc_now()},
                                          {"config", cfg},
                                          {"inputs", inputs},
                                          {"output", out.string()},
                                          {"result", result}});
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

void require_split(const fs::path& prefix, const char* what) {
  auto f = prefix;
  f += ".fmat";
  require_file(f, what);
}

RemoteEndpoint endpoint(const json& cfg) { return RemoteEndpoint::from_env(cfg.at("endpoint_env").get<std::string>()); }

std::unique_ptr<AnnotationOracle> annotation_oracle(const json& cfg) {
  if (mock_mode(cfg)) return std::make_unique<KeywordAnnotationOracle>();
  return std::make_unique<HttpAnnotationOracle>(endpoint(cfg));
}

/// Class names and mock lexicons, read from a world.json written by `synth`
/// (any JSON object with the same keys works).
struct WorldInfo {
  std::vector<std::string> class_names;
  std::vector<std::string> proposer_lexicon;
  std::vector<std::string> visual_lexicon;
  std::map<std::string, std::vector<int>> prior_signs;
};

WorldInfo read_world(const fs::path& path) {
  require_file(path, "world file");
  const auto j = io::read_json(path);
  try {
    WorldInfo w;
    w.class_names = j.at("class_names").get<std::vector<std::string>>();
    w.proposer_lexicon = j.value("proposer_lexicon", std::vector<std::string>{});
    w.visual_lexicon = j.value("visual_lexicon", std::vector<std::string>{});
    w.prior_signs = j.value("prior_signs", std::map<std::string, std::vector<int>>{});
    return w;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const json& cfg, const fs::path& out) {
  const auto sc = synth_config(cfg);
  const auto& s = cfg.at("synth");
  fs::create_directories(out);
  const auto world = synth_generate(sc);
  save_world(out, world);
  const auto spec = synth_confound_spec(world, s.at("n_train").get<std::size_t>(), s.at("n_val").get<std::size_t>(),
                                        s.at("n_test").get<std::size_t>(), sc.confound_strength);
  const auto splits = make_confounded_splits(world.pool, spec, sc.seed);
  auto used = splits.train;
  used.insert(used.end(), splits.val.begin(), splits.val.end());
  used.insert(used.end(), splits.test.begin(), splits.test.end());
  const auto unconfounded =
      make_unconfounded_split(world.pool, s.at("n_unconfounded").get<std::size_t>(), derive_seed(sc.seed, 7), &used);
  save_split(out / "train", splits.train, "train");
  save_split(out / "val", splits.val, "val");
  save_split(out / "test", splits.test, "test");
  save_split(out / "unconfounded", unconfounded, "unconfounded");

  std::printf("%-14s %8s\n", "artifact", "rows");
  std::printf("%-14s %8zu\n", "pool", world.pool.size());
  std::printf("%-14s %8zu\n", "pretrain", world.pretrain.size());
  std::printf("%-14s %8zu\n", "corpus", world.corpus.size());
  std::printf("%-14s %8zu\n", "train", splits.train.size());
  std::printf("%-14s %8zu\n", "val", splits.val.size());
  std::printf("%-14s %8zu\n", "test", splits.test.size());
  std::printf("%-14s %8zu\n", "unconfounded", unconfounded.size());
  write_manifest(out, "synth", cfg, json::object(),
                 {{"pool", world.pool.size()}, {"pretrain", world.pretrain.size()}, {"train", splits.train.size()},
                  {"val", splits.val.size()}, {"test", splits.test.size()}, {"unconfounded", unconfounded.size()}});
  return 0;
}

// ---------------------------------------------------------------- index

int cmd_index(const json& cfg, const fs::path& corpus, const fs::path& out) {
  require_file(corpus, "corpus");
  const auto docs = read_corpus(corpus);
  const auto index = InvertedIndex::from_documents(docs, cfg.at("index").at("max_tokens").get<int>(),
                                                   cfg.at("index").at("overlap").get<int>());
  index.save(out);
  std::printf("documents %zu  snippets %zu  terms %zu\n", docs.size(), index.n_snippets(), index.n_terms());
  write_manifest(out, "index", cfg, {{"corpus", corpus.string()}},
                 {{"documents", docs.size()}, {"snippets", index.n_snippets()}, {"terms", index.n_terms()}});
  return 0;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const json& cfg, const fs::path& index_path, const fs::path& pretrain_prefix,
                 const std::optional<fs::path>& world_path, const std::string& classes_csv, const fs::path& out) {
  require_file(index_path, "index");
  require_split(pretrain_prefix, "pretraining pairs");
  const auto index = InvertedIndex::load(index_path);
  const auto pretrain = load_pretrain(pretrain_prefix);
  const bool mock = mock_mode(cfg);

  WorldInfo world;
  if (world_path) world = read_world(*world_path);
  if (!classes_csv.empty()) world.class_names = split_csv(classes_csv);
  if (world.class_names.empty()) throw UsageError("generate needs class names (--world or --classes)");
  if (mock && world.proposer_lexicon.empty()) {
    throw UsageError("mock mode needs proposer_lexicon and visual_lexicon from --world");
  }

  std::unique_ptr<ConceptProposer> proposer;
  std::unique_ptr<GroundabilityOracle> groundable;
  if (mock) {
    proposer = std::make_unique<LexiconProposer>(world.proposer_lexicon,
                                                 cfg.at("generate").at("mock_max_per_query").get<std::size_t>());
    groundable = std::make_unique<LexiconGroundabilityOracle>(world.visual_lexicon);
  } else {
    proposer = std::make_unique<HttpProposer>(endpoint(cfg));
    groundable = std::make_unique<HttpGroundabilityOracle>(endpoint(cfg));
  }
  auto annotator = annotation_oracle(cfg);
  const auto support = report_support(pretrain, *annotator, sampling_config(cfg));
  const auto gen = generation_config(cfg);
  const auto result = generate_bottleneck(world.class_names, index, *proposer, *groundable, support, gen);
  save_bottleneck(out, result.bottleneck);

  std::map<std::string, int> rejected;
  for (const auto& r : result.rejections) ++rejected[to_string(r.verdict)];
  std::printf("%-4s %-40s %s\n", "#", "concept", "source");
  for (std::size_t i = 0; i < result.bottleneck.concepts.size(); ++i) {
    const auto& c = result.bottleneck.concepts[i];
    std::printf("%-4zu %-40s %s\n", i + 1, c.text.c_str(), c.source_doc_id.c_str());
  }
  std::printf("accepted %zu / target %zu, proposer calls %zu%s\n", result.bottleneck.size(), gen.target_size,
              result.proposer_calls, result.stalled ? ", stalled (frontier exhausted)" : "");
  for (const auto& [verdict, n] : rejected) std::printf("rejected %-22s %d\n", verdict.c_str(), n);
  if (result.stalled) std::fprintf(stderr, "warning: concept generation stalled before reaching the target size\n");

  write_manifest(out, "generate", cfg,
                 {{"index", index_path.string()}, {"pretrain", pretrain_prefix.string()},
                  {"world", world_path ? world_path->string() : ""}},
                 {{"accepted", result.bottleneck.size()},
                  {"stalled", result.stalled},
                  {"proposer_calls", result.proposer_calls},
                  {"frontier_sizes", result.frontier_sizes},
                  {"rejections", rejected}});
  return 0;
}

// ---------------------------------------------------------------- ground

int cmd_ground(const json& cfg, const fs::path& bottleneck_path, const fs::path& pretrain_prefix, const fs::path& out) {
  require_file(bottleneck_path, "bottleneck");
  require_split(pretrain_prefix, "pretraining pairs");
  const auto bottleneck = load_bottleneck(bottleneck_path);
  const auto pretrain = load_pretrain(pretrain_prefix);
  auto annotator = annotation_oracle(cfg);
  const auto models = train_grounders(bottleneck.texts(), pretrain, *annotator, sampling_config(cfg),
                                      grounding_config(cfg), cfg.at("threads").get<unsigned>());
  io::write_json(out, grounders_to_json(models));

  std::printf("%-40s %8s\n", "concept", "val_acc");
  json summary = json::array();
  for (const auto& m : models) {
    std::printf("%-40s %8.3f\n", m.concept_text.c_str(), m.val_accuracy);
    summary.push_back({{"concept", m.concept_text}, {"val_accuracy", m.val_accuracy}});
  }
  write_manifest(out, "ground", cfg, {{"bottleneck", bottleneck_path.string()}, {"pretrain", pretrain_prefix.string()}},
                 summary);
  return 0;
}

// ---------------------------------------------------------------- train / eval shared

std::vector<GroundingModel> grounders_for(const std::vector<std::string>& concepts,
                                          const std::vector<GroundingModel>& models) {
  std::map<std::string, const GroundingModel*> by_text;
  for (const auto& m : models) by_text[m.concept_text] = &m;
  std::vector<GroundingModel> out;
  for (const auto& c : concepts) {
    const auto it = by_text.find(c);
    if (it == by_text.end()) throw DataError("no grounder for concept '" + c + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::vector<GroundingModel> read_grounders(const fs::path& path) {
  require_file(path, "grounders");
  try {
    return grounders_from_json(io::read_json(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Matrix model_inputs(const std::vector<LabeledExample>& split, const std::vector<GroundingModel>* grounders) {
  const auto x = features_of(split);
  return grounders != nullptr ? ground_all(x, *grounders) : x;
}

std::vector<LabeledExample> read_split(const fs::path& prefix, const char* what) {
  require_split(prefix, what);
  return load_split(prefix);
}

// ---------------------------------------------------------------- train

int cmd_train(const json& cfg, const fs::path& train_prefix, const fs::path& val_prefix,
              const std::optional<fs::path>& grounders_path, const std::optional<fs::path>& world_path,
              const std::optional<fs::path>& prior_path, const fs::path& out) {
  const auto train = read_split(train_prefix, "train split");
  const auto val = read_split(val_prefix, "validation split");
  auto tc = train_config(cfg);
  const bool raw = !grounders_path.has_value();

  std::vector<GroundingModel> grounders;
  std::vector<std::string> columns;
  if (!raw) {
    grounders = read_grounders(*grounders_path);
    const auto k = cfg.at("train").at("top_k").get<std::size_t>();
    if (k > 0) grounders = select_top_k(std::move(grounders), k);
    for (const auto& g : grounders) columns.push_back(g.concept_text);
  } else {
    if (tc.prior_enabled) {
      std::fprintf(stderr, "note: no grounders given; training a plain linear probe on raw features\n");
      tc.prior_enabled = false;
    }
    for (std::size_t i = 0; i < train.front().features.size(); ++i) columns.push_back("f" + std::to_string(i));
  }

  std::vector<std::string> class_names;
  std::map<std::string, std::vector<int>> prior_table;
  if (world_path) {
    const auto w = read_world(*world_path);
    class_names = w.class_names;
    prior_table = w.prior_signs;
  }
  int n_classes = 0;
  for (const auto& e : train) n_classes = std::max(n_classes, e.label + 1);
  if (class_names.empty()) {
    for (int c = 0; c < n_classes; ++c) class_names.push_back("class_" + std::to_string(c));
  }
  if (static_cast<int>(class_names.size()) < n_classes) throw DataError("train split has more labels than class names");

  std::optional<PriorMatrix> prior;
  if (tc.prior_enabled) {
    if (prior_path) {
      require_file(*prior_path, "prior");
      prior = prior_from_json(io::read_json(*prior_path), &columns);
    } else if (mock_mode(cfg)) {
      if (prior_table.empty()) throw UsageError("mock prior needs prior_signs from --world (or pass --prior)");
      TablePriorOracle oracle(class_names, prior_table);
      prior = build_prior(class_names, columns, oracle);
    } else {
      HttpPriorOracle oracle(endpoint(cfg));
      prior = build_prior(class_names, columns, oracle);
    }
  }

  const auto x_train = model_inputs(train, raw ? nullptr : &grounders);
  const auto x_val = model_inputs(val, raw ? nullptr : &grounders);
  const auto y_train = labels_of(train);
  const auto y_val = labels_of(val);
  auto fit = train_head(x_train, y_train, class_names.size(), tc, prior ? &*prior : nullptr,
                        ValidationSet{&x_val, y_val});
  fit.head.class_names = class_names;
  fit.head.concept_texts = columns;

  json artifact = {{"features", raw ? "raw" : "concepts"},
                   {"head", head_to_json(fit.head)},
                   {"prior", prior ? prior_to_json(*prior, class_names, columns) : json(nullptr)},
                   {"best_val_accuracy", fit.best_val_accuracy},
                   {"best_epoch", fit.best_epoch}};
  io::write_json(out, artifact);
  std::printf("features %s  inputs %zu  prior %s  best val %.1f at epoch %zu\n", raw ? "raw" : "concepts",
              columns.size(), prior ? "on" : "off", fit.best_val_accuracy, fit.best_epoch);
  write_manifest(out, "train", cfg,
                 {{"train", train_prefix.string()},
                  {"val", val_prefix.string()},
                  {"grounders", grounders_path ? grounders_path->string() : ""}},
                 {{"best_val_accuracy", fit.best_val_accuracy}, {"best_epoch", fit.best_epoch}});
  return 0;
}

// ---------------------------------------------------------------- eval

std::vector<double> parse_numbers(const fs::path& path) {
  require_file(path, "numbers file");
  const auto text = io::read_file(path);
  try {
    const auto j = json::parse(text);
    if (j.is_object()) {
      std::vector<double> v{j.at("id").get<double>(), j.at("ood").get<double>()};
      if (j.contains("unconfounded") && !j["unconfounded"].is_null()) v.push_back(j["unconfounded"].get<double>());
      return v;
    }
    if (j.is_array()) return j.get<std::vector<double>>();
  } catch (const json::parse_error&) {
    // plain whitespace-separated numbers
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  std::vector<double> v;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": not a number: '" + tok + "'");
    }
  }
  return v;
}

int cmd_eval(const json& cfg, const std::optional<fs::path>& numbers, const std::optional<fs::path>& head_path,
             const std::optional<fs::path>& grounders_path, const std::optional<fs::path>& val_prefix,
             const std::optional<fs::path>& test_prefix, const std::optional<fs::path>& unconf_prefix,
             const std::string& label, const std::optional<fs::path>& out) {
  Metrics m;
  json inputs;
  if (numbers) {
    const auto v = parse_numbers(*numbers);
    if (v.size() < 2 || v.size() > 3) throw DataError(numbers->string() + ": expected ID, OOD and optionally Unconfd");
    m = compute_metrics(v[0], v[1], v.size() == 3 ? std::optional<double>(v[2]) : std::nullopt);
    inputs = {{"numbers", numbers->string()}};
  } else {
    if (!head_path || !val_prefix || !test_prefix) throw UsageError("eval needs --head, --val and --test (or --numbers)");
    require_file(*head_path, "head");
    const auto artifact = io::read_json(*head_path);
    LinearHead head;
    bool raw = false;
    try {
      head = head_from_json(artifact.at("head"));
      raw = artifact.at("features").get<std::string>() == "raw";
    } catch (const json::exception& e) {
      throw DataError(head_path->string() + ": " + e.what());
    }
    std::vector<GroundingModel> grounders;
    if (!raw) {
      if (!grounders_path) throw UsageError("this head reads concept scores; pass --grounders");
      grounders = grounders_for(head.concept_texts, read_grounders(*grounders_path));
    }
    auto accuracy = [&](const fs::path& prefix, const char* what) {
      const auto split = read_split(prefix, what);
      return head_accuracy(head, model_inputs(split, raw ? nullptr : &grounders), labels_of(split));
    };
    const double id = accuracy(*val_prefix, "validation split");
    const double ood = accuracy(*test_prefix, "test split");
    std::optional<double> unconf;
    if (unconf_prefix) unconf = accuracy(*unconf_prefix, "unconfounded split");
    m = compute_metrics(id, ood, unconf);
    inputs = {{"head", head_path->string()}, {"val", val_prefix->string()}, {"test", test_prefix->string()}};
  }
  std::cout << metrics_table(m, label);
  if (out) {
    auto j = metrics_to_json(m);
    if (!label.empty()) j["label"] = label;
    io::write_json(*out, j);
    write_manifest(*out, "eval", cfg, inputs, j);
  }
  return 0;
}

// ---------------------------------------------------------------- probe

struct ImageSet {
  Matrix flat;  // rows of 784 values in [0, 1]
  std::vector<int> labels;
};

/// Either prefix.fmat (784 columns in [0,1]) with labels in prefix.jsonl,
/// or a JSON-lines manifest of {"path": "x.pgm", "label": n}, paths relative
/// to the manifest.
ImageSet read_images(const fs::path& path) {
  ImageSet set;
  if (path.extension() == ".fmat") {
    require_file(path, "image matrix");
    set.flat = load_fmat(path);
    auto meta = path;
    meta.replace_extension(".jsonl");
    require_file(meta, "image labels");
    const auto rows = io::read_jsonl(meta);
    if (rows.size() != set.flat.rows()) throw DataError(meta.string() + " is not aligned with " + path.string());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      try {
        set.labels.push_back(rows[i].at("label").get<int>());
      } catch (const json::exception& e) {
        throw DataError(meta.string() + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
    return set;
  }
  require_file(path, "image manifest");
  const auto rows = io::read_jsonl(path);
  set.flat = Matrix(rows.size(), kProbeSide * kProbeSide);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string rel;
    try {
      rel = rows[i].at("path").get<std::string>();
      set.labels.push_back(rows[i].at("label").get<int>());
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    const auto img = read_pgm((path.parent_path() / rel).string());
    const auto px = resize_bilinear(img, kProbeSide, kProbeSide);
    for (std::size_t j = 0; j < px.size(); ++j) set.flat(i, j) = px[j] / 255.0;
  }
  return set;
}

int cmd_probe(const json& cfg, const fs::path& train_path, const fs::path& test_path, const std::optional<fs::path>& out) {
  const auto& p = cfg.at("probe");
  Featurizer f;
  f.kind = featurizer_kind_from_string(p.at("featurizer").get<std::string>());
  f.d = p.at("d").get<std::size_t>();
  f.seed = cfg.at("seed").get<std::uint64_t>();
  f.check();
  const auto train = read_images(train_path);
  const auto test = read_images(test_path);
  int n_classes = 0;
  for (int y : train.labels) n_classes = std::max(n_classes, y + 1);
  const auto tc = train_config(cfg, "probe");
  const auto r = probe(f.featurize_flat(train.flat), train.labels, f.featurize_flat(test.flat), test.labels,
                       static_cast<std::size_t>(n_classes), tc);
  const std::string kind = p.at("featurizer").get<std::string>();
  std::printf("%-12s %8s %8s\n", "featurizer", "train", "test");
  std::printf("%-12s %8s %8s\n", kind.c_str(), format_display(r.train_accuracy).c_str(),
              format_display(r.test_accuracy).c_str());
  if (out) {
    const json j = {{"featurizer", kind}, {"d", f.d}, {"train_accuracy", r.train_accuracy}, {"test_accuracy", r.test_accuracy}};
    io::write_json(*out, j);
    write_manifest(*out, "probe", cfg, {{"train", train_path.string()}, {"test", test_path.string()}}, j);
  }
  return 0;
}

// ---------------------------------------------------------------- diversity

int cmd_diversity(const json& cfg, const fs::path& bottleneck_path, const std::optional<fs::path>& out) {
  require_file(bottleneck_path, "bottleneck");
  const auto b = load_bottleneck(bottleneck_path);
  const double d = diversity(b);
  std::printf("concepts %zu  diversity %.4f\n", b.size(), d);
  if (out) {
    const json j = {{"concepts", b.size()}, {"diversity", d}};
    io::write_json(*out, j);
    write_manifest(*out, "diversity", cfg, {{"bottleneck", bottleneck_path.string()}}, j);
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"knobo: knowledge-informed concept bottleneck pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON config file merged over the defaults");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_flag("--mock", g.mock, "Force the offline mock oracles");
  app.add_option("--endpoint-env", g.endpoint_env, "Environment variable holding the remote oracle URL");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");

  std::function<int()> action;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic confounded dataset");
  fs::path synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->callback([&] { action = [&] { return cmd_synth(resolve(g), synth_out); }; });

  auto* index = app.add_subcommand("index", "Build a BM25 index over a JSON-lines corpus");
  fs::path corpus, index_out;
  index->add_option("--corpus", corpus, "Corpus JSON-lines file")->required();
  index->add_option("--out", index_out, "Index file")->required();
  index->callback([&] { action = [&] { return cmd_index(resolve(g), corpus, index_out); }; });

  auto* generate = app.add_subcommand("generate", "Build a concept bottleneck by retrieval-augmented generation");
  fs::path gen_index, gen_pretrain, gen_out;
  std::optional<fs::path> gen_world;
  std::string gen_classes;
  std::optional<std::size_t> gen_target;
  generate->add_option("--index", gen_index, "Index file")->required();
  generate->add_option("--pretrain", gen_pretrain, "Pretraining pairs prefix (.fmat/.jsonl)")->required();
  generate->add_option("--world", gen_world, "world.json with class names and mock lexicons");
  generate->add_option("--classes", gen_classes, "Comma-separated class names");
  generate->add_option("--target-size", gen_target, "Bottleneck size");
  generate->add_option("--out", gen_out, "Bottleneck JSON-lines file")->required();
  generate->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      if (gen_target) cfg["generate"]["target_size"] = *gen_target;
      return cmd_generate(cfg, gen_index, gen_pretrain, gen_world, gen_classes, gen_out);
    };
  });

  auto* ground = app.add_subcommand("ground", "Train one grounding classifier per concept");
  fs::path gr_bottleneck, gr_pretrain, gr_out;
  ground->add_option("--bottleneck", gr_bottleneck, "Bottleneck JSON-lines file")->required();
  ground->add_option("--pretrain", gr_pretrain, "Pretraining pairs prefix")->required();
  ground->add_option("--out", gr_out, "Grounders JSON file")->required();
  ground->callback([&] { action = [&] { return cmd_ground(resolve(g), gr_bottleneck, gr_pretrain, gr_out); }; });

  auto* train = app.add_subcommand("train", "Train the linear head over concept scores (or raw features)");
  fs::path tr_train, tr_val, tr_out;
  std::optional<fs::path> tr_grounders, tr_world, tr_prior;
  bool tr_no_prior = false;
  std::optional<std::size_t> tr_top_k;
  train->add_option("--train", tr_train, "Train split prefix")->required();
  train->add_option("--val", tr_val, "Validation split prefix")->required();
  train->add_option("--grounders", tr_grounders, "Grounders JSON; omit for a raw-feature linear probe");
  train->add_option("--world", tr_world, "world.json with class names and the mock prior table");
  train->add_option("--prior", tr_prior, "Explicit prior JSON (overrides the oracle)");
  train->add_flag("--no-prior", tr_no_prior, "Disable the prior loss");
  train->add_option("--top-k", tr_top_k, "Keep the k grounders with best validation accuracy");
  train->add_option("--out", tr_out, "Head JSON file")->required();
  train->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      if (tr_no_prior) cfg["train"]["prior"] = false;
      if (tr_top_k) cfg["train"]["top_k"] = *tr_top_k;
      return cmd_train(cfg, tr_train, tr_val, tr_grounders, tr_world, tr_prior, tr_out);
    };
  });

  auto* eval = app.add_subcommand("eval", "Compute ID / OOD / Delta / Avg (and Overall)");
  std::optional<fs::path> ev_numbers, ev_head, ev_grounders, ev_val, ev_test, ev_unconf, ev_out;
  std::string ev_label;
  eval->add_option("--numbers", ev_numbers, "File with ID, OOD [, Unconfd] accuracies");
  eval->add_option("--head", ev_head, "Head JSON from `train`");
  eval->add_option("--grounders", ev_grounders, "Grounders JSON");
  eval->add_option("--val", ev_val, "In-domain split prefix");
  eval->add_option("--test", ev_test, "Out-of-domain split prefix");
  eval->add_option("--unconfounded", ev_unconf, "Unconfounded split prefix");
  eval->add_option("--label", ev_label, "Row label");
  eval->add_option("--out", ev_out, "Metrics JSON file");
  eval->callback([&] {
    action = [&] {
      return cmd_eval(resolve(g), ev_numbers, ev_head, ev_grounders, ev_val, ev_test, ev_unconf, ev_label, ev_out);
    };
  });

  auto* probe_cmd = app.add_subcommand("probe", "Linear probe over pixel or random-network image features");
  fs::path pr_train, pr_test;
  std::optional<fs::path> pr_out;
  std::optional<std::string> pr_featurizer;
  probe_cmd->add_option("--train", pr_train, "Train images (.fmat or PGM manifest .jsonl)")->required();
  probe_cmd->add_option("--test", pr_test, "Test images")->required();
  probe_cmd->add_option("--featurizer", pr_featurizer, "pixel | random_net");
  probe_cmd->add_option("--out", pr_out, "Accuracy JSON file");
  probe_cmd->callback([&] {
    action = [&] {
      auto cfg = resolve(g);
      if (pr_featurizer) cfg["probe"]["featurizer"] = *pr_featurizer;
      return cmd_probe(cfg, pr_train, pr_test, pr_out);
    };
  });

  auto* div = app.add_subcommand("diversity", "Mean pairwise (1 - cosine) over concept embeddings");
  fs::path dv_bottleneck;
  std::optional<fs::path> dv_out;
  div->add_option("--bottleneck", dv_bottleneck, "Bottleneck JSON-lines file")->required();
  div->add_option("--out", dv_out, "Result JSON file");
  div->callback([&] { action = [&] { return cmd_diversity(resolve(g), dv_bottleneck, dv_out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }
  return action();
}

}  // namespace
}  // namespace knobo::cli

int main(int argc, char** argv) {
  try {
    return knobo::cli::run(argc, argv);
  } catch (const knobo::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(knobo::ErrorKind::data);
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(knobo::ErrorKind::data);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(knobo::ErrorKind::data);
  }
}
