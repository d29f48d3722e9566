#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "knobo/corpus_index.hpp"
#include "knobo/embedding.hpp"

namespace knobo {

/// A binary question about the image, with the passage it was derived from.
struct Concept {
  std::string text;
  std::string source_doc_id;
  std::string reference_sentence;
  std::string origin_query;
  std::vector<double> embedding;  // empty until embedded
};

struct Bottleneck {
  std::vector<Concept> concepts;
  std::size_t target_size = 150;
  std::vector<std::string> class_names;

  [[nodiscard]] std::size_t size() const noexcept { return concepts.size(); }
  [[nodiscard]] std::vector<std::string> texts() const;
};

/// One line of proposer output: "question | document ID | reference sentence".
struct Proposal {
  std::string concept_text;
  std::string doc_id;
  std::string reference_sentence;
};

/// Returns nullopt unless the line has exactly three non-empty
/// '|'-separated fields and the question ends with '?'.
std::optional<Proposal> parse_proposal_line(std::string_view line);

struct ValidationConfig {
  double dedup_similarity_threshold = 0.9;
  int min_support_pos = 50;
  int min_support_neg = 50;

  void check() const;
};

struct SupportCounts {
  int pos = 0;
  int neg = 0;
};

enum class Verdict {
  accept,
  duplicate,
  not_groundable,
  insufficient_support,
  parse_error,
};

const char* to_string(Verdict v) noexcept;

/// Decides whether a question can be answered by looking at the image.
class GroundabilityOracle {
 public:
  virtual ~GroundabilityOracle() = default;
  virtual bool is_groundable(const std::string& question) = 0;
};

/// Mock: a question is groundable iff it mentions one of the lexicon's
/// visual keywords (each keyword may be a multi-word phrase).
class LexiconGroundabilityOracle final : public GroundabilityOracle {
 public:
  explicit LexiconGroundabilityOracle(std::vector<std::string> visual_keywords);
  bool is_groundable(const std::string& question) override;

 private:
  std::vector<std::vector<std::string>> keywords_;
};

/// True iff phrase appears as a contiguous run inside tokens.
bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase);

/// Validation gates in order: duplicate, groundability, support. Support
/// counts are only requested once the cheaper gates pass.
Verdict validate_concept(const Proposal& candidate, const Bottleneck& bottleneck,
                         const std::function<SupportCounts()>& support,
                         const ValidationConfig& cfg, GroundabilityOracle& groundability,
                         const Embedder& embedder = default_embedder());

Verdict validate_concept(const Proposal& candidate, const Bottleneck& bottleneck,
                         SupportCounts support, const ValidationConfig& cfg,
                         GroundabilityOracle& groundability,
                         const Embedder& embedder = default_embedder());

/// Parses the line first; malformed lines are rejected with parse_error.
Verdict validate_proposal_line(std::string_view line, const Bottleneck& bottleneck,
                               const std::function<SupportCounts()>& support,
                               const ValidationConfig& cfg, GroundabilityOracle& groundability,
                               const Embedder& embedder = default_embedder());

struct ProposalRequest {
  struct Passage {
    std::string id;  // source document id
    std::string text;
  };
  std::string query;
  std::vector<std::string> class_names;
  std::vector<Passage> snippets;

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Produces raw proposer text for one query: zero or more lines in the
/// "question | document ID | reference sentence" format. Transport problems
/// are reported by throwing RemoteError.
class ConceptProposer {
 public:
  virtual ~ConceptProposer() = default;
  virtual std::string propose(const ProposalRequest& request) = 0;
};

/// Deterministic offline proposer. Scans passages in retrieval order,
/// sentence by sentence, and for each lexicon phrase found emits
/// "Is there <phrase>?" citing that sentence. Phrases already in the query or
/// overlapping a class name are skipped; at most max_per_query lines.
class LexiconProposer final : public ConceptProposer {
 public:
  LexiconProposer(std::vector<std::string> lexicon, std::size_t max_per_query = 3);
  std::string propose(const ProposalRequest& request) override;

 private:
  std::vector<std::string> lexicon_;
  std::size_t max_per_query_;
};

/// Support for a candidate question: (#positive, #negative) annotated
/// pretraining reports.
using SupportFn = std::function<SupportCounts(const std::string& question)>;

struct GenerationConfig {
  std::size_t target_size = 150;
  std::size_t docs_per_query = 10;
  Bm25Params bm25;
  ValidationConfig validation;
  int max_retries = 2;
  unsigned retrieval_threads = 0;
};

struct RejectionRecord {
  std::string query;
  std::string line;
  Verdict verdict;
};

struct GenerationResult {
  Bottleneck bottleneck;
  bool stalled = false;
  std::size_t proposer_calls = 0;
  std::vector<std::size_t> frontier_sizes;  // |Q| at the start of each round
  std::vector<RejectionRecord> rejections;
};

/// Iterative retrieve -> propose -> validate loop seeded with the class
/// names. Each round retrieves passages for every query in the frontier,
/// asks the proposer for concepts, and accepts the valid ones in query then
/// line order; accepted concepts form the next frontier. Stops once the
/// bottleneck reaches target_size (overflow from the last round is trimmed
/// in arrival order) or the frontier empties, which sets `stalled`.
GenerationResult generate_bottleneck(const std::vector<std::string>& class_names,
                                     const InvertedIndex& index, ConceptProposer& proposer,
                                     GroundabilityOracle& groundability, const SupportFn& support,
                                     const GenerationConfig& cfg,
                                     const Embedder& embedder = default_embedder());

/// Mean of (1 - cos) over all ordered pairs i != j. Requires >= 2 vectors.
double diversity(const std::vector<std::vector<double>>& embeddings);
double diversity(const Bottleneck& bottleneck);

nlohmann::json concept_to_json(const Concept& c);
Concept concept_from_json(const nlohmann::json& j, const Embedder& embedder = default_embedder());

/// JSON-lines of concept records (embeddings are recomputed on load).
std::string bottleneck_to_jsonl(const Bottleneck& b);
Bottleneck bottleneck_from_jsonl(const std::string& text, const std::string& source);
void save_bottleneck(const std::filesystem::path& path, const Bottleneck& b);
Bottleneck load_bottleneck(const std::filesystem::path& path);

}  // namespace knobo
