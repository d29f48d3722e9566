#include "knobo/concept_gen.hpp"

#include <algorithm>
#include <set>

#include "knobo/error.hpp"
#include "knobo/io.hpp"
#include "knobo/parallel.hpp"

namespace knobo {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string casefold(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.' || text[i] == '!' || text[i] == '?' || text[i] == '\n') {
      const std::size_t end = (i < text.size() && text[i] != '\n') ? i + 1 : i;
      auto sentence = trim(text.substr(start, end - start));
      if (!tokenize(sentence).empty()) out.push_back(std::move(sentence));
      start = i + 1;
    }
  }
  return out;
}

bool overlaps_any(const std::vector<std::string>& phrase,
                  const std::vector<std::vector<std::string>>& others) {
  for (const auto& o : others) {
    if (o.empty()) continue;
    if (contains_phrase(phrase, o) || contains_phrase(o, phrase)) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> Bottleneck::texts() const {
  std::vector<std::string> out;
  out.reserve(concepts.size());
  for (const auto& c : concepts) out.push_back(c.text);
  return out;
}

std::optional<Proposal> parse_proposal_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto bar = line.find('|', start);
    fields.push_back(trim(line.substr(start, bar == std::string_view::npos ? line.npos : bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  if (fields.size() != 3) return std::nullopt;
  for (const auto& f : fields) {
    if (f.empty()) return std::nullopt;
  }
  if (fields[0].back() != '?') return std::nullopt;
  return Proposal{fields[0], fields[1], fields[2]};
}

void ValidationConfig::check() const {
  if (!(dedup_similarity_threshold > 0.0 && dedup_similarity_threshold <= 1.0)) {
    throw UsageError("dedup_similarity_threshold must lie in (0, 1]");
  }
  if (min_support_pos < 1 || min_support_neg < 1) throw UsageError("support minimums must be >= 1");
}

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::accept: return "accept";
    case Verdict::duplicate: return "duplicate";
    case Verdict::not_groundable: return "not_groundable";
    case Verdict::insufficient_support: return "insufficient_support";
    case Verdict::parse_error: return "parse_error";
  }
  return "unknown";
}

bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
  if (phrase.empty()) return false;
  return std::search(tokens.begin(), tokens.end(), phrase.begin(), phrase.end()) != tokens.end();
}

LexiconGroundabilityOracle::LexiconGroundabilityOracle(std::vector<std::string> visual_keywords) {
  for (const auto& k : visual_keywords) {
    auto toks = tokenize(k);
    if (!toks.empty()) keywords_.push_back(std::move(toks));
  }
}

bool LexiconGroundabilityOracle::is_groundable(const std::string& question) {
  const auto toks = tokenize(question);
  return std::any_of(keywords_.begin(), keywords_.end(),
                     [&](const auto& k) { return contains_phrase(toks, k); });
}

Verdict validate_concept(const Proposal& candidate, const Bottleneck& bottleneck,
                         const std::function<SupportCounts()>& support, const ValidationConfig& cfg,
                         GroundabilityOracle& groundability, const Embedder& embedder) {
  cfg.check();
  if (candidate.concept_text.empty() || candidate.concept_text.back() != '?' ||
      candidate.doc_id.empty() || candidate.reference_sentence.empty()) {
    return Verdict::parse_error;
  }
  const auto folded = casefold(candidate.concept_text);
  const auto e = embedder.embed(candidate.concept_text);
  for (const auto& c : bottleneck.concepts) {
    if (casefold(c.text) == folded) return Verdict::duplicate;
    const auto other = c.embedding.empty() ? embedder.embed(c.text) : c.embedding;
    if (cosine_similarity(e, other) >= cfg.dedup_similarity_threshold) return Verdict::duplicate;
  }
  if (!groundability.is_groundable(candidate.concept_text)) return Verdict::not_groundable;
  const auto counts = support();
  if (counts.pos < cfg.min_support_pos || counts.neg < cfg.min_support_neg) {
    return Verdict::insufficient_support;
  }
  return Verdict::accept;
}

Verdict validate_concept(const Proposal& candidate, const Bottleneck& bottleneck, SupportCounts support,
                         const ValidationConfig& cfg, GroundabilityOracle& groundability,
                         const Embedder& embedder) {
  return validate_concept(candidate, bottleneck, [support] { return support; }, cfg, groundability,
                          embedder);
}

Verdict validate_proposal_line(std::string_view line, const Bottleneck& bottleneck,
                               const std::function<SupportCounts()>& support,
                               const ValidationConfig& cfg, GroundabilityOracle& groundability,
                               const Embedder& embedder) {
  const auto proposal = parse_proposal_line(line);
  if (!proposal) return Verdict::parse_error;
  return validate_concept(*proposal, bottleneck, support, cfg, groundability, embedder);
}

nlohmann::json ProposalRequest::to_json() const {
  nlohmann::json passages = nlohmann::json::array();
  for (const auto& p : snippets) passages.push_back({{"id", p.id}, {"text", p.text}});
  return {{"query", query}, {"class_names", class_names}, {"snippets", std::move(passages)}};
}

LexiconProposer::LexiconProposer(std::vector<std::string> lexicon, std::size_t max_per_query)
    : lexicon_(std::move(lexicon)), max_per_query_(max_per_query) {}

std::string LexiconProposer::propose(const ProposalRequest& request) {
  const auto query_tokens = tokenize(request.query);
  std::vector<std::vector<std::string>> class_tokens;
  for (const auto& c : request.class_names) class_tokens.push_back(tokenize(c));

  std::string out;
  std::set<std::string> emitted;
  for (const auto& passage : request.snippets) {
    for (const auto& sentence : split_sentences(passage.text)) {
      const auto sentence_tokens = tokenize(sentence);
      for (const auto& entry : lexicon_) {
        if (emitted.size() >= max_per_query_) return out;
        const auto phrase = tokenize(entry);
        if (phrase.empty() || !contains_phrase(sentence_tokens, phrase)) continue;
        if (contains_phrase(query_tokens, phrase) || overlaps_any(phrase, class_tokens)) continue;
        std::string phrase_text;
        for (const auto& t : phrase) phrase_text += (phrase_text.empty() ? "" : " ") + t;
        if (!emitted.insert(phrase_text).second) continue;
        out += "Is there " + phrase_text + "? | " + passage.id + " | " + sentence + "\n";
      }
    }
  }
  return out;
}

GenerationResult generate_bottleneck(const std::vector<std::string>& class_names,
                                     const InvertedIndex& index, ConceptProposer& proposer,
                                     GroundabilityOracle& groundability, const SupportFn& support,
                                     const GenerationConfig& cfg, const Embedder& embedder) {
  cfg.validation.check();
  GenerationResult result;
  auto& bottleneck = result.bottleneck;
  bottleneck.target_size = cfg.target_size;
  bottleneck.class_names = class_names;

  std::vector<std::string> frontier = class_names;
  while (bottleneck.size() < cfg.target_size) {
    if (frontier.empty()) {
      result.stalled = true;
      break;
    }
    result.frontier_sizes.push_back(frontier.size());

    // Retrieval is read-only and may fan out; acceptance below is serial.
    std::vector<std::vector<RetrievalResult>> retrieved(frontier.size());
    parallel_for(
        frontier.size(),
        [&](std::size_t i) {
          retrieved[i] = index.retrieve_top_k(frontier[i], cfg.docs_per_query, cfg.bm25);
        },
        cfg.retrieval_threads);

    std::vector<std::string> next_frontier;
    for (std::size_t qi = 0; qi < frontier.size(); ++qi) {
      const auto& query = frontier[qi];
      ProposalRequest request{query, class_names, {}};
      for (const auto& r : retrieved[qi]) {
        const Snippet* s = index.find_snippet(r.snippet_id);
        request.snippets.push_back({s->doc_id, s->text});
      }

      std::string response;
      for (int attempt = 0;; ++attempt) {
        try {
          ++result.proposer_calls;
          response = proposer.propose(request);
          break;
        } catch (const RemoteError&) {
          if (attempt >= cfg.max_retries) throw;
        }
      }

      std::size_t pos = 0;
      while (pos <= response.size()) {
        auto nl = response.find('\n', pos);
        if (nl == std::string::npos) nl = response.size();
        const auto line = trim(std::string_view(response).substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty()) continue;
        const auto proposal = parse_proposal_line(line);
        if (!proposal) {
          result.rejections.push_back({query, line, Verdict::parse_error});
          continue;
        }
        const auto verdict = validate_concept(
            *proposal, bottleneck, [&] { return support(proposal->concept_text); }, cfg.validation,
            groundability, embedder);
        if (verdict != Verdict::accept) {
          result.rejections.push_back({query, line, verdict});
          continue;
        }
        Concept c{proposal->concept_text, proposal->doc_id, proposal->reference_sentence, query,
                  embedder.embed(proposal->concept_text)};
        next_frontier.push_back(c.text);
        bottleneck.concepts.push_back(std::move(c));
      }
    }
    frontier = std::move(next_frontier);
  }
  if (bottleneck.size() > cfg.target_size) bottleneck.concepts.resize(cfg.target_size);
  return result;
}

double diversity(const std::vector<std::vector<double>>& embeddings) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw DataError("diversity is undefined for fewer than two concepts");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += 2.0 * (1.0 - cosine_similarity(embeddings[i], embeddings[j]));
    }
  }
  const auto nd = static_cast<double>(n);
  return total / (nd * nd - nd);
}

double diversity(const Bottleneck& bottleneck) {
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(bottleneck.size());
  for (const auto& c : bottleneck.concepts) {
    if (c.embedding.empty()) throw DataError("concept \"" + c.text + "\" has no embedding");
    embeddings.push_back(c.embedding);
  }
  return diversity(embeddings);
}

nlohmann::json concept_to_json(const Concept& c) {
  return {{"text", c.text},
          {"source_doc_id", c.source_doc_id},
          {"reference_sentence", c.reference_sentence},
          {"origin_query", c.origin_query}};
}

Concept concept_from_json(const nlohmann::json& j, const Embedder& embedder) {
  Concept c;
  try {
    c.text = j.at("text").get<std::string>();
    c.source_doc_id = j.at("source_doc_id").get<std::string>();
    c.reference_sentence = j.at("reference_sentence").get<std::string>();
    c.origin_query = j.value("origin_query", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed concept record: ") + e.what());
  }
  if (c.text.empty() || c.text.back() != '?') throw DataError("concept text must end with '?'");
  if (c.source_doc_id.empty() || c.reference_sentence.empty()) {
    throw DataError("concept \"" + c.text + "\" lacks provenance");
  }
  c.embedding = embedder.embed(c.text);
  return c;
}

std::string bottleneck_to_jsonl(const Bottleneck& b) {
  std::vector<nlohmann::json> records;
  records.reserve(b.size());
  for (const auto& c : b.concepts) records.push_back(concept_to_json(c));
  return io::to_jsonl(records);
}

Bottleneck bottleneck_from_jsonl(const std::string& text, const std::string& source) {
  Bottleneck b;
  for (const auto& rec : io::parse_jsonl(text, source)) b.concepts.push_back(concept_from_json(rec));
  b.target_size = b.concepts.size();
  return b;
}

void save_bottleneck(const std::filesystem::path& path, const Bottleneck& b) {
  io::write_file_atomic(path, bottleneck_to_jsonl(b));
}

Bottleneck load_bottleneck(const std::filesystem::path& path) {
  return bottleneck_from_jsonl(io::read_file(path), path.string());
}

}  // namespace knobo
