#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace knobo {

struct Document {
  std::string id;
  std::string title;
  std::string text;
};

/// A retrievable unit of a document. snippet_id is "<doc id>#<ordinal>".
struct Snippet {
  std::string snippet_id;
  std::string doc_id;
  std::string text;
  std::vector<std::string> tokens;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct RetrievalResult {
  std::string snippet_id;
  double score = 0.0;
  int rank = 0;  // 1-based

  bool operator==(const RetrievalResult&) const = default;
};

/// Lowercases and splits on every non-alphanumeric codepoint. ASCII letters
/// and digits are word characters; Latin-1 letters are case-folded; other
/// non-ASCII codepoints count as word characters unless they fall in the
/// Latin-1 punctuation, General Punctuation, or CJK punctuation blocks.
/// Invalid UTF-8 bytes act as separators.
std::vector<std::string> tokenize(std::string_view text);

/// Paragraphs (separated by blank lines) become snippets; a paragraph with
/// more than max_tokens tokens is cut into windows of max_tokens advancing by
/// max_tokens - overlap. Snippet text is the original substring covering the
/// window's tokens.
std::vector<Snippet> segment_document(const Document& doc, int max_tokens = 128, int overlap = 32);

/// Reads a JSON-lines corpus: one {"id","title","text"} object per line.
std::vector<Document> parse_corpus_jsonl(const std::string& text, const std::string& source);
std::vector<Document> read_corpus(const std::filesystem::path& path);

/// Immutable BM25 index over snippets. Safe for concurrent queries.
class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t ordinal;
    std::uint32_t tf;
    bool operator==(const Posting&) const = default;
  };

  static constexpr std::uint32_t kFormatVersion = 1;

  InvertedIndex() = default;

  /// Rejects duplicate snippet ids.
  static InvertedIndex build(std::vector<Snippet> snippets);
  static InvertedIndex from_documents(const std::vector<Document>& docs, int max_tokens = 128,
                                      int overlap = 32);

  /// Top-k by BM25 with idf(t) = ln((n - df + 0.5) / (df + 0.5) + 1). Query
  /// terms are deduplicated. Zero-score snippets are dropped; ties go to the
  /// lexicographically smaller snippet id.
  [[nodiscard]] std::vector<RetrievalResult> retrieve_top_k(std::string_view query, std::size_t k,
                                                            const Bm25Params& params = {}) const;

  [[nodiscard]] std::size_t n_snippets() const noexcept { return snippets_.size(); }
  /// False for an empty index, where avgdl is undefined.
  [[nodiscard]] bool has_avgdl() const noexcept { return !snippets_.empty(); }
  [[nodiscard]] double avgdl() const noexcept { return avgdl_; }
  [[nodiscard]] std::size_t n_terms() const noexcept { return postings_.size(); }
  [[nodiscard]] const std::vector<Posting>& postings(const std::string& term) const;
  [[nodiscard]] const Snippet& snippet(std::size_t ordinal) const { return snippets_.at(ordinal); }
  [[nodiscard]] const Snippet* find_snippet(std::string_view snippet_id) const;
  [[nodiscard]] std::uint32_t length(std::size_t ordinal) const { return lengths_.at(ordinal); }

  /// KIDX layout, little-endian:
  ///   "KIDX" | u32 version | u64 n_snippets
  ///   n_snippets x { str snippet_id | str doc_id | str text }
  ///   u64 n_terms
  ///   n_terms x { str term | u64 n_postings | n_postings x { u32 ordinal | u32 tf } }
  /// where str is u32 byte length followed by UTF-8 bytes. Terms are sorted
  /// bytewise and postings by ordinal, so identical inputs give identical files.
  void save(std::ostream& out) const;
  static InvertedIndex load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

 private:
  std::vector<Snippet> snippets_;
  std::vector<std::uint32_t> lengths_;
  std::map<std::string, std::vector<Posting>, std::less<>> postings_;
  std::map<std::string, std::uint32_t, std::less<>> id_to_ordinal_;
  double avgdl_ = 0.0;

  void finalize();
};

}  // namespace knobo
