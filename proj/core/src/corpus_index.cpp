#include "knobo/corpus_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "knobo/error.hpp"
#include "knobo/io.hpp"

namespace knobo {
namespace {

struct Token {
  std::string text;
  std::size_t begin;  // byte offsets into the source
  std::size_t end;
};

// Decodes one UTF-8 sequence at pos. Returns the codepoint, or -1 for an
// invalid byte (consumed alone).
long decode_utf8(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  long cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return -1;
  }
  if (pos + len > s.size()) {
    ++pos;
    return -1;
  }
  for (int i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return -1;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  pos += len;
  return cp;
}

void append_utf8(std::string& out, long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_word_codepoint(long cp) {
  if (cp < 0) return false;
  if (cp < 0x80) {
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  }
  if (cp <= 0xBF) return false;                  // C1 controls, Latin-1 punctuation
  if (cp == 0xD7 || cp == 0xF7) return false;    // multiplication, division signs
  if (cp >= 0x2000 && cp <= 0x206F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp == 0xFEFF) return false;
  return true;
}

long fold_case(long cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  return cp;
}

std::vector<Token> tokenize_with_offsets(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  Token current;
  bool in_token = false;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const long cp = decode_utf8(text, pos);
    if (is_word_codepoint(cp)) {
      if (!in_token) {
        current = Token{{}, start, start};
        in_token = true;
      }
      append_utf8(current.text, fold_case(cp));
      current.end = pos;
    } else if (in_token) {
      tokens.push_back(std::move(current));
      in_token = false;
    }
  }
  if (in_token) tokens.push_back(std::move(current));
  return tokens;
}

// Paragraph byte ranges, split on lines that are empty or whitespace-only.
std::vector<std::pair<std::size_t, std::size_t>> paragraphs(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t para_begin = 0;
  std::size_t line_begin = 0;
  while (line_begin <= text.size()) {
    std::size_t line_end = text.find('\n', line_begin);
    if (line_end == std::string_view::npos) line_end = text.size();
    const auto line = text.substr(line_begin, line_end - line_begin);
    const bool blank = line.find_first_not_of(" \t\r\f\v") == std::string_view::npos;
    if (blank) {
      if (line_begin > para_begin) out.emplace_back(para_begin, line_begin);
      para_begin = line_end + 1;
    }
    if (line_end == text.size()) break;
    line_begin = line_end + 1;
  }
  if (para_begin < text.size()) out.emplace_back(para_begin, text.size());
  return out;
}

double idf(std::size_t n, std::size_t df) {
  const auto nd = static_cast<double>(n);
  const auto dfd = static_cast<double>(df);
  return std::log((nd - dfd + 0.5) / (dfd + 0.5) + 1.0);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize_with_offsets(text)) out.push_back(std::move(t.text));
  return out;
}

std::vector<Snippet> segment_document(const Document& doc, int max_tokens, int overlap) {
  if (overlap < 0 || max_tokens <= overlap) {
    throw UsageError("segment_document requires max_tokens > overlap >= 0");
  }
  const auto window = static_cast<std::size_t>(max_tokens);
  const auto step = static_cast<std::size_t>(max_tokens - overlap);

  std::vector<Snippet> out;
  auto emit = [&](const std::vector<Token>& toks, std::size_t first, std::size_t last,
                  std::size_t base) {
    Snippet s;
    s.doc_id = doc.id;
    s.snippet_id = doc.id + "#" + std::to_string(out.size());
    s.text = doc.text.substr(base + toks[first].begin, toks[last - 1].end - toks[first].begin);
    for (std::size_t i = first; i < last; ++i) s.tokens.push_back(toks[i].text);
    out.push_back(std::move(s));
  };

  const std::string_view text = doc.text;
  for (const auto& [begin, end] : paragraphs(text)) {
    const auto toks = tokenize_with_offsets(text.substr(begin, end - begin));
    if (toks.empty()) continue;
    std::size_t start = 0;
    for (;;) {
      const std::size_t stop = std::min(start + window, toks.size());
      emit(toks, start, stop, begin);
      if (stop == toks.size()) break;
      start += step;
    }
  }
  return out;
}

std::vector<Document> parse_corpus_jsonl(const std::string& text, const std::string& source) {
  std::vector<Document> docs;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + e.what());
    }
    if (!rec.is_object()) throw DataError(where + "expected a JSON object");
    auto field = [&](const char* name, bool required) -> std::string {
      const auto it = rec.find(name);
      if (it == rec.end()) {
        if (required) throw DataError(where + "missing field \"" + name + "\"");
        return {};
      }
      if (!it->is_string()) throw DataError(where + "field \"" + name + "\" must be a string");
      return it->get<std::string>();
    };
    Document d{field("id", true), field("title", false), field("text", true)};
    if (d.id.empty()) throw DataError(where + "empty document id");
    if (!seen.insert(d.id).second) throw DataError(where + "duplicate document id " + d.id);
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  return parse_corpus_jsonl(io::read_file(path), path.string());
}

InvertedIndex InvertedIndex::build(std::vector<Snippet> snippets) {
  InvertedIndex index;
  index.snippets_ = std::move(snippets);
  index.finalize();
  return index;
}

InvertedIndex InvertedIndex::from_documents(const std::vector<Document>& docs, int max_tokens,
                                            int overlap) {
  std::vector<Snippet> all;
  for (const auto& d : docs) {
    auto part = segment_document(d, max_tokens, overlap);
    std::move(part.begin(), part.end(), std::back_inserter(all));
  }
  return build(std::move(all));
}

void InvertedIndex::finalize() {
  lengths_.clear();
  postings_.clear();
  id_to_ordinal_.clear();
  double total = 0.0;
  for (std::size_t i = 0; i < snippets_.size(); ++i) {
    const auto& s = snippets_[i];
    if (!id_to_ordinal_.emplace(s.snippet_id, static_cast<std::uint32_t>(i)).second) {
      throw DataError("duplicate snippet id " + s.snippet_id);
    }
    std::map<std::string_view, std::uint32_t> counts;
    for (const auto& t : s.tokens) ++counts[t];
    for (const auto& [term, tf] : counts) {
      auto it = postings_.find(term);
      if (it == postings_.end()) it = postings_.emplace(std::string(term), std::vector<Posting>{}).first;
      it->second.push_back({static_cast<std::uint32_t>(i), tf});
    }
    lengths_.push_back(static_cast<std::uint32_t>(s.tokens.size()));
    total += static_cast<double>(s.tokens.size());
  }
  avgdl_ = snippets_.empty() ? 0.0 : total / static_cast<double>(snippets_.size());
}

const std::vector<InvertedIndex::Posting>& InvertedIndex::postings(const std::string& term) const {
  static const std::vector<Posting> kEmpty;
  const auto it = postings_.find(term);
  return it == postings_.end() ? kEmpty : it->second;
}

const Snippet* InvertedIndex::find_snippet(std::string_view snippet_id) const {
  const auto it = id_to_ordinal_.find(snippet_id);
  return it == id_to_ordinal_.end() ? nullptr : &snippets_[it->second];
}

std::vector<RetrievalResult> InvertedIndex::retrieve_top_k(std::string_view query, std::size_t k,
                                                           const Bm25Params& params) const {
  if (k == 0 || snippets_.empty()) return {};
  auto terms = tokenize(query);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  const std::size_t n = snippets_.size();
  std::map<std::uint32_t, double> scores;
  for (const auto& term : terms) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(n, it->second.size());
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = 1.0 - params.b + params.b * lengths_[p.ordinal] / avgdl_;
      scores[p.ordinal] += w * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
    }
  }

  std::vector<RetrievalResult> results;
  results.reserve(scores.size());
  for (const auto& [ordinal, score] : scores) {
    if (score > 0.0) results.push_back({snippets_[ordinal].snippet_id, score, 0});
  }
  const auto better = [](const RetrievalResult& a, const RetrievalResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.snippet_id < b.snippet_id;
  };
  if (results.size() > k) {
    std::partial_sort(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(k),
                      results.end(), better);
    results.resize(k);
  } else {
    std::sort(results.begin(), results.end(), better);
  }
  for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i + 1);
  return results;
}

void InvertedIndex::save(std::ostream& out) const {
  out.write("KIDX", 4);
  detail::write_le<std::uint32_t>(out, kFormatVersion);
  detail::write_le<std::uint64_t>(out, snippets_.size());
  for (const auto& s : snippets_) {
    detail::write_string(out, s.snippet_id);
    detail::write_string(out, s.doc_id);
    detail::write_string(out, s.text);
  }
  detail::write_le<std::uint64_t>(out, postings_.size());
  for (const auto& [term, list] : postings_) {
    detail::write_string(out, term);
    detail::write_le<std::uint64_t>(out, list.size());
    for (const auto& p : list) {
      detail::write_le<std::uint32_t>(out, p.ordinal);
      detail::write_le<std::uint32_t>(out, p.tf);
    }
  }
}

InvertedIndex InvertedIndex::load(std::istream& in) {
  detail::expect_magic(in, "KIDX");
  const auto version = detail::read_le<std::uint32_t>(in, "KIDX version");
  if (version != kFormatVersion) {
    throw DataError("KIDX version mismatch: file has " + std::to_string(version) + ", expected " +
                    std::to_string(kFormatVersion));
  }
  const auto n = detail::read_le<std::uint64_t>(in, "snippet count");
  std::vector<Snippet> snippets;
  for (std::uint64_t i = 0; i < n; ++i) {
    Snippet s;
    s.snippet_id = detail::read_string(in, "snippet id");
    s.doc_id = detail::read_string(in, "doc id");
    s.text = detail::read_string(in, "snippet text");
    s.tokens = tokenize(s.text);
    snippets.push_back(std::move(s));
  }
  auto index = build(std::move(snippets));

  // The stored postings must agree with the ones rebuilt from the text.
  const auto n_terms = detail::read_le<std::uint64_t>(in, "term count");
  if (n_terms != index.postings_.size()) throw DataError("KIDX term table does not match snippets");
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    const auto term = detail::read_string(in, "term");
    const auto count = detail::read_le<std::uint64_t>(in, "posting count");
    const auto& expected = index.postings(term);
    if (count != expected.size()) throw DataError("KIDX postings mismatch for term " + term);
    for (std::uint64_t j = 0; j < count; ++j) {
      Posting p{detail::read_le<std::uint32_t>(in, "ordinal"), detail::read_le<std::uint32_t>(in, "tf")};
      if (p.ordinal >= n || !(p == expected[j])) {
        throw DataError("KIDX postings mismatch for term " + term);
      }
    }
  }
  return index;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ostringstream buf(std::ios::binary);
  save(buf);
  io::write_file_atomic(path, buf.str());
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path), std::ios::binary);
  try {
    return load(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace knobo
