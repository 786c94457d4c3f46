#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drilltutor/pattern.hpp"

namespace dt {

struct SentenceSplitConfig {
  /// A terminator ends a sentence when followed by whitespace or the end
  /// of the text.
  std::u32string terminators = U".?!。？！";
  /// A blank line also ends a sentence.
  bool split_on_blank_line = true;
};

/// Trimmed, non-overlapping sentence ranges in document order.
std::vector<Span> split_sentences(std::string_view text, const SentenceSplitConfig& config = {});

struct Document {
  std::string id;
  std::string text;
};

struct SentenceRef {
  std::size_t document = 0;
  Span range;
};

/// Immutable once built; find_instances may scan documents concurrently.
class Corpus {
 public:
  explicit Corpus(SentenceSplitConfig config = {}) : config_(std::move(config)) {}

  /// Throws Error(InvalidUtf8).
  void add_document(std::string id, std::string text);
  /// Each file becomes one document named by its path. Throws Error(IoError).
  static Corpus from_files(std::span<const std::filesystem::path> paths, SentenceSplitConfig config = {});

  const std::vector<Document>& documents() const noexcept { return documents_; }
  const std::vector<SentenceRef>& sentences() const noexcept { return sentences_; }
  std::string_view sentence_text(const SentenceRef& ref) const;
  bool empty() const noexcept { return documents_.empty(); }

 private:
  SentenceSplitConfig config_;
  std::vector<Document> documents_;
  std::vector<SentenceRef> sentences_;
};

/// Case-insensitive (Latin, Greek, Cyrillic; kana has no case), 3 tokens per capture.
inline MatchLimits corpus_match_limits() {
  MatchLimits limits;
  limits.case_insensitive = true;
  return limits;
}

/// A pattern rendering turned into a wildcard query.
class CompiledQuery {
 public:
  /// Throws Error(NoRendering) when the pattern lacks `language`.
  static CompiledQuery compile(const PatternTemplate& pattern, const LanguageCode& language,
                               const MatchLimits& limits = corpus_match_limits());

  const std::string& pattern_id() const noexcept { return pattern_id_; }
  const LanguageCode& language() const noexcept { return language_; }
  const SegmentList& segments() const noexcept { return segments_; }
  const MatchLimits& limits() const noexcept { return limits_; }
  /// Slots rendered as `*`: "This is a *."
  const std::string& text() const noexcept { return text_; }
  std::size_t gap_count() const noexcept;

  std::vector<Binding> match(std::string_view sentence) const;

 private:
  std::string pattern_id_;
  LanguageCode language_;
  SegmentList segments_;
  MatchLimits limits_;
  std::string text_;
};

inline CompiledQuery compile_query(const PatternTemplate& pattern, const LanguageCode& language,
                                   const MatchLimits& limits = corpus_match_limits()) {
  return CompiledQuery::compile(pattern, language, limits);
}

struct CandidateMatch {
  std::string document;
  Span sentence;  // byte range in the document
  std::map<VariableName, std::string> captures;
  std::string text;     // the matched sentence
  std::string context;  // previous, matched and next sentence of the same document

  bool operator==(const CandidateMatch&) const = default;
};

/// Every sentence-bounded match, in document then sentence order.
std::vector<CandidateMatch> find_instances(const CompiledQuery& query, const Corpus& corpus,
                                           bool parallel = false);

/// "doc TAB begin TAB end TAB name=value TAB ..." with \t, \n, \\ escaped.
std::string format_match_record(const CandidateMatch& match);

/// Surface forms with an everyday category label ("cerveza" -> drink).
class CategorizedLexicon {
 public:
  struct Entry {
    std::string surface;
    std::string category;
    LanguageCode language;
  };

  /// Later entries for the same surface form replace earlier ones.
  void add(std::string surface, std::string category, LanguageCode language = {});
  /// Lookup ignores case and collapses inner whitespace.
  const Entry* find(std::string_view surface) const;
  bool contains(std::string_view surface) const { return find(surface) != nullptr; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  /// Token count of the longest entry.
  std::size_t longest_entry() const noexcept { return longest_; }

  /// "surface TAB category [TAB language]"; '#' lines are comments.
  /// Throws Error(MalformedLexicon).
  static CategorizedLexicon parse(std::string_view tsv);
  static CategorizedLexicon load(const std::filesystem::path& path);

 private:
  static std::string key(std::string_view surface);
  std::map<std::string, Entry> entries_;
  std::size_t longest_ = 0;
};

struct HarvestFilter {
  enum class Kind { none, lexicon_only, min_frequency };
  Kind kind = Kind::none;
  const CategorizedLexicon* lexicon = nullptr;
  std::size_t min_count = 1;

  static HarvestFilter none() { return {}; }
  static HarvestFilter lexicon_only(const CategorizedLexicon& lexicon) {
    return {Kind::lexicon_only, &lexicon, 1};
  }
  static HarvestFilter min_frequency(std::size_t count) { return {Kind::min_frequency, nullptr, count}; }
};

using RankedValues = std::vector<std::pair<std::string, std::size_t>>;

/// Distinct captured values per variable, most frequent first, ties in
/// byte order.
std::map<VariableName, RankedValues> harvest_values(std::span<const CandidateMatch> matches,
                                                    const HarvestFilter& filter = HarvestFilter::none());

struct AbstractionCandidate {
  std::string template_text;
  std::size_t slot_count = 0;
  /// Distinct corpus sentences matching the candidate (0 without a corpus).
  std::size_t support = 0;

  bool operator==(const AbstractionCandidate&) const = default;
};

/// Known lexeme spans (maximal munch over tokens, leftmost first) become
/// `<category>` slots; every non-empty combination of spans is a candidate.
/// With a corpus, candidates are ranked by support, then fewer slots;
/// without one, by slot count. Remaining ties keep generation order
/// (combinations in lexicographic order of span positions). Sentence-final
/// punctuation is ignored on both the input and corpus sentences.
/// Throws Error(NoKnownLexemes).
std::vector<AbstractionCandidate> abstract_patterns(std::string_view sentence,
                                                    const CategorizedLexicon& lexicon,
                                                    const Corpus* corpus = nullptr,
                                                    const MatchLimits& limits = corpus_match_limits());

/// Drops trailing punctuation and whitespace.
std::string_view strip_final_punctuation(std::string_view sentence);

}  // namespace dt
