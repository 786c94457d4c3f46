#include "drilltutor/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "drilltutor/error.hpp"

namespace dt {

std::vector<Span> split_sentences(std::string_view text, const SentenceSplitConfig& config) {
  const auto d = decode_utf8(text);
  const auto& c = d.chars;
  const std::size_t n = c.size();
  std::vector<Span> out;

  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(c[b])) ++b;
    while (e > b && is_space(c[e - 1])) --e;
    if (b < e) out.push_back({d.offsets[b], d.offsets[e]});
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool terminator = config.terminators.find(c[i]) != std::u32string::npos;
    if (terminator && (i + 1 == n || is_space(c[i + 1]))) {
      emit(start, i + 1);
      start = i + 1;
      continue;
    }
    if (config.split_on_blank_line && c[i] == U'\n') {
      std::size_t j = i + 1;
      while (j < n && c[j] != U'\n' && is_space(c[j])) ++j;
      if (j < n && c[j] == U'\n') {
        emit(start, i);
        start = j;
        i = j;
      }
    }
  }
  emit(start, n);
  return out;
}

void Corpus::add_document(std::string id, std::string text) {
  const auto ranges = split_sentences(text, config_);
  const std::size_t doc = documents_.size();
  for (const auto& r : ranges) sentences_.push_back({doc, r});
  documents_.push_back({std::move(id), std::move(text)});
}

Corpus Corpus::from_files(std::span<const std::filesystem::path> paths, SentenceSplitConfig config) {
  Corpus corpus(std::move(config));
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    corpus.add_document(path.string(), buf.str());
  }
  return corpus;
}

std::string_view Corpus::sentence_text(const SentenceRef& ref) const {
  const auto& text = documents_.at(ref.document).text;
  return std::string_view(text).substr(ref.range.begin, ref.range.size());
}

CompiledQuery CompiledQuery::compile(const PatternTemplate& pattern, const LanguageCode& language,
                                     const MatchLimits& limits) {
  if (!pattern.has_rendering(language))
    throw Error(ErrorKind::NoRendering, "pattern '" + pattern.id() + "' has no '" + language + "' rendering");
  CompiledQuery q;
  q.pattern_id_ = pattern.id();
  q.language_ = language;
  q.segments_ = pattern.rendering(language);
  q.limits_ = limits;
  for (const auto& seg : q.segments_) {
    if (const auto* lit = std::get_if<Literal>(&seg)) {
      q.text_ += lit->text;
    } else {
      q.text_ += '*';
    }
  }
  return q;
}

std::size_t CompiledQuery::gap_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(segments_.begin(), segments_.end(),
                                                [](const Segment& s) { return std::holds_alternative<Slot>(s); }));
}

std::vector<Binding> CompiledQuery::match(std::string_view sentence) const {
  return match_segments(segments_, sentence, limits_);
}

namespace {

std::vector<CandidateMatch> scan_document(const CompiledQuery& query, const Corpus& corpus,
                                          std::span<const SentenceRef> refs) {
  std::vector<CandidateMatch> out;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto text = corpus.sentence_text(refs[k]);
    auto bindings = query.match(text);
    if (bindings.empty()) continue;
    std::string context;
    if (k > 0) context = std::string(corpus.sentence_text(refs[k - 1])) + ' ';
    context += text;
    if (k + 1 < refs.size()) context += ' ' + std::string(corpus.sentence_text(refs[k + 1]));
    for (auto& b : bindings) {
      CandidateMatch m;
      m.document = corpus.documents()[refs[k].document].id;
      m.sentence = refs[k].range;
      m.captures = std::move(b.captures);
      m.text = std::string(text);
      m.context = context;
      out.push_back(std::move(m));
    }
  }
  return out;
}

}  // namespace

std::vector<CandidateMatch> find_instances(const CompiledQuery& query, const Corpus& corpus, bool parallel) {
  // Sentences of one document are contiguous in the index.
  std::vector<std::span<const SentenceRef>> per_doc;
  const auto& all = corpus.sentences();
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].document == all[i].document) ++j;
    per_doc.emplace_back(all.data() + i, j - i);
    i = j;
  }

  std::vector<std::vector<CandidateMatch>> parts(per_doc.size());
  if (parallel && per_doc.size() > 1) {
    std::vector<std::future<std::vector<CandidateMatch>>> futures;
    for (const auto& refs : per_doc)
      futures.push_back(std::async(std::launch::async, scan_document, std::cref(query), std::cref(corpus), refs));
    for (std::size_t k = 0; k < futures.size(); ++k) parts[k] = futures[k].get();
  } else {
    for (std::size_t k = 0; k < per_doc.size(); ++k) parts[k] = scan_document(query, corpus, per_doc[k]);
  }

  std::vector<CandidateMatch> out;
  for (auto& p : parts) std::move(p.begin(), p.end(), std::back_inserter(out));
  return out;
}

namespace {

std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string format_match_record(const CandidateMatch& m) {
  std::string line = escape_field(m.document) + '\t' + std::to_string(m.sentence.begin) + '\t' +
                     std::to_string(m.sentence.end);
  for (const auto& [name, value] : m.captures) line += '\t' + name + '=' + escape_field(value);
  return line;
}

std::string CategorizedLexicon::key(std::string_view surface) { return fold_case(normalize_space(surface)); }

void CategorizedLexicon::add(std::string surface, std::string category, LanguageCode language) {
  auto k = key(surface);
  if (k.empty()) throw Error(ErrorKind::MalformedLexicon, "empty surface form");
  if (category.empty()) throw Error(ErrorKind::MalformedLexicon, "no category for '" + surface + "'");
  longest_ = std::max(longest_, count_tokens(k));
  entries_[std::move(k)] = {std::move(surface), std::move(category), std::move(language)};
}

const CategorizedLexicon::Entry* CategorizedLexicon::find(std::string_view surface) const {
  auto it = entries_.find(key(surface));
  return it == entries_.end() ? nullptr : &it->second;
}

CategorizedLexicon CategorizedLexicon::parse(std::string_view tsv) {
  CategorizedLexicon lex;
  std::size_t line_no = 0;
  for (auto line : split(tsv, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto f = split(line, '\t');
    if (f.size() < 2 || f.size() > 3)
      throw Error(ErrorKind::MalformedLexicon, "line " + std::to_string(line_no) + ": expected 2 or 3 columns");
    lex.add(std::string(trim(f[0])), std::string(trim(f[1])), f.size() == 3 ? std::string(trim(f[2])) : "");
  }
  return lex;
}

CategorizedLexicon CategorizedLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::map<VariableName, RankedValues> harvest_values(std::span<const CandidateMatch> matches,
                                                    const HarvestFilter& filter) {
  std::map<VariableName, std::map<std::string, std::size_t>> tally;
  for (const auto& m : matches)
    for (const auto& [name, value] : m.captures) ++tally[name][value];

  std::map<VariableName, RankedValues> out;
  for (auto& [name, counts] : tally) {
    RankedValues ranked;
    for (auto& [value, count] : counts) {
      if (filter.kind == HarvestFilter::Kind::lexicon_only &&
          (filter.lexicon == nullptr || !filter.lexicon->contains(value)))
        continue;
      if (filter.kind == HarvestFilter::Kind::min_frequency && count < filter.min_count) continue;
      ranked.emplace_back(value, count);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    out[name] = std::move(ranked);
  }
  return out;
}

std::string_view strip_final_punctuation(std::string_view sentence) {
  const auto d = decode_utf8(sentence);
  std::size_t e = d.chars.size();
  while (e > 0 && (is_punctuation(d.chars[e - 1]) || is_space(d.chars[e - 1]))) --e;
  return sentence.substr(0, d.offsets[e]);
}

namespace {

struct LexemeSpan {
  Span bytes;
  std::string category;
};

std::string slot_name_for(std::string_view category) {
  std::string name;
  for (char c : category) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                     c == '_' || c == '-';
    name.push_back(ok ? c : '_');
  }
  return name.empty() ? "x" : name;
}

// Token cores: the token with leading and trailing punctuation removed.
std::vector<Span> token_cores(std::string_view text) {
  std::vector<Span> cores;
  for (const auto& tok : tokenize(text)) {
    const auto d = decode_utf8(text.substr(tok.begin, tok.size()));
    std::size_t b = 0;
    std::size_t e = d.chars.size();
    while (b < e && is_punctuation(d.chars[b])) ++b;
    while (e > b && is_punctuation(d.chars[e - 1])) --e;
    cores.push_back({tok.begin + d.offsets[b], tok.begin + d.offsets[e]});
  }
  return cores;
}

std::vector<LexemeSpan> lexeme_spans(std::string_view text, const CategorizedLexicon& lexicon) {
  const auto cores = token_cores(text);
  std::vector<LexemeSpan> spans;
  std::size_t i = 0;
  while (i < cores.size()) {
    std::size_t taken = 0;
    const std::size_t max_len = std::min(lexicon.longest_entry(), cores.size() - i);
    for (std::size_t len = max_len; len >= 1; --len) {
      bool usable = true;
      for (std::size_t k = i; k < i + len; ++k) usable = usable && cores[k].size() > 0;
      if (!usable) continue;
      const Span s{cores[i].begin, cores[i + len - 1].end};
      if (const auto* entry = lexicon.find(text.substr(s.begin, s.size()))) {
        spans.push_back({s, entry->category});
        taken = len;
        break;
      }
    }
    i += taken ? taken : 1;
  }
  return spans;
}

}  // namespace

std::vector<AbstractionCandidate> abstract_patterns(std::string_view sentence,
                                                    const CategorizedLexicon& lexicon,
                                                    const Corpus* corpus, const MatchLimits& limits) {
  constexpr std::size_t kMaxSpans = 12;
  const auto text = strip_final_punctuation(trim(sentence));
  if (lexicon.empty()) throw Error(ErrorKind::NoKnownLexemes, "the lexicon is empty");
  const auto spans = lexeme_spans(text, lexicon);
  if (spans.empty()) throw Error(ErrorKind::NoKnownLexemes, std::string(text));
  if (spans.size() > kMaxSpans)
    throw Error(ErrorKind::ConstraintViolation,
                std::to_string(spans.size()) + " known lexemes; at most " + std::to_string(kMaxSpans) + " supported");

  // Combinations of span indices: by size, then lexicographic.
  std::vector<std::vector<std::size_t>> combos;
  const std::size_t k = spans.size();
  for (std::size_t size = 1; size <= k; ++size) {
    std::vector<std::size_t> idx(size);
    for (std::size_t t = 0; t < size; ++t) idx[t] = t;
    while (true) {
      combos.push_back(idx);
      std::size_t t = size;
      while (t > 0 && idx[t - 1] == k - size + (t - 1)) --t;
      if (t == 0) break;
      ++idx[t - 1];
      for (std::size_t u = t; u < size; ++u) idx[u] = idx[u - 1] + 1;
    }
  }

  std::vector<std::string> corpus_sentences;
  if (corpus) {
    std::set<std::string> distinct;
    for (const auto& ref : corpus->sentences())
      distinct.insert(std::string(strip_final_punctuation(corpus->sentence_text(ref))));
    corpus_sentences.assign(distinct.begin(), distinct.end());
  }
  MatchLimits support_limits = limits;
  support_limits.max_bindings = 1;

  std::vector<AbstractionCandidate> out;
  for (const auto& combo : combos) {
    SegmentList segs;
    std::map<std::string, int> used;
    std::size_t at = 0;
    for (std::size_t s : combo) {
      const auto& span = spans[s];
      if (span.bytes.begin > at) segs.push_back(Literal{std::string(text.substr(at, span.bytes.begin - at))});
      auto name = slot_name_for(span.category);
      if (int n = ++used[name]; n > 1) name += "_" + std::to_string(n);
      segs.push_back(Slot{name});
      at = span.bytes.end;
    }
    if (at < text.size()) segs.push_back(Literal{std::string(text.substr(at))});

    AbstractionCandidate c;
    c.template_text = unparse(segs);
    c.slot_count = combo.size();
    if (corpus) {
      for (const auto& s : corpus_sentences)
        if (!match_segments(segs, s, support_limits).empty()) ++c.support;
    }
    out.push_back(std::move(c));
  }

  std::stable_sort(out.begin(), out.end(), [&](const AbstractionCandidate& a, const AbstractionCandidate& b) {
    if (corpus && a.support != b.support) return a.support > b.support;
    return a.slot_count < b.slot_count;
  });
  return out;
}

}  // namespace dt
