#include "drilltutor/pattern.hpp"

#include <algorithm>
#include <set>

#include "drilltutor/error.hpp"

namespace dt {

bool is_identifier(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  });
}

namespace {

void push_literal(SegmentList& out, std::string text) {
  if (text.empty()) return;
  if (!out.empty()) {
    if (auto* lit = std::get_if<Literal>(&out.back())) {
      lit->text += text;
      return;
    }
  }
  out.push_back(Literal{std::move(text)});
}

SegmentList normalized(const SegmentList& segments) {
  SegmentList out;
  for (const auto& seg : segments) {
    if (const auto* lit = std::get_if<Literal>(&seg)) {
      push_literal(out, lit->text);
    } else {
      out.push_back(seg);
    }
  }
  return out;
}

}  // namespace

SegmentList parse_template(std::string_view text) {
  if (!is_valid_utf8(text)) throw Error(ErrorKind::InvalidUtf8, std::string(text));
  SegmentList out;
  std::string literal;
  std::set<std::string, std::less<>> seen;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\\') {
      if (i + 1 >= text.size())
        throw Error(ErrorKind::InvalidEscape, "trailing backslash");
      const char next = text[i + 1];
      if (next != '<' && next != '>' && next != '\\')
        throw Error(ErrorKind::InvalidEscape, std::string("\\") + next);
      literal.push_back(next);
      i += 2;
    } else if (c == '<') {
      const auto close = text.find_first_of("<>", i + 1);
      if (close == std::string_view::npos || text[close] != '>')
        throw Error(ErrorKind::UnbalancedSlotDelimiter, "unclosed '<' at byte " + std::to_string(i));
      const auto name = text.substr(i + 1, close - i - 1);
      if (name.empty()) throw Error(ErrorKind::EmptySlotName, "at byte " + std::to_string(i));
      if (!is_identifier(name)) throw Error(ErrorKind::InvalidSlotName, std::string(name));
      if (!seen.emplace(name).second) throw Error(ErrorKind::DuplicateSlotName, std::string(name));
      push_literal(out, std::exchange(literal, {}));
      out.push_back(Slot{std::string(name)});
      i = close + 1;
    } else if (c == '>') {
      throw Error(ErrorKind::UnbalancedSlotDelimiter, "stray '>' at byte " + std::to_string(i));
    } else {
      literal.push_back(c);
      ++i;
    }
  }
  push_literal(out, std::move(literal));
  return out;
}

std::string unparse(const SegmentList& segments) {
  std::string out;
  for (const auto& seg : segments) {
    if (const auto* lit = std::get_if<Literal>(&seg)) {
      for (char c : lit->text) {
        if (c == '<' || c == '>' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
    } else {
      out += '<' + std::get<Slot>(seg).name + '>';
    }
  }
  return out;
}

std::vector<VariableName> slot_names(const SegmentList& segments) {
  std::vector<VariableName> names;
  for (const auto& seg : segments)
    if (const auto* slot = std::get_if<Slot>(&seg)) names.push_back(slot->name);
  return names;
}

PatternTemplate::PatternTemplate(std::string id, std::map<LanguageCode, SegmentList> renderings,
                                 std::vector<VariableName> variables)
    : id_(std::move(id)), variables_(std::move(variables)) {
  if (renderings.empty())
    throw Error(ErrorKind::SlotSetMismatch, "pattern '" + id_ + "' has no renderings");
  for (auto& [language, segments] : renderings) {
    if (language.empty()) throw Error(ErrorKind::UnknownLanguage, "empty language code");
    renderings_.emplace(language, normalized(segments));
  }
  if (variables_.empty()) variables_ = slot_names(renderings_.begin()->second);

  const std::set<VariableName> declared(variables_.begin(), variables_.end());
  if (declared.size() != variables_.size())
    throw Error(ErrorKind::DuplicateSlotName, "pattern '" + id_ + "' declares a variable twice");
  for (const auto& name : variables_)
    if (!is_identifier(name)) throw Error(ErrorKind::InvalidSlotName, name);

  for (const auto& [language, segments] : renderings_) {
    const auto names = slot_names(segments);
    const std::set<VariableName> used(names.begin(), names.end());
    if (used.size() != names.size())
      throw Error(ErrorKind::DuplicateSlotName, "pattern '" + id_ + "' rendering " + language);
    if (used != declared)
      throw Error(ErrorKind::SlotSetMismatch, "pattern '" + id_ + "' rendering " + language +
                                                  " does not use exactly the declared variables");
  }
}

PatternTemplate PatternTemplate::from_text(std::string id,
                                           const std::map<LanguageCode, std::string>& renderings,
                                           std::vector<VariableName> variables) {
  std::map<LanguageCode, SegmentList> parsed;
  for (const auto& [language, text] : renderings) parsed.emplace(language, parse_template(text));
  return PatternTemplate(std::move(id), std::move(parsed), std::move(variables));
}

bool PatternTemplate::has_rendering(const LanguageCode& language) const {
  return renderings_.count(language) != 0;
}

const SegmentList& PatternTemplate::rendering(const LanguageCode& language) const {
  auto it = renderings_.find(language);
  if (it == renderings_.end())
    throw Error(ErrorKind::UnknownLanguage, "pattern '" + id_ + "' has no '" + language + "' rendering");
  return it->second;
}

std::string PatternTemplate::rendering_text(const LanguageCode& language) const {
  return unparse(rendering(language));
}

bool PatternTemplate::has_variable(std::string_view name) const {
  return std::find(variables_.begin(), variables_.end(), name) != variables_.end();
}

const std::string& LexicalValue::in(const LanguageCode& language) const {
  auto it = renderings.find(language);
  if (it == renderings.end())
    throw Error(ErrorKind::MissingRendering,
                "value for '" + variable + "' has no '" + language + "' rendering");
  return it->second;
}

Rendered render(const SegmentList& segments, const std::map<VariableName, std::string>& fills) {
  Rendered out;
  std::size_t used = 0;
  for (const auto& seg : segments) {
    if (const auto* lit = std::get_if<Literal>(&seg)) {
      out.text += lit->text;
      continue;
    }
    const auto& name = std::get<Slot>(seg).name;
    auto it = fills.find(name);
    if (it == fills.end()) throw Error(ErrorKind::MissingAssignment, name);
    const auto begin = out.text.size();
    out.text += it->second;
    out.spans[name] = {begin, out.text.size()};
    ++used;
  }
  if (used != fills.size()) {
    for (const auto& [name, _] : fills)
      if (!out.spans.count(name)) throw Error(ErrorKind::ExtraAssignment, name);
  }
  return out;
}

Rendered instantiate_with_spans(const PatternTemplate& pattern, const LanguageCode& language,
                                const ValueTuple& tuple) {
  const auto& segments = pattern.rendering(language);
  for (const auto& [name, _] : tuple)
    if (!pattern.has_variable(name)) throw Error(ErrorKind::ExtraAssignment, name);
  std::map<VariableName, std::string> fills;
  for (const auto& name : pattern.variables()) {
    auto it = tuple.find(name);
    if (it == tuple.end()) throw Error(ErrorKind::MissingAssignment, name);
    fills.emplace(name, it->second.in(language));
  }
  return render(segments, fills);
}

std::string instantiate(const PatternTemplate& pattern, const LanguageCode& language,
                        const ValueTuple& tuple) {
  return instantiate_with_spans(pattern, language, tuple).text;
}

std::vector<Enumerated> enumerate(const PatternTemplate& pattern, const LanguageCode& language,
                                  const std::map<VariableName, std::vector<LexicalValue>>& values) {
  pattern.rendering(language);
  for (const auto& [name, _] : values)
    if (!pattern.has_variable(name)) throw Error(ErrorKind::ExtraAssignment, name);

  const auto& vars = pattern.variables();
  std::vector<const std::vector<LexicalValue>*> lists;
  for (const auto& name : vars) {
    auto it = values.find(name);
    if (it == values.end() || it->second.empty()) throw Error(ErrorKind::EmptyValueList, name);
    lists.push_back(&it->second);
  }

  std::vector<Enumerated> out;
  std::vector<std::size_t> odometer(vars.size(), 0);
  while (true) {
    ValueTuple tuple;
    for (std::size_t v = 0; v < vars.size(); ++v) tuple.emplace(vars[v], (*lists[v])[odometer[v]]);
    auto sentence = instantiate(pattern, language, tuple);
    out.push_back({std::move(tuple), std::move(sentence)});

    std::size_t v = vars.size();
    while (v > 0) {
      --v;
      if (++odometer[v] < lists[v]->size()) break;
      odometer[v] = 0;
      if (v == 0) return out;
    }
    if (vars.empty()) return out;
  }
}

namespace {

class Matcher {
 public:
  Matcher(const SegmentList& segments, std::string_view sentence, const MatchLimits& limits)
      : segments_(segments), sentence_(sentence), text_(decode_utf8(sentence)), limits_(limits) {
    for (const auto& seg : segments_) {
      if (const auto* lit = std::get_if<Literal>(&seg)) {
        literals_.push_back(decode_utf8(lit->text).chars);
      } else {
        literals_.emplace_back();
      }
    }
  }

  std::vector<Binding> run() {
    if (limits_.max_bindings == 0) return {};
    search(0, 0);
    return std::move(out_);
  }

 private:
  bool same(char32_t a, char32_t b) const {
    return limits_.case_insensitive ? fold_case(a) == fold_case(b) : a == b;
  }

  void search(std::size_t seg, std::size_t pos) {
    if (out_.size() >= limits_.max_bindings) return;
    const auto& chars = text_.chars;
    const std::size_t n = chars.size();
    if (seg == segments_.size()) {
      if (pos == n) emit();
      return;
    }
    if (std::holds_alternative<Literal>(segments_[seg])) {
      const auto& lit = literals_[seg];
      std::size_t p = pos;
      std::size_t k = 0;
      while (k < lit.size()) {
        if (is_space(lit[k])) {
          while (k < lit.size() && is_space(lit[k])) ++k;
          if (p >= n || !is_space(chars[p])) return;
          while (p < n && is_space(chars[p])) ++p;
        } else {
          if (p >= n || !same(lit[k], chars[p])) return;
          ++p;
          ++k;
        }
      }
      search(seg + 1, p);
      return;
    }

    if (pos >= n || is_space(chars[pos])) return;
    const auto& name = std::get<Slot>(segments_[seg]).name;
    std::size_t tokens = 1;
    for (std::size_t end = pos + 1; end <= n; ++end) {
      const char32_t last = chars[end - 1];
      if (end - 1 > pos && !is_space(last) && is_space(chars[end - 2])) ++tokens;
      if (tokens > limits_.max_tokens_per_capture) break;
      if (is_space(last)) continue;
      captures_.emplace_back(name, Span{text_.offsets[pos], text_.offsets[end]});
      search(seg + 1, end);
      captures_.pop_back();
      if (out_.size() >= limits_.max_bindings) return;
    }
  }

  void emit() {
    Binding b;
    for (const auto& [name, span] : captures_) {
      b.captures.emplace(name, std::string(sentence_.substr(span.begin, span.size())));
      b.capture_spans.emplace(name, span);
    }
    b.source_span = {0, sentence_.size()};
    out_.push_back(std::move(b));
  }

  const SegmentList& segments_;
  std::string_view sentence_;
  DecodedText text_;
  MatchLimits limits_;
  std::vector<std::u32string> literals_;
  std::vector<std::pair<VariableName, Span>> captures_;
  std::vector<Binding> out_;
};

}  // namespace

std::vector<Binding> match_segments(const SegmentList& segments, std::string_view sentence,
                                    const MatchLimits& limits) {
  return Matcher(segments, sentence, limits).run();
}

std::vector<Binding> match(const PatternTemplate& pattern, const LanguageCode& language,
                           std::string_view sentence, const MatchLimits& limits) {
  return match_segments(pattern.rendering(language), sentence, limits);
}

}  // namespace dt
