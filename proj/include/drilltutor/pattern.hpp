#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "drilltutor/text.hpp"

namespace dt {

using VariableName = std::string;
using LanguageCode = std::string;

struct Literal {
  std::string text;
  bool operator==(const Literal&) const = default;
};

struct Slot {
  VariableName name;
  bool operator==(const Slot&) const = default;
};

using Segment = std::variant<Literal, Slot>;
using SegmentList = std::vector<Segment>;

/// `[A-Za-z0-9_-]+`
bool is_identifier(std::string_view name) noexcept;

/// Parses template text: `<name>` is a slot, `\<` `\>` `\\` are escapes in
/// literal text. The result is in normal form (no two adjacent literals,
/// no empty literals).
SegmentList parse_template(std::string_view text);

/// Inverse of parse_template for normal-form lists.
std::string unparse(const SegmentList& segments);

/// Slot names in order of appearance.
std::vector<VariableName> slot_names(const SegmentList& segments);

/// A sentence template with one rendering per language. All renderings share
/// the same slot set; the slot order may differ between languages.
class PatternTemplate {
 public:
  /// `variables` fixes the canonical variable order; when empty it is taken
  /// from the first rendering (in language-code order).
  PatternTemplate(std::string id, std::map<LanguageCode, SegmentList> renderings,
                  std::vector<VariableName> variables = {});

  static PatternTemplate from_text(std::string id,
                                   const std::map<LanguageCode, std::string>& renderings,
                                   std::vector<VariableName> variables = {});

  const std::string& id() const noexcept { return id_; }
  const std::vector<VariableName>& variables() const noexcept { return variables_; }
  const std::map<LanguageCode, SegmentList>& renderings() const noexcept { return renderings_; }

  bool has_rendering(const LanguageCode& language) const;
  /// Throws Error(UnknownLanguage).
  const SegmentList& rendering(const LanguageCode& language) const;
  std::string rendering_text(const LanguageCode& language) const;
  bool has_variable(std::string_view name) const;

  bool operator==(const PatternTemplate&) const = default;

 private:
  std::string id_;
  std::map<LanguageCode, SegmentList> renderings_;
  std::vector<VariableName> variables_;
};

struct Variable {
  VariableName name;
  std::map<LanguageCode, std::string> display_aliases;
  std::string category;

  bool operator==(const Variable&) const = default;
};

/// One word (or phrase) for a variable, in every language/script it is
/// known in: interface language, romanized target, kana target.
struct LexicalValue {
  VariableName variable;
  std::map<LanguageCode, std::string> renderings;

  /// Throws Error(MissingRendering).
  const std::string& in(const LanguageCode& language) const;
  bool operator==(const LexicalValue&) const = default;
};

using ValueTuple = std::map<VariableName, LexicalValue>;

/// A sentence produced from a segment list, with the byte span each slot
/// filled in the output.
struct Rendered {
  std::string text;
  std::map<VariableName, Span> spans;
};

/// Substitutes raw strings into a segment list. Throws MissingAssignment or
/// ExtraAssignment when the key set differs from the slot set.
Rendered render(const SegmentList& segments, const std::map<VariableName, std::string>& fills);

/// Instantiates `language`'s rendering with each value's rendering in the
/// same language.
std::string instantiate(const PatternTemplate& pattern, const LanguageCode& language,
                        const ValueTuple& tuple);
Rendered instantiate_with_spans(const PatternTemplate& pattern, const LanguageCode& language,
                                const ValueTuple& tuple);

struct Enumerated {
  ValueTuple tuple;
  std::string sentence;
};

/// Cartesian product over the value lists. Variables vary in template order
/// with the last one varying fastest; values keep their given order.
std::vector<Enumerated> enumerate(const PatternTemplate& pattern, const LanguageCode& language,
                                  const std::map<VariableName, std::vector<LexicalValue>>& values);

struct MatchLimits {
  std::size_t max_tokens_per_capture = 3;
  bool case_insensitive = false;
  /// Stop after this many bindings.
  std::size_t max_bindings = 1024;
};

/// Inverse of instantiation: the captured strings for one way of reading a
/// sentence as an instance of a template.
struct Binding {
  std::map<VariableName, std::string> captures;
  std::map<VariableName, Span> capture_spans;
  Span source_span;

  bool operator==(const Binding&) const = default;
};

/// Every binding under which the segment list reproduces `sentence`.
/// Whitespace inside literals matches any non-empty whitespace run; each
/// capture is non-empty, has no leading/trailing whitespace and spans at
/// most `limits.max_tokens_per_capture` tokens. Results are ordered by
/// capture lengths, leftmost capture first, shortest first.
std::vector<Binding> match_segments(const SegmentList& segments, std::string_view sentence,
                                    const MatchLimits& limits = {});

std::vector<Binding> match(const PatternTemplate& pattern, const LanguageCode& language,
                           std::string_view sentence, const MatchLimits& limits = {});

}  // namespace dt
