#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drilltutor/pattern.hpp"

namespace dt {

using SymbolTable = std::map<std::string, std::string>;

/// Kana-to-script conversion by longest match, left to right. Whitespace and
/// ASCII characters pass through unchanged; any other symbol missing from
/// the table is an error.
class Transliterator {
 public:
  explicit Transliterator(SymbolTable table);

  /// Throws Error(UnknownSymbol).
  std::string operator()(std::string_view kana) const;
  const SymbolTable& table() const noexcept { return table_; }

 private:
  SymbolTable table_;
  std::size_t longest_ = 1;  // in code points
};

/// Two-column UTF-8 text: symbol TAB rendering; '#' lines are comments.
SymbolTable parse_symbol_table(std::string_view tsv);
std::string format_symbol_table(const SymbolTable& table);

/// Interface strings and the transliteration table for one interface language.
struct LanguagePack {
  LanguageCode code;
  std::map<std::string, std::string> ui_strings;
  SymbolTable transliteration;

  bool operator==(const LanguagePack&) const = default;
};

/// The built-in English pack; every other pack must cover its keys.
const LanguagePack& default_language_pack();

/// UI keys and kana symbols present in `reference` but absent from `pack`,
/// prefixed "ui:" and "kana:".
std::vector<std::string> missing_pack_keys(const LanguagePack& pack, const LanguagePack& reference);

/// Throws Error(IncompletePack) listing every missing key.
void validate_pack(const LanguagePack& pack, const LanguagePack& reference = default_language_pack());

/// JSON: {"code": ..., "ui_strings": {...}, "transliteration": {...}}.
/// Throws Error(MalformedBundle) on bad input.
LanguagePack parse_language_pack(std::string_view json_text);
std::string format_language_pack(const LanguagePack& pack);

/// Lowercased, whitespace-free comparison of a kana rendering with its
/// romanized counterpart under `table`.
bool kana_matches_romanized(const Transliterator& table, std::string_view kana,
                            std::string_view romanized);

}  // namespace dt
