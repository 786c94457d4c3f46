#include "drilltutor/language.hpp"

#include <nlohmann/json.hpp>

#include "drilltutor/error.hpp"
#include "embedded_data.hpp"

namespace dt {

using nlohmann::json;

Transliterator::Transliterator(SymbolTable table) : table_(std::move(table)) {
  for (const auto& [symbol, _] : table_) {
    if (symbol.empty()) throw Error(ErrorKind::ConstraintViolation, "empty transliteration symbol");
    longest_ = std::max(longest_, decode_utf8(symbol).chars.size());
  }
}

std::string Transliterator::operator()(std::string_view kana) const {
  const auto d = decode_utf8(kana);
  const std::size_t n = d.chars.size();
  std::string out;
  std::size_t i = 0;
  while (i < n) {
    bool found = false;
    for (std::size_t len = std::min(longest_, n - i); len >= 1; --len) {
      const auto key = kana.substr(d.offsets[i], d.offsets[i + len] - d.offsets[i]);
      auto it = table_.find(std::string(key));
      if (it != table_.end()) {
        out += it->second;
        i += len;
        found = true;
        break;
      }
    }
    if (found) continue;
    const char32_t cp = d.chars[i];
    if (cp < 0x80 || is_space(cp)) {
      append_utf8(out, cp);
      ++i;
      continue;
    }
    std::string symbol;
    append_utf8(symbol, cp);
    throw Error(ErrorKind::UnknownSymbol, symbol);
  }
  return out;
}

SymbolTable parse_symbol_table(std::string_view tsv) {
  SymbolTable table;
  std::size_t line_no = 0;
  for (auto line : split(tsv, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(ErrorKind::MalformedBundle, "symbol table line " + std::to_string(line_no));
    table[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return table;
}

std::string format_symbol_table(const SymbolTable& table) {
  std::string out = "# symbol\trendering\n";
  for (const auto& [symbol, rendering] : table) out += symbol + '\t' + rendering + '\n';
  return out;
}

const LanguagePack& default_language_pack() {
  static const LanguagePack pack = [] {
    LanguagePack p;
    p.code = "en";
    p.ui_strings = json::parse(embedded::en_ui_json()).get<std::map<std::string, std::string>>();
    p.transliteration = parse_symbol_table(embedded::en_kana_tsv());
    return p;
  }();
  return pack;
}

std::vector<std::string> missing_pack_keys(const LanguagePack& pack, const LanguagePack& reference) {
  std::vector<std::string> missing;
  for (const auto& [key, _] : reference.ui_strings)
    if (!pack.ui_strings.count(key)) missing.push_back("ui:" + key);
  for (const auto& [symbol, _] : reference.transliteration)
    if (!pack.transliteration.count(symbol)) missing.push_back("kana:" + symbol);
  return missing;
}

void validate_pack(const LanguagePack& pack, const LanguagePack& reference) {
  if (pack.code.empty()) throw Error(ErrorKind::IncompletePack, "pack has no language code");
  auto missing = missing_pack_keys(pack, reference);
  if (!missing.empty()) throw Error(ErrorKind::IncompletePack, join(missing, ", "));
  Transliterator check(pack.transliteration);
  (void)check;
}

LanguagePack parse_language_pack(std::string_view json_text) {
  try {
    const auto j = json::parse(json_text);
    LanguagePack p;
    p.code = j.at("code").get<std::string>();
    p.ui_strings = j.value("ui_strings", json::object()).get<std::map<std::string, std::string>>();
    const auto& t = j.value("transliteration", json::object());
    if (t.is_string()) {
      p.transliteration = parse_symbol_table(t.get<std::string>());
    } else {
      p.transliteration = t.get<SymbolTable>();
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedBundle, std::string("language pack: ") + e.what());
  }
}

std::string format_language_pack(const LanguagePack& pack) {
  json j;
  j["code"] = pack.code;
  j["ui_strings"] = pack.ui_strings;
  j["transliteration"] = pack.transliteration;
  return j.dump(2) + "\n";
}

namespace {

std::string squash(std::string_view text) {
  std::string out;
  for (char32_t cp : decode_utf8(text).chars)
    if (!is_space(cp)) append_utf8(out, fold_case(cp));
  return out;
}

}  // namespace

bool kana_matches_romanized(const Transliterator& table, std::string_view kana,
                            std::string_view romanized) {
  return squash(table(kana)) == squash(romanized);
}

}  // namespace dt
