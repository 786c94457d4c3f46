#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drilltutor/drill.hpp"

namespace dt {

/// Numeral + quantifier class, with the euphonic change already applied
/// ("san" + "hon" -> "sanbon").
struct CounterRule {
  int number = 0;
  std::string quantifier_class;
  std::string form;  // romanized
  std::string kana;

  bool operator==(const CounterRule&) const = default;
};

struct CounterClass {
  std::string name;
  std::string example;  // what it counts, in the interface language
  std::string description;
};

class CounterTable {
 public:
  /// The table shipped with the library (numerals 1-10).
  static const CounterTable& bundled();
  /// Rules as "class TAB number TAB form TAB kana"; classes as
  /// "class TAB example TAB description". '#' starts a comment line.
  static CounterTable parse(std::string_view rules_tsv, std::string_view classes_tsv);

  /// Throws UnknownClass or OutOfRange.
  const CounterRule& lookup(int number, std::string_view quantifier_class) const;
  const std::string& form(int number, std::string_view quantifier_class) const {
    return lookup(number, quantifier_class).form;
  }
  const CounterClass& counter_class(std::string_view name) const;
  std::vector<std::string> classes() const;
  std::vector<CounterRule> rules() const;

 private:
  std::map<std::string, CounterClass, std::less<>> classes_;
  std::map<std::pair<std::string, int>, CounterRule, std::less<>> rules_;
};

/// `counter_form(3, "hon") == "sanbon"`, using the bundled table.
std::string counter_form(int number, std::string_view quantifier_class);

enum class CountingMode { vary_number, vary_object, vary_both };

/// vary_number: one class, several numbers; vary_object: one number, several
/// classes; vary_both: the product (class-major). Throws InvalidConfig when
/// the list sizes do not fit the mode.
std::vector<DrillItem> generate_counting_items(const CounterTable& table, CountingMode mode,
                                               std::span<const std::string> classes,
                                               std::span<const int> numbers);

}  // namespace dt
