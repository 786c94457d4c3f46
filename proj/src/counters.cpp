#include "drilltutor/counters.hpp"

#include "drilltutor/error.hpp"
#include "embedded_data.hpp"

namespace dt {

namespace {

template <class F>
void for_each_row(std::string_view tsv, std::size_t columns, F&& f) {
  std::size_t line_no = 0;
  for (const auto& raw : split(tsv, '\n')) {
    ++line_no;
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != columns)
      throw Error(ErrorKind::ConstraintViolation,
                  "line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " columns");
    f(fields, line_no);
  }
}

}  // namespace

CounterTable CounterTable::parse(std::string_view rules_tsv, std::string_view classes_tsv) {
  CounterTable table;
  for_each_row(classes_tsv, 3, [&](const std::vector<std::string>& f, std::size_t) {
    table.classes_[f[0]] = {f[0], f[1], f[2]};
  });
  for_each_row(rules_tsv, 4, [&](const std::vector<std::string>& f, std::size_t line) {
    if (!table.classes_.count(f[0]))
      throw Error(ErrorKind::UnknownClass, f[0] + " (line " + std::to_string(line) + ")");
    int n = 0;
    try {
      n = std::stoi(f[1]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConstraintViolation, "bad numeral '" + f[1] + "'");
    }
    table.rules_[{f[0], n}] = {n, f[0], f[2], f[3]};
  });
  return table;
}

const CounterTable& CounterTable::bundled() {
  static const CounterTable table = parse(embedded::counters_tsv(), embedded::counter_classes_tsv());
  return table;
}

const CounterRule& CounterTable::lookup(int number, std::string_view quantifier_class) const {
  if (!classes_.count(quantifier_class))
    throw Error(ErrorKind::UnknownClass, std::string(quantifier_class));
  auto it = rules_.find(std::pair<std::string, int>{std::string(quantifier_class), number});
  if (it == rules_.end())
    throw Error(ErrorKind::OutOfRange, std::to_string(number) + " " + std::string(quantifier_class));
  return it->second;
}

const CounterClass& CounterTable::counter_class(std::string_view name) const {
  auto it = classes_.find(name);
  if (it == classes_.end()) throw Error(ErrorKind::UnknownClass, std::string(name));
  return it->second;
}

std::vector<std::string> CounterTable::classes() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : classes_) out.push_back(name);
  return out;
}

std::vector<CounterRule> CounterTable::rules() const {
  std::vector<CounterRule> out;
  for (const auto& [_, r] : rules_) out.push_back(r);
  return out;
}

std::string counter_form(int number, std::string_view quantifier_class) {
  return CounterTable::bundled().form(number, quantifier_class);
}

namespace {

DrillItem counting_item(const CounterTable& table, const std::string& cls, int n) {
  const auto& rule = table.lookup(n, cls);
  const auto& klass = table.counter_class(cls);
  DrillItem item;
  item.pattern_id = "counter:" + cls;
  item.tuple["number"] = {"number", {{"en", std::to_string(n)}, {"ja", rule.form}, {"ja-Hira", rule.kana}}};
  item.tuple["object"] = {"object", {{"en", klass.example}, {"ja", cls}}};
  item.stimulus = std::to_string(n) + ", " + klass.example;
  item.source_sentence = std::to_string(n) + " " + klass.example;
  item.target_sentence = rule.form;
  item.kana_sentence = rule.kana;
  item.target_spans["number"] = {0, rule.form.size()};
  return item;
}

}  // namespace

std::vector<DrillItem> generate_counting_items(const CounterTable& table, CountingMode mode,
                                               std::span<const std::string> classes,
                                               std::span<const int> numbers) {
  if (classes.empty() || numbers.empty())
    throw Error(ErrorKind::InvalidConfig, "need at least one class and one number");
  if (mode == CountingMode::vary_number && classes.size() != 1)
    throw Error(ErrorKind::InvalidConfig, "vary_number fixes exactly one class");
  if (mode == CountingMode::vary_object && numbers.size() != 1)
    throw Error(ErrorKind::InvalidConfig, "vary_object fixes exactly one number");
  std::vector<DrillItem> items;
  for (const auto& cls : classes)
    for (int n : numbers) items.push_back(counting_item(table, cls, n));
  return items;
}

}  // namespace dt
