#include "drilltutor/selection.hpp"

#include <algorithm>

namespace dt {

namespace {

std::map<VariableName, std::vector<LexicalValue>> chosen_values(const PatternRecord& record,
                                                                const ItemSelection& selection) {
  auto values = record.values;
  auto it = selection.values.find(record.pattern.id());
  if (it == selection.values.end()) return values;
  for (const auto& [variable, indices] : it->second) {
    if (!record.pattern.has_variable(variable))
      throw Error(ErrorKind::UnknownVariable, record.pattern.id() + "." + variable);
    const auto& stored = values[variable];
    std::vector<LexicalValue> picked;
    for (std::size_t i : indices) {
      if (i >= stored.size())
        throw Error(ErrorKind::OutOfRange, record.pattern.id() + "." + variable + " has no value #" +
                                               std::to_string(i));
      picked.push_back(stored[i]);
    }
    values[variable] = std::move(picked);
  }
  return values;
}

}  // namespace

DrillLanguages languages_for(const Database& db, const PatternRecord& record, const LanguageCode& interface,
                             const std::map<VariableName, std::vector<LexicalValue>>& values) {
  DrillLanguages languages = db.languages;
  if (interface.empty() || interface == languages.interface || !record.pattern.has_rendering(interface))
    return languages;
  for (const auto& [_, list] : values)
    for (const auto& value : list)
      if (!value.renderings.contains(interface)) return languages;
  languages.interface = interface;
  return languages;
}

std::vector<std::string> selected_patterns(const Database& db, const ItemSelection& selection) {
  const GoalId goal = selection.goal.value_or(kRootGoal);
  if (!db.goals.contains(goal)) throw Error(ErrorKind::UnknownGoal, std::to_string(goal));
  const bool deep = selection.include_subgoals || !selection.goal;
  std::vector<std::string> scope = deep ? db.goals.subtree_patterns(goal) : db.goals.goal(goal).pattern_ids;
  if (selection.patterns.empty()) return scope;
  for (const auto& id : selection.patterns) {
    if (!db.patterns.contains(id)) throw Error(ErrorKind::UnknownPattern, id);
    if (std::find(scope.begin(), scope.end(), id) == scope.end())
      throw Error(ErrorKind::ConstraintViolation, id + " is not under the chosen goal");
  }
  std::erase_if(scope, [&](const std::string& id) {
    return std::find(selection.patterns.begin(), selection.patterns.end(), id) == selection.patterns.end();
  });
  return scope;
}

std::vector<DrillItem> select_items(const Database& db, const ItemSelection& selection,
                                    const LanguageCode& interface) {
  for (const auto& [id, _] : selection.values)
    if (!db.patterns.contains(id)) throw Error(ErrorKind::UnknownPattern, id);
  std::vector<DrillItem> items;
  for (const auto& id : selected_patterns(db, selection)) {
    const auto& record = db.patterns.at(id);
    const auto values = chosen_values(record, selection);
    auto part = make_drill_items(record.pattern, values, languages_for(db, record, interface, values));
    std::move(part.begin(), part.end(), std::back_inserter(items));
  }
  return items;
}

}  // namespace dt
