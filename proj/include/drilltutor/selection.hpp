#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drilltutor/drill.hpp"
#include "drilltutor/store.hpp"

namespace dt {

/// What a student picked before starting a drill.
struct ItemSelection {
  /// Empty means the whole tree.
  std::optional<GoalId> goal;
  /// Empty means every pattern of the goal.
  std::vector<std::string> patterns;
  /// Also take patterns of the goal's descendants.
  bool include_subgoals = false;
  /// pattern id -> variable -> indices into the stored value list.
  /// Variables left out keep all their values.
  std::map<std::string, std::map<VariableName, std::vector<std::size_t>>> values;
};

/// Languages for one pattern: `interface` when the pattern and all selected
/// values have it, otherwise the database's interface language.
DrillLanguages languages_for(const Database& db, const PatternRecord& record, const LanguageCode& interface,
                             const std::map<VariableName, std::vector<LexicalValue>>& values);

/// Resolves the selection to pattern ids in preorder of their goals.
/// Throws UnknownGoal, UnknownPattern, ConstraintViolation (pattern outside
/// the goal), UnknownVariable, OutOfRange.
std::vector<std::string> selected_patterns(const Database& db, const ItemSelection& selection);

/// Drill items for the selection, pattern by pattern, each in enumeration order.
std::vector<DrillItem> select_items(const Database& db, const ItemSelection& selection,
                                    const LanguageCode& interface = {});

}  // namespace dt
