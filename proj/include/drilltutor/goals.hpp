#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drilltutor/pattern.hpp"

namespace dt {

using GoalId = std::uint64_t;
inline constexpr GoalId kRootGoal = 0;

struct Goal {
  GoalId id = kRootGoal;
  std::map<LanguageCode, std::string> names;
  std::optional<GoalId> parent;  // empty only for the root
  std::vector<GoalId> children;
  std::vector<std::string> pattern_ids;
  std::string owner;

  /// Name in `language`, falling back to `fallback`.
  const std::string& label(const LanguageCode& language, const LanguageCode& fallback) const;
  bool operator==(const Goal&) const = default;
};

struct GoalChange {
  std::optional<std::map<LanguageCode, std::string>> names;
  std::optional<GoalId> parent;
  std::optional<std::vector<std::string>> pattern_ids;
};

/// Display tree handed to clients. Labels are the only thing aliases touch.
struct TreeView {
  GoalId id = kRootGoal;
  std::string label;
  std::vector<std::string> pattern_ids;
  std::vector<TreeView> children;

  bool operator==(const TreeView&) const = default;
};

struct AliasSet {
  std::string owner;
  std::map<GoalId, std::string> goal_aliases;
  std::map<VariableName, std::string> variable_aliases;

  bool operator==(const AliasSet&) const = default;
};

/// Relabels aliased goals; unknown ids are ignored.
TreeView apply_aliases(TreeView view, const AliasSet& aliases);

/// Student alias, then expert alias for `language`, then the variable name.
std::string variable_label(const Variable& variable, const LanguageCode& language,
                           const AliasSet& aliases);

struct Navigation {
  const Goal* goal = nullptr;
  std::vector<GoalId> trail;  // root .. goal
};

/// The hierarchy of communicative goals. Exactly one root; every other goal
/// has a single parent; sibling names are unique per language.
class GoalTree {
 public:
  explicit GoalTree(LanguageCode default_language = "en", std::string root_name = "Goals");

  /// Rebuilds a tree from stored goals; throws if the invariants do not hold.
  static GoalTree from_goals(std::vector<Goal> goals, GoalId next_id, LanguageCode default_language);

  const LanguageCode& default_language() const noexcept { return default_language_; }
  GoalId next_id() const noexcept { return next_id_; }
  std::size_t size() const noexcept { return goals_.size(); }

  GoalId add_goal(std::map<LanguageCode, std::string> names, GoalId parent, std::string owner = {});
  GoalId add_goal(const std::string& name, GoalId parent);
  void modify_goal(GoalId id, const GoalChange& change);
  /// Without `cascade`, a goal with children cannot be removed. Returns the
  /// pattern ids that were attached to the removed goals.
  std::vector<std::string> delete_goal(GoalId id, bool cascade = false);

  bool contains(GoalId id) const;
  const Goal& goal(GoalId id) const;
  const std::vector<GoalId>& children(GoalId id) const;

  void attach_pattern(GoalId id, const std::string& pattern_id);
  void detach_pattern(GoalId id, const std::string& pattern_id);

  /// Follows child indices from the root.
  Navigation navigate(std::span<const std::size_t> path) const;
  std::optional<GoalId> find_child(GoalId parent, std::string_view name,
                                   bool case_insensitive = false) const;
  std::optional<GoalId> find_path(const std::vector<std::string>& names,
                                  bool case_insensitive = false) const;
  /// Default-language names from the root (exclusive) down to `id`.
  std::vector<std::string> path_names(GoalId id) const;
  /// Root first, children in insertion order.
  std::vector<GoalId> preorder(GoalId from = kRootGoal) const;
  /// Pattern ids of `id` and all its descendants, in preorder.
  std::vector<std::string> subtree_patterns(GoalId id) const;

  TreeView view(const LanguageCode& language) const;
  std::vector<Goal> goals() const;

  /// Throws Error(ConstraintViolation) when any structural invariant fails.
  void check_invariants() const;

 private:
  Goal& mutable_goal(GoalId id);
  void check_sibling_names(GoalId parent, const std::map<LanguageCode, std::string>& names,
                           std::optional<GoalId> self) const;
  TreeView view_of(GoalId id, const LanguageCode& language) const;

  LanguageCode default_language_;
  std::map<GoalId, Goal> goals_;
  GoalId next_id_ = 1;
};

}  // namespace dt
