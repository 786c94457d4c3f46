#include "drilltutor/goals.hpp"

#include <algorithm>
#include <set>

#include "drilltutor/error.hpp"

namespace dt {

const std::string& Goal::label(const LanguageCode& language, const LanguageCode& fallback) const {
  if (auto it = names.find(language); it != names.end()) return it->second;
  if (auto it = names.find(fallback); it != names.end()) return it->second;
  static const std::string empty;
  return names.empty() ? empty : names.begin()->second;
}

TreeView apply_aliases(TreeView view, const AliasSet& aliases) {
  if (auto it = aliases.goal_aliases.find(view.id); it != aliases.goal_aliases.end())
    view.label = it->second;
  for (auto& child : view.children) child = apply_aliases(std::move(child), aliases);
  return view;
}

std::string variable_label(const Variable& variable, const LanguageCode& language,
                           const AliasSet& aliases) {
  if (auto it = aliases.variable_aliases.find(variable.name); it != aliases.variable_aliases.end())
    return it->second;
  if (auto it = variable.display_aliases.find(language); it != variable.display_aliases.end())
    return it->second;
  return variable.name;
}

GoalTree::GoalTree(LanguageCode default_language, std::string root_name)
    : default_language_(std::move(default_language)) {
  Goal root;
  root.id = kRootGoal;
  root.names[default_language_] = std::move(root_name);
  goals_.emplace(kRootGoal, std::move(root));
}

GoalTree GoalTree::from_goals(std::vector<Goal> goals, GoalId next_id, LanguageCode default_language) {
  GoalTree tree(std::move(default_language));
  tree.goals_.clear();
  for (auto& g : goals) {
    const auto id = g.id;
    if (!tree.goals_.emplace(id, std::move(g)).second)
      throw Error(ErrorKind::ConstraintViolation, "duplicate goal id " + std::to_string(id));
  }
  tree.next_id_ = next_id;
  tree.check_invariants();
  return tree;
}

bool GoalTree::contains(GoalId id) const { return goals_.count(id) != 0; }

const Goal& GoalTree::goal(GoalId id) const {
  auto it = goals_.find(id);
  if (it == goals_.end()) throw Error(ErrorKind::UnknownGoal, std::to_string(id));
  return it->second;
}

Goal& GoalTree::mutable_goal(GoalId id) {
  auto it = goals_.find(id);
  if (it == goals_.end()) throw Error(ErrorKind::UnknownGoal, std::to_string(id));
  return it->second;
}

const std::vector<GoalId>& GoalTree::children(GoalId id) const { return goal(id).children; }

void GoalTree::check_sibling_names(GoalId parent, const std::map<LanguageCode, std::string>& names,
                                   std::optional<GoalId> self) const {
  for (GoalId sibling : goal(parent).children) {
    if (self && sibling == *self) continue;
    const auto& other = goal(sibling).names;
    for (const auto& [language, name] : names) {
      auto it = other.find(language);
      if (it != other.end() && it->second == name)
        throw Error(ErrorKind::DuplicateSiblingName, name);
    }
  }
}

GoalId GoalTree::add_goal(std::map<LanguageCode, std::string> names, GoalId parent, std::string owner) {
  if (!contains(parent)) throw Error(ErrorKind::UnknownParent, std::to_string(parent));
  auto it = names.find(default_language_);
  if (it == names.end() || it->second.empty())
    throw Error(ErrorKind::MissingDefaultName, "goal needs a '" + default_language_ + "' name");
  check_sibling_names(parent, names, std::nullopt);

  Goal g;
  g.id = next_id_++;
  g.names = std::move(names);
  g.parent = parent;
  g.owner = std::move(owner);
  const auto id = g.id;
  goals_.emplace(id, std::move(g));
  mutable_goal(parent).children.push_back(id);
  return id;
}

GoalId GoalTree::add_goal(const std::string& name, GoalId parent) {
  return add_goal({{default_language_, name}}, parent);
}

void GoalTree::modify_goal(GoalId id, const GoalChange& change) {
  const Goal& current = goal(id);
  GoalId parent = current.parent.value_or(kRootGoal);
  if (change.parent) {
    if (id == kRootGoal) throw Error(ErrorKind::RootImmutable, "the root has no parent");
    if (!contains(*change.parent)) throw Error(ErrorKind::UnknownParent, std::to_string(*change.parent));
    for (GoalId a = *change.parent;; a = *goal(a).parent) {
      if (a == id) throw Error(ErrorKind::CycleDetected, "goal cannot move below itself");
      if (!goal(a).parent) break;
    }
    parent = *change.parent;
  }
  const auto& names = change.names ? *change.names : current.names;
  if (change.names) {
    auto it = names.find(default_language_);
    if (it == names.end() || it->second.empty())
      throw Error(ErrorKind::MissingDefaultName, "goal needs a '" + default_language_ + "' name");
  }
  if (id != kRootGoal && (change.names || change.parent)) check_sibling_names(parent, names, id);

  // All checks passed; apply.
  Goal& g = mutable_goal(id);
  if (change.names) g.names = *change.names;
  if (change.pattern_ids) g.pattern_ids = *change.pattern_ids;
  if (change.parent && *change.parent != *g.parent) {
    auto& old_children = mutable_goal(*g.parent).children;
    old_children.erase(std::remove(old_children.begin(), old_children.end(), id), old_children.end());
    mutable_goal(*change.parent).children.push_back(id);
    g.parent = *change.parent;
  }
}

std::vector<std::string> GoalTree::delete_goal(GoalId id, bool cascade) {
  if (id == kRootGoal) throw Error(ErrorKind::RootImmutable, "the root cannot be deleted");
  const Goal& g = goal(id);
  if (!g.children.empty() && !cascade)
    throw Error(ErrorKind::NonEmptySubtree, g.label(default_language_, default_language_));

  std::vector<std::string> removed_patterns;
  const auto doomed = preorder(id);
  for (GoalId d : doomed) {
    const auto& p = goal(d).pattern_ids;
    removed_patterns.insert(removed_patterns.end(), p.begin(), p.end());
  }
  auto& siblings = mutable_goal(*g.parent).children;
  siblings.erase(std::remove(siblings.begin(), siblings.end(), id), siblings.end());
  for (GoalId d : doomed) goals_.erase(d);
  return removed_patterns;
}

void GoalTree::attach_pattern(GoalId id, const std::string& pattern_id) {
  auto& ids = mutable_goal(id).pattern_ids;
  if (std::find(ids.begin(), ids.end(), pattern_id) == ids.end()) ids.push_back(pattern_id);
}

void GoalTree::detach_pattern(GoalId id, const std::string& pattern_id) {
  auto& ids = mutable_goal(id).pattern_ids;
  ids.erase(std::remove(ids.begin(), ids.end(), pattern_id), ids.end());
}

Navigation GoalTree::navigate(std::span<const std::size_t> path) const {
  Navigation nav;
  nav.goal = &goal(kRootGoal);
  nav.trail.push_back(kRootGoal);
  for (std::size_t index : path) {
    const auto& kids = nav.goal->children;
    if (index >= kids.size())
      throw Error(ErrorKind::UnknownChild, "index " + std::to_string(index) + " of " +
                                               std::to_string(kids.size()) + " children");
    nav.goal = &goal(kids[index]);
    nav.trail.push_back(nav.goal->id);
  }
  return nav;
}

std::optional<GoalId> GoalTree::find_child(GoalId parent, std::string_view name,
                                           bool case_insensitive) const {
  const std::string wanted = case_insensitive ? fold_case(name) : std::string(name);
  for (GoalId child : goal(parent).children) {
    const auto& label = goal(child).label(default_language_, default_language_);
    if ((case_insensitive ? fold_case(label) : label) == wanted) return child;
  }
  return std::nullopt;
}

std::optional<GoalId> GoalTree::find_path(const std::vector<std::string>& names,
                                          bool case_insensitive) const {
  GoalId at = kRootGoal;
  for (const auto& name : names) {
    auto next = find_child(at, name, case_insensitive);
    if (!next) return std::nullopt;
    at = *next;
  }
  return at;
}

std::vector<std::string> GoalTree::path_names(GoalId id) const {
  std::vector<std::string> names;
  for (const Goal* g = &goal(id); g->parent; g = &goal(*g->parent))
    names.push_back(g->label(default_language_, default_language_));
  std::reverse(names.begin(), names.end());
  return names;
}

std::vector<GoalId> GoalTree::preorder(GoalId from) const {
  std::vector<GoalId> order;
  std::vector<GoalId> stack{from};
  while (!stack.empty()) {
    GoalId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& kids = goal(id).children;
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

std::vector<std::string> GoalTree::subtree_patterns(GoalId id) const {
  std::vector<std::string> ids;
  for (GoalId g : preorder(id)) {
    const auto& p = goal(g).pattern_ids;
    ids.insert(ids.end(), p.begin(), p.end());
  }
  return ids;
}

TreeView GoalTree::view_of(GoalId id, const LanguageCode& language) const {
  const Goal& g = goal(id);
  TreeView v;
  v.id = id;
  v.label = g.label(language, default_language_);
  v.pattern_ids = g.pattern_ids;
  for (GoalId child : g.children) v.children.push_back(view_of(child, language));
  return v;
}

TreeView GoalTree::view(const LanguageCode& language) const { return view_of(kRootGoal, language); }

std::vector<Goal> GoalTree::goals() const {
  std::vector<Goal> out;
  out.reserve(goals_.size());
  for (const auto& [_, g] : goals_) out.push_back(g);
  return out;
}

void GoalTree::check_invariants() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::ConstraintViolation, what); };
  auto root = goals_.find(kRootGoal);
  if (root == goals_.end() || root->second.parent) fail("missing root");
  std::size_t roots = 0;
  for (const auto& [id, g] : goals_) {
    if (g.id != id) fail("goal id mismatch");
    if (!g.parent) {
      ++roots;
      continue;
    }
    if (id >= next_id_) fail("goal id beyond allocator");
    auto p = goals_.find(*g.parent);
    if (p == goals_.end()) fail("dangling parent of goal " + std::to_string(id));
    const auto& kids = p->second.children;
    if (std::count(kids.begin(), kids.end(), id) != 1)
      fail("goal " + std::to_string(id) + " not listed once by its parent");
    auto n = g.names.find(default_language_);
    if (n == g.names.end() || n->second.empty()) fail("goal without default name");
  }
  if (roots != 1) fail("more than one root");
  std::set<GoalId> seen;
  std::vector<GoalId> stack{kRootGoal};
  while (!stack.empty()) {
    GoalId id = stack.back();
    stack.pop_back();
    if (!seen.insert(id).second) fail("cycle or shared child");
    for (GoalId child : goal(id).children) {
      if (!contains(child) || goal(child).parent != id) fail("child/parent mismatch");
      stack.push_back(child);
    }
  }
  if (seen.size() != goals_.size()) fail("unreachable goals");
}

}  // namespace dt
