#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "drilltutor/drill.hpp"
#include "drilltutor/error.hpp"
#include "drilltutor/goals.hpp"
#include "drilltutor/language.hpp"
#include "drilltutor/pattern.hpp"

namespace dt {

enum class Role { expert, admin };

struct ExpertAccount {
  std::string username;
  std::string credential;  // hash_password digest, never the password
  Timestamp created;
  Role role = Role::expert;

  bool operator==(const ExpertAccount&) const = default;
};

/// Who is asking for a mutation.
struct Principal {
  std::string username;
  bool admin = false;
};

/// A pattern with its variables and their values, attached to one goal.
struct PatternRecord {
  PatternTemplate pattern;
  std::vector<Variable> variables;  // same order as pattern.variables()
  std::map<VariableName, std::vector<LexicalValue>> values;
  GoalId goal = kRootGoal;
  std::string owner;

  const Variable& variable(std::string_view name) const;
  bool operator==(const PatternRecord&) const = default;
};

/// The whole persisted state.
struct Database {
  DrillLanguages languages;
  GoalTree goals;
  std::map<std::string, PatternRecord> patterns;
  std::map<std::string, ExpertAccount> experts;
  std::map<LanguageCode, LanguagePack> packs;
};

/// Empty tree plus the built-in English pack.
Database make_empty_database();

/// Referential integrity and tree invariants. Throws Error(ConstraintViolation).
void check_integrity(const Database& db);
/// Checks one record against the database it is about to enter.
void validate_pattern_record(const Database& db, const PatternRecord& record);

inline constexpr int kBundleVersion = 1;
inline constexpr int kImageVersion = 1;
inline constexpr int kSnapshotVersion = 1;

struct RecordError {
  std::size_t record = 0;  // index in the bundle's "goals" array
  std::string goal;        // path, " / " separated
  ErrorKind kind = ErrorKind::ConstraintViolation;
  std::string message;
};

struct ImportReport {
  std::size_t goals_created = 0;
  std::size_t goals_updated = 0;
  std::size_t patterns_created = 0;
  std::size_t patterns_replaced = 0;
  std::size_t values_created = 0;
  std::vector<RecordError> errors;

  bool ok() const noexcept { return errors.empty(); }
};

/// Bundle: one UTF-8 JSON document (see docs/bundle-format.md). Goal records
/// are committed one at a time; a record with any error is skipped whole.
/// Throws MalformedBundle or VersionMismatch when the document itself is bad.
ImportReport import_bundle(Database& db, std::string_view bundle, const Principal& who);
/// Canonical form: goals in preorder, patterns/variables/values in stored
/// order, object keys sorted.
std::string export_bundle(const Database& db);

/// The bundle's pattern object plus "goal" and "owner".
std::string pattern_record_to_json(const PatternRecord& record);
/// Reads "goal" when present and ignores "owner". Throws MalformedBundle or
/// the template errors.
PatternRecord pattern_record_from_json(std::string_view text);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_tsv() const;
};

/// One row per (pattern, variable); goals in preorder.
Table export_table(const Database& db);

/// Full database image (canonical JSON) and back.
std::string database_to_image(const Database& db);
Database database_from_image(std::string_view image);

struct Snapshot {
  Timestamp timestamp;
  int format_version = kSnapshotVersion;
  std::string image;
};

std::string serialize_snapshot(const Snapshot& snapshot);
/// Throws VersionMismatch for other format versions, MalformedBundle for garbage.
Snapshot parse_snapshot(std::string_view text);
/// "backup-20261015T231405.123Z.snap"
std::string snapshot_file_name(Timestamp t);
Snapshot read_snapshot_file(const std::filesystem::path& path);

/// Where the database image lives.
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;
  virtual std::optional<std::string> load() = 0;
  /// Must be atomic: either the new image is stored or the old one remains.
  virtual void save(const std::string& image) = 0;
};

class MemoryBackend final : public StorageBackend {
 public:
  std::optional<std::string> load() override { return image_; }
  void save(const std::string& image) override { image_ = image; }

 private:
  std::optional<std::string> image_;
};

/// Single-file SQLite database; each save is one transaction.
class SqliteBackend final : public StorageBackend {
 public:
  explicit SqliteBackend(const std::filesystem::path& file);
  ~SqliteBackend() override;
  SqliteBackend(const SqliteBackend&) = delete;
  SqliteBackend& operator=(const SqliteBackend&) = delete;

  std::optional<std::string> load() override;
  void save(const std::string& image) override;

 private:
  struct Handle;
  std::unique_ptr<Handle> db_;
};

struct StoreOptions {
  /// Snapshot files go here; empty disables writing them.
  std::filesystem::path backup_dir;
  unsigned password_iterations = 100000;
  std::function<Timestamp()> clock;
};

/// Single writer, many readers. Every mutation runs on a copy, is checked,
/// persisted, and only then becomes visible.
class Store {
 public:
  explicit Store(std::unique_ptr<StorageBackend> backend, StoreOptions options = {});

  /// SQLite store at `file`; backups default to `<file dir>/backups`.
  static std::unique_ptr<Store> open(const std::filesystem::path& file, StoreOptions options = {});

  Database snapshot() const;
  template <class F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mutex_);
    return std::forward<F>(f)(static_cast<const Database&>(db_));
  }

  void enroll_expert(const std::string& username, std::string_view password, Role role = Role::expert);
  /// nullopt for unknown users and wrong passwords alike.
  std::optional<Principal> authenticate(const std::string& username, std::string_view password) const;

  GoalId add_goal(const Principal& who, std::map<LanguageCode, std::string> names, GoalId parent);
  void modify_goal(const Principal& who, GoalId id, const GoalChange& change);
  void delete_goal(const Principal& who, GoalId id, bool cascade = false);

  /// Creates or replaces (owner or admin only) a pattern record.
  void put_pattern(const Principal& who, PatternRecord record);
  void delete_pattern(const Principal& who, const std::string& pattern_id);
  void add_value(const Principal& who, const std::string& pattern_id, LexicalValue value);
  void remove_value(const Principal& who, const std::string& pattern_id, const VariableName& variable,
                    std::size_t index);

  ImportReport import_bundle(const Principal& who, std::string_view bundle);
  std::string export_bundle() const;
  Table export_table() const;

  Snapshot backup();
  /// Snapshot files in chronological order.
  std::vector<std::filesystem::path> list_backups() const;
  void restore(const Snapshot& snapshot);

  void install_language_pack(const Principal& who, LanguagePack pack);
  std::string transliterate(std::string_view kana, const LanguageCode& language) const;

 private:
  template <class F>
  void mutate(F&& f);
  Timestamp now() const;

  std::unique_ptr<StorageBackend> backend_;
  StoreOptions options_;
  mutable std::shared_mutex mutex_;
  Database db_;
  Timestamp last_backup_{};
};

/// Owner or admin; records without an owner need an admin.
void require_owner(const Principal& who, const std::string& owner);

}  // namespace dt
