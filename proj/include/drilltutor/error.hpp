#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dt {

/// Every failure the library reports. The enumerator name is the
/// user-facing error name (printed by the CLI, sent by the service).
enum class ErrorKind {
  // templates and instantiation
  InvalidUtf8,
  UnbalancedSlotDelimiter,
  EmptySlotName,
  InvalidSlotName,
  DuplicateSlotName,
  InvalidEscape,
  SlotSetMismatch,
  MissingAssignment,
  ExtraAssignment,
  MissingRendering,
  UnknownLanguage,
  EmptyValueList,
  // goal tree
  UnknownParent,
  UnknownGoal,
  UnknownChild,
  DuplicateSiblingName,
  NonEmptySubtree,
  CycleDetected,
  RootImmutable,
  MissingDefaultName,
  // drills
  EmptyItemList,
  SessionDone,
  WrongPhase,
  UnknownClass,
  OutOfRange,
  InvalidConfig,
  // corpus
  NoRendering,
  NoKnownLexemes,
  MalformedLexicon,
  // store
  MalformedBundle,
  ConstraintViolation,
  VersionMismatch,
  IncompletePack,
  UnknownSymbol,
  UnknownPattern,
  UnknownVariable,
  UnknownLanguagePack,
  DuplicateUser,
  AuthenticationFailed,
  PermissionDenied,
  StorageFailure,
  IoError,
  // service
  MalformedRequest,
  UnknownSession,
  UnknownRoute,
};

std::string_view error_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_name(kind_); }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace dt
