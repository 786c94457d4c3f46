#include "drilltutor/error.hpp"

namespace dt {

std::string_view error_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidUtf8: return "InvalidUtf8";
    case ErrorKind::UnbalancedSlotDelimiter: return "UnbalancedSlotDelimiter";
    case ErrorKind::EmptySlotName: return "EmptySlotName";
    case ErrorKind::InvalidSlotName: return "InvalidSlotName";
    case ErrorKind::DuplicateSlotName: return "DuplicateSlotName";
    case ErrorKind::InvalidEscape: return "InvalidEscape";
    case ErrorKind::SlotSetMismatch: return "SlotSetMismatch";
    case ErrorKind::MissingAssignment: return "MissingAssignment";
    case ErrorKind::ExtraAssignment: return "ExtraAssignment";
    case ErrorKind::MissingRendering: return "MissingRendering";
    case ErrorKind::UnknownLanguage: return "UnknownLanguage";
    case ErrorKind::EmptyValueList: return "EmptyValueList";
    case ErrorKind::UnknownParent: return "UnknownParent";
    case ErrorKind::UnknownGoal: return "UnknownGoal";
    case ErrorKind::UnknownChild: return "UnknownChild";
    case ErrorKind::DuplicateSiblingName: return "DuplicateSiblingName";
    case ErrorKind::NonEmptySubtree: return "NonEmptySubtree";
    case ErrorKind::CycleDetected: return "CycleDetected";
    case ErrorKind::RootImmutable: return "RootImmutable";
    case ErrorKind::MissingDefaultName: return "MissingDefaultName";
    case ErrorKind::EmptyItemList: return "EmptyItemList";
    case ErrorKind::SessionDone: return "SessionDone";
    case ErrorKind::WrongPhase: return "WrongPhase";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NoRendering: return "NoRendering";
    case ErrorKind::NoKnownLexemes: return "NoKnownLexemes";
    case ErrorKind::MalformedLexicon: return "MalformedLexicon";
    case ErrorKind::MalformedBundle: return "MalformedBundle";
    case ErrorKind::ConstraintViolation: return "ConstraintViolation";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::IncompletePack: return "IncompletePack";
    case ErrorKind::UnknownSymbol: return "UnknownSymbol";
    case ErrorKind::UnknownPattern: return "UnknownPattern";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::UnknownLanguagePack: return "UnknownLanguagePack";
    case ErrorKind::DuplicateUser: return "DuplicateUser";
    case ErrorKind::AuthenticationFailed: return "AuthenticationFailed";
    case ErrorKind::PermissionDenied: return "PermissionDenied";
    case ErrorKind::StorageFailure: return "StorageFailure";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::MalformedRequest: return "MalformedRequest";
    case ErrorKind::UnknownSession: return "UnknownSession";
    case ErrorKind::UnknownRoute: return "UnknownRoute";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(error_name(kind)) +
                         (detail.empty() ? "" : ": " + detail)),
      kind_(kind),
      detail_(detail) {}

}  // namespace dt
