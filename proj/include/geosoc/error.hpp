#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geosoc {

enum class Errc {
  DuplicateNode,
  UnknownNode,
  InvalidCoordinate,
  SelfLoop,
  WeightOutOfRange,
  KindMismatch,
  NotAServiceProvider,
  IoError,
  UnsupportedSnapshotVersion,
  CorruptSnapshot,
  ParseError,
  StarsOutOfRange,
  OriginNotUser,
  EmptyKeywords,
  InvalidArgument,
  EmptyInput,
  InvalidStats,
  RatingOutOfRange,
  NoReviews,
  TooFewExamples,
  InvalidRatio,
  LabelOutOfRange,
  EmptyModel,
  EmptyTestSet,
  UnsupportedModelVersion,
  CorruptModel,
  ConfigError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateNode: return "DuplicateNode";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::InvalidCoordinate: return "InvalidCoordinate";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::WeightOutOfRange: return "WeightOutOfRange";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::NotAServiceProvider: return "NotAServiceProvider";
    case Errc::IoError: return "IoError";
    case Errc::UnsupportedSnapshotVersion: return "UnsupportedSnapshotVersion";
    case Errc::CorruptSnapshot: return "CorruptSnapshot";
    case Errc::ParseError: return "ParseError";
    case Errc::StarsOutOfRange: return "StarsOutOfRange";
    case Errc::OriginNotUser: return "OriginNotUser";
    case Errc::EmptyKeywords: return "EmptyKeywords";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidStats: return "InvalidStats";
    case Errc::RatingOutOfRange: return "RatingOutOfRange";
    case Errc::NoReviews: return "NoReviews";
    case Errc::TooFewExamples: return "TooFewExamples";
    case Errc::InvalidRatio: return "InvalidRatio";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyModel: return "EmptyModel";
    case Errc::EmptyTestSet: return "EmptyTestSet";
    case Errc::UnsupportedModelVersion: return "UnsupportedModelVersion";
    case Errc::CorruptModel: return "CorruptModel";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// ParseError that remembers the 1-based input line it came from.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(Errc::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace geosoc
