#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wavecast {

enum class Errc {
  // data ingestion and I/O
  Io,
  MalformedRow,
  IrregularSampling,
  LeadNotAhead,
  MissingParamset,
  FormatError,
  // configuration
  ConfigInvalid,
  // numerics
  CollisionDetected,
  ShiftOutOfRange,
  NoRoot,
  HorizonExceedsShift,
  IndexOutOfRange,
  InsufficientHistory,
  SeriesTooShort,
  EmptySplit,
  DegenerateData,
  ShapeMismatch,
  NonScalarLoss,
  EmptySequence,
  LengthMismatch,
  Divergence,
  EmptySet,
  HorizonTooLarge,
  InconsistentSampleSets,
};

constexpr std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::Io: return "Io";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::IrregularSampling: return "IrregularSampling";
    case Errc::LeadNotAhead: return "LeadNotAhead";
    case Errc::MissingParamset: return "MissingParamset";
    case Errc::FormatError: return "FormatError";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::CollisionDetected: return "CollisionDetected";
    case Errc::ShiftOutOfRange: return "ShiftOutOfRange";
    case Errc::NoRoot: return "NoRoot";
    case Errc::HorizonExceedsShift: return "HorizonExceedsShift";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::InsufficientHistory: return "InsufficientHistory";
    case Errc::SeriesTooShort: return "SeriesTooShort";
    case Errc::EmptySplit: return "EmptySplit";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonScalarLoss: return "NonScalarLoss";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::Divergence: return "Divergence";
    case Errc::EmptySet: return "EmptySet";
    case Errc::HorizonTooLarge: return "HorizonTooLarge";
    case Errc::InconsistentSampleSets: return "InconsistentSampleSets";
  }
  return "Unknown";
}

/// Process exit code for an error class: 1 I/O, 2 config, 3 numeric/training.
constexpr int exit_code(Errc e) {
  switch (e) {
    case Errc::Io:
    case Errc::MalformedRow:
    case Errc::IrregularSampling:
    case Errc::LeadNotAhead:
    case Errc::MissingParamset:
    case Errc::FormatError:
      return 1;
    case Errc::ConfigInvalid:
      return 2;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace wavecast
