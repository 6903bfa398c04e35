#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace svytree {

/// Failure categories raised across the toolkit. The CLI reports the name
/// verbatim, so renaming an enumerator is a breaking change.
enum class Errc {
  // frame
  MissingHeader,
  SchemaMismatch,
  UnknownLevel,
  MissingValue,
  NonNumeric,
  EmptyPopulation,
  InvalidCellMean,
  // design
  OversampledStratum,
  NonpositiveSize,
  ZeroInclusionProbability,
  InfeasibleDesign,
  // tree
  EmptyNode,
  EmptySample,
  UnknownVariable,
  InvalidDocument,
  // estimate
  LengthMismatch,
  NonpositiveWeight,
  PredictionFailure,
  SingularSystem,
  EmptySampleBox,
  IdentityViolation,
  // mc
  EmptyVector,
  InsufficientSampleSizes,
  // cli / io
  BadArguments,
  ConfigError,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

/// Module that owns an error code ("frame", "design", ...).
std::string_view errc_module(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace svytree
