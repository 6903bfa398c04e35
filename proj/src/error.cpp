#include "svytree/error.hpp"

namespace svytree {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingHeader: return "MissingHeader";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::UnknownLevel: return "UnknownLevel";
    case Errc::MissingValue: return "MissingValue";
    case Errc::NonNumeric: return "NonNumeric";
    case Errc::EmptyPopulation: return "EmptyPopulation";
    case Errc::InvalidCellMean: return "InvalidCellMean";
    case Errc::OversampledStratum: return "OversampledStratum";
    case Errc::NonpositiveSize: return "NonpositiveSize";
    case Errc::ZeroInclusionProbability: return "ZeroInclusionProbability";
    case Errc::InfeasibleDesign: return "InfeasibleDesign";
    case Errc::EmptyNode: return "EmptyNode";
    case Errc::EmptySample: return "EmptySample";
    case Errc::UnknownVariable: return "UnknownVariable";
    case Errc::InvalidDocument: return "InvalidDocument";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonpositiveWeight: return "NonpositiveWeight";
    case Errc::PredictionFailure: return "PredictionFailure";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::EmptySampleBox: return "EmptySampleBox";
    case Errc::IdentityViolation: return "IdentityViolation";
    case Errc::EmptyVector: return "EmptyVector";
    case Errc::InsufficientSampleSizes: return "InsufficientSampleSizes";
    case Errc::BadArguments: return "BadArguments";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

std::string_view errc_module(Errc code) noexcept {
  switch (code) {
    case Errc::MissingHeader:
    case Errc::SchemaMismatch:
    case Errc::UnknownLevel:
    case Errc::MissingValue:
    case Errc::NonNumeric:
    case Errc::EmptyPopulation:
    case Errc::InvalidCellMean:
      return "frame";
    case Errc::OversampledStratum:
    case Errc::NonpositiveSize:
    case Errc::ZeroInclusionProbability:
    case Errc::InfeasibleDesign:
      return "design";
    case Errc::EmptyNode:
    case Errc::EmptySample:
    case Errc::UnknownVariable:
    case Errc::InvalidDocument:
      return "tree";
    case Errc::LengthMismatch:
    case Errc::NonpositiveWeight:
    case Errc::PredictionFailure:
    case Errc::SingularSystem:
    case Errc::EmptySampleBox:
    case Errc::IdentityViolation:
      return "estimate";
    case Errc::EmptyVector:
    case Errc::InsufficientSampleSizes:
      return "mc";
    case Errc::BadArguments:
    case Errc::ConfigError:
    case Errc::IoError:
      return "cli";
  }
  return "unknown";
}

}  // namespace svytree
