#pragma once

#include "teleop/dmp.hpp"

#include <string>

namespace teleop {

inline constexpr int kDmpSchemaVersion = 1;

/// Structured-text model document. Numbers are written with round-trip precision.
std::string model_to_json(const DmpModel& model);

/// Throws DataError on malformed documents or unsupported schema versions.
DmpModel model_from_json(const std::string& text);

}  // namespace teleop
