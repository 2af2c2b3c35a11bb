#pragma once

#include <stdexcept>
#include <string>

namespace nafdrive {

/// Invalid or incomplete configuration (bad dims, missing fields, out-of-range constants).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape mismatch, stale cache, empty buffer).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A computation produced NaN or infinity.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The traffic simulation reached an invalid physical state.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint or log file could not be read, parsed, or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nafdrive
