#pragma once

#include <stdexcept>
#include <string>

namespace caft {

/// Invalid construction parameters (topology, engine or experiment config).
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Table access with a port/pod index the table does not cover.
class LookupError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// Malformed input files (size CDFs, flow CSVs, config files).
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Inter-pod traffic only; raised for same-pod host pairs.
class UnsupportedTraffic : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace caft
