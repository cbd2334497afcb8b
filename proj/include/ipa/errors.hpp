#pragma once

#include <stdexcept>
#include <string>

namespace ipa {

/// Shape or length mismatch between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Model or experiment configuration is inconsistent.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Text could not be parsed (model codes, config files, checkpoints).
class ParseError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Feature id outside its embedding table.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// A metric is undefined for its input (single-class AUC, zero spectrum).
class MetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Unreadable or malformed input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ipa
