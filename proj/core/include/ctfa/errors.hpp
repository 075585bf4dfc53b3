#pragma once

#include <stdexcept>
#include <string>

namespace ctfa {

/// Tensor shapes or layer dimensions that do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Bad or unknown configuration keys and values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable, corrupt or inconsistent data files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite losses, gradients or parameters.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ctfa
