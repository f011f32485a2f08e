#pragma once

#include <stdexcept>
#include <string>

namespace qntk {

/// Violated precondition on an argument (bad index, bad shape, bad range).
class DomainError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Problem size exceeds what the dense backends are configured to handle.
class CapacityError : public std::length_error {
  public:
    using std::length_error::length_error;
};

/// Non-finite values or a solver that failed to converge.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const std::string &msg) {
    if (!cond) {
        throw DomainError(msg);
    }
}
} // namespace detail

} // namespace qntk
