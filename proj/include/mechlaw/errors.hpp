#pragma once

#include <stdexcept>
#include <string>

namespace mechlaw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad shape, bad parameter, empty input).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Numerical blow-up: non-finite state in an integrator or a recursion.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double time)
        : Error(what), time_(time) {}

    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

/// Training produced no usable spectrum (e.g. all-zero feature matrix).
class DegenerateModel : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidInput(msg);
}

}  // namespace detail

}  // namespace mechlaw
