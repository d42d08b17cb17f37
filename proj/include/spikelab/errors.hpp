#pragma once

#include <stdexcept>
#include <string>

namespace spikelab {

/// Base class of all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to converge or exceeded its error budget.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Expression source could not be parsed; carries the byte offset.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

} // namespace spikelab
