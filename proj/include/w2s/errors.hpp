#pragma once

#include <stdexcept>
#include <string>

namespace w2s {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shapes or layer descriptors do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Convolution geometry yields an empty output.
class GeometryError : public Error {
public:
    using Error::Error;
};

// A caller broke a documented precondition (missing cache, non-binary spikes in checked mode).
class ContractError : public Error {
public:
    using Error::Error;
};

// Bad user-supplied values (labels, ratios, lengths).
class InputError : public Error {
public:
    using Error::Error;
};

// Malformed file contents. Carries the byte offset where parsing stopped.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// NaN or Inf where finite numbers are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid run configuration or checkpoint/config mismatch.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Filesystem failures; the message names the path.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace w2s
