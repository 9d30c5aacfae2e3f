#pragma once

#include <stdexcept>
#include <string>

namespace unisep {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A sequence contains symbols outside its alphabet, or has an incompatible length.
class InvalidSequence : public Error {
public:
    using Error::Error;
};

/// Two sequences that must have equal block length do not.
class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// A transition matrix whose rows are not probability vectors.
class InvalidChannel : public Error {
public:
    using Error::Error;
};

/// A requested computation exceeds the configured memory/enumeration caps.
class ResourceLimit : public Error {
public:
    using Error::Error;
};

/// An iterative solver failed to converge within its iteration cap.
class NoConvergence : public Error {
public:
    using Error::Error;
};

/// A sequence of F-values that does not decay; no exponent can be fitted.
class DegenerateFit : public Error {
public:
    using Error::Error;
};

/// A q_Y candidate grid that contains no points.
class InvalidGrid : public Error {
public:
    using Error::Error;
};

/// Layer chain whose alphabets do not compose.
class CompositionError : public Error {
public:
    using Error::Error;
};

/// An experiment configuration that fails schema validation.
/// `path` is the JSON-pointer-style location of the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

} // namespace unisep
