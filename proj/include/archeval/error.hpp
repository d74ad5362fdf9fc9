#pragma once

#include <stdexcept>
#include <string>

namespace archeval {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on a metric input or option was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The host cannot provide the requested facility (e.g. load averages).
class Unsupported : public Error {
public:
    using Error::Error;
};

/// A persisted file is missing or cannot be parsed. Carries the offending path.
class FileError : public Error {
public:
    FileError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Failure inside one stage of a system measurement (ramp, nrmt, load, rtm, metrics).
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace archeval
