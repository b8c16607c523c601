#pragma once

#include <stdexcept>
#include <string>

namespace omnigaze {

// Base for everything thrown by this library. The CLI maps subclasses to
// stable exit codes (config -> 2, I/O -> 3, divergence -> 4).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

// Remote cue provider failures. Retryable covers transport faults and 5xx;
// anything else (4xx, bad payload shape) is permanent.
class ProviderError : public Error {
public:
    ProviderError(const std::string& msg, int status, bool retryable)
        : Error(msg), status_(status), retryable_(retryable) {}
    int status() const { return status_; }
    bool retryable() const { return retryable_; }

private:
    int status_;
    bool retryable_;
};

class ProtocolError : public Error {
public:
    explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& phase, int epoch)
        : Error("training diverged (non-finite loss) in phase '" + phase + "' at epoch " +
                std::to_string(epoch)),
          phase_(phase),
          epoch_(epoch) {}
    const std::string& phase() const { return phase_; }
    int epoch() const { return epoch_; }

private:
    std::string phase_;
    int epoch_;
};

}  // namespace omnigaze
