#pragma once

#include <stdexcept>
#include <string>

namespace gyroflow {

//! base for every error raised by the library; `kind()` drives CLI exit codes
class Error : public std::runtime_error {
public:
    enum class Kind { invalid_argument, coverage, parse, validation, format, numeric, spec, io };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error(Kind::invalid_argument, w) {}
};

//! gyro log does not cover a requested time window
struct CoverageError : Error {
    explicit CoverageError(const std::string& w) : Error(Kind::coverage, w) {}
};

struct ParseError : Error {
    ParseError(const std::string& w, std::size_t line)
        : Error(Kind::parse, "line " + std::to_string(line) + ": " + w), line_(line) {}
    //! same error, message prefixed with e.g. the file name
    ParseError(const std::string& context, const ParseError& inner)
        : Error(Kind::parse, context + ": " + inner.what()), line_(inner.line_) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& w) : Error(Kind::validation, w) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& w) : Error(Kind::format, w) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(Kind::numeric, w) {}
};

//! malformed synthetic scene description
struct SpecError : Error {
    explicit SpecError(const std::string& w) : Error(Kind::spec, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(Kind::io, w) {}
};

} // namespace gyroflow
