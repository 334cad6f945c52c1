#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hboa {

/// Invalid arguments: length mismatches, negative counts, out-of-range indices.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid engine or experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A problem or model does not have the structure an operation requires.
class StructureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The request is valid but beyond what this build can compute exactly.
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bisection hit its population-size cap without a 10/10 success.
class UnsolvableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input. `line` is 1-based (0 when unknown); `record` is the
/// 0-based record index for record-oriented files.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::string field = {},
               std::size_t record = npos)
        : std::runtime_error(format(what, line, field, record)),
          line_(line),
          record_(record),
          field_(std::move(field)) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::size_t line() const noexcept { return line_; }
    std::size_t record() const noexcept { return record_; }
    const std::string& field() const noexcept { return field_; }

private:
    static std::string format(const std::string& what, std::size_t line, const std::string& field,
                              std::size_t record) {
        std::string msg = "parse error";
        if (record != npos) msg += " in record " + std::to_string(record);
        if (line != 0) msg += " at line " + std::to_string(line);
        if (!field.empty()) msg += " (" + field + ")";
        return msg + ": " + what;
    }

    std::size_t line_;
    std::size_t record_;
    std::string field_;
};

}  // namespace hboa
