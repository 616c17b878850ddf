#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fairtoll {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document. `location` is "line N" or a field path such as "groups[1].demand".
class ParseError : public Error {
public:
    ParseError(std::string location, const std::string& what)
        : Error(location + ": " + what), location_(std::move(location)) {}

    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> issues)
        : Error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "invalid scenario";
        for (const auto& s : issues) out += "; " + s;
        return out;
    }

    std::vector<std::string> issues_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class DisconnectedError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace fairtoll
