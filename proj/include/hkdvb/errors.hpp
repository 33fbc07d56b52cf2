#pragma once

#include <stdexcept>
#include <string>

namespace hkdvb {

// Bad invocation: malformed config file, unknown key, bad flag. CLI exit code 2.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Rejected input or failed check: violated coefficient condition, failed
// bound, oracle gate failure. CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite or diverging state during time stepping. CLI exit code 3.
class BlowupError : public std::runtime_error {
public:
    BlowupError(double time, double norm, const std::string& what)
        : std::runtime_error(what), time(time), norm(norm) {}
    double time;
    double norm;
};

}  // namespace hkdvb
