#pragma once

#include <stdexcept>
#include <string>

namespace tsfound {

enum class ErrorKind {
    Validation, // bad input or configuration, detected before work starts
    Runtime,    // failure during work: non-finite loss, unreadable data
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& what) {
    throw Error(ErrorKind::Validation, what);
}

[[noreturn]] inline void fail_runtime(const std::string& what) {
    throw Error(ErrorKind::Runtime, what);
}

} // namespace tsfound
