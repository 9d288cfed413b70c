#pragma once

#include <stdexcept>
#include <string>

namespace coldsim {

// Bad input data or a violated precondition. The CLI maps this to exit status 2;
// anything else escaping a command is an internal error (exit status 1).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace coldsim
