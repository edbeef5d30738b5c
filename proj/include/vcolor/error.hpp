#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vcolor {

/// Coarse failure classes. The CLI prints the category name as the first
/// token of its one-line error so scripts can dispatch on it.
enum class ErrorCategory {
    Usage,
    Config,
    Io,
    Format,
    Shape,
    NonFinite,
    Checkpoint,
    Internal,
};

std::string_view category_name(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

inline void require(bool cond, ErrorCategory category, const std::string& message) {
    if (!cond) fail(category, message);
}

}  // namespace vcolor
