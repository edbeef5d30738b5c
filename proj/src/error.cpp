#include "vcolor/error.hpp"

namespace vcolor {

std::string_view category_name(ErrorCategory c) noexcept {
    switch (c) {
        case ErrorCategory::Usage: return "usage";
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Format: return "format";
        case ErrorCategory::Shape: return "shape";
        case ErrorCategory::NonFinite: return "non_finite";
        case ErrorCategory::Checkpoint: return "checkpoint";
        case ErrorCategory::Internal: return "internal";
    }
    return "internal";
}

void fail(ErrorCategory category, const std::string& message) {
    throw Error(category, message);
}

}  // namespace vcolor
