#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace fgfd {

using WarningHandler = std::function<void(std::string_view)>;

/// Emits a non-fatal warning through the installed handler (stderr by default).
void warn(std::string_view message);

/// Replaces the process-wide warning handler and returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);

/// RAII capture of warnings, used by tests and by commands that summarize them.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(std::string_view needle) const;

private:
    std::vector<std::string> messages_;
    WarningHandler previous_;
};

} // namespace fgfd
