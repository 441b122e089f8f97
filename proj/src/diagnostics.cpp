#include "fgfd/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <vector>

namespace fgfd {
namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& handler() {
    static WarningHandler h = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return h;
}

} // namespace

void warn(std::string_view message) {
    std::lock_guard lock(handler_mutex());
    if (handler()) handler()(message);
}

WarningHandler set_warning_handler(WarningHandler h) {
    std::lock_guard lock(handler_mutex());
    auto previous = std::move(handler());
    handler() = std::move(h);
    return previous;
}

ScopedWarningCapture::ScopedWarningCapture() {
    previous_ = set_warning_handler([this](std::string_view msg) { messages_.emplace_back(msg); });
}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_handler(std::move(previous_)); }

bool ScopedWarningCapture::contains(std::string_view needle) const {
    for (const auto& m : messages_)
        if (m.find(needle) != std::string::npos) return true;
    return false;
}

} // namespace fgfd
