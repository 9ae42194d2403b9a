#pragma once

#include <functional>
#include <iostream>
#include <string>
#include <utility>

namespace dbsde {

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
inline WarningHandler& warning_handler() {
    static WarningHandler handler = [](const std::string& msg) { std::clog << "warning: " << msg << '\n'; };
    return handler;
}
}  // namespace detail

/// Replaces the warning sink and returns the previous one.
inline WarningHandler set_warning_handler(WarningHandler h) {
    return std::exchange(detail::warning_handler(), std::move(h));
}

inline void warn(const std::string& msg) {
    if (detail::warning_handler()) detail::warning_handler()(msg);
}

/// Installs a handler for the lifetime of the object.
class ScopedWarningHandler {
public:
    explicit ScopedWarningHandler(WarningHandler h) : prev_(set_warning_handler(std::move(h))) {}
    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;
    ~ScopedWarningHandler() { set_warning_handler(std::move(prev_)); }

private:
    WarningHandler prev_;
};

}  // namespace dbsde
