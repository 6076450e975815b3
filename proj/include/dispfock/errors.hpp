#pragma once

// Exception hierarchy and the warning sink shared by all modules.

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dispfock {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Hilbert-space dimension exceeds the configured cap.
class SizingError : public Error { using Error::Error; };
/// Occupation or index outside the truncated space.
class BoundsError : public Error { using Error::Error; };
/// A superposition that cancels to the zero vector (odd cat at alpha = 0).
class ZeroVectorError : public Error { using Error::Error; };
/// Wrong state representation for the requested operation.
class RepresentationError : public Error { using Error::Error; };
/// Sideband or carrier detuning is exactly zero.
class ResonanceError : public Error { using Error::Error; };
class SchedulingError : public Error { using Error::Error; };
class CalibrationError : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class DegenerateFitError : public FitError { using FitError::FitError; };
class RegressionError : public Error { using Error::Error; };
class BitsError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };
/// Renormalisation of a branch whose probability is below the numerical floor.
class NumericalFloorError : public Error { using Error::Error; };

using WarningSink = std::function<void(const std::string&)>;

namespace detail {

inline std::mutex& warning_mutex() {
    static std::mutex m;
    return m;
}

inline WarningSink& warning_sink() {
    static WarningSink sink = [](const std::string& msg) { std::clog << "warning: " << msg << '\n'; };
    return sink;
}

} // namespace detail

/// Replaces the process-wide warning sink and returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(detail::warning_mutex());
    return std::exchange(detail::warning_sink(), std::move(sink));
}

inline void warn(const std::string& msg) {
    std::lock_guard lock(detail::warning_mutex());
    if (detail::warning_sink()) detail::warning_sink()(msg);
}

/// RAII capture of warnings, used by tests and the CLI log.
class WarningCapture {
public:
    WarningCapture()
        : previous_(set_warning_sink([this](const std::string& m) { messages_.push_back(m); })) {}
    ~WarningCapture() { set_warning_sink(std::move(previous_)); }
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }

private:
    std::vector<std::string> messages_;
    WarningSink previous_;
};

} // namespace dispfock
