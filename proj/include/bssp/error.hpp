#pragma once

#include <stdexcept>
#include <string>

namespace bssp {

// Error with a short machine-parseable code in front of the human message.
// Codes are stable strings used by the CLI ("error <code>: <message>").
class error : public std::runtime_error {
public:
    error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline error validation_error(const std::string& msg) { return error("validation", msg); }
inline error capacity_error(const std::string& msg) { return error("capacity", msg); }
inline error io_error(const std::string& msg) { return error("io", msg); }

}  // namespace bssp
