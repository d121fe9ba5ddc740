#pragma once

#include <stdexcept>
#include <string>

namespace knobsync {

// All library errors derive from this so callers can surface a stable
// machine-readable code next to the human-readable message.
class error : public std::runtime_error {
public:
  error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

private:
  std::string code_;
};

namespace errc {
inline constexpr const char* parse = "parse_error";
inline constexpr const char* io = "io_error";
inline constexpr const char* bad_argument = "bad_argument";
inline constexpr const char* degenerate = "degenerate_input";
inline constexpr const char* no_convergence = "no_convergence";
}  // namespace errc

}  // namespace knobsync
