#ifndef PRORED_ERROR_HPP
#define PRORED_ERROR_HPP

#include <stdexcept>
#include <string>

namespace prored {

// Categorized failures; the CLI maps each category to a distinct exit code.
enum class ErrorCategory {
  usage,       // bad arguments or misuse of an API contract
  io,          // unreadable/unwritable file
  schema,      // missing or malformed column / header / version tag
  data,        // malformed row content
  alignment,   // per-token streams out of step
  dependency,  // required upstream artifact missing or incomplete
  numeric,     // rank deficiency, non-finite values, degenerate statistics
};

const char* error_category_name(ErrorCategory cat);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& message)
      : std::runtime_error(message), category_(cat) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace prored

#endif  // PRORED_ERROR_HPP
