#pragma once

#include <stdexcept>
#include <string>

namespace mixlen {

// Base for everything thrown by this library.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller handed us something invalid: bad flag value, bad precondition,
// unusable configuration.  The CLI maps these to exit code 2.
class usage_error : public error {
 public:
  explicit usage_error(const std::string& msg) : error(msg) {}
};

// File-level problems: missing paths, unreadable or unwritable files.
class io_error : public error {
 public:
  explicit io_error(const std::string& msg) : error(msg) {}
};

// Content-level problems in otherwise readable data (malformed CSV rows,
// out-of-domain field values); carries file/line context in the message.
class data_error : public error {
 public:
  explicit data_error(const std::string& msg) : error(msg) {}
};

// Optimization failed (non-finite loss, infeasible calibration).
class train_error : public error {
 public:
  explicit train_error(const std::string& msg) : error(msg) {}
};

}  // namespace mixlen
