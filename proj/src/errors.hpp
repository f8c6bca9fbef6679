/// @file errors.hpp
/// @brief Internal exception type carrying the public status code.
#ifndef CONDSIM_ERRORS_HPP
#define CONDSIM_ERRORS_HPP

#include <stdexcept>
#include <string>

#include "condsim.h"

namespace condsim {

class Error : public std::runtime_error {
public:
  Error(cs_status code, const std::string &msg)
      : std::runtime_error(msg), code_(code) {}
  cs_status code() const { return code_; }

private:
  cs_status code_;
};

[[noreturn]] inline void fail(cs_status code, const std::string &msg) {
  throw Error(code, msg);
}

inline void require(bool ok, cs_status code, const std::string &msg) {
  if (!ok) fail(code, msg);
}

} // namespace condsim

#endif
