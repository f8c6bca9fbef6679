/// @file stopwatch.hpp
#ifndef CONDSIM_STOPWATCH_HPP
#define CONDSIM_STOPWATCH_HPP

#include <chrono>

namespace condsim {

/// Monotonic lap timer in seconds.
class Stopwatch {
public:
  double lap() {
    auto now = Clock::now();
    double s = std::chrono::duration<double>(now - t_).count();
    t_ = now;
    return s;
  }

private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point t_ = Clock::now();
};

} // namespace condsim

#endif
