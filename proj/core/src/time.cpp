#include "streamgauge/time.hpp"

#include <ctime>
#include <thread>

namespace streamgauge {

TimeNs now_ns() {
  timespec ts{};
  clock_gettime(CLOCK_REALTIME, &ts);
  return static_cast<TimeNs>(ts.tv_sec) * kNanosPerSecond + ts.tv_nsec;
}

ClockFn wall_clock() {
  return [] { return now_ns(); };
}

void sleep_until_ns(TimeNs deadline, DurationNs spin_threshold) {
  TimeNs now = now_ns();
  if (deadline - now > spin_threshold) {
    std::this_thread::sleep_for(std::chrono::nanoseconds(deadline - now - spin_threshold));
    now = now_ns();
  }
  while (now < deadline) {
    now = now_ns();
  }
}

}  // namespace streamgauge
