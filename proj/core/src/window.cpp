#include "streamgauge/window.hpp"

namespace streamgauge {

void assign_windows(TimeNs t, const WindowSpec& spec, std::vector<WindowId>& out) {
  out.clear();
  // Last aligned start covering t, then walk back to the earliest aligned
  // start whose window still reaches t. First start is the smallest aligned
  // value strictly greater than t - range.
  const TimeNs last = align_down(t, spec.slide);
  const TimeNs first = align_down(t - spec.range, spec.slide) + spec.slide;
  for (TimeNs start = first; start <= last; start += spec.slide) {
    out.push_back(WindowId{start, start + spec.range});
  }
}

}  // namespace streamgauge
