#include "pcsim/controller.hpp"

namespace pcsim {

std::vector<double> WorkloadObserver::observe_ceff(const SensorSnapshot& snapshot) {
  const std::size_t n = snapshot.core_count();
  std::vector<double> out(n);
  const bool have_window = last_time_ && snapshot.time > *last_time_ && last_counters_.size() == n;
  if (have_window) {
    const double window = to_seconds(snapshot.time - *last_time_);
    for (std::size_t i = 0; i < n; ++i) out[i] = (snapshot.activity_ceff[i] - last_counters_[i]) / window;
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = snapshot.workload[i].ceff_multiplier;
  }
  last_time_ = snapshot.time;
  last_counters_ = snapshot.activity_ceff;
  return out;
}

}  // namespace pcsim
