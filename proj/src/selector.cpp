#include "loadshift/selector.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "loadshift/error.hpp"

namespace loadshift {

namespace {

// Absorbs binary rounding in accumulated dwell time and scaled indices.
constexpr double kTimeSlack = 1e-9;

}  // namespace

void SelectorParams::validate() const {
  if (!(mon_window > 0.0)) {
    throw ConfigError(fmt::format("mon_window must be positive (got {})", mon_window));
  }
  if (!(dec_factor > 0.0 && dec_factor < 1.0)) {
    throw ConfigError(fmt::format("dec_factor must be in (0, 1) (got {})", dec_factor));
  }
  if (k_max < 1) throw ConfigError("k_max must be at least 1");
}

std::string_view to_string(SwitchReason reason) {
  return reason == SwitchReason::increase ? "increase" : "drop";
}

PollOutcome on_poll(const SelectorState& state, const SelectorParams& params,
                    const DropSignal& signal, double dt) {
  if (!(dt > 0.0)) throw ConfigError("poll interval must be positive");
  PollOutcome out{state, std::nullopt};
  auto& next = out.state;
  next.index = std::clamp<std::size_t>(next.index, 1, params.k_max);

  SwitchReason reason = SwitchReason::increase;
  if (signal.n_drops > 0) {
    const double scaled = static_cast<double>(next.index) * params.dec_factor;
    // 10 * 0.3 is 3.0000000000000004 in binary; round as the decimal product would.
    const double rounded = params.floor_decrease ? std::floor(scaled + kTimeSlack)
                                                 : std::ceil(scaled - kTimeSlack);
    next.index = std::clamp<std::size_t>(static_cast<std::size_t>(rounded), 1, params.k_max);
    next.t_since_last_update = 0.0;
    reason = SwitchReason::drop;
  } else {
    next.t_since_last_update += dt;
    if (next.t_since_last_update + kTimeSlack >= params.mon_window) {
      next.index = std::min(params.k_max, next.index + 1);
      next.t_since_last_update = 0.0;
    }
  }
  if (next.index != state.index) {
    out.event = SwitchEvent{signal.poll_time, state.index, next.index, reason};
  }
  return out;
}

std::vector<std::size_t> replay_schedule(const SelectorParams& params,
                                         const std::vector<std::uint64_t>& drops_per_tick,
                                         double dt) {
  params.validate();
  if (drops_per_tick.empty()) throw ConfigError("replay_schedule needs at least one tick");
  std::vector<std::size_t> trajectory;
  trajectory.reserve(drops_per_tick.size());
  SelectorState state;
  for (std::size_t i = 0; i < drops_per_tick.size(); ++i) {
    const DropSignal signal{drops_per_tick[i], static_cast<double>(i + 1) * dt};
    state = on_poll(state, params, signal, dt).state;
    trajectory.push_back(state.index);
  }
  return trajectory;
}

}  // namespace loadshift
