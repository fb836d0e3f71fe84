#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace loadshift {

inline constexpr double kDefaultMonWindow = 8.0;
inline constexpr double kDefaultDecFactor = 0.5;

struct SelectorParams {
  double mon_window = kDefaultMonWindow;  // seconds of drop-free time per step up
  double dec_factor = kDefaultDecFactor;  // in (0, 1)
  std::size_t k_max = 1;                  // size of the front
  // Round the decreased index down instead of up.
  bool floor_decrease = false;

  // Throws ConfigError when out of range.
  void validate() const;
};

struct SelectorState {
  std::size_t index = 1;  // 1-based front index
  double t_since_last_update = 0.0;

  bool operator==(const SelectorState&) const = default;
};

struct DropSignal {
  std::uint64_t n_drops = 0;
  double poll_time = 0.0;
};

enum class SwitchReason { increase, drop };

std::string_view to_string(SwitchReason reason);

struct SwitchEvent {
  double time_s = 0.0;
  std::size_t old_index = 0;
  std::size_t new_index = 0;
  SwitchReason reason = SwitchReason::increase;

  bool operator==(const SwitchEvent&) const = default;
};

struct PollOutcome {
  SelectorState state;
  std::optional<SwitchEvent> event;
};

// One monitor cycle: any drop shrinks the index multiplicatively right away and
// restarts the dwell timer; otherwise the timer advances by dt and a full
// mon_window of drop-free time moves one step up the front.
PollOutcome on_poll(const SelectorState& state, const SelectorParams& params,
                    const DropSignal& signal, double dt);

// Index trajectory from folding on_poll over per-tick drop counts, starting at
// index 1. Element i is the index after tick i.
std::vector<std::size_t> replay_schedule(const SelectorParams& params,
                                         const std::vector<std::uint64_t>& drops_per_tick,
                                         double dt);

// The index workers read when pinning a new flow. One writer (the monitor),
// any number of readers.
class PublishedIndex {
 public:
  explicit PublishedIndex(std::size_t initial = 1) : index_(initial) {}
  void publish(std::size_t index) { index_.store(index, std::memory_order_release); }
  std::size_t read() const { return index_.load(std::memory_order_acquire); }

 private:
  std::atomic<std::size_t> index_;
};

}  // namespace loadshift
