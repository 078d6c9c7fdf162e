#pragma once

#include <array>
#include <chrono>

namespace mvr {

enum class Phase { rasterize, shade, losses, backward, step, remesh };

inline constexpr std::array<const char*, 6> kPhaseNames = {"rasterize", "shade", "losses", "backward", "step", "remesh"};

/// Seconds spent per phase.
struct PhaseTimes {
  std::array<double, 6> seconds{};

  double& operator[](Phase p) { return seconds[static_cast<std::size_t>(p)]; }
  double operator[](Phase p) const { return seconds[static_cast<std::size_t>(p)]; }

  double total() const {
    double s = 0.0;
    for (double v : seconds) s += v;
    return s;
  }

  PhaseTimes& operator+=(const PhaseTimes& o) {
    for (std::size_t i = 0; i < seconds.size(); ++i) seconds[i] += o.seconds[i];
    return *this;
  }
};

/// Adds the lifetime of the guard to one phase. A null target disables it.
class PhaseScope {
 public:
  PhaseScope(PhaseTimes* times, Phase phase) : times_(times), phase_(phase), start_(std::chrono::steady_clock::now()) {}
  ~PhaseScope() { stop(); }
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

  void stop() {
    if (!times_) return;
    (*times_)[phase_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    times_ = nullptr;
  }

 private:
  PhaseTimes* times_ = nullptr;
  Phase phase_ = Phase::rasterize;
  std::chrono::steady_clock::time_point start_{};
};

}  // namespace mvr
