#pragma once

#include "posecal/optimize.hpp"

#include <chrono>
#include <span>
#include <vector>

namespace posecal::detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Feasible before infeasible; among infeasible, smaller total violation;
// among feasible, smaller rho0 (unidentifiable = +inf last).
bool better(const Individual& a, const Individual& b);

// Indices sorted best first; ties keep population order.
std::vector<std::size_t> ranking(const std::vector<Individual>& pop);

// Statistics over finite values; non-finite ones are counted as unidentifiable.
Summary summarize(std::span<const double> values);

// Best-so-far convergence trace; drops points that do not improve.
class TraceBuilder {
 public:
  void add(std::uint64_t evaluations, double elapsed_s, double rho0);
  // Appends another run's trace shifted by the evaluations counted so far.
  void append_run(std::span<const TracePoint> run, std::uint64_t offset);
  std::vector<TracePoint> take() { return std::move(points_); }

 private:
  std::vector<TracePoint> points_;
};

}  // namespace posecal::detail
