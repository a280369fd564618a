#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "evci/telemetry.hpp"

namespace evci {

/// Adds `offset` to every sample of the window.
struct DecimalShift {
  double offset = 0.0;  // within [-0.009, +0.009]
};

/// Replaces the window with start, start + step, start + 2 step, ...
struct IncrementalArray {
  double start = 0.0;
  double step = 0.0;  // nonzero
};

/// Replaces the window with i.i.d. uniform draws on [lo, hi].
struct RandomUniform {
  double lo = -0.01;
  double hi = 0.01;  // [lo, hi] within [-0.01, 0.01]
};

using SpoofKind = std::variant<DecimalShift, IncrementalArray, RandomUniform>;

inline constexpr double kMaxDecimalShift = 0.009;
inline constexpr double kRandomBound = 0.01;

/// Sample classes shared by ground-truth labels and detector verdicts.
enum class SpoofClass : std::uint8_t { Clean = 0, DecimalShift, Incremental, Random };

std::string_view label(SpoofClass c);
std::optional<SpoofClass> spoof_class_from_label(std::string_view s);
SpoofClass class_of(const SpoofKind& kind);

/// Throws PlanError when the parameters leave their allowed ranges.
void validate(const SpoofKind& kind);

struct SpoofEvent {
  PortId port = PortId::Ev0Terra53;
  std::size_t start_index = 0;
  std::size_t length = 10;
  SpoofKind kind;
  std::uint64_t seed = 0;  // used by RandomUniform only

  std::size_t end_index() const { return start_index + length; }
};

struct SpoofPlan {
  std::vector<SpoofEvent> events;
  std::string source;
};

struct Window {
  std::size_t start = 0;
  std::size_t length = 0;

  bool operator==(const Window&) const = default;
};

/// Picks `count` non-overlapping windows uniformly at random among the
/// positions whose every sample is at least `guard` samples away from any
/// transition. Throws CapacityError when fewer than `count` fit.
std::vector<Window> select_windows(const DeltaSocSeries& delta, std::size_t count,
                                   std::size_t length, std::size_t guard, std::uint64_t seed);

/// Throws PlanError on out-of-range or overlapping events, events on
/// another port, windows shorter than 2, or windows touching the
/// transition guard zone (`guard` = 0 disables the guard check).
void validate_plan(const SpoofPlan& plan, const DeltaSocSeries& delta, std::size_t guard = 0);

struct InjectionResult {
  DeltaSocSeries spoofed;
  std::vector<SpoofClass> labels;  // aligned with spoofed.values
};

InjectionResult inject(const DeltaSocSeries& delta, const SpoofPlan& plan);

/// Draw ranges used to parameterize events when building a plan.
struct SpoofDrawConfig {
  double shift_min_abs = 0.004;
  double shift_max_abs = 0.009;
  double step_min_abs = 0.005;
  double step_max_abs = 0.01;
  /// Largest distance of the first incremental sample from the true value.
  double start_offset_max = 0.01;
  double random_lo = -kRandomBound;
  double random_hi = kRandomBound;
};

/// One event per window, parameters drawn from `draw`. Decimal shifts take
/// a random sign. An incremental array starts near the true value of its
/// first sample and ramps away from it, up or down.
SpoofPlan draw_plan(const DeltaSocSeries& delta, const std::vector<Window>& windows,
                    SpoofClass kind, const SpoofDrawConfig& draw, std::uint64_t seed);

void write_plan_csv(const SpoofPlan& plan, const std::filesystem::path& path);
SpoofPlan read_plan_csv(const std::filesystem::path& path);

/// Columns index,original,delta_soc,transition,label.
void write_spoofed_csv(const DeltaSocSeries& original, const InjectionResult& injected,
                       const std::filesystem::path& path);

struct SpoofedSeriesFile {
  DeltaSocSeries original;
  DeltaSocSeries spoofed;
  std::vector<SpoofClass> labels;
};

/// A leading "# port=<label>" comment overrides `port`.
SpoofedSeriesFile read_spoofed_csv(const std::filesystem::path& path,
                                   PortId port = PortId::Ev0Terra53);

}  // namespace evci
