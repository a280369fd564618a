#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evci/spoofing.hpp"
#include "evci/telemetry.hpp"

namespace evci {

struct DetectorConfig {
  double threshold = 1e-6;   // % per sample
  std::size_t max_iter = 10;  // window length, samples
  double eps_eq = 1e-4;       // constant-residual tolerance
  double eps_prog = 1e-4;     // constant-first-difference tolerance

  void validate() const;
};

/// D_M(t) = |actual(t) - predicted(t)|.
struct ResidualSeries {
  PortId port = PortId::Ev0Terra53;
  std::vector<double> values;
};

ResidualSeries compute_residuals(const DeltaSocSeries& actual, std::span<const double> predicted);

struct Verdict {
  PortId port = PortId::Ev0Terra53;
  std::size_t start_index = 0;
  std::size_t length = 0;
  SpoofClass cls = SpoofClass::Random;

  std::size_t end_index() const { return start_index + length; }
  bool operator==(const Verdict&) const = default;
};

/// Classifies a confirmed window. The tests run in order: every residual
/// equal to the first (within eps_eq) means a decimal shift; constant first
/// differences (within eps_prog) mean an incremental array; anything else is
/// random. A constant window is also a zero-step progression, hence the order.
SpoofClass classify(std::span<const double> window, const DetectorConfig& cfg);

/// Scans left to right. A window of `max_iter` samples is confirmed only when
/// every residual in it reaches the threshold and none of its samples is a
/// charge-status transition; scanning resumes after a confirmed window.
std::vector<Verdict> detect(const ResidualSeries& residuals, const DetectorConfig& cfg,
                            std::span<const std::uint8_t> transition_mask);

struct ThresholdPolicy {
  enum class Kind { MeanPlusSigma, Quantile };
  Kind kind = Kind::MeanPlusSigma;
  double sigmas = 6.0;
  double quantile = 1.0 - 1e-4;
  double floor = 1e-6;
};

double calibrate_threshold(std::span<const double> clean_residuals,
                           const ThresholdPolicy& policy = {});

/// Drops transition samples before calibrating.
double calibrate_threshold(const ResidualSeries& clean, std::span<const std::uint8_t> transition_mask,
                           const ThresholdPolicy& policy = {});

inline constexpr std::size_t kClassCount = 4;  // indexed by SpoofClass

struct DetectionReport {
  std::vector<Verdict> verdicts;
  /// confusion[truth][predicted]; predicted Clean means the injected window
  /// was missed, truth Clean counts verdicts that overlap no injected window.
  std::array<std::array<std::size_t, kClassCount>, kClassCount> confusion{};
  std::array<std::size_t, kClassCount> injected{};
  std::array<std::size_t, kClassCount> detected{};
  std::array<std::size_t, kClassCount> correct{};
  /// correct / injected per class; empty when nothing of that class was injected.
  std::array<std::optional<double>, kClassCount> accuracy{};
  std::optional<double> overall_accuracy;
  std::size_t false_positives = 0;
  /// Disjoint clean windows of max_iter samples the detector could have flagged.
  std::size_t clean_windows = 0;
  double false_positive_rate = 0.0;

  std::string to_text() const;
  std::string confusion_csv() const;
};

/// An injected window counts as detected when any verdict overlaps it and as
/// correct when that verdict's class matches.
DetectionReport evaluate(const std::vector<Verdict>& verdicts, const SpoofPlan& ground_truth,
                         std::size_t series_length, std::size_t window = 10);

void write_verdicts_csv(const std::vector<Verdict>& verdicts, const std::filesystem::path& path);
std::vector<Verdict> read_verdicts_csv(const std::filesystem::path& path);

}  // namespace evci
