#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evci/detector.hpp"
#include "evci/ridge.hpp"
#include "evci/simulator.hpp"
#include "evci/spoofing.hpp"

namespace evci {

inline constexpr std::string_view kToolVersion = "1.0.0";

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "EVCI_OUT";

struct TrainConfig {
  std::int64_t train_seconds = kDefaultTrainSeconds;
  std::int64_t test_seconds = kDefaultTestSeconds;
  CvConfig cv;
  FeatureOptions features;
  ThresholdPolicy threshold;
};

struct SpoofConfig {
  PortId port = PortId::Ev0Terra53;
  std::vector<SpoofClass> kinds = {SpoofClass::DecimalShift, SpoofClass::Incremental,
                                   SpoofClass::Random};
  std::size_t windows_per_kind = 20;
  std::size_t window = 10;
  std::size_t guard = 5;
  SpoofDrawConfig draw;
};

struct DetectStageConfig {
  std::size_t window = 10;
  double eps_eq = 1e-4;
  double eps_prog = 1e-4;
};

struct PipelineConfig {
  SimConfig sim;
  TrainConfig train;
  SpoofConfig spoof;
  DetectStageConfig detect;

  /// Overrides every stage seed.
  void set_seed(std::uint64_t seed);
  std::uint64_t cv_seed() const { return sim.seed; }
  std::uint64_t spoof_seed() const { return sim.seed ^ 0x5DEECE66DULL; }
};

/// Reads a JSON run config. Sections "sim", "train", "spoof" and "detect"
/// are optional; unknown keys are rejected with ConfigError.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig parse_pipeline_config(const std::string& json_text);

enum class Command { Gen, Train, Spoof, Detect, Eval, Report };

std::optional<Command> command_from_name(std::string_view name);
std::string_view name(Command c);

struct CommandOptions {
  Command command = Command::Gen;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;  // run root; stage output goes to <out>/<command>
  std::optional<PortId> port;
  std::optional<double> threshold;
  std::optional<std::size_t> window;
  std::optional<double> days;
};

/// Exit codes returned by `execute`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAnomaly = 2;

/// Resolves the run root: --out, then $EVCI_OUT, then ./evci_run.
std::filesystem::path resolve_root(const CommandOptions& options);

/// Runs one pipeline stage. Stage outputs land in <root>/<command>/ next to a
/// manifest.json; inputs are read from sibling stage directories. Returns 0,
/// 1 on any error (message on `err`), or 2 when detect confirms an anomaly.
int execute(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Published reference values printed by `report`.
struct ReferenceValues {
  static constexpr double ridge_alpha = 10.05;
  static constexpr int cv_folds = 20;
  static constexpr std::array<double, kPortCount> port_mse = {0.000194, 0.000217, 0.000180,
                                                              0.000324, 0.000129, 0.000356};
  static constexpr double linear_regression_mse = 1.771121117;
  static constexpr double mlp_mse = 1.77119094;
  static constexpr double svr_mse = 1.77747376;
  static constexpr double random_forest_mse = 2.01821433;
  static constexpr double ridge_mse = 0.000194;
  static constexpr double decimal_shift_accuracy = 99.31;
  static constexpr double incremental_accuracy = 90.84;
  static constexpr double random_accuracy = 93.0;
};

}  // namespace evci
