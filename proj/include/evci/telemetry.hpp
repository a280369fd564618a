#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace evci {

/// The six charging ports of the depot, in telemetry column order.
enum class PortId : std::uint8_t {
  Ev0Terra53 = 0,
  Ev1TerraHpCordA,
  Ev1TerraHpCordB,
  Ev2TerraHpCordA,
  Ev2TerraHpCordB,
  Ev3TerraHp,
};

inline constexpr std::size_t kPortCount = 6;
inline constexpr std::size_t kBoardCount = 4;

inline constexpr std::array<PortId, kPortCount> kAllPorts = {
    PortId::Ev0Terra53,      PortId::Ev1TerraHpCordA, PortId::Ev1TerraHpCordB,
    PortId::Ev2TerraHpCordA, PortId::Ev2TerraHpCordB, PortId::Ev3TerraHp,
};

constexpr std::size_t index_of(PortId p) { return static_cast<std::size_t>(p); }

std::string_view label(PortId p);
std::optional<PortId> port_from_label(std::string_view s);

/// Charging board CB-0..CB-3 hosting the port.
int charging_board(PortId p);

/// Link a measurement travels on: substation-side measurements go out over
/// IEC 61850 GOOSE, charger/vehicle data (charge status, SoC) over OCPP.
enum class Channel : std::uint8_t { Goose, Ocpp };

enum class Quantity : std::uint8_t { IPcc, IBess, IEv, PEv, QEv, ChargeStatus, Soc };

Channel channel_of(Quantity q);
std::string_view label(Channel c);

struct PortSample {
  double i_ev = 0.0;  // A
  double p_ev = 0.0;  // kW
  double q_ev = 0.0;  // kVAr
  std::uint8_t cs = 0;
  double soc = 0.0;  // %

  bool operator==(const PortSample&) const = default;
};

/// One 1 Hz snapshot of the depot.
struct TelemetryRecord {
  std::int64_t t = 0;     // s since run start
  double i_pcc = 0.0;     // A, grid import
  double i_bess = 0.0;    // A, positive while the storage charges
  std::array<PortSample, kPortCount> ports{};

  const PortSample& port(PortId p) const { return ports[index_of(p)]; }
  PortSample& port(PortId p) { return ports[index_of(p)]; }

  bool operator==(const TelemetryRecord&) const = default;
};

struct SeriesMeta {
  std::uint64_t seed = 0;
  std::int64_t duration = 0;  // s
  std::string generator_version;

  bool operator==(const SeriesMeta&) const = default;
};

/// Records at a fixed 1 s cadence; `validate()` enforces the cadence.
struct TelemetrySeries {
  std::vector<TelemetryRecord> records;
  SeriesMeta meta;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  /// Throws RangeError naming the first timestamp that breaks the cadence.
  void validate() const;

  bool operator==(const TelemetrySeries&) const = default;
};

/// Per-sample SoC change of one port: values[t] = soc(t+1) - soc(t).
struct DeltaSocSeries {
  PortId port = PortId::Ev0Terra53;
  std::vector<double> values;
  std::vector<std::uint8_t> transition_mask;  // 1 where cs(t) != cs(t+1)

  std::size_t size() const { return values.size(); }
};

DeltaSocSeries compute_delta_soc(const TelemetrySeries& series, PortId port);

using FeatureMatrix = Eigen::MatrixXd;

/// Column-wise standard scaling with population standard deviation.
/// Zero-variance columns keep scale 1 so column indices stay stable.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Eigen::VectorXd mean, Eigen::VectorXd scale);

  static Standardizer fit(const FeatureMatrix& train);

  FeatureMatrix transform(const FeatureMatrix& x) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& scale() const { return scale_; }
  Eigen::Index columns() const { return mean_.size(); }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
};

/// Fits on `train_matrix` only and applies the result to `apply_to`.
std::pair<Standardizer, FeatureMatrix> standardize(const FeatureMatrix& train_matrix,
                                                   const FeatureMatrix& apply_to);

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kDefaultTrainSeconds = 4 * kSecondsPerDay;
inline constexpr std::int64_t kDefaultTestSeconds = 1 * kSecondsPerDay;

/// Contiguous prefix split: [0, train) and [train, train + test).
std::pair<TelemetrySeries, TelemetrySeries> split_dataset(
    const TelemetrySeries& series, std::int64_t train_seconds = kDefaultTrainSeconds,
    std::int64_t test_seconds = kDefaultTestSeconds);

// CSV persistence. Numbers are written with 17 significant digits so a
// write/read cycle reproduces every double exactly.

std::vector<std::string> telemetry_columns();

void write_series_csv(const TelemetrySeries& series, const std::filesystem::path& path);
TelemetrySeries read_series_csv(const std::filesystem::path& path);

/// 17 significant digits, shortest exponent form ("%.17g").
std::string format_double(double v);
/// Strict parse of a full token; throws ParseError on garbage.
double parse_double(std::string_view token, std::size_t line);
std::int64_t parse_int(std::string_view token, std::size_t line);
std::vector<std::string_view> split_csv_line(std::string_view line);

}  // namespace evci
