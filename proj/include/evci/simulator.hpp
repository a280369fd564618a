#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "evci/telemetry.hpp"

namespace evci {

inline constexpr std::string_view kGeneratorVersion = "evci-sim 1.0";

enum class ChargerKind : std::uint8_t { Terra53, TerraHP };

struct ChargerSpec {
  ChargerKind kind = ChargerKind::Terra53;
  double max_power_kw = 50.0;

  /// Terra 53 is rated up to 50 kW, Terra HP between 175 and 350 kW.
  void validate() const;
};

enum class BatteryKind : std::uint8_t { BEV300, BEV150, Other };

std::string_view label(BatteryKind k);
std::optional<BatteryKind> battery_from_label(std::string_view s);

/// Capacities are expressed in Ah at the DC bus voltage.
struct BatterySpec {
  BatteryKind kind = BatteryKind::BEV150;
  double capacity_ah = 100.0;
  double max_charge_kw = 50.0;

  void validate() const;
  bool operator==(const BatterySpec&) const = default;
};

/// BEV300 charges on Terra HP ports; BEV150 and other vehicles on Terra 53.
bool compatible(BatteryKind battery, ChargerKind charger);

ChargerKind charger_kind(PortId p);

struct ChargingSession {
  PortId port = PortId::Ev0Terra53;
  BatterySpec battery;
  std::int64_t arrival_t = 0;
  std::int64_t departure_t = 0;
  double initial_soc = 0.0;
  double target_soc = 0.0;

  bool operator==(const ChargingSession&) const = default;
};

/// Storage parameters; defaults are the depot's 250 kWh / 500 kW unit.
struct BessParams {
  double energy_capacity_kwh = 250.0;
  double max_charge_kw = 500.0;
  double max_discharge_kw = 500.0;
  double charge_eff = 0.95;
  double discharge_eff = 0.95;
  double soc_max = 90.0;
  double soc_min = 20.0;
  double initial_soc = 50.0;

  void validate() const;
};

struct SimConfig {
  std::uint64_t seed = 42;
  std::int64_t duration = 5 * kSecondsPerDay;

  /// Poisson arrival rate per port, sessions/hour.
  std::array<double, kPortCount> arrival_rate_per_hour = {1.0, 0.5, 0.5, 0.5, 0.5, 0.5};

  // Uniform plug-in duration, minutes, per charger kind.
  double terra53_dwell_min = 20.0;
  double terra53_dwell_max = 90.0;
  double terrahp_dwell_min = 10.0;
  double terrahp_dwell_max = 45.0;

  double initial_soc_min = 10.0;
  double initial_soc_max = 60.0;
  double target_soc_min = 70.0;
  double target_soc_max = 100.0;

  /// Minimum idle gap between consecutive sessions on one port, s.
  std::int64_t min_gap = 60;

  /// Probability that a Terra 53 arrival is an "other" vehicle instead of a
  /// BEV150. Both charge at 50 kW but their capacities differ, so a nonzero
  /// share makes the port's SoC change ambiguous given its current.
  double other_share = 0.0;

  double grid_cap_kw = 1000.0;
  double dc_bus_voltage = 480.0;
  double reactive_fraction = 0.02;

  ChargerSpec terra53{ChargerKind::Terra53, 50.0};
  ChargerSpec terrahp{ChargerKind::TerraHP, 350.0};
  BatterySpec bev300{BatteryKind::BEV300, 200.0, 300.0};
  BatterySpec bev150{BatteryKind::BEV150, 100.0, 50.0};
  BatterySpec other{BatteryKind::Other, 80.0, 50.0};
  BessParams bess;

  /// Throws ConfigError describing the first bad field.
  void validate() const;

  const ChargerSpec& charger_for(PortId p) const;
};

/// Seeded per-port Poisson arrivals; an arrival that would start within
/// `min_gap` of the previous departure on the same port is rejected.
std::vector<ChargingSession> schedule_sessions(const SimConfig& config);

struct SocStep {
  double soc = 0.0;
  bool clamped = false;
};

/// Coulomb counting: soc + 100 * current * dt / (capacity_ah * 3600),
/// clamped to [0, 100].
SocStep step_soc(double soc_prev, double current, double capacity_ah, double dt);

struct SimulationResult {
  TelemetrySeries series;
  std::vector<double> bess_soc;  // % at the end of each second
};

/// Steps the depot at 1 Hz. Each active session draws constant current at
/// min(charger, battery) power until its target SoC or departure; the grid
/// supplies demand up to its cap and storage covers the rest, recharging
/// greedily whenever there is headroom.
SimulationResult simulate_with_trace(const SimConfig& config,
                                     const std::vector<ChargingSession>& sessions);

TelemetrySeries simulate(const SimConfig& config, const std::vector<ChargingSession>& sessions);

void write_sessions_csv(const std::vector<ChargingSession>& sessions,
                        const std::filesystem::path& path);
std::vector<ChargingSession> read_sessions_csv(const std::filesystem::path& path,
                                               const SimConfig& config);

}  // namespace evci
