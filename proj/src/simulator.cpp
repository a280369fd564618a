#include "evci/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evci/errors.hpp"
#include "evci/random.hpp"

namespace evci {

namespace {

constexpr double kSecondsPerHour = 3600.0;

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void ChargerSpec::validate() const {
  if (kind == ChargerKind::Terra53) {
    require(max_power_kw > 0.0 && max_power_kw <= 50.0, "Terra53 max power must be in (0, 50] kW");
  } else {
    require(max_power_kw >= 175.0 && max_power_kw <= 350.0,
            "TerraHP max power must be in [175, 350] kW");
  }
}

std::string_view label(BatteryKind k) {
  switch (k) {
    case BatteryKind::BEV300:
      return "BEV300";
    case BatteryKind::BEV150:
      return "BEV150";
    case BatteryKind::Other:
      return "Other";
  }
  return "?";
}

std::optional<BatteryKind> battery_from_label(std::string_view s) {
  for (BatteryKind k : {BatteryKind::BEV300, BatteryKind::BEV150, BatteryKind::Other}) {
    if (label(k) == s) return k;
  }
  return std::nullopt;
}

void BatterySpec::validate() const {
  require(capacity_ah > 0.0, std::string(label(kind)) + " capacity must be positive");
  require(max_charge_kw > 0.0, std::string(label(kind)) + " charge power must be positive");
}

bool compatible(BatteryKind battery, ChargerKind charger) {
  return battery == BatteryKind::BEV300 ? charger == ChargerKind::TerraHP
                                        : charger == ChargerKind::Terra53;
}

ChargerKind charger_kind(PortId p) {
  return p == PortId::Ev0Terra53 ? ChargerKind::Terra53 : ChargerKind::TerraHP;
}

void BessParams::validate() const {
  require(energy_capacity_kwh > 0.0, "bess energy capacity must be positive");
  require(max_charge_kw >= 0.0 && max_discharge_kw >= 0.0, "bess power limits must be >= 0");
  require(charge_eff > 0.0 && charge_eff <= 1.0, "bess charge efficiency must be in (0, 1]");
  require(discharge_eff > 0.0 && discharge_eff <= 1.0,
          "bess discharge efficiency must be in (0, 1]");
  require(0.0 <= soc_min && soc_min < soc_max && soc_max <= 100.0,
          "bess SoC window must satisfy 0 <= min < max <= 100");
  require(soc_min <= initial_soc && initial_soc <= soc_max,
          "bess initial SoC must lie inside [soc_min, soc_max]");
}

void SimConfig::validate() const {
  require(duration > 0, "duration must be positive");
  for (std::size_t p = 0; p < kPortCount; ++p) {
    require(std::isfinite(arrival_rate_per_hour[p]) && arrival_rate_per_hour[p] >= 0.0,
            "arrival rate for " + std::string(label(kAllPorts[p])) + " must be >= 0");
  }
  require(0.0 < terra53_dwell_min && terra53_dwell_min <= terra53_dwell_max,
          "Terra53 dwell range must satisfy 0 < min <= max");
  require(0.0 < terrahp_dwell_min && terrahp_dwell_min <= terrahp_dwell_max,
          "TerraHP dwell range must satisfy 0 < min <= max");
  require(0.0 <= initial_soc_min && initial_soc_min <= initial_soc_max,
          "initial SoC range must satisfy 0 <= min <= max");
  require(initial_soc_max <= target_soc_min && target_soc_min <= target_soc_max &&
              target_soc_max <= 100.0 && initial_soc_min < target_soc_max,
          "target SoC range must lie above the initial SoC range and within 100");
  require(min_gap >= 1, "min_gap must be at least 1 s");
  require(0.0 <= other_share && other_share <= 1.0, "other_share must be in [0, 1]");
  require(grid_cap_kw >= 0.0, "grid cap must be >= 0");
  require(dc_bus_voltage > 0.0, "dc bus voltage must be positive");
  require(reactive_fraction >= 0.0, "reactive fraction must be >= 0");
  require(terra53.kind == ChargerKind::Terra53 && terrahp.kind == ChargerKind::TerraHP,
          "charger kinds are fixed per port type");
  terra53.validate();
  terrahp.validate();
  require(bev300.kind == BatteryKind::BEV300 && bev150.kind == BatteryKind::BEV150 &&
              other.kind == BatteryKind::Other,
          "battery specs must keep their kinds");
  bev300.validate();
  bev150.validate();
  other.validate();
  bess.validate();
}

const ChargerSpec& SimConfig::charger_for(PortId p) const {
  return charger_kind(p) == ChargerKind::Terra53 ? terra53 : terrahp;
}

std::vector<ChargingSession> schedule_sessions(const SimConfig& config) {
  config.validate();
  std::vector<ChargingSession> sessions;
  for (PortId port : kAllPorts) {
    const double rate = config.arrival_rate_per_hour[index_of(port)];
    if (rate <= 0.0) continue;

    // Independent stream per port so one port's rate never shifts another's draws.
    Rng rng(config.seed + 0x9E3779B97F4A7C15ULL * (index_of(port) + 1));
    const bool fast = charger_kind(port) == ChargerKind::TerraHP;
    const double dwell_lo = fast ? config.terrahp_dwell_min : config.terra53_dwell_min;
    const double dwell_hi = fast ? config.terrahp_dwell_max : config.terra53_dwell_max;

    double clock = 0.0;
    std::int64_t last_departure = -config.min_gap;
    while (true) {
      clock += rng.exponential(rate / kSecondsPerHour);
      if (clock >= static_cast<double>(config.duration)) break;
      const double dwell = rng.uniform(dwell_lo, dwell_hi);
      const double initial = rng.uniform(config.initial_soc_min, config.initial_soc_max);
      const double target = rng.uniform(config.target_soc_min, config.target_soc_max);
      const double kind_draw = rng.uniform();

      const auto arrival = static_cast<std::int64_t>(std::floor(clock));
      if (arrival < last_departure + config.min_gap) continue;
      if (!(initial < target)) continue;

      ChargingSession s;
      s.port = port;
      if (fast) {
        s.battery = config.bev300;
      } else {
        s.battery = kind_draw < config.other_share ? config.other : config.bev150;
      }
      s.arrival_t = arrival;
      s.departure_t = arrival + std::max<std::int64_t>(1, std::llround(dwell * 60.0));
      s.initial_soc = initial;
      s.target_soc = target;
      last_departure = s.departure_t;
      sessions.push_back(s);
    }
  }
  std::stable_sort(sessions.begin(), sessions.end(), [](const auto& a, const auto& b) {
    return a.arrival_t != b.arrival_t ? a.arrival_t < b.arrival_t : a.port < b.port;
  });
  return sessions;
}

SocStep step_soc(double soc_prev, double current, double capacity_ah, double dt) {
  if (!(capacity_ah > 0.0)) throw DomainError("battery capacity must be positive");
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  const double next = soc_prev + 100.0 * current * dt / (capacity_ah * kSecondsPerHour);
  if (next > 100.0) return {100.0, true};
  if (next < 0.0) return {0.0, true};
  return {next, false};
}

namespace {

void validate_sessions(const SimConfig& config, const std::vector<ChargingSession>& sessions) {
  std::array<std::vector<const ChargingSession*>, kPortCount> by_port;
  for (const ChargingSession& s : sessions) {
    const std::string where = std::string(label(s.port)) + " session at t=" +
                              std::to_string(s.arrival_t);
    require(s.arrival_t >= 0 && s.arrival_t < s.departure_t, where + ": arrival must precede departure");
    require(0.0 <= s.initial_soc && s.initial_soc < s.target_soc && s.target_soc <= 100.0,
            where + ": SoC must satisfy 0 <= initial < target <= 100");
    require(compatible(s.battery.kind, charger_kind(s.port)),
            where + ": battery " + std::string(label(s.battery.kind)) +
                " cannot use this port's charger");
    s.battery.validate();
    by_port[index_of(s.port)].push_back(&s);
  }
  for (auto& list : by_port) {
    std::sort(list.begin(), list.end(),
              [](const auto* a, const auto* b) { return a->arrival_t < b->arrival_t; });
    for (std::size_t k = 1; k < list.size(); ++k) {
      require(list[k]->arrival_t > list[k - 1]->departure_t,
              std::string(label(list[k]->port)) + " sessions overlap at t=" +
                  std::to_string(list[k]->arrival_t));
    }
  }
  (void)config;
}

struct PortState {
  std::vector<const ChargingSession*> queue;  // by arrival
  std::size_t next = 0;
  const ChargingSession* active = nullptr;
  double soc = 0.0;
  bool finished = false;
};

}  // namespace

SimulationResult simulate_with_trace(const SimConfig& config,
                                     const std::vector<ChargingSession>& sessions) {
  config.validate();
  validate_sessions(config, sessions);

  std::array<PortState, kPortCount> ports;
  for (const ChargingSession& s : sessions) ports[index_of(s.port)].queue.push_back(&s);
  for (PortState& ps : ports) {
    std::sort(ps.queue.begin(), ps.queue.end(),
              [](const auto* a, const auto* b) { return a->arrival_t < b->arrival_t; });
  }

  const BessParams& bess = config.bess;
  const double volts = config.dc_bus_voltage;
  double bess_soc = bess.initial_soc;

  SimulationResult result;
  result.series.meta = {config.seed, config.duration, std::string(kGeneratorVersion)};
  result.series.records.resize(static_cast<std::size_t>(config.duration));
  result.bess_soc.resize(static_cast<std::size_t>(config.duration));

  for (std::int64_t t = 0; t < config.duration; ++t) {
    TelemetryRecord& rec = result.series.records[static_cast<std::size_t>(t)];
    rec.t = t;
    double demand_kw = 0.0;

    for (PortId port : kAllPorts) {
      PortState& ps = ports[index_of(port)];
      if (ps.active && t >= ps.active->departure_t) ps.active = nullptr;
      if (!ps.active && ps.next < ps.queue.size() && ps.queue[ps.next]->arrival_t == t) {
        ps.active = ps.queue[ps.next++];
        ps.soc = ps.active->initial_soc;
        ps.finished = false;
      }
      PortSample& out = rec.port(port);
      if (!ps.active || ps.finished) continue;

      const ChargingSession& s = *ps.active;
      const double power_kw = std::min(config.charger_for(port).max_power_kw, s.battery.max_charge_kw);
      const double nominal = power_kw * 1000.0 / volts;
      // Current that lands exactly on the target within this second.
      const double needed = (s.target_soc - ps.soc) * s.battery.capacity_ah * kSecondsPerHour / 100.0;
      double current = nominal;
      if (needed <= nominal) {
        current = needed;
        ps.finished = true;
      }
      const SocStep step = step_soc(ps.soc, current, s.battery.capacity_ah, 1.0);
      ps.soc = step.soc;
      if (step.clamped) ps.finished = true;

      out.cs = 1;
      out.i_ev = current;
      out.p_ev = current * volts / 1000.0;
      out.q_ev = config.reactive_fraction * out.p_ev;
      out.soc = ps.soc;
      demand_kw += out.p_ev;
    }

    // Storage dispatch: grid first up to its cap, storage for the remainder.
    double bess_kw = 0.0;  // positive while charging
    const double energy_per_pct = bess.energy_capacity_kwh / 100.0 * kSecondsPerHour;  // kJ per %
    if (demand_kw > config.grid_cap_kw) {
      const double deficit = demand_kw - config.grid_cap_kw;
      const double by_energy = (bess_soc - bess.soc_min) * energy_per_pct * bess.discharge_eff;
      const double available = std::max(0.0, std::min(bess.max_discharge_kw, by_energy));
      if (deficit > available * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "demand " << demand_kw << " kW exceeds grid cap " << config.grid_cap_kw
            << " kW plus available storage discharge " << available << " kW (storage SoC "
            << bess_soc << "%)";
        throw InfeasibleDispatchError(t, msg.str());
      }
      bess_kw = -deficit;
      bess_soc -= deficit / (bess.discharge_eff * energy_per_pct);
    } else {
      const double headroom = config.grid_cap_kw - demand_kw;
      const double by_energy = (bess.soc_max - bess_soc) * energy_per_pct / bess.charge_eff;
      const double charge = std::max(0.0, std::min({bess.max_charge_kw, headroom, by_energy}));
      bess_kw = charge;
      bess_soc += charge * bess.charge_eff / energy_per_pct;
    }
    bess_soc = std::clamp(bess_soc, bess.soc_min, bess.soc_max);
    result.bess_soc[static_cast<std::size_t>(t)] = bess_soc;

    rec.i_bess = bess_kw * 1000.0 / volts;
    std::array<double, kBoardCount> board{};
    for (PortId port : kAllPorts) {
      board[static_cast<std::size_t>(charging_board(port))] += rec.port(port).i_ev;
    }
    double i_pcc = rec.i_bess;
    for (double b : board) i_pcc += b;
    rec.i_pcc = i_pcc;
  }
  return result;
}

TelemetrySeries simulate(const SimConfig& config, const std::vector<ChargingSession>& sessions) {
  return simulate_with_trace(config, sessions).series;
}

void write_sessions_csv(const std::vector<ChargingSession>& sessions,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "port,arrival_t,departure_t,initial_soc,target_soc,battery_kind\n";
  for (const ChargingSession& s : sessions) {
    out << label(s.port) << ',' << s.arrival_t << ',' << s.departure_t << ','
        << format_double(s.initial_soc) << ',' << format_double(s.target_soc) << ','
        << label(s.battery.kind) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<ChargingSession> read_sessions_csv(const std::filesystem::path& path,
                                               const SimConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<ChargingSession> sessions;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "port,arrival_t,departure_t,initial_soc,target_soc,battery_kind") {
        throw ParseError(line_no, "unexpected sessions header");
      }
      header = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw ParseError(line_no, "expected 6 fields");
    ChargingSession s;
    const auto port = port_from_label(f[0]);
    if (!port) throw ParseError(line_no, "unknown port '" + std::string(f[0]) + "'");
    const auto kind = battery_from_label(f[5]);
    if (!kind) throw ParseError(line_no, "unknown battery kind '" + std::string(f[5]) + "'");
    s.port = *port;
    s.arrival_t = parse_int(f[1], line_no);
    s.departure_t = parse_int(f[2], line_no);
    s.initial_soc = parse_double(f[3], line_no);
    s.target_soc = parse_double(f[4], line_no);
    s.battery = *kind == BatteryKind::BEV300   ? config.bev300
                : *kind == BatteryKind::BEV150 ? config.bev150
                                               : config.other;
    sessions.push_back(s);
  }
  if (!header) throw EmptyInputError(path.string() + " has no header row");
  return sessions;
}

}  // namespace evci
