#include "evci/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evci/errors.hpp"
#include "evci/random.hpp"

namespace evci {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

class Section {
 public:
  Section(const json& parent, std::string name) : name_(std::move(name)) {
    if (parent.contains(name_)) {
      node_ = &parent.at(name_);
      if (!node_->is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    }
  }

  template <class T>
  void get(const std::string& key, T& dst) {
    if (!node_ || !node_->contains(key)) return;
    used_.insert(key);
    try {
      dst = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  bool has(const std::string& key) const { return node_ && node_->contains(key); }

  const json& at(const std::string& key) {
    used_.insert(key);
    return node_->at(key);
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      if (!used_.count(key)) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> used_;
};

PortId parse_port(const std::string& s) {
  const auto p = port_from_label(s);
  if (!p) throw ConfigError("unknown port '" + s + "'");
  return *p;
}

void parse_battery(Section& sim, const std::string& key, BatterySpec& spec) {
  if (!sim.has(key)) return;
  const json& node = sim.at(key);
  for (const auto& [k, v] : node.items()) {
    if (k == "capacity_ah") {
      spec.capacity_ah = v.get<double>();
    } else if (k == "max_charge_kw") {
      spec.max_charge_kw = v.get<double>();
    } else {
      throw ConfigError("unknown config key 'sim." + key + "." + k + "'");
    }
  }
}

void parse_sim(const json& root, SimConfig& sim) {
  Section s(root, "sim");
  s.get("seed", sim.seed);
  s.get("duration_s", sim.duration);
  if (s.has("days")) {
    double days = 0.0;
    s.get("days", days);
    sim.duration = std::llround(days * kSecondsPerDay);
  }
  if (s.has("arrival_rate_per_hour")) {
    const json& rates = s.at("arrival_rate_per_hour");
    if (rates.is_array()) {
      if (rates.size() != kPortCount) throw ConfigError("sim.arrival_rate_per_hour needs 6 entries");
      for (std::size_t p = 0; p < kPortCount; ++p) sim.arrival_rate_per_hour[p] = rates[p].get<double>();
    } else if (rates.is_object()) {
      for (const auto& [k, v] : rates.items()) sim.arrival_rate_per_hour[index_of(parse_port(k))] = v.get<double>();
    } else if (rates.is_number()) {
      sim.arrival_rate_per_hour.fill(rates.get<double>());
    } else {
      throw ConfigError("sim.arrival_rate_per_hour must be a number, array or object");
    }
  }
  s.get("terra53_dwell_min", sim.terra53_dwell_min);
  s.get("terra53_dwell_max", sim.terra53_dwell_max);
  s.get("terrahp_dwell_min", sim.terrahp_dwell_min);
  s.get("terrahp_dwell_max", sim.terrahp_dwell_max);
  s.get("initial_soc_min", sim.initial_soc_min);
  s.get("initial_soc_max", sim.initial_soc_max);
  s.get("target_soc_min", sim.target_soc_min);
  s.get("target_soc_max", sim.target_soc_max);
  s.get("min_gap_s", sim.min_gap);
  s.get("other_share", sim.other_share);
  s.get("grid_cap_kw", sim.grid_cap_kw);
  s.get("dc_bus_voltage", sim.dc_bus_voltage);
  s.get("reactive_fraction", sim.reactive_fraction);
  s.get("terra53_max_kw", sim.terra53.max_power_kw);
  s.get("terrahp_max_kw", sim.terrahp.max_power_kw);
  parse_battery(s, "bev300", sim.bev300);
  parse_battery(s, "bev150", sim.bev150);
  parse_battery(s, "other", sim.other);
  if (s.has("bess")) {
    const json& b = s.at("bess");
    const std::map<std::string, double*> fields = {
        {"energy_capacity_kwh", &sim.bess.energy_capacity_kwh},
        {"max_charge_kw", &sim.bess.max_charge_kw},
        {"max_discharge_kw", &sim.bess.max_discharge_kw},
        {"charge_eff", &sim.bess.charge_eff},
        {"discharge_eff", &sim.bess.discharge_eff},
        {"soc_max", &sim.bess.soc_max},
        {"soc_min", &sim.bess.soc_min},
        {"initial_soc", &sim.bess.initial_soc},
    };
    for (const auto& [k, v] : b.items()) {
      const auto it = fields.find(k);
      if (it == fields.end()) throw ConfigError("unknown config key 'sim.bess." + k + "'");
      *it->second = v.get<double>();
    }
  }
  s.finish();
}

void parse_train(const json& root, TrainConfig& train) {
  Section s(root, "train");
  double train_days = static_cast<double>(train.train_seconds) / kSecondsPerDay;
  double test_days = static_cast<double>(train.test_seconds) / kSecondsPerDay;
  s.get("train_days", train_days);
  s.get("test_days", test_days);
  train.train_seconds = std::llround(train_days * kSecondsPerDay);
  train.test_seconds = std::llround(test_days * kSecondsPerDay);
  s.get("alpha_grid", train.cv.alpha_grid);
  s.get("folds", train.cv.folds);
  s.get("include_cs", train.features.include_cs);
  if (s.has("threshold_policy")) {
    std::string policy;
    s.get("threshold_policy", policy);
    if (policy == "mean_plus_sigma") {
      train.threshold.kind = ThresholdPolicy::Kind::MeanPlusSigma;
    } else if (policy == "quantile") {
      train.threshold.kind = ThresholdPolicy::Kind::Quantile;
    } else {
      throw ConfigError("train.threshold_policy must be 'mean_plus_sigma' or 'quantile'");
    }
  }
  s.get("threshold_sigmas", train.threshold.sigmas);
  s.get("threshold_quantile", train.threshold.quantile);
  s.get("threshold_floor", train.threshold.floor);
  s.finish();
  train.cv.validate();
}

void parse_spoof(const json& root, SpoofConfig& spoof) {
  Section s(root, "spoof");
  if (s.has("port")) {
    std::string port;
    s.get("port", port);
    spoof.port = parse_port(port);
  }
  if (s.has("kinds")) {
    std::vector<std::string> kinds;
    s.get("kinds", kinds);
    spoof.kinds.clear();
    for (const std::string& k : kinds) {
      const auto c = spoof_class_from_label(k);
      if (!c || *c == SpoofClass::Clean) throw ConfigError("unknown spoof kind '" + k + "'");
      spoof.kinds.push_back(*c);
    }
  }
  s.get("windows_per_kind", spoof.windows_per_kind);
  s.get("window", spoof.window);
  s.get("guard", spoof.guard);
  s.get("shift_min_abs", spoof.draw.shift_min_abs);
  s.get("shift_max_abs", spoof.draw.shift_max_abs);
  s.get("step_min_abs", spoof.draw.step_min_abs);
  s.get("step_max_abs", spoof.draw.step_max_abs);
  s.get("start_offset_max", spoof.draw.start_offset_max);
  s.get("random_lo", spoof.draw.random_lo);
  s.get("random_hi", spoof.draw.random_hi);
  s.finish();
}

void parse_detect(const json& root, DetectStageConfig& detect) {
  Section s(root, "detect");
  s.get("window", detect.window);
  s.get("eps_eq", detect.eps_eq);
  s.get("eps_prog", detect.eps_prog);
  s.finish();
}

// ---------------------------------------------------------------------------
// Stage plumbing

struct StageContext {
  const CommandOptions& options;
  PipelineConfig config;
  fs::path root;
  fs::path dir;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::ostream& out;
};

fs::path require_artifact(StageContext& ctx, const fs::path& relative) {
  const fs::path full = ctx.root / relative;
  if (!fs::exists(full)) {
    throw ConfigError("missing artifact " + full.string() + " (run the '" +
                      relative.begin()->string() + "' stage first)");
  }
  ctx.inputs.push_back(relative.generic_string());
  return full;
}

fs::path output(StageContext& ctx, const std::string& file) {
  ctx.outputs.push_back((fs::path(name(ctx.options.command)) / file).generic_string());
  return ctx.dir / file;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

std::string model_file(PortId p) { return "model_" + std::string(label(p)) + ".txt"; }
std::string fit_report_file(PortId p) { return "fitreport_" + std::string(label(p)) + ".csv"; }

std::pair<TelemetrySeries, TelemetrySeries> load_split(StageContext& ctx) {
  const TelemetrySeries series = read_series_csv(require_artifact(ctx, "gen/telemetry.csv"));
  return split_dataset(series, ctx.config.train.train_seconds, ctx.config.train.test_seconds);
}

/// Small CSV table keyed by its first column.
std::map<std::string, std::map<std::string, std::string>> read_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::map<std::string, std::map<std::string, std::string>> rows;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    for (auto f : split_csv_line(line)) fields.emplace_back(f);
    if (header.empty()) {
      header = fields;
      continue;
    }
    if (fields.size() != header.size()) throw ParseError(line_no, path.string() + ": field count mismatch");
    auto& row = rows[fields[0]];
    for (std::size_t c = 0; c < header.size(); ++c) row[header[c]] = fields[c];
  }
  if (header.empty()) throw EmptyInputError(path.string() + " has no header row");
  return rows;
}

// ---------------------------------------------------------------------------
// Stages

int run_gen(StageContext& ctx) {
  SimConfig& sim = ctx.config.sim;
  if (ctx.options.days) sim.duration = std::llround(*ctx.options.days * kSecondsPerDay);
  const std::vector<ChargingSession> sessions = schedule_sessions(sim);
  const TelemetrySeries series = simulate(sim, sessions);
  write_series_csv(series, output(ctx, "telemetry.csv"));
  write_sessions_csv(sessions, output(ctx, "sessions.csv"));
  ctx.out << "gen: " << series.size() << " records, " << sessions.size() << " sessions -> "
          << ctx.dir.string() << '\n';
  return kExitOk;
}

int run_train(StageContext& ctx) {
  const auto [train, test] = load_split(ctx);
  const TrainConfig& tc = ctx.config.train;
  CvConfig cv = tc.cv;
  cv.shuffle_seed = ctx.config.cv_seed();

  std::vector<PortId> ports(kAllPorts.begin(), kAllPorts.end());
  if (ctx.options.port) ports = {*ctx.options.port};

  std::ostringstream metrics;
  metrics << "port,chosen_alpha,train_mse,test_mse,mean_baseline_mse,ls_baseline_mse,threshold,"
             "train_rows,test_rows\n";
  std::ostringstream thresholds;
  thresholds << "port,threshold\n";

  for (PortId port : ports) {
    const PortDataset train_data = drop_transitions(make_port_dataset(train, port, tc.features));
    const PortDataset test_data = drop_transitions(make_port_dataset(test, port, tc.features));

    auto [model, report] = grid_search_cv(train_data.x, train_data.y, cv);
    model.feature_names = train_data.feature_names;
    report.test_mse = mse(test_data.y, predict(model, test_data.x));

    const Eigen::VectorXd mean_pred = Eigen::VectorXd::Constant(test_data.y.size(), train_data.y.mean());
    const double mean_mse = mse(test_data.y, mean_pred);
    const LeastSquaresBaseline ls = fit_least_squares(train_data.x, train_data.y);
    const double ls_mse = mse(test_data.y, predict(ls, test_data.x));

    const Eigen::VectorXd train_resid = (train_data.y - predict(model, train_data.x)).cwiseAbs();
    const double threshold = calibrate_threshold(
        std::span<const double>(train_resid.data(), static_cast<std::size_t>(train_resid.size())),
        tc.threshold);

    save_model(model, output(ctx, model_file(port)));
    write_text(output(ctx, fit_report_file(port)), report.to_csv());

    metrics << label(port) << ',' << format_double(report.chosen_alpha) << ','
            << format_double(report.train_mse) << ',' << format_double(report.test_mse) << ','
            << format_double(mean_mse) << ',' << format_double(ls_mse) << ','
            << format_double(threshold) << ',' << train_data.y.size() << ',' << test_data.y.size()
            << '\n';
    thresholds << label(port) << ',' << format_double(threshold) << '\n';
    ctx.out << "train: " << label(port) << " alpha=" << report.chosen_alpha
            << " test_mse=" << report.test_mse << " threshold=" << threshold << '\n';
  }
  write_text(output(ctx, "metrics.csv"), metrics.str());
  write_text(output(ctx, "thresholds.csv"), thresholds.str());
  return kExitOk;
}

int run_spoof(StageContext& ctx) {
  const SpoofConfig& sc = ctx.config.spoof;
  const PortId port = ctx.options.port.value_or(sc.port);
  const std::size_t window = ctx.options.window.value_or(sc.window);
  if (sc.kinds.empty()) throw ConfigError("spoof.kinds is empty");

  const auto [train, test] = load_split(ctx);
  const DeltaSocSeries delta = compute_delta_soc(test, port);
  const std::uint64_t seed = ctx.config.spoof_seed();

  const std::size_t total = sc.windows_per_kind * sc.kinds.size();
  const std::vector<Window> windows = select_windows(delta, total, window, sc.guard, seed);

  // Deal kinds onto windows in a seeded random order.
  std::vector<SpoofClass> deal;
  for (SpoofClass k : sc.kinds) deal.insert(deal.end(), sc.windows_per_kind, k);
  Rng rng(seed + 1);
  for (std::size_t i = deal.size(); i > 1; --i) std::swap(deal[i - 1], deal[rng.below(i)]);

  SpoofPlan plan;
  plan.source = "gen/telemetry.csv test split, " + std::string(label(port));
  for (std::size_t k = 0; k < sc.kinds.size(); ++k) {
    std::vector<Window> mine;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (deal[i] == sc.kinds[k]) mine.push_back(windows[i]);
    }
    const SpoofPlan part = draw_plan(delta, mine, sc.kinds[k], sc.draw, seed + 2 + k);
    plan.events.insert(plan.events.end(), part.events.begin(), part.events.end());
  }
  std::sort(plan.events.begin(), plan.events.end(),
            [](const SpoofEvent& a, const SpoofEvent& b) { return a.start_index < b.start_index; });

  validate_plan(plan, delta, sc.guard);
  const InjectionResult injected = inject(delta, plan);
  write_plan_csv(plan, output(ctx, "plan.csv"));
  write_spoofed_csv(delta, injected, output(ctx, "spoofed_delta.csv"));
  ctx.out << "spoof: " << plan.events.size() << " windows on " << label(port) << '\n';
  return kExitOk;
}

int run_detect(StageContext& ctx) {
  const SpoofedSeriesFile spoofed = read_spoofed_csv(require_artifact(ctx, "spoof/spoofed_delta.csv"));
  const PortId port = spoofed.spoofed.port;
  if (ctx.options.port && *ctx.options.port != port) {
    throw ConfigError("spoof/spoofed_delta.csv holds " + std::string(label(port)) + ", not " +
                      std::string(label(*ctx.options.port)));
  }
  const auto [train, test] = load_split(ctx);
  const PortDataset data = make_port_dataset(test, port, ctx.config.train.features);
  if (static_cast<std::size_t>(data.y.size()) != spoofed.original.size()) {
    throw ConfigError("spoof/spoofed_delta.csv has " + std::to_string(spoofed.original.size()) +
                      " samples but the test split has " + std::to_string(data.y.size()) +
                      "; re-run spoof with the same config");
  }
  const RidgeModel model = load_model(require_artifact(ctx, fs::path("train") / model_file(port)));

  DetectorConfig cfg;
  cfg.max_iter = ctx.options.window.value_or(ctx.config.detect.window);
  cfg.eps_eq = ctx.config.detect.eps_eq;
  cfg.eps_prog = ctx.config.detect.eps_prog;
  if (ctx.options.threshold) {
    cfg.threshold = *ctx.options.threshold;
  } else {
    const auto table = read_table(require_artifact(ctx, "train/thresholds.csv"));
    const auto it = table.find(std::string(label(port)));
    if (it == table.end()) throw ConfigError("train/thresholds.csv has no entry for " + std::string(label(port)));
    cfg.threshold = parse_double(it->second.at("threshold"), 0);
  }

  const Eigen::VectorXd predicted = predict(model, data.x);
  const ResidualSeries residuals = compute_residuals(
      spoofed.spoofed, std::span<const double>(predicted.data(), static_cast<std::size_t>(predicted.size())));
  const std::vector<Verdict> verdicts = detect(residuals, cfg, spoofed.spoofed.transition_mask);

  write_verdicts_csv(verdicts, output(ctx, "verdicts.csv"));
  {
    std::ofstream f(output(ctx, "residuals.csv"), std::ios::binary);
    f << "index,delta_soc,predicted,residual,transition\n";
    for (std::size_t t = 0; t < residuals.values.size(); ++t) {
      f << t << ',' << format_double(spoofed.spoofed.values[t]) << ','
        << format_double(predicted(static_cast<Eigen::Index>(t))) << ','
        << format_double(residuals.values[t]) << ',' << int{spoofed.spoofed.transition_mask[t]} << '\n';
    }
  }
  ctx.out << "detect: " << verdicts.size() << " anomalous windows on " << label(port)
          << " (threshold " << cfg.threshold << ", window " << cfg.max_iter << ")\n";
  return verdicts.empty() ? kExitOk : kExitAnomaly;
}

int run_eval(StageContext& ctx) {
  const SpoofPlan plan = read_plan_csv(require_artifact(ctx, "spoof/plan.csv"));
  const SpoofedSeriesFile spoofed = read_spoofed_csv(require_artifact(ctx, "spoof/spoofed_delta.csv"));
  const std::vector<Verdict> verdicts = read_verdicts_csv(require_artifact(ctx, "detect/verdicts.csv"));
  const std::size_t window = ctx.options.window.value_or(ctx.config.detect.window);

  const DetectionReport report = evaluate(verdicts, plan, spoofed.spoofed.size(), window);
  write_text(output(ctx, "report.txt"), report.to_text());
  write_text(output(ctx, "confusion.csv"), report.confusion_csv());

  std::ostringstream acc;
  acc << "class,injected,detected,correct,accuracy\n";
  for (std::size_t c = 1; c < kClassCount; ++c) {
    acc << label(static_cast<SpoofClass>(c)) << ',' << report.injected[c] << ',' << report.detected[c]
        << ',' << report.correct[c] << ',' << (report.accuracy[c] ? format_double(*report.accuracy[c]) : "n/a")
        << '\n';
  }
  acc << "FalsePositive," << report.clean_windows << ',' << report.false_positives << ",0,"
      << format_double(report.false_positive_rate) << '\n';
  write_text(output(ctx, "accuracy.csv"), acc.str());
  ctx.out << report.to_text();
  return kExitOk;
}

int run_report(StageContext& ctx) {
  const auto metrics = read_table(require_artifact(ctx, "train/metrics.csv"));
  const auto accuracy = read_table(require_artifact(ctx, "eval/accuracy.csv"));
  using Ref = ReferenceValues;

  std::ostringstream s;
  s << "EVCI delta-SoC anomaly detection summary\n";
  s << "========================================\n\n";
  s << "Regression (ridge, per port; MSE in %^2 on non-transition test samples)\n";
  s << std::left << std::setw(22) << "port" << std::right << std::setw(12) << "alpha" << std::setw(14)
    << "test MSE" << std::setw(14) << "mean MSE" << std::setw(14) << "LS MSE" << std::setw(14)
    << "ref MSE" << '\n';
  for (PortId p : kAllPorts) {
    const auto it = metrics.find(std::string(label(p)));
    if (it == metrics.end()) continue;
    const auto& row = it->second;
    s << std::left << std::setw(22) << label(p) << std::right << std::setprecision(4)
      << std::setw(12) << parse_double(row.at("chosen_alpha"), 0) << std::scientific
      << std::setw(14) << parse_double(row.at("test_mse"), 0) << std::setw(14)
      << parse_double(row.at("mean_baseline_mse"), 0) << std::setw(14)
      << parse_double(row.at("ls_baseline_mse"), 0) << std::setw(14) << Ref::port_mse[index_of(p)]
      << std::defaultfloat << '\n';
  }
  s << "\nPublished model comparison (reference only; different plant):\n";
  s << "  linear regression (no intercept)  " << Ref::linear_regression_mse << '\n';
  s << "  multi-layer perceptron            " << Ref::mlp_mse << '\n';
  s << "  support vector regression         " << Ref::svr_mse << '\n';
  s << "  random forest                     " << Ref::random_forest_mse << '\n';
  s << "  ridge regression (alpha = 10)     " << Ref::ridge_mse << '\n';
  s << "  cross-validation: k = " << Ref::cv_folds << ", reference alpha " << Ref::ridge_alpha << "\n\n";

  s << "Detection (per-window accuracy)\n";
  const std::array<std::pair<SpoofClass, double>, 3> refs = {{
      {SpoofClass::DecimalShift, Ref::decimal_shift_accuracy},
      {SpoofClass::Incremental, Ref::incremental_accuracy},
      {SpoofClass::Random, Ref::random_accuracy},
  }};
  for (const auto& [cls, ref] : refs) {
    const auto it = accuracy.find(std::string(label(cls)));
    std::string measured = "n/a";
    if (it != accuracy.end() && it->second.at("accuracy") != "n/a") {
      std::ostringstream m;
      m << std::fixed << std::setprecision(2) << 100.0 * parse_double(it->second.at("accuracy"), 0) << " %";
      measured = m.str();
    }
    s << "  " << std::left << std::setw(14) << label(cls) << std::right << " measured " << std::setw(9)
      << measured << "   reference " << std::fixed << std::setprecision(2) << ref << " %"
      << std::defaultfloat << '\n';
  }
  if (const auto it = accuracy.find("FalsePositive"); it != accuracy.end()) {
    s << "  false positives: " << it->second.at("detected") << " of " << it->second.at("injected")
      << " clean windows\n";
  }
  write_text(output(ctx, "summary.txt"), s.str());
  ctx.out << s.str();
  return kExitOk;
}

void write_manifest(const StageContext& ctx, std::uint64_t seed, double seconds) {
  json m;
  m["command"] = std::string(name(ctx.options.command));
  m["config"] = ctx.options.config ? ctx.options.config->string() : std::string();
  m["inputs"] = ctx.inputs;
  m["outputs"] = ctx.outputs;
  m["seed"] = seed;
  m["tool_version"] = std::string(kToolVersion);
  m["wall_clock_seconds"] = seconds;
  write_text(ctx.dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace

void PipelineConfig::set_seed(std::uint64_t seed) { sim.seed = seed; }

PipelineConfig parse_pipeline_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& [key, value] : root.items()) {
    if (key != "sim" && key != "train" && key != "spoof" && key != "detect") {
      throw ConfigError("unknown config section '" + key + "'");
    }
  }
  PipelineConfig cfg;
  try {
    parse_sim(root, cfg.sim);
    parse_train(root, cfg.train);
    parse_spoof(root, cfg.spoof);
    parse_detect(root, cfg.detect);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  cfg.sim.validate();
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str());
}

std::optional<Command> command_from_name(std::string_view s) {
  for (Command c : {Command::Gen, Command::Train, Command::Spoof, Command::Detect, Command::Eval,
                    Command::Report}) {
    if (name(c) == s) return c;
  }
  return std::nullopt;
}

std::string_view name(Command c) {
  switch (c) {
    case Command::Gen:
      return "gen";
    case Command::Train:
      return "train";
    case Command::Spoof:
      return "spoof";
    case Command::Detect:
      return "detect";
    case Command::Eval:
      return "eval";
    case Command::Report:
      return "report";
  }
  return "?";
}

fs::path resolve_root(const CommandOptions& options) {
  if (options.out) return *options.out;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "evci_run";
}

int execute(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  try {
    PipelineConfig config = options.config ? load_pipeline_config(*options.config) : PipelineConfig{};
    if (options.seed) config.set_seed(*options.seed);
    const fs::path root = resolve_root(options);
    StageContext ctx{options, config, root, root / std::string(name(options.command)), {}, {}, out};
    fs::create_directories(ctx.dir);

    int code = kExitOk;
    switch (options.command) {
      case Command::Gen:
        code = run_gen(ctx);
        break;
      case Command::Train:
        code = run_train(ctx);
        break;
      case Command::Spoof:
        code = run_spoof(ctx);
        break;
      case Command::Detect:
        code = run_detect(ctx);
        break;
      case Command::Eval:
        code = run_eval(ctx);
        break;
      case Command::Report:
        code = run_report(ctx);
        break;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_manifest(ctx, ctx.config.sim.seed, seconds);
    return code;
  } catch (const std::exception& e) {
    err << "evci " << name(options.command) << ": " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace evci
