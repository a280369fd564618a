// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance <work_dir> [--freeze]
//
// --freeze rewrites the end-to-end golden files from the current build.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../test_support.hpp"
#include "evci/detector.hpp"
#include "evci/errors.hpp"
#include "evci/pipeline.hpp"
#include "evci/ridge.hpp"
#include "evci/simulator.hpp"
#include "evci/spoofing.hpp"

using namespace evci;
namespace fs = std::filesystem;
namespace t = evci::test;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// Depot data shared by the regression and detection criteria: default
// configuration, 5 days, 4-day train / 1-day test.
struct PortFit {
  PortDataset train;      // transitions dropped
  PortDataset test;       // transitions dropped
  PortDataset test_full;  // every test row, aligned with the test delta series
  RidgeModel model;
  FitReport report;
  double threshold = 0.0;
  DeltaSocSeries test_delta;
};

struct Depot {
  PipelineConfig config;
  TelemetrySeries train, test;
  std::array<PortFit, kPortCount> ports;
};

Depot build_depot(const PipelineConfig& config, bool cross_validate) {
  Depot d;
  d.config = config;
  const TelemetrySeries series = simulate(config.sim, schedule_sessions(config.sim));
  std::tie(d.train, d.test) = split_dataset(series, config.train.train_seconds, config.train.test_seconds);
  CvConfig cv = config.train.cv;
  cv.shuffle_seed = config.cv_seed();
  for (PortId p : kAllPorts) {
    PortFit& f = d.ports[index_of(p)];
    f.train = drop_transitions(make_port_dataset(d.train, p, config.train.features));
    f.test_full = make_port_dataset(d.test, p, config.train.features);
    f.test = drop_transitions(f.test_full);
    if (cross_validate) {
      std::tie(f.model, f.report) = grid_search_cv(f.train.x, f.train.y, cv);
    } else {
      f.model = fit_ridge(f.train.x, f.train.y, ReferenceValues::ridge_alpha);
    }
    const Eigen::VectorXd resid = (f.train.y - predict(f.model, f.train.x)).cwiseAbs();
    f.threshold = calibrate_threshold(
        std::span<const double>(resid.data(), static_cast<std::size_t>(resid.size())), config.train.threshold);
    f.test_delta = compute_delta_soc(d.test, p);
  }
  return d;
}

std::vector<Verdict> run_detector(const PortFit& f, const DeltaSocSeries& series) {
  const Eigen::VectorXd pred = predict(f.model, f.test_full.x);
  const ResidualSeries r =
      compute_residuals(series, std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())));
  DetectorConfig cfg;
  cfg.threshold = f.threshold;
  return detect(r, cfg, series.transition_mask);
}

// --------------------------------------------------------------------------

Outcome ridge_oracle() {
  const auto start = Clock::now();
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(7), p = 1 + rng.below(4);
    const double alpha = std::array{0.01, 1.0, 100.0}[rng.below(3)];
    const auto inst = t::random_instance(rng, n, p);
    const RidgeModel m = fit_ridge(t::to_eigen(inst.x), t::to_eigen(inst.y), alpha);
    const auto beta = t::ridge_by_inversion(t::standardize_columns(inst.x), t::center(inst.y), alpha);
    for (std::size_t j = 0; j < p; ++j) {
      worst = std::max(worst, std::abs(m.coefficients(static_cast<Eigen::Index>(j)) - beta[j]));
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= 1e-9 && elapsed < 5.0,
          "200 instances, max |diff| " + fmt(worst) + " (tol 1e-9), " + fmt(elapsed, 3) + " s (limit 5 s)"};
}

Outcome ridge_optimality() {
  Rng rng(77);
  int violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(30), p = 1 + rng.below(6);
    const double alpha = std::pow(10.0, rng.uniform(-2, 3));
    const auto inst = t::random_instance(rng, n, p);
    const RidgeModel m = fit_ridge(t::to_eigen(inst.x), t::to_eigen(inst.y), alpha);
    const auto xs = t::standardize_columns(inst.x);
    const auto yc = t::center(inst.y);
    std::vector<double> beta(m.coefficients.data(), m.coefficients.data() + p);
    const double best = t::penalized_objective(xs, yc, beta, alpha);
    for (std::size_t j = 0; j < p; ++j) {
      for (double d : {-1e-4, 1e-4}) {
        auto moved = beta;
        moved[j] += d;
        if (t::penalized_objective(xs, yc, moved, alpha) < best) ++violations;
      }
    }
  }
  return {violations == 0, "50 instances, " + std::to_string(violations) + " perturbations lowered the objective"};
}

Outcome current_balance() {
  SimConfig cfg;
  cfg.seed = 42;
  cfg.duration = kSecondsPerDay;
  const TelemetrySeries s = simulate(cfg, schedule_sessions(cfg));
  double worst = 0.0;
  for (const TelemetryRecord& r : s.records) {
    double sum = r.i_bess;
    for (const PortSample& p : r.ports) sum += p.i_ev;
    worst = std::max(worst, std::abs(r.i_pcc - sum));
  }
  return {s.size() == 86400 && worst < 1e-9,
          std::to_string(s.size()) + " steps, max |i_pcc - balance| " + fmt(worst) + " A (tol 1e-9)"};
}

Outcome coulomb_counting() {
  SimConfig cfg;
  cfg.seed = 42;
  const auto sessions = schedule_sessions(cfg);
  const TelemetrySeries s = simulate(cfg, sessions);
  double worst = 0.0;
  for (const ChargingSession& session : sessions) {
    double integral = 0.0, last_soc = session.initial_soc;
    for (std::int64_t tt = session.arrival_t; tt < std::min(session.departure_t, cfg.duration); ++tt) {
      const PortSample& p = s.records[static_cast<std::size_t>(tt)].port(session.port);
      if (!p.cs) break;
      integral += p.i_ev;
      last_soc = p.soc;
    }
    const double from_soc = (last_soc - session.initial_soc) / 100.0 * session.battery.capacity_ah;
    const double from_current = integral / 3600.0;
    worst = std::max(worst, std::abs(from_soc - from_current) / from_current);
  }
  return {!sessions.empty() && worst <= 1e-6,
          std::to_string(sessions.size()) + " sessions, max relative error " + fmt(worst) + " (tol 1e-6)"};
}

Outcome regression_scale(const Depot& depot) {
  std::ostringstream detail;
  bool pass = true;
  CvConfig cv = depot.config.train.cv;
  cv.shuffle_seed = depot.config.cv_seed();
  for (PortId p : kAllPorts) {
    const PortFit& f = depot.ports[index_of(p)];
    const double ridge = mse(f.test.y, predict(f.model, f.test.x));
    const double mean_base = mse(f.test.y, Eigen::VectorXd::Constant(f.test.y.size(), f.train.y.mean()));

    // Duplicate the port's own current column.
    const Eigen::Index j = 2 + static_cast<Eigen::Index>(index_of(p));
    FeatureMatrix train_dup(f.train.x.rows(), f.train.x.cols() + 1), test_dup(f.test.x.rows(), f.test.x.cols() + 1);
    train_dup << f.train.x, f.train.x.col(j);
    test_dup << f.test.x, f.test.x.col(j);
    const RidgeModel dup_model = grid_search_cv(train_dup, f.train.y, cv).first;
    const double ridge_dup = mse(f.test.y, predict(dup_model, test_dup));
    const double ls_dup = mse(f.test.y, predict(fit_least_squares(train_dup, f.train.y), test_dup));

    const bool ok = ridge <= 0.1 * mean_base && ridge_dup <= 0.5 * ls_dup;
    pass = pass && ok;
    detail << "\n      " << std::left << std::setw(20) << label(p) << std::right << " ridge " << fmt(ridge, 3)
           << " mean " << fmt(mean_base, 3) << " | dup: ridge " << fmt(ridge_dup, 3) << " LS(a=0) "
           << fmt(ls_dup, 3) << " | ref " << ReferenceValues::port_mse[index_of(p)] << (ok ? "" : "  <- fails");
  }
  return {pass, "ridge <= 0.1 x mean baseline and dup-column ridge <= 0.5 x LS, all 6 ports" + detail.str()};
}

struct SuiteResult {
  DetectionReport report;
  std::size_t clean_false_positives = 0;
};

SuiteResult detection_suite(const Depot& depot, SpoofClass kind, std::uint64_t seed) {
  const PortFit& f = depot.ports[index_of(PortId::Ev0Terra53)];
  const auto windows = select_windows(f.test_delta, 200, 10, 5, seed);
  const SpoofPlan plan = draw_plan(f.test_delta, windows, kind, SpoofDrawConfig{}, seed + 1);
  validate_plan(plan, f.test_delta, 5);
  const InjectionResult injected = inject(f.test_delta, plan);
  SuiteResult out;
  out.report = evaluate(run_detector(f, injected.spoofed), plan, f.test_delta.size(), 10);
  out.clean_false_positives = run_detector(f, f.test_delta).size();
  return out;
}

std::string suite_detail(const SuiteResult& r, SpoofClass kind, double reference) {
  const auto c = static_cast<std::size_t>(kind);
  std::ostringstream s;
  s << r.report.correct[c] << "/" << r.report.injected[c] << " correct (" << std::fixed << std::setprecision(2)
    << 100.0 * r.report.accuracy[c].value_or(0.0) << " %, reference " << reference << " %), detected "
    << r.report.detected[c] << ", false positives in spoofed run " << r.report.false_positives;
  return s.str();
}

Outcome decimal_suite(const Depot& depot) {
  const SuiteResult r = detection_suite(depot, SpoofClass::DecimalShift, 600);
  const double acc = r.report.accuracy[1].value_or(0.0);
  return {r.report.injected[1] == 200 && acc >= 0.95 && r.clean_false_positives <= 5,
          suite_detail(r, SpoofClass::DecimalShift, ReferenceValues::decimal_shift_accuracy) +
              "; clean test day verdicts " + std::to_string(r.clean_false_positives) + " (limit 5)"};
}

Outcome incremental_suite(const Depot& depot) {
  const SuiteResult r = detection_suite(depot, SpoofClass::Incremental, 700);
  const double acc = r.report.accuracy[2].value_or(0.0);
  return {r.report.injected[2] == 200 && acc >= 0.85,
          suite_detail(r, SpoofClass::Incremental, ReferenceValues::incremental_accuracy) + " (need 85 %)"};
}

Outcome random_suite(const Depot& depot) {
  const SuiteResult r = detection_suite(depot, SpoofClass::Random, 800);
  const double acc = r.report.accuracy[3].value_or(0.0);
  return {r.report.injected[3] == 200 && acc >= 0.85,
          suite_detail(r, SpoofClass::Random, ReferenceValues::random_accuracy) + " (need 85 %)"};
}

Outcome cv_determinism(const Depot& depot) {
  const PortFit& f = depot.ports[index_of(PortId::Ev0Terra53)];
  CvConfig cv = depot.config.train.cv;
  cv.shuffle_seed = depot.config.cv_seed();
  const auto [model, again] = grid_search_cv(f.train.x, f.train.y, cv);
  const bool same = again.to_csv() == f.report.to_csv() && again.chosen_alpha == f.report.chosen_alpha;
  const bool twenty = CvConfig{}.folds == 20 && !again.fold_mse.empty() && again.fold_mse.front().size() == 20;
  return {same && twenty, std::string(same ? "identical" : "different") + " FitReport across two runs, chosen alpha " +
                              fmt(again.chosen_alpha) + ", " + std::to_string(again.fold_mse.front().size()) +
                              " fold scores per alpha (default k = " + std::to_string(CvConfig{}.folds) + ")"};
}

Outcome transition_immunity() {
  std::size_t verdicts = 0, overlapping = 0, runs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PipelineConfig config;
    config.set_seed(seed);
    const Depot depot = build_depot(config, false);
    for (PortId p : kAllPorts) {
      const PortFit& f = depot.ports[index_of(p)];
      const auto windows = select_windows(f.test_delta, 60, 10, 5, seed * 31 + index_of(p));
      SpoofPlan plan;
      const std::array kinds{SpoofClass::DecimalShift, SpoofClass::Incremental, SpoofClass::Random};
      for (std::size_t k = 0; k < 3; ++k) {
        const std::vector<Window> part(windows.begin() + 20 * k, windows.begin() + 20 * (k + 1));
        const SpoofPlan drawn = draw_plan(f.test_delta, part, kinds[k], SpoofDrawConfig{}, seed + k);
        plan.events.insert(plan.events.end(), drawn.events.begin(), drawn.events.end());
      }
      const InjectionResult injected = inject(f.test_delta, plan);
      for (const DeltaSocSeries* series : {&f.test_delta, &injected.spoofed}) {
        for (const Verdict& v : run_detector(f, *series)) {
          ++verdicts;
          for (std::size_t i = v.start_index; i < v.end_index(); ++i) {
            if (series->transition_mask[i]) {
              ++overlapping;
              break;
            }
          }
        }
      }
    }
    ++runs;
  }
  return {overlapping == 0, std::to_string(runs) + " seeded runs x 6 ports, " + std::to_string(verdicts) +
                                " verdicts, " + std::to_string(overlapping) + " touch a transition sample"};
}

// End to end through the CLI binary, compared against frozen golden files.

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    for (auto f : split_csv_line(line)) fields.emplace_back(f);
    rows.push_back(fields);
  }
  return rows;
}

// Exact for text fields, 1e-9 relative (plus 1e-15 absolute) for numbers.
bool csv_matches(const std::string& a, const std::string& b) {
  const auto ra = csv_rows(a), rb = csv_rows(b);
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].size() != rb[i].size()) return false;
    for (std::size_t j = 0; j < ra[i].size(); ++j) {
      if (ra[i][j] == rb[i][j]) continue;
      char* ea = nullptr;
      char* eb = nullptr;
      const double x = std::strtod(ra[i][j].c_str(), &ea);
      const double y = std::strtod(rb[i][j].c_str(), &eb);
      if (*ea || *eb || ra[i][j].empty()) return false;
      if (std::abs(x - y) > 1e-9 * std::max(std::abs(x), std::abs(y)) + 1e-15) return false;
    }
  }
  return true;
}

const std::vector<std::string> kGoldenFiles = {"gen/sessions.csv",  "train/metrics.csv", "spoof/plan.csv",
                                               "detect/verdicts.csv", "eval/confusion.csv", "eval/accuracy.csv"};

Outcome end_to_end(const fs::path& work, bool freeze) {
  const fs::path root = work / "e2e";
  fs::remove_all(root);
  const std::string cli = EVCI_CLI_PATH;
  const auto start = Clock::now();
  std::ostringstream codes;
  bool ok = true;
  for (const char* stage : {"gen", "train", "spoof", "detect", "eval"}) {
    const std::string cmd = cli + " " + stage + " --out " + root.string() + " > " + (work / stage).string() + ".log 2>&1";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    codes << stage << "=" << code << " ";
    const int expected = std::string(stage) == "detect" ? kExitAnomaly : kExitOk;
    ok = ok && code == expected;
  }
  const double elapsed = seconds_since(start);

  const fs::path golden = fs::path(EVCI_GOLDEN_DIR) / "e2e";
  std::vector<std::string> mismatched;
  for (const std::string& file : kGoldenFiles) {
    const fs::path produced = root / file;
    const fs::path frozen = golden / fs::path(file).filename();
    if (freeze && fs::exists(produced)) {
      fs::create_directories(golden);
      fs::copy_file(produced, frozen, fs::copy_options::overwrite_existing);
    }
    if (!fs::exists(produced) || !fs::exists(frozen) || !csv_matches(t::slurp(produced), t::slurp(frozen))) {
      mismatched.push_back(file);
    }
  }
  std::string detail = "exit codes " + codes.str() + "; " + fmt(elapsed, 3) + " s (limit 120 s); golden ";
  if (mismatched.empty()) {
    detail += "files match (" + std::to_string(kGoldenFiles.size()) + ")";
  } else {
    detail += "mismatch:";
    for (const auto& m : mismatched) detail += " " + m;
  }
  return {ok && elapsed < 120.0 && mismatched.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_run");
  const bool freeze = argc > 2 && std::string(argv[2]) == "--freeze";
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << std::setw(2) << id << " " << name << ": " << o.detail
              << std::endl;
  };

  report(1, "ridge oracle equivalence", ridge_oracle);
  report(2, "penalized objective optimality", ridge_optimality);
  report(3, "current balance at the PCC", current_balance);
  report(4, "coulomb counting per session", coulomb_counting);

  std::optional<Depot> depot;
  try {
    depot = build_depot(PipelineConfig{}, true);
  } catch (const std::exception& e) {
    std::cout << "depot setup failed: " << e.what() << std::endl;
  }
  auto with_depot = [&](std::function<Outcome(const Depot&)> f) {
    return [&depot, f]() -> Outcome {
      if (!depot) return {false, "no depot data"};
      return f(*depot);
    };
  };
  report(5, "regression scale vs baselines", with_depot(regression_scale));
  report(6, "decimal shift detection", with_depot(decimal_suite));
  report(7, "incremental array detection", with_depot(incremental_suite));
  report(8, "random spoofing detection", with_depot(random_suite));
  report(9, "grid-search CV determinism", with_depot(cv_determinism));
  report(10, "transition immunity", transition_immunity);
  report(11, "end-to-end pipeline and golden files", [&] { return end_to_end(work, freeze); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
