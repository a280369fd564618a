// evci: command-line front end for the ΔSoC anomaly-detection pipeline.
//
//   evci gen    --config run.json --out runs/a
//   evci train  --out runs/a
//   evci spoof  --out runs/a --port EV0_Terra53
//   evci detect --out runs/a            (exit 2 when an anomaly is confirmed)
//   evci eval   --out runs/a
//   evci report --out runs/a

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "evci/errors.hpp"
#include "evci/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"EV charging-infrastructure telemetry: simulate, train, spoof, detect, evaluate"};
  app.set_version_flag("--version", std::string(evci::kToolVersion));
  app.require_subcommand(1);

  std::string config, out, port;
  std::uint64_t seed = 0;
  double threshold = 0.0, days = 0.0;
  std::size_t window = 0;

  const std::pair<evci::Command, const char*> commands[] = {
      {evci::Command::Gen, "simulate telemetry and write gen/telemetry.csv"},
      {evci::Command::Train, "fit per-port ridge models and calibrate thresholds"},
      {evci::Command::Spoof, "inject spoofed ΔSoC windows into the test split"},
      {evci::Command::Detect, "scan residuals for anomalous windows"},
      {evci::Command::Eval, "score verdicts against the spoofing plan"},
      {evci::Command::Report, "summarise metrics next to the published reference values"},
  };
  for (const auto& [cmd, help] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(evci::name(cmd)), help);
    sub->add_option("--config", config, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override every stage seed");
    sub->add_option("--out", out, "run root (default $EVCI_OUT, then ./evci_run)");
    if (cmd == evci::Command::Gen) sub->add_option("--days", days, "simulated days")->check(CLI::PositiveNumber);
    if (cmd == evci::Command::Train || cmd == evci::Command::Spoof || cmd == evci::Command::Detect) {
      sub->add_option("--port", port, "port label, e.g. EV0_Terra53");
    }
    if (cmd == evci::Command::Detect) {
      sub->add_option("--threshold", threshold, "residual threshold (default: calibrated)")
          ->check(CLI::PositiveNumber);
    }
    if (cmd == evci::Command::Spoof || cmd == evci::Command::Detect || cmd == evci::Command::Eval) {
      sub->add_option("--window", window, "window length in samples")->check(CLI::Range(2, 100000));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? evci::kExitOk : evci::kExitError;
  }

  evci::CommandOptions options;
  CLI::App* sub = app.get_subcommands().front();
  options.command = *evci::command_from_name(sub->get_name());
  if (sub->count("--config")) options.config = config;
  if (sub->count("--seed")) options.seed = seed;
  if (sub->count("--out")) options.out = out;
  if (sub->get_option_no_throw("--days") && sub->count("--days")) options.days = days;
  if (sub->get_option_no_throw("--threshold") && sub->count("--threshold")) options.threshold = threshold;
  if (sub->get_option_no_throw("--window") && sub->count("--window")) options.window = window;
  if (sub->get_option_no_throw("--port") && sub->count("--port")) {
    const auto p = evci::port_from_label(port);
    if (!p) {
      std::cerr << "evci: unknown port '" << port << "'\n";
      return evci::kExitError;
    }
    options.port = *p;
  }
  return evci::execute(options, std::cout, std::cerr);
}
