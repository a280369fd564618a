#include "evci/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "evci/errors.hpp"

namespace evci {

void DetectorConfig::validate() const {
  if (!(threshold > 0.0)) throw ConfigError("detector threshold must be positive");
  if (max_iter < 2) throw ConfigError("detector window must be at least 2 samples");
  if (!(eps_eq > 0.0) || !(eps_prog > 0.0)) throw ConfigError("detector tolerances must be positive");
}

ResidualSeries compute_residuals(const DeltaSocSeries& actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw ShapeError("actual has " + std::to_string(actual.size()) + " samples, predicted " +
                     std::to_string(predicted.size()));
  }
  ResidualSeries r{actual.port, std::vector<double>(actual.size())};
  for (std::size_t t = 0; t < actual.size(); ++t) r.values[t] = std::abs(actual.values[t] - predicted[t]);
  return r;
}

SpoofClass classify(std::span<const double> window, const DetectorConfig& cfg) {
  if (window.size() != cfg.max_iter) {
    throw DomainError("classify needs a window of " + std::to_string(cfg.max_iter) +
                      " samples, got " + std::to_string(window.size()));
  }
  const double first = window[0];
  bool constant = true;
  for (double v : window) constant = constant && std::abs(v - first) <= cfg.eps_eq;
  if (constant) return SpoofClass::DecimalShift;

  const double step = window[1] - window[0];
  bool progression = true;
  for (std::size_t j = 1; j + 1 < window.size(); ++j) {
    progression = progression && std::abs((window[j + 1] - window[j]) - step) <= cfg.eps_prog;
  }
  return progression ? SpoofClass::Incremental : SpoofClass::Random;
}

std::vector<Verdict> detect(const ResidualSeries& residuals, const DetectorConfig& cfg,
                            std::span<const std::uint8_t> transition_mask) {
  cfg.validate();
  const std::vector<double>& d = residuals.values;
  if (transition_mask.size() != d.size()) {
    throw ShapeError("transition mask length " + std::to_string(transition_mask.size()) +
                     " does not match residual length " + std::to_string(d.size()));
  }
  std::vector<Verdict> verdicts;
  const std::size_t w = cfg.max_iter;
  std::size_t i = 0;
  while (i + w <= d.size()) {
    if (transition_mask[i] || d[i] < cfg.threshold) {
      ++i;
      continue;
    }
    std::size_t j = 1;
    while (j < w && !transition_mask[i + j] && d[i + j] >= cfg.threshold) ++j;
    if (j < w) {
      // Any window containing i + j fails as well.
      i += j + 1;
      continue;
    }
    const std::span<const double> window(d.data() + i, w);
    verdicts.push_back({residuals.port, i, w, classify(window, cfg)});
    i += w;
  }
  return verdicts;
}

double calibrate_threshold(std::span<const double> clean, const ThresholdPolicy& policy) {
  if (clean.empty()) throw CalibrationError("no clean residuals to calibrate on");
  double threshold = 0.0;
  if (policy.kind == ThresholdPolicy::Kind::MeanPlusSigma) {
    double mean = 0.0;
    for (double v : clean) mean += v;
    mean /= static_cast<double>(clean.size());
    double var = 0.0;
    for (double v : clean) var += (v - mean) * (v - mean);
    var /= static_cast<double>(clean.size());
    threshold = mean + policy.sigmas * std::sqrt(var);
  } else {
    if (!(policy.quantile > 0.0 && policy.quantile <= 1.0)) {
      throw CalibrationError("quantile must be in (0, 1]");
    }
    std::vector<double> sorted(clean.begin(), clean.end());
    // Nearest-rank quantile.
    const auto rank = static_cast<std::size_t>(
        std::ceil(policy.quantile * static_cast<double>(sorted.size())));
    const std::size_t k = std::clamp<std::size_t>(rank, 1, sorted.size()) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
    threshold = sorted[k];
  }
  return std::max(threshold, policy.floor);
}

double calibrate_threshold(const ResidualSeries& clean, std::span<const std::uint8_t> transition_mask,
                           const ThresholdPolicy& policy) {
  if (transition_mask.size() != clean.values.size()) throw ShapeError("transition mask length mismatch");
  std::vector<double> kept;
  kept.reserve(clean.values.size());
  for (std::size_t t = 0; t < clean.values.size(); ++t) {
    if (!transition_mask[t]) kept.push_back(clean.values[t]);
  }
  return calibrate_threshold(kept, policy);
}

DetectionReport evaluate(const std::vector<Verdict>& verdicts, const SpoofPlan& ground_truth,
                         std::size_t series_length, std::size_t window) {
  DetectionReport report;
  report.verdicts = verdicts;

  std::vector<const Verdict*> sorted;
  for (const Verdict& v : verdicts) sorted.push_back(&v);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->start_index < b->start_index; });
  std::vector<std::uint8_t> matched(sorted.size(), 0);

  std::size_t injected_samples = 0;
  for (const SpoofEvent& e : ground_truth.events) {
    const SpoofClass truth = class_of(e.kind);
    const auto t = static_cast<std::size_t>(truth);
    ++report.injected[t];
    injected_samples += e.length;

    // Prefer the overlapping verdict with the largest overlap; earliest wins ties.
    const Verdict* best = nullptr;
    std::size_t best_overlap = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      const Verdict& v = *sorted[k];
      if (v.port != e.port) continue;
      const std::size_t lo = std::max(v.start_index, e.start_index);
      const std::size_t hi = std::min(v.end_index(), e.end_index());
      if (lo >= hi) continue;
      matched[k] = 1;
      if (hi - lo > best_overlap) {
        best_overlap = hi - lo;
        best = &v;
      }
    }
    const SpoofClass predicted = best ? best->cls : SpoofClass::Clean;
    ++report.confusion[t][static_cast<std::size_t>(predicted)];
    if (best) ++report.detected[t];
    if (best && predicted == truth) ++report.correct[t];
  }

  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (matched[k]) continue;
    ++report.false_positives;
    ++report.confusion[static_cast<std::size_t>(SpoofClass::Clean)][static_cast<std::size_t>(sorted[k]->cls)];
  }

  std::size_t total_injected = 0, total_correct = 0;
  for (std::size_t c = 1; c < kClassCount; ++c) {
    total_injected += report.injected[c];
    total_correct += report.correct[c];
    if (report.injected[c] > 0) {
      report.accuracy[c] = static_cast<double>(report.correct[c]) / static_cast<double>(report.injected[c]);
    }
  }
  if (total_injected > 0) {
    report.overall_accuracy = static_cast<double>(total_correct) / static_cast<double>(total_injected);
  }
  const std::size_t clean_samples = series_length > injected_samples ? series_length - injected_samples : 0;
  report.clean_windows = window > 0 ? clean_samples / window : 0;
  report.false_positive_rate = report.clean_windows > 0
                                   ? static_cast<double>(report.false_positives) /
                                         static_cast<double>(report.clean_windows)
                                   : 0.0;
  return report;
}

std::string DetectionReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "Detection report\n";
  out << "  accuracy = correctly classified injected windows / injected windows;\n"
         "  a window counts as detected when any verdict overlaps it.\n";
  out << "  verdicts: " << verdicts.size() << '\n';
  for (std::size_t c = 1; c < kClassCount; ++c) {
    out << "  " << std::left << std::setw(13) << label(static_cast<SpoofClass>(c)) << std::right
        << " injected " << std::setw(4) << injected[c] << "  detected " << std::setw(4) << detected[c]
        << "  correct " << std::setw(4) << correct[c] << "  accuracy ";
    if (accuracy[c]) {
      out << std::setw(6) << 100.0 * *accuracy[c] << " %";
    } else {
      out << "   n/a";
    }
    out << '\n';
  }
  out << "  overall accuracy: ";
  if (overall_accuracy) {
    out << 100.0 * *overall_accuracy << " %\n";
  } else {
    out << "n/a\n";
  }
  out << "  false positives: " << false_positives << " of " << clean_windows
      << " clean windows (rate " << std::setprecision(6) << false_positive_rate << ")\n";
  return out.str();
}

std::string DetectionReport::confusion_csv() const {
  std::ostringstream out;
  out << "truth\\predicted";
  for (std::size_t c = 0; c < kClassCount; ++c) {
    out << ',' << (c == 0 ? std::string_view("Missed") : label(static_cast<SpoofClass>(c)));
  }
  out << '\n';
  for (std::size_t r = 0; r < kClassCount; ++r) {
    out << label(static_cast<SpoofClass>(r));
    for (std::size_t c = 0; c < kClassCount; ++c) out << ',' << confusion[r][c];
    out << '\n';
  }
  return out.str();
}

void write_verdicts_csv(const std::vector<Verdict>& verdicts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "port,start_index,length,class\n";
  for (const Verdict& v : verdicts) {
    out << label(v.port) << ',' << v.start_index << ',' << v.length << ',' << label(v.cls) << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<Verdict> read_verdicts_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Verdict> verdicts;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "port,start_index,length,class") throw ParseError(line_no, "unexpected verdicts header");
      header = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ParseError(line_no, "expected 4 fields");
    const auto port = port_from_label(f[0]);
    if (!port) throw ParseError(line_no, "unknown port '" + std::string(f[0]) + "'");
    const auto cls = spoof_class_from_label(f[3]);
    if (!cls || *cls == SpoofClass::Clean) throw ParseError(line_no, "unknown class '" + std::string(f[3]) + "'");
    const std::int64_t start = parse_int(f[1], line_no);
    const std::int64_t length = parse_int(f[2], line_no);
    if (start < 0 || length < 1) throw ParseError(line_no, "bad verdict geometry");
    verdicts.push_back({*port, static_cast<std::size_t>(start), static_cast<std::size_t>(length), *cls});
  }
  if (!header) throw EmptyInputError(path.string() + " has no header row");
  return verdicts;
}

}  // namespace evci
