#include "evci/spoofing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "evci/errors.hpp"
#include "evci/random.hpp"

namespace evci {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

/// allowed[i] is true when sample i is at least `guard` samples from every
/// transition.
std::vector<std::uint8_t> allowed_samples(const std::vector<std::uint8_t>& mask, std::size_t guard) {
  const std::size_t n = mask.size();
  std::vector<std::uint8_t> allowed(n, 1);
  for (std::size_t m = 0; m < n; ++m) {
    if (!mask[m]) continue;
    const std::size_t lo = m >= guard - 1 ? m - (guard - 1) : 0;
    const std::size_t hi = std::min(n - 1, m + (guard - 1));
    for (std::size_t i = lo; i <= hi; ++i) allowed[i] = 0;
  }
  return allowed;
}

std::vector<std::size_t> eligible_starts(const std::vector<std::uint8_t>& allowed, std::size_t length) {
  std::vector<std::size_t> starts;
  if (allowed.size() < length) return starts;
  // run = number of consecutive allowed samples ending at i.
  std::size_t run = 0;
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    run = allowed[i] ? run + 1 : 0;
    if (run >= length) starts.push_back(i + 1 - length);
  }
  return starts;
}

bool fits(const std::set<std::size_t>& taken, std::size_t s, std::size_t length) {
  auto it = taken.lower_bound(s);
  if (it != taken.end() && *it < s + length) return false;
  if (it != taken.begin() && *std::prev(it) + length > s) return false;
  return true;
}

/// Largest number of disjoint windows once `taken` is fixed; left-to-right
/// greedy packing is optimal for equal-length intervals.
std::size_t max_packing(const std::vector<std::size_t>& starts, const std::set<std::size_t>& taken,
                        std::size_t length) {
  std::size_t count = taken.size();
  std::size_t next_free = 0;
  auto it = taken.begin();
  for (std::size_t s : starts) {
    while (it != taken.end() && *it + length <= s) {
      next_free = std::max(next_free, *it + length);
      ++it;
    }
    if (s < next_free) continue;
    if (it != taken.end() && *it < s + length) continue;  // collides with a fixed window
    ++count;
    next_free = s + length;
  }
  return count;
}

}  // namespace

std::string_view label(SpoofClass c) {
  switch (c) {
    case SpoofClass::Clean:
      return "Clean";
    case SpoofClass::DecimalShift:
      return "DecimalShift";
    case SpoofClass::Incremental:
      return "Incremental";
    case SpoofClass::Random:
      return "Random";
  }
  return "?";
}

std::optional<SpoofClass> spoof_class_from_label(std::string_view s) {
  for (SpoofClass c : {SpoofClass::Clean, SpoofClass::DecimalShift, SpoofClass::Incremental,
                       SpoofClass::Random}) {
    if (label(c) == s) return c;
  }
  return std::nullopt;
}

SpoofClass class_of(const SpoofKind& kind) {
  return std::visit(Overloaded{
                        [](const DecimalShift&) { return SpoofClass::DecimalShift; },
                        [](const IncrementalArray&) { return SpoofClass::Incremental; },
                        [](const RandomUniform&) { return SpoofClass::Random; },
                    },
                    kind);
}

void validate(const SpoofKind& kind) {
  std::visit(Overloaded{
                 [](const DecimalShift& k) {
                   if (!(std::abs(k.offset) <= kMaxDecimalShift)) {
                     throw PlanError("decimal shift offset " + format_double(k.offset) +
                                     " outside [-0.009, 0.009]");
                   }
                 },
                 [](const IncrementalArray& k) {
                   if (!(k.step != 0.0) || !std::isfinite(k.step) || !std::isfinite(k.start)) {
                     throw PlanError("incremental array needs a finite nonzero step");
                   }
                 },
                 [](const RandomUniform& k) {
                   if (!(-kRandomBound <= k.lo && k.lo <= k.hi && k.hi <= kRandomBound)) {
                     throw PlanError("random spoof interval must satisfy -0.01 <= lo <= hi <= 0.01");
                   }
                 },
             },
             kind);
}

std::vector<Window> select_windows(const DeltaSocSeries& delta, std::size_t count,
                                   std::size_t length, std::size_t guard, std::uint64_t seed) {
  if (guard < 1) throw ConfigError("guard must be at least 1 sample");
  if (length < 2) throw ConfigError("window length must be at least 2");
  if (count == 0) return {};

  const auto allowed = allowed_samples(delta.transition_mask, guard);
  std::vector<std::size_t> starts = eligible_starts(allowed, length);

  const std::size_t achievable = max_packing(starts, {}, length);
  if (achievable < count) throw CapacityError(count, achievable);

  // Random order, but a start is kept only if the remaining free space can
  // still hold the rest of the windows.
  Rng rng(seed);
  std::vector<std::size_t> shuffled = starts;
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  }
  std::set<std::size_t> taken;
  for (std::size_t s : shuffled) {
    if (taken.size() == count) break;
    if (!fits(taken, s, length)) continue;
    taken.insert(s);
    if (max_packing(starts, taken, length) < count) taken.erase(s);
  }

  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t s : taken) out.push_back({s, length});
  return out;
}

void validate_plan(const SpoofPlan& plan, const DeltaSocSeries& delta, std::size_t guard) {
  std::vector<const SpoofEvent*> events;
  for (const SpoofEvent& e : plan.events) {
    if (e.port != delta.port) {
      throw PlanError("event for " + std::string(label(e.port)) + " applied to " +
                      std::string(label(delta.port)));
    }
    if (e.length < 2) throw PlanError("event window length must be at least 2");
    if (e.end_index() > delta.size()) {
      throw PlanError("event [" + std::to_string(e.start_index) + ", " +
                      std::to_string(e.end_index()) + ") exceeds series length " +
                      std::to_string(delta.size()));
    }
    validate(e.kind);
    events.push_back(&e);
  }
  std::sort(events.begin(), events.end(),
            [](const auto* a, const auto* b) { return a->start_index < b->start_index; });
  for (std::size_t k = 1; k < events.size(); ++k) {
    if (events[k]->start_index < events[k - 1]->end_index()) {
      throw PlanError("events at " + std::to_string(events[k - 1]->start_index) + " and " +
                      std::to_string(events[k]->start_index) + " overlap");
    }
  }
  if (guard > 0) {
    const auto allowed = allowed_samples(delta.transition_mask, guard);
    for (const SpoofEvent* e : events) {
      for (std::size_t i = e->start_index; i < e->end_index(); ++i) {
        if (!allowed[i]) {
          throw PlanError("event at " + std::to_string(e->start_index) +
                          " touches the transition guard zone");
        }
      }
    }
  }
}

InjectionResult inject(const DeltaSocSeries& delta, const SpoofPlan& plan) {
  validate_plan(plan, delta);
  InjectionResult out{delta, std::vector<SpoofClass>(delta.size(), SpoofClass::Clean)};
  std::vector<double>& v = out.spoofed.values;
  for (const SpoofEvent& e : plan.events) {
    std::visit(Overloaded{
                   [&](const DecimalShift& k) {
                     for (std::size_t i = e.start_index; i < e.end_index(); ++i) v[i] += k.offset;
                   },
                   [&](const IncrementalArray& k) {
                     for (std::size_t j = 0; j < e.length; ++j) {
                       v[e.start_index + j] = k.start + static_cast<double>(j) * k.step;
                     }
                   },
                   [&](const RandomUniform& k) {
                     Rng rng(e.seed);
                     for (std::size_t i = e.start_index; i < e.end_index(); ++i) {
                       v[i] = rng.uniform(k.lo, k.hi);
                     }
                   },
               },
               e.kind);
    std::fill(out.labels.begin() + static_cast<std::ptrdiff_t>(e.start_index),
              out.labels.begin() + static_cast<std::ptrdiff_t>(e.end_index()), class_of(e.kind));
  }
  return out;
}

SpoofPlan draw_plan(const DeltaSocSeries& delta, const std::vector<Window>& windows,
                    SpoofClass kind, const SpoofDrawConfig& draw, std::uint64_t seed) {
  if (kind == SpoofClass::Clean) throw PlanError("cannot draw a plan of clean events");
  Rng rng(seed);
  SpoofPlan plan;
  for (const Window& w : windows) {
    if (w.start + w.length > delta.size()) throw PlanError("window exceeds series");
    SpoofEvent e;
    e.port = delta.port;
    e.start_index = w.start;
    e.length = w.length;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    switch (kind) {
      case SpoofClass::DecimalShift:
        e.kind = DecimalShift{sign * rng.uniform(draw.shift_min_abs, draw.shift_max_abs)};
        break;
      case SpoofClass::Incremental: {
        const double step = sign * rng.uniform(draw.step_min_abs, draw.step_max_abs);
        const double offset = sign * rng.uniform(0.0, draw.start_offset_max);
        e.kind = IncrementalArray{delta.values[w.start] + offset, step};
        break;
      }
      case SpoofClass::Random:
        e.kind = RandomUniform{draw.random_lo, draw.random_hi};
        e.seed = rng.next();
        break;
      case SpoofClass::Clean:
        break;
    }
    validate(e.kind);
    plan.events.push_back(e);
  }
  return plan;
}

void write_plan_csv(const SpoofPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  if (!plan.source.empty()) out << "# source=" << plan.source << '\n';
  out << "port,start_index,length,kind,param1,param2,seed\n";
  for (const SpoofEvent& e : plan.events) {
    double p1 = 0.0, p2 = 0.0;
    std::visit(Overloaded{
                   [&](const DecimalShift& k) { p1 = k.offset; },
                   [&](const IncrementalArray& k) {
                     p1 = k.start;
                     p2 = k.step;
                   },
                   [&](const RandomUniform& k) {
                     p1 = k.lo;
                     p2 = k.hi;
                   },
               },
               e.kind);
    out << label(e.port) << ',' << e.start_index << ',' << e.length << ','
        << label(class_of(e.kind)) << ',' << format_double(p1) << ',' << format_double(p2) << ','
        << e.seed << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

SpoofPlan read_plan_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  SpoofPlan plan;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# source=", 0) == 0) plan.source = line.substr(9);
      continue;
    }
    if (!header) {
      if (line != "port,start_index,length,kind,param1,param2,seed") {
        throw ParseError(line_no, "unexpected plan header");
      }
      header = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw ParseError(line_no, "expected 7 fields");
    SpoofEvent e;
    const auto port = port_from_label(f[0]);
    if (!port) throw ParseError(line_no, "unknown port '" + std::string(f[0]) + "'");
    e.port = *port;
    const std::int64_t start = parse_int(f[1], line_no);
    const std::int64_t length = parse_int(f[2], line_no);
    if (start < 0 || length < 0) throw ParseError(line_no, "negative window geometry");
    e.start_index = static_cast<std::size_t>(start);
    e.length = static_cast<std::size_t>(length);
    const double p1 = parse_double(f[4], line_no);
    const double p2 = parse_double(f[5], line_no);
    {
      const char* last = f[6].data() + f[6].size();
      auto [ptr, ec] = std::from_chars(f[6].data(), last, e.seed);
      if (ec != std::errc{} || ptr != last || f[6].empty()) throw ParseError(line_no, "bad seed");
    }
    const auto cls = spoof_class_from_label(f[3]);
    if (!cls || *cls == SpoofClass::Clean) {
      throw ParseError(line_no, "unknown spoof kind '" + std::string(f[3]) + "'");
    }
    switch (*cls) {
      case SpoofClass::DecimalShift:
        e.kind = DecimalShift{p1};
        break;
      case SpoofClass::Incremental:
        e.kind = IncrementalArray{p1, p2};
        break;
      default:
        e.kind = RandomUniform{p1, p2};
        break;
    }
    plan.events.push_back(e);
  }
  if (!header) throw EmptyInputError(path.string() + " has no header row");
  return plan;
}

void write_spoofed_csv(const DeltaSocSeries& original, const InjectionResult& injected,
                       const std::filesystem::path& path) {
  if (original.size() != injected.spoofed.size()) throw ShapeError("spoofed series length mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "# port=" << label(original.port) << '\n';
  out << "index,original,delta_soc,transition,label\n";
  std::string buf;
  for (std::size_t i = 0; i < original.size(); ++i) {
    buf.clear();
    buf += std::to_string(i);
    buf += ',';
    buf += format_double(original.values[i]);
    buf += ',';
    buf += format_double(injected.spoofed.values[i]);
    buf += ',';
    buf += original.transition_mask[i] ? '1' : '0';
    buf += ',';
    buf += label(injected.labels[i]);
    buf += '\n';
    out << buf;
  }
  if (!out) throw Error("write failed: " + path.string());
}

SpoofedSeriesFile read_spoofed_csv(const std::filesystem::path& path, PortId port) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  SpoofedSeriesFile file;
  file.original.port = port;
  file.spoofed.port = port;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# port=", 0) == 0) {
        const auto p = port_from_label(std::string_view(line).substr(7));
        if (!p) throw ParseError(line_no, "unknown port in '" + line + "'");
        file.original.port = file.spoofed.port = *p;
      }
      continue;
    }
    if (!header) {
      if (line != "index,original,delta_soc,transition,label") {
        throw ParseError(line_no, "unexpected spoofed-series header");
      }
      header = true;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw ParseError(line_no, "expected 5 fields");
    if (parse_int(f[0], line_no) != static_cast<std::int64_t>(file.labels.size())) {
      throw ParseError(line_no, "index out of sequence");
    }
    const double original = parse_double(f[1], line_no);
    const double spoofed = parse_double(f[2], line_no);
    const std::int64_t mask = parse_int(f[3], line_no);
    if (mask != 0 && mask != 1) throw ParseError(line_no, "transition flag must be 0 or 1");
    const auto cls = spoof_class_from_label(f[4]);
    if (!cls) throw ParseError(line_no, "unknown label '" + std::string(f[4]) + "'");
    file.original.values.push_back(original);
    file.spoofed.values.push_back(spoofed);
    file.original.transition_mask.push_back(static_cast<std::uint8_t>(mask));
    file.labels.push_back(*cls);
  }
  if (!header) throw EmptyInputError(path.string() + " has no header row");
  file.spoofed.transition_mask = file.original.transition_mask;
  return file;
}

}  // namespace evci
