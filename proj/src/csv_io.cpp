#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "evci/errors.hpp"
#include "evci/telemetry.hpp"

namespace evci {

namespace {

constexpr std::size_t kColumnsPerPort = 5;
constexpr std::size_t kColumnCount = 3 + kColumnsPerPort * kPortCount;

void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  out.append(buf, end);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

void parse_meta(std::string_view line, SeriesMeta& meta) {
  // "# seed=<u64>,duration=<i64>,generator=<text>"
  line.remove_prefix(1);
  while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
  for (std::string_view field : split_csv_line(line)) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string_view key = field.substr(0, eq);
    const std::string_view value = field.substr(eq + 1);
    if (key == "seed") {
      meta.seed = static_cast<std::uint64_t>(parse_int(value, 1));
    } else if (key == "duration") {
      meta.duration = parse_int(value, 1);
    } else if (key == "generator") {
      meta.generator_version = std::string(value);
    }
  }
}

}  // namespace

std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

double parse_double(std::string_view token, std::size_t line) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || token.empty()) {
    throw ParseError(line, "not a number: '" + std::string(token) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view token, std::size_t line) {
  std::int64_t v = 0;
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), last, v);
  if (ec != std::errc{} || ptr != last || token.empty()) {
    throw ParseError(line, "not an integer: '" + std::string(token) + "'");
  }
  return v;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::vector<std::string> telemetry_columns() {
  std::vector<std::string> cols = {"t", "i_pcc", "i_bess"};
  for (PortId p : kAllPorts) {
    const std::string l(label(p));
    for (const char* q : {"i_", "p_", "q_", "cs_", "soc_"}) cols.push_back(q + l);
  }
  return cols;
}

void write_series_csv(const TelemetrySeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());

  std::string buf;
  buf.reserve(1 << 20);
  buf += "# seed=" + std::to_string(series.meta.seed) +
         ",duration=" + std::to_string(series.meta.duration) +
         ",generator=" + series.meta.generator_version + "\n";
  const auto cols = telemetry_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) buf += ',';
    buf += cols[c];
  }
  buf += '\n';

  for (const TelemetryRecord& r : series.records) {
    buf += std::to_string(r.t);
    buf += ',';
    append_double(buf, r.i_pcc);
    buf += ',';
    append_double(buf, r.i_bess);
    for (const PortSample& s : r.ports) {
      buf += ',';
      append_double(buf, s.i_ev);
      buf += ',';
      append_double(buf, s.p_ev);
      buf += ',';
      append_double(buf, s.q_ev);
      buf += ',';
      buf += s.cs ? '1' : '0';
      buf += ',';
      append_double(buf, s.soc);
    }
    buf += '\n';
    if (buf.size() > (1u << 20) - 1024) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("write failed: " + path.string());
}

TelemetrySeries read_series_csv(const std::filesystem::path& path) {
  const std::string text = read_all(path);
  if (text.empty()) throw EmptyInputError(path.string() + " is empty");

  TelemetrySeries series;
  const std::vector<std::string> expected = telemetry_columns();
  std::string_view rest(text);
  std::size_t line_no = 0;
  bool header_seen = false;

  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    std::string_view line = trim_cr(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;

    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!header_seen) parse_meta(line, series.meta);
      continue;
    }

    const auto fields = split_csv_line(line);
    if (!header_seen) {
      for (const std::string& col : expected) {
        bool found = false;
        for (auto f : fields) found = found || f == col;
        if (!found) throw ParseError(line_no, "missing column '" + col + "'");
      }
      if (fields.size() != expected.size()) {
        throw ParseError(line_no, "expected " + std::to_string(expected.size()) +
                                      " columns, got " + std::to_string(fields.size()));
      }
      for (std::size_t c = 0; c < expected.size(); ++c) {
        if (fields[c] != expected[c]) {
          throw ParseError(line_no, "column " + std::to_string(c) + " should be '" +
                                        expected[c] + "'");
        }
      }
      header_seen = true;
      continue;
    }

    if (fields.size() != kColumnCount) {
      throw ParseError(line_no, "expected " + std::to_string(kColumnCount) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    TelemetryRecord r;
    r.t = parse_int(fields[0], line_no);
    r.i_pcc = parse_double(fields[1], line_no);
    r.i_bess = parse_double(fields[2], line_no);
    for (std::size_t p = 0; p < kPortCount; ++p) {
      const std::size_t base = 3 + p * kColumnsPerPort;
      PortSample& s = r.ports[p];
      s.i_ev = parse_double(fields[base], line_no);
      s.p_ev = parse_double(fields[base + 1], line_no);
      s.q_ev = parse_double(fields[base + 2], line_no);
      const std::int64_t cs = parse_int(fields[base + 3], line_no);
      if (cs != 0 && cs != 1) throw ParseError(line_no, "charge status must be 0 or 1");
      s.cs = static_cast<std::uint8_t>(cs);
      s.soc = parse_double(fields[base + 4], line_no);
    }
    if (!series.records.empty() && r.t != series.records.back().t + 1) {
      throw ParseError(line_no, "timestamp " + std::to_string(r.t) +
                                    " breaks the 1 s cadence");
    }
    series.records.push_back(r);
  }
  if (!header_seen) throw EmptyInputError(path.string() + " has no header row");
  return series;
}

}  // namespace evci
