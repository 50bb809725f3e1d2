#include "sapflow/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sapflow/config.hpp"
#include "sapflow/errors.hpp"
#include "sapflow/log.hpp"
#include "sapflow/params.hpp"

namespace sapflow {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

// Howard Hinnant's days_from_civil.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* b = s.data() + pos;
  for (std::size_t k = 0; k < len; ++k) {
    if (b[k] < '0' || b[k] > '9') return false;
  }
  return std::from_chars(b, b + len, out).ec == std::errc{};
}

bool is_number(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size() && !s.empty();
}

}  // namespace

std::string TemperatureSeries::provenance() const {
  switch (origin) {
    case SeriesOrigin::raw: return "raw";
    case SeriesOrigin::smoothed: return "smoothed(" + std::to_string(smoothing_passes) + ")";
    case SeriesOrigin::synthetic: return "synthetic";
  }
  return "raw";
}

double TemperatureSeries::cadence() const {
  if (time.size() < 2) return 0.0;
  std::vector<double> d(time.size() - 1);
  for (std::size_t k = 0; k + 1 < time.size(); ++k) d[k] = time[k + 1] - time[k];
  std::nth_element(d.begin(), d.begin() + static_cast<long>(d.size() / 2), d.end());
  return d[d.size() / 2];
}

double parse_iso8601(std::string_view s) {
  const auto bad = [&] { return IngestError("invalid ISO-8601 timestamp '" + std::string(s) + "'"); };
  int Y = 0, M = 0, D = 0, h = 0, m = 0, sec = 0;
  if (!(read_int(s, 0, 4, Y) && s.size() >= 10 && s[4] == '-' && read_int(s, 5, 2, M) &&
        s[7] == '-' && read_int(s, 8, 2, D))) {
    throw bad();
  }
  std::size_t pos = 10;
  double frac = 0.0;
  if (pos < s.size()) {
    if (s[pos] != 'T' && s[pos] != ' ') throw bad();
    if (!(read_int(s, pos + 1, 2, h) && pos + 3 < s.size() && s[pos + 3] == ':' &&
          read_int(s, pos + 4, 2, m))) {
      throw bad();
    }
    pos += 6;
    if (pos < s.size() && s[pos] == ':') {
      if (!read_int(s, pos + 1, 2, sec)) throw bad();
      pos += 3;
      if (pos < s.size() && s[pos] == '.') {
        std::size_t end = pos + 1;
        while (end < s.size() && s[end] >= '0' && s[end] <= '9') ++end;
        if (end == pos + 1) throw bad();
        std::from_chars(s.data() + pos, s.data() + end, frac);
        pos = end;
      }
    }
  }
  long long offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      pos += 1;
    } else if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
      int oh = 0, om = 0;
      if (!(read_int(s, pos + 1, 2, oh) && read_int(s, pos + 4, 2, om))) throw bad();
      offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600LL + om * 60LL);
      pos = s.size();
    } else {
      throw bad();
    }
  }
  if (M < 1 || M > 12 || D < 1 || D > 31 || h > 23 || m > 59 || sec > 60) throw bad();
  const long long days = days_from_civil(Y, static_cast<unsigned>(M), static_cast<unsigned>(D));
  return static_cast<double>(days * 86400LL + h * 3600LL + m * 60LL + sec - offset) + frac;
}

TemperatureSeries parse_csv(std::string_view text, std::string_view origin, const CsvOptions& opt) {
  TemperatureSeries out;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  const auto where = [&] { return std::string(origin) + ":" + std::to_string(line_no); };
  if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      throw IngestError(where() + ": expected two comma-separated fields");
    }
    const auto a = trim(line.substr(0, comma)), b = trim(line.substr(comma + 1));
    if (!header_seen) {
      if (a != "time" || b != "temp_c") throw IngestError(where() + ": expected header 'time,temp_c'");
      header_seen = true;
      continue;
    }
    double t = 0.0;
    try {
      t = is_number(a) ? parse_double(a, "time") : parse_iso8601(a);
    } catch (const std::exception& e) {
      throw IngestError(where() + ": " + e.what());
    }
    if (!is_number(b)) throw IngestError(where() + ": malformed temperature '" + std::string(b) + "'");
    const double v = parse_double(b, "temp_c");
    if (!std::isfinite(t) || !std::isfinite(v)) throw IngestError(where() + ": non-finite value");
    if (!out.time.empty() && t <= out.time.back()) {
      throw IngestError(where() + (t == out.time.back() ? ": duplicate timestamp" : ": time is not increasing"));
    }
    out.time.push_back(t);
    out.temp_c.push_back(v);
  }
  if (!header_seen) throw IngestError(std::string(origin) + ": empty file");
  if (out.time.empty()) throw IngestError(std::string(origin) + ": no data rows");

  const double cad = out.cadence();
  for (std::size_t k = 0; k + 1 < out.time.size() && cad > 0.0; ++k) {
    const double gap = out.time[k + 1] - out.time[k];
    if (gap > opt.max_gap_cadences * cad) {
      const std::string msg = std::string(origin) + ": gap of " + format_double(gap) +
                              " s after sample " + std::to_string(k + 1);
      if (!opt.allow_gaps) throw IngestError(msg + " exceeds " + format_double(opt.max_gap_cadences) + " cadences");
      logging::warn(msg + " bridged by linear interpolation");
    }
  }
  return out;
}

TemperatureSeries load_csv(const std::filesystem::path& path, const CsvOptions& opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open temperature file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path.string(), opt);
}

TemperatureSeries smooth(const TemperatureSeries& series, int passes) {
  if (series.size() < 3) throw IngestError("smoothing needs at least 3 samples");
  if (passes < 0) throw IngestError("smoothing pass count must be non-negative");
  TemperatureSeries out = series;
  std::vector<double>& v = out.temp_c;
  std::vector<double> prev(v.size());
  for (int p = 0; p < passes; ++p) {
    prev = v;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) v[i] = 0.25 * (prev[i - 1] + 2.0 * prev[i] + prev[i + 1]);
  }
  if (passes > 0) {
    out.origin = SeriesOrigin::smoothed;
    out.smoothing_passes = series.smoothing_passes + passes;
  }
  return out;
}

double synthetic_sinusoid(double t) { return 5.0 - 15.0 * std::sin(2.0 * kPi * t / 86400.0); }

TemperatureSeries synthetic_series(double duration, double cadence) {
  if (!(cadence > 0.0) || duration < 0.0) throw ConfigError("invalid synthetic series span");
  TemperatureSeries s;
  s.origin = SeriesOrigin::synthetic;
  const auto n = static_cast<std::size_t>(std::floor(duration / cadence + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * cadence;
    s.time.push_back(t);
    s.temp_c.push_back(synthetic_sinusoid(t));
  }
  return s;
}

double sample(const TemperatureSeries& s, double t) {
  if (s.time.empty()) throw IngestError("cannot sample an empty series");
  if (t <= s.time.front()) return s.temp_c.front();
  if (t >= s.time.back()) return s.temp_c.back();
  const auto it = std::upper_bound(s.time.begin(), s.time.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - s.time.begin()) - 1;
  const double w = (t - s.time[k]) / (s.time[k + 1] - s.time[k]);
  if (w == 0.0) return s.temp_c[k];
  return (1.0 - w) * s.temp_c[k] + w * s.temp_c[k + 1];
}

const char* to_string(CrossingKind k) { return k == CrossingKind::thaw ? "thaw" : "freeze"; }

std::vector<Crossing> zero_crossings(const TemperatureSeries& s, double threshold) {
  std::vector<Crossing> out;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double a = s.temp_c[k] - threshold, b = s.temp_c[k + 1] - threshold;
    const bool above_a = a >= 0.0, above_b = b >= 0.0;
    if (above_a == above_b) continue;
    const double t = s.time[k] + (0.0 - a) / (b - a) * (s.time[k + 1] - s.time[k]);
    out.push_back({t, above_b ? CrossingKind::thaw : CrossingKind::freeze});
  }
  return out;
}

ForcingSignal ForcingSignal::sinusoid() { return ForcingSignal{}; }

ForcingSignal ForcingSignal::from_series(TemperatureSeries series) {
  if (series.size() < 2) throw IngestError("forcing record needs at least two samples");
  ForcingSignal f;
  f.synthetic_ = false;
  f.t_first_ = series.time.front();
  f.series_ = std::move(series);
  return f;
}

double ForcingSignal::celsius(double t) const {
  return synthetic_ ? synthetic_sinusoid(t) : sample(series_, t + t_first_);
}

double ForcingSignal::kelvin(double t) const { return celsius_to_kelvin(celsius(t)); }

double ForcingSignal::span() const {
  return synthetic_ ? std::numeric_limits<double>::infinity() : series_.time.back() - t_first_;
}

std::vector<Crossing> ForcingSignal::crossings(double duration, double threshold,
                                               double resolution) const {
  if (!synthetic_) {
    std::vector<Crossing> out;
    for (Crossing c : zero_crossings(series_, threshold)) {
      c.time -= t_first_;
      if (c.time >= 0.0 && c.time <= duration) out.push_back(c);
    }
    return out;
  }
  std::vector<Crossing> out;
  const auto f = [&](double t) { return synthetic_sinusoid(t) - threshold; };
  const auto n = static_cast<long>(std::ceil(duration / resolution));
  for (long k = 0; k < n; ++k) {
    double lo = static_cast<double>(k) * resolution;
    double hi = std::min(duration, lo + resolution);
    const bool above_lo = f(lo) >= 0.0, above_hi = f(hi) >= 0.0;
    if (above_lo == above_hi) continue;
    for (int it = 0; it < 100 && hi - lo > 1e-9; ++it) {
      const double mid = 0.5 * (lo + hi);
      ((f(mid) >= 0.0) == above_lo ? lo : hi) = mid;
    }
    out.push_back({0.5 * (lo + hi), above_hi ? CrossingKind::thaw : CrossingKind::freeze});
  }
  return out;
}

}  // namespace sapflow
