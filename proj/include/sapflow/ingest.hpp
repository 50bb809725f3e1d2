#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sapflow {

enum class SeriesOrigin { raw, smoothed, synthetic };

/// Ambient temperature record. Times in seconds (epoch or relative), values in Celsius.
struct TemperatureSeries {
  std::vector<double> time;
  std::vector<double> temp_c;
  SeriesOrigin origin = SeriesOrigin::raw;
  int smoothing_passes = 0;

  std::size_t size() const { return time.size(); }
  /// "raw", "smoothed(k)" or "synthetic".
  std::string provenance() const;
  /// Median sample spacing [s]; 0 for fewer than two samples.
  double cadence() const;
};

struct CsvOptions {
  bool allow_gaps = false;     ///< bridge gaps over max_gap_cadences instead of rejecting
  double max_gap_cadences = 2.0;
};

/// Parses `time,temp_c` CSV text; `time` is ISO-8601 or epoch seconds.
TemperatureSeries parse_csv(std::string_view text, std::string_view origin = "<csv>",
                            const CsvOptions& opt = {});
TemperatureSeries load_csv(const std::filesystem::path& path, const CsvOptions& opt = {});

/// Seconds since 1970-01-01T00:00:00Z for an ISO-8601 date-time
/// (`YYYY-MM-DD[T| ]hh:mm[:ss[.fff]][Z|+hh:mm|-hh:mm]`). Throws IngestError.
double parse_iso8601(std::string_view text);

/// Repeated [1/4, 1/2, 1/4] smoothing with fixed endpoints.
TemperatureSeries smooth(const TemperatureSeries& series, int passes = 10);

/// 5 - 15 sin(2 pi t / 86400) [Celsius].
double synthetic_sinusoid(double t);
/// Sinusoid sampled on [0, duration] at the given cadence.
TemperatureSeries synthetic_series(double duration, double cadence);

/// Piecewise-linear interpolation, held constant outside the record.
double sample(const TemperatureSeries& series, double t);

enum class CrossingKind { thaw, freeze };
const char* to_string(CrossingKind k);

struct Crossing {
  double time = 0;
  CrossingKind kind = CrossingKind::thaw;
};

/// Linear-interpolated threshold crossings; upward crossings are thaws.
std::vector<Crossing> zero_crossings(const TemperatureSeries& series, double threshold = 0.0);

/// Continuous-time ambient forcing, with t = 0 at the start of the record.
class ForcingSignal {
 public:
  static ForcingSignal sinusoid();
  static ForcingSignal from_series(TemperatureSeries series);

  double celsius(double t) const;
  double kelvin(double t) const;
  bool is_synthetic() const { return synthetic_; }
  /// Record length [s]; infinite for the sinusoid.
  double span() const;
  /// Crossings within [0, duration] relative to the start, sampled at `resolution` for the sinusoid.
  std::vector<Crossing> crossings(double duration, double threshold = 0.0,
                                  double resolution = 60.0) const;
  const TemperatureSeries& series() const { return series_; }

 private:
  bool synthetic_ = true;
  TemperatureSeries series_;
  double t_first_ = 0.0;
};

}  // namespace sapflow
