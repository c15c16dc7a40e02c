#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uagc/activity.hpp"
#include "uagc/geodata.hpp"
#include "uagc/models.hpp"
#include "uagc/timestamp.hpp"

namespace uagc::training {

/// Speeds (mph) on a regular 5-minute grid, T x N row-major.
struct TrafficSeries {
  std::vector<std::string> sensor_ids;
  std::vector<Timestamp> timestamps;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;  // 1 = observed

  std::size_t steps() const { return timestamps.size(); }
  std::size_t sensors() const { return sensor_ids.size(); }
  double value(std::size_t t, std::size_t i) const { return values[t * sensors() + i]; }
  bool is_observed(std::size_t t, std::size_t i) const { return observed[t * sensors() + i] != 0; }
};

struct LoadOptions {
  bool zero_is_missing = true;
  int step_minutes = kBinMinutes;
};

/// Header `timestamp,<sensor_id>,...`. Blank cells (and zeros unless disabled)
/// are missing. When `expected_ids` is given the columns must match it exactly.
TrafficSeries load_traffic_csv(std::istream& in, const std::vector<std::string>* expected_ids = nullptr,
                               const LoadOptions& options = {});
void write_traffic_csv(const TrafficSeries& series, std::ostream& out);

struct Scaler {
  double mean = 0.0;
  double std = 1.0;
  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
};

struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Mean and population std over observed entries of steps [range.begin, range.end).
Scaler fit_scaler(const TrafficSeries& series, Range range);
/// Standardized copy; missing entries become 0.
std::vector<double> standardize(const TrafficSeries& series, const Scaler& scaler);

struct DatasetSplit {
  Range train, val, test;
  Scaler scaler;
  std::size_t p = 12;
  std::size_t q = 12;
  /// Start indices s with [s, s+P+Q) inside `range`, every `stride` steps.
  std::vector<std::size_t> windows(Range range, std::size_t stride = 1) const;
};

/// Chronological split (default 70/10/20) with a train-only scaler.
DatasetSplit split_dataset(const TrafficSeries& series, std::size_t p, std::size_t q,
                           double train_fraction = 0.7, double val_fraction = 0.1);

/// (P+Q) x F context rows for a window whose first history step is `start`:
/// activity rows, timestamp one-hots, or nothing. `activity` must be the
/// normalised table when mode is activity.
std::vector<double> context_window(models::EmbeddingMode mode, const ActivityTable* activity, Timestamp start,
                                   std::size_t p, std::size_t q);

/// Everything needed to cut model batches out of a series.
class Dataset {
 public:
  Dataset(TrafficSeries series, DatasetSplit split, models::EmbeddingMode mode,
          std::optional<ActivityTable> normalized_activity);

  const TrafficSeries& series() const { return series_; }
  const DatasetSplit& split() const { return split_; }
  const Scaler& scaler() const { return split_.scaler; }
  models::EmbeddingMode mode() const { return mode_; }
  const std::optional<ActivityTable>& activity() const { return activity_; }
  std::size_t sensors() const { return series_.sensors(); }

  models::Batch batch(const std::vector<std::size_t>& starts) const;
  /// (P+Q) x F context rows for a window whose first history step is `start`.
  std::vector<double> context_rows(Timestamp start) const;

 private:
  TrafficSeries series_;
  DatasetSplit split_;
  models::EmbeddingMode mode_;
  std::optional<ActivityTable> activity_;
  std::vector<double> standardized_;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 0.01;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::size_t lr_patience = 2;
  double lr_factor = 0.1;
  std::uint64_t seed = 0;
  std::size_t window_stride = 1;  // training windows only
  double sampling_k = 0.0;        // inverse-sigmoid scheduled sampling; 0 = always teacher
  bool record_time = true;        // false writes seconds = 0 for byte-comparable logs
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mae = 0.0;  // mph
  double val_mae = 0.0;    // mph
  double lr = 0.0;
  double seconds = 0.0;
};

std::string to_jsonl(const EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
  std::string best_checkpoint;  // serialized parameters of the best epoch
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains in place; on return the model holds the best-epoch parameters.
TrainResult train(models::Model& model, const Dataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Predictions in mph for windows starting at `starts`: (W, Q, N) row-major.
std::vector<double> predict(models::Model& model, const Dataset& data,
                            const std::vector<std::size_t>& starts, std::size_t batch_size = 64);

/// Ground truth and mask aligned with `predict`.
struct Truth {
  std::vector<double> values;
  std::vector<std::uint8_t> observed;
};
Truth window_truth(const Dataset& data, const std::vector<std::size_t>& starts);

struct HorizonMetrics {
  std::size_t step = 0;  // 1-based
  double mae = 0.0;
  double rmse = 0.0;
  double mape_percent = 0.0;
  std::size_t count = 0;       // observed entries
  std::size_t mape_count = 0;  // observed entries with truth != 0
  bool defined() const { return count > 0; }
};

/// Metrics over (W, Q, N) arrays at the given 1-based horizon steps. Steps
/// with no observed entries come back with count 0 and NaN metrics.
std::vector<HorizonMetrics> masked_metrics(const std::vector<double>& pred, const std::vector<double>& truth,
                                           const std::vector<std::uint8_t>& observed, std::size_t q,
                                           std::size_t n, const std::vector<std::size_t>& steps);

/// Masked MAE over every entry of (W, Q, N).
double masked_mae(const std::vector<double>& pred, const std::vector<double>& truth,
                  const std::vector<std::uint8_t>& observed);

/// Steps 3, 6 and Q (deduplicated, clipped to Q).
std::vector<std::size_t> report_steps(std::size_t q);

void write_report_csv(const std::vector<HorizonMetrics>& rows, std::ostream& out,
                      const std::string& label_column = {}, const std::string& label = {});

/// Last observed value per sensor repeated Q times. history is P x N with a
/// matching mask; sensors never observed fall back to `fallback`.
std::vector<double> last_repeat(const std::vector<double>& history,
                                const std::vector<std::uint8_t>& observed, std::size_t p,
                                std::size_t n, std::size_t q, double fallback);

/// LastRepeat over dataset windows, (W, Q, N) in mph.
std::vector<double> last_repeat(const Dataset& data, const std::vector<std::size_t>& starts);

// ---- synthetic ring fixture ------------------------------------------------

struct SyntheticConfig {
  std::size_t n_sensors = 20;
  std::size_t n_days = 28;
  std::uint64_t seed = 0;
  double spacing_miles = 1.5;
  double free_flow_mph = 60.0;
  double pulse_rate = 0.004;  // per sensor-step
  double pulse_min = 10.0;
  double pulse_max = 25.0;
  std::size_t pulse_length = 6;
  std::size_t pulse_hops = 8;
  double pulse_decay = 0.92;
  double activity_amplitude = 15.0;
  double noise_mph = 1.0;
  double missing_rate = 0.02;
  std::size_t survey_rows = 20000;
};

struct Pulse {
  std::size_t sensor = 0;
  std::size_t step = 0;
  double amplitude = 0.0;
};

struct SyntheticBundle {
  RoadGraph graph;
  std::vector<Sensor> sensors;
  TrafficSeries series;
  std::vector<SurveyRow> survey;
  std::vector<Pulse> pulses;
  std::vector<std::size_t> morning_sensors;  // driven by category 2 (work)
  std::vector<std::size_t> evening_sensors;  // driven by category 4 (shopping)
};

inline constexpr int kMorningCategory = 2;
inline constexpr int kEveningCategory = 4;

/// Congestion (mph) planted by the activity curves at sensor i, step t.
double activity_congestion(const SyntheticConfig& config, const SyntheticBundle& bundle, std::size_t i,
                           Timestamp t);

SyntheticBundle make_synthetic_dataset(const SyntheticConfig& config);

/// Start of the synthetic series (a Monday).
Timestamp synthetic_start();

/// Sets up malloc so the large short-lived tape buffers are recycled instead
/// of being returned to the OS after each batch. Idempotent.
void tune_allocator();

}  // namespace uagc::training
