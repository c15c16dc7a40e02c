#include "uagc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <nlohmann/json.hpp>

#include "uagc/error.hpp"
#include "uagc/optim.hpp"
#include "uagc/rng.hpp"
#include "uagc/text.hpp"

namespace uagc::training {

using ad::Shape;
using ad::Tensor;

// ---- series I/O ------------------------------------------------------------

TrafficSeries load_traffic_csv(std::istream& in, const std::vector<std::string>* expected_ids,
                               const LoadOptions& options) {
  TrafficSeries s;
  std::string line;
  if (!std::getline(in, line)) throw InputError("traffic csv: missing header");
  const auto header = split(trim(line), ',');
  if (header.empty() || trim(header[0]) != "timestamp")
    throw InputError("traffic csv line 1: header must start with 'timestamp'");
  for (std::size_t i = 1; i < header.size(); ++i) {
    const auto id = trim(header[i]);
    if (id.empty()) throw InputError("traffic csv line 1: empty sensor id in column " + std::to_string(i + 1));
    s.sensor_ids.emplace_back(id);
  }
  if (s.sensor_ids.empty()) throw InputError("traffic csv line 1: no sensor columns");
  if (expected_ids && *expected_ids != s.sensor_ids) {
    std::size_t i = 0;
    while (i < expected_ids->size() && i < s.sensor_ids.size() && (*expected_ids)[i] == s.sensor_ids[i]) ++i;
    throw InputError("traffic csv line 1: sensor columns do not match the sensor list (first difference at column " +
                     std::to_string(i + 2) + ")");
  }
  const std::size_t n = s.sensor_ids.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split(t, ',');
    auto fail = [&](const std::string& msg) {
      throw InputError("traffic csv line " + std::to_string(line_no) + ": " + msg);
    };
    if (fields.size() != n + 1)
      fail("expected " + std::to_string(n + 1) + " fields, got " + std::to_string(fields.size()));
    Timestamp ts;
    try {
      ts = Timestamp::parse(trim(fields[0]));
    } catch (const InputError& e) {
      fail(e.what());
    }
    if (!s.timestamps.empty() && ts.minutes - s.timestamps.back().minutes != options.step_minutes)
      fail("irregular timestamp spacing (" + ts.iso() + " follows " + s.timestamps.back().iso() + ")");
    s.timestamps.push_back(ts);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cell = trim(fields[i + 1]);
      double v = 0.0;
      bool ok = !cell.empty();
      if (ok) {
        try {
          v = parse_double(cell);
        } catch (const InputError&) {
          fail("bad speed '" + std::string(cell) + "' for sensor " + s.sensor_ids[i]);
        }
        if (!std::isfinite(v)) fail("non-finite speed for sensor " + s.sensor_ids[i]);
        if (v == 0.0 && options.zero_is_missing) ok = false;
      }
      s.values.push_back(ok ? v : 0.0);
      s.observed.push_back(ok ? 1 : 0);
    }
  }
  if (s.timestamps.empty()) throw InputError("traffic csv: no rows");
  return s;
}

void write_traffic_csv(const TrafficSeries& series, std::ostream& out) {
  out << "timestamp";
  for (const auto& id : series.sensor_ids) out << ',' << id;
  out << '\n';
  const std::size_t n = series.sensors();
  for (std::size_t t = 0; t < series.steps(); ++t) {
    out << series.timestamps[t].iso();
    for (std::size_t i = 0; i < n; ++i) {
      out << ',';
      if (series.is_observed(t, i)) out << format_double(series.value(t, i));
    }
    out << '\n';
  }
}

// ---- standardization and splits ----------------------------------------------

Scaler fit_scaler(const TrafficSeries& series, Range range) {
  if (range.size() == 0) throw UsageError("standardize: empty training range");
  double sum = 0.0;
  std::size_t count = 0;
  const std::size_t n = series.sensors();
  for (std::size_t t = range.begin; t < range.end; ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (series.is_observed(t, i)) {
        sum += series.value(t, i);
        ++count;
      }
  if (count == 0) throw NumericError("standardize: no observed training values");
  const double mean = sum / static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t t = range.begin; t < range.end; ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (series.is_observed(t, i)) ss += (series.value(t, i) - mean) * (series.value(t, i) - mean);
  const double sd = std::sqrt(ss / static_cast<double>(count));
  if (!(sd > 1e-12)) throw NumericError("standardize: training data has zero standard deviation");
  return {mean, sd};
}

std::vector<double> standardize(const TrafficSeries& series, const Scaler& scaler) {
  std::vector<double> z(series.values.size(), 0.0);
  for (std::size_t k = 0; k < z.size(); ++k)
    if (series.observed[k]) z[k] = scaler.apply(series.values[k]);
  return z;
}

std::vector<std::size_t> DatasetSplit::windows(Range range, std::size_t stride) const {
  std::vector<std::size_t> out;
  if (stride == 0) throw UsageError("window stride must be positive");
  for (std::size_t s = range.begin; s + p + q <= range.end; s += stride) out.push_back(s);
  return out;
}

DatasetSplit split_dataset(const TrafficSeries& series, std::size_t p, std::size_t q,
                           double train_fraction, double val_fraction) {
  if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction >= 1.0)
    throw UsageError("split fractions must satisfy 0 < train, 0 <= val, train + val < 1");
  const std::size_t t = series.steps();
  DatasetSplit s;
  s.p = p;
  s.q = q;
  const auto train_end = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(t)));
  const auto val_end =
      static_cast<std::size_t>(std::llround((train_fraction + val_fraction) * static_cast<double>(t)));
  s.train = {0, train_end};
  s.val = {train_end, val_end};
  s.test = {val_end, t};
  s.scaler = fit_scaler(series, s.train);
  return s;
}

// ---- dataset ---------------------------------------------------------------

Dataset::Dataset(TrafficSeries series, DatasetSplit split, models::EmbeddingMode mode,
                 std::optional<ActivityTable> normalized_activity)
    : series_(std::move(series)), split_(split), mode_(mode), activity_(std::move(normalized_activity)) {
  if (mode_ == models::EmbeddingMode::activity && !activity_)
    throw UsageError("activity embedding requires an activity table");
  standardized_ = standardize(series_, split_.scaler);
}

std::vector<double> context_window(models::EmbeddingMode mode, const ActivityTable* activity, Timestamp start,
                                   std::size_t p, std::size_t q) {
  switch (mode) {
    case models::EmbeddingMode::activity:
      if (!activity) throw UsageError("activity embedding requires an activity table");
      return slice_window(*activity, start, p, q);
    case models::EmbeddingMode::timestamp: {
      std::vector<double> rows;
      rows.reserve((p + q) * kTimestampFeatureSize);
      for (std::size_t s = 0; s < p + q; ++s) {
        const auto f = timestamp_feature(start.plus_minutes(static_cast<std::int64_t>(s) * kBinMinutes));
        rows.insert(rows.end(), f.begin(), f.end());
      }
      return rows;
    }
    case models::EmbeddingMode::none:
      break;
  }
  return {};
}

std::vector<double> Dataset::context_rows(Timestamp start) const {
  return context_window(mode_, activity_ ? &*activity_ : nullptr, start, split_.p, split_.q);
}

models::Batch Dataset::batch(const std::vector<std::size_t>& starts) const {
  const std::size_t b = starts.size(), n = sensors(), P = split_.p, Q = split_.q;
  models::Batch out;
  out.size = b;
  out.history = Tensor(Shape{b, P, n});
  out.target = Tensor(Shape{b, Q, n});
  out.mask = Tensor(Shape{b, Q, n});
  std::size_t width = 0;
  if (mode_ == models::EmbeddingMode::activity) width = activity_->categories();
  if (mode_ == models::EmbeddingMode::timestamp) width = kTimestampFeatureSize;
  if (width) out.context = Tensor(Shape{b, P + Q, width});
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t s = starts[k];
    if (s + P + Q > series_.steps()) throw UsageError("window exceeds the series");
    std::copy_n(standardized_.data() + s * n, P * n, out.history.data() + k * P * n);
    std::copy_n(standardized_.data() + (s + P) * n, Q * n, out.target.data() + k * Q * n);
    for (std::size_t j = 0; j < Q * n; ++j) out.mask[k * Q * n + j] = series_.observed[(s + P) * n + j];
    if (width) {
      const auto rows = context_rows(series_.timestamps[s]);
      std::copy(rows.begin(), rows.end(), out.context.data() + k * (P + Q) * width);
    }
  }
  return out;
}

// ---- training --------------------------------------------------------------

std::string to_jsonl(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_mae"] = r.train_mae;
  j["val_mae"] = r.val_mae;
  j["lr"] = r.lr;
  j["seconds"] = r.seconds;
  return j.dump();
}

void tune_allocator() {
#ifdef __GLIBC__
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

namespace {

std::vector<Tensor> snapshot(const ad::ParameterSet& params) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(params[i].value);
  return out;
}

}  // namespace

TrainResult train(models::Model& model, const Dataset& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  tune_allocator();
  const auto& split = data.split();
  if (model.config().n_sensors != data.sensors())
    throw UsageError("model has " + std::to_string(model.config().n_sensors) + " sensors, data has " +
                     std::to_string(data.sensors()));
  if (model.config().p != split.p || model.config().q != split.q)
    throw UsageError("model and dataset disagree on P/Q");
  if (config.batch_size == 0) throw UsageError("batch size must be positive");
  const auto train_windows = split.windows(split.train, config.window_stride);
  const auto val_windows = split.windows(split.val);
  if (train_windows.empty()) throw UsageError("training range too short for one window");
  if (val_windows.empty()) throw UsageError("validation range too short for one window");
  const auto val_truth = window_truth(data, val_windows);

  ad::Adam opt(model.params(), {.lr = config.lr});
  TrainResult result;
  result.best_val_mae = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best = snapshot(model.params());
  std::size_t bad = 0, lr_bad = 0, global_batch = 0;
  double lr = config.lr;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(config.seed, 0x5452, epoch));
    auto order = train_windows;
    shuffle(order, rng);
    double loss_sum = 0.0, weight_sum = 0.0;
    for (std::size_t b0 = 0, bi = 0; b0 < order.size(); b0 += config.batch_size, ++bi, ++global_batch) {
      const std::vector<std::size_t> starts(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                            order.begin() + static_cast<std::ptrdiff_t>(
                                                                std::min(order.size(), b0 + config.batch_size)));
      const auto batch = data.batch(starts);
      double observed = 0.0;
      for (const double m : batch.mask.values()) observed += m;
      if (observed == 0.0) continue;

      model.params().zero_grad();
      ad::Tape tape;
      models::ForwardOptions fo{.teacher_forcing = true};
      if (config.sampling_k > 0.0) {
        const double k = config.sampling_k;
        fo.teacher_probability = k / (k + std::exp(static_cast<double>(global_batch) / k));
        fo.sampler = &rng;
      }
      const auto pred = model.forward(tape, batch, fo);
      const auto loss = ad::masked_mae(pred, batch.target, batch.mask);
      const double lv = loss.value()[0];
      if (!std::isfinite(lv))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
      tape.backward(loss);
      opt.step();
      loss_sum += lv * observed;
      weight_sum += observed;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_mae = weight_sum > 0.0 ? loss_sum / weight_sum * data.scaler().std : 0.0;
    rec.val_mae = masked_mae(predict(model, data, val_windows), val_truth.values, val_truth.observed);
    if (!std::isfinite(rec.val_mae))
      throw NumericError("non-finite validation MAE at epoch " + std::to_string(epoch));
    rec.seconds = config.record_time
                      ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                      : 0.0;
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_mae < result.best_val_mae) {
      result.best_val_mae = rec.val_mae;
      result.best_epoch = epoch;
      best = snapshot(model.params());
      bad = lr_bad = 0;
    } else {
      ++bad;
      if (++lr_bad >= config.lr_patience) {
        lr *= config.lr_factor;
        opt.set_lr(lr);
        lr_bad = 0;
      }
      if (bad >= config.patience) break;
    }
  }

  for (std::size_t i = 0; i < best.size(); ++i) model.params()[i].value = std::move(best[i]);
  std::ostringstream ckpt;
  models::save_checkpoint(model.params(), ckpt);
  result.best_checkpoint = ckpt.str();
  return result;
}

std::vector<double> predict(models::Model& model, const Dataset& data, const std::vector<std::size_t>& starts,
                            std::size_t batch_size) {
  const std::size_t q = data.split().q, n = data.sensors();
  std::vector<double> out;
  out.reserve(starts.size() * q * n);
  for (std::size_t b0 = 0; b0 < starts.size(); b0 += batch_size) {
    const std::vector<std::size_t> chunk(starts.begin() + static_cast<std::ptrdiff_t>(b0),
                                         starts.begin() + static_cast<std::ptrdiff_t>(
                                                              std::min(starts.size(), b0 + batch_size)));
    ad::Tape tape;
    const auto y = model.forward(tape, data.batch(chunk));
    for (const double v : y.value().values()) out.push_back(data.scaler().invert(v));
  }
  return out;
}

Truth window_truth(const Dataset& data, const std::vector<std::size_t>& starts) {
  const auto& s = data.series();
  const std::size_t p = data.split().p, q = data.split().q, n = s.sensors();
  Truth t;
  t.values.reserve(starts.size() * q * n);
  t.observed.reserve(starts.size() * q * n);
  for (const auto st : starts) {
    const std::size_t off = (st + p) * n;
    t.values.insert(t.values.end(), s.values.begin() + static_cast<std::ptrdiff_t>(off),
                    s.values.begin() + static_cast<std::ptrdiff_t>(off + q * n));
    t.observed.insert(t.observed.end(), s.observed.begin() + static_cast<std::ptrdiff_t>(off),
                      s.observed.begin() + static_cast<std::ptrdiff_t>(off + q * n));
  }
  return t;
}

// ---- metrics ---------------------------------------------------------------

std::vector<HorizonMetrics> masked_metrics(const std::vector<double>& pred, const std::vector<double>& truth,
                                           const std::vector<std::uint8_t>& observed, std::size_t q,
                                           std::size_t n, const std::vector<std::size_t>& steps) {
  if (pred.size() != truth.size() || pred.size() != observed.size())
    throw ShapeError("metrics: prediction, truth and mask sizes differ");
  if (q == 0 || n == 0 || pred.size() % (q * n) != 0) throw ShapeError("metrics: size is not a multiple of Q x N");
  const std::size_t w = pred.size() / (q * n);
  std::vector<HorizonMetrics> out;
  for (const auto step : steps) {
    if (step == 0 || step > q)
      throw UsageError("horizon step " + std::to_string(step) + " outside 1.." + std::to_string(q));
    HorizonMetrics m;
    m.step = step;
    double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
    for (std::size_t k = 0; k < w; ++k)
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = (k * q + step - 1) * n + i;
        if (!observed[idx]) continue;
        const double e = pred[idx] - truth[idx];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        ++m.count;
        if (truth[idx] != 0.0) {
          pct_sum += std::abs(e) / std::abs(truth[idx]);
          ++m.mape_count;
        }
      }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.mae = m.count ? abs_sum / static_cast<double>(m.count) : nan;
    m.rmse = m.count ? std::sqrt(sq_sum / static_cast<double>(m.count)) : nan;
    m.mape_percent = m.mape_count ? 100.0 * pct_sum / static_cast<double>(m.mape_count) : nan;
    out.push_back(m);
  }
  return out;
}

double masked_mae(const std::vector<double>& pred, const std::vector<double>& truth,
                  const std::vector<std::uint8_t>& observed) {
  if (pred.size() != truth.size() || pred.size() != observed.size())
    throw ShapeError("metrics: prediction, truth and mask sizes differ");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    if (observed[k]) {
      sum += std::abs(pred[k] - truth[k]);
      ++count;
    }
  return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::size_t> report_steps(std::size_t q) {
  std::vector<std::size_t> steps;
  for (const std::size_t s : {std::size_t{3}, std::size_t{6}, q})
    if (s >= 1 && s <= q && std::find(steps.begin(), steps.end(), s) == steps.end()) steps.push_back(s);
  std::sort(steps.begin(), steps.end());
  return steps;
}

void write_report_csv(const std::vector<HorizonMetrics>& rows, std::ostream& out, const std::string& label_column,
                      const std::string& label) {
  if (!label_column.empty()) out << label_column << ',';
  out << "horizon_step,mae,rmse,mape_percent\n";
  for (const auto& r : rows) {
    if (!label_column.empty()) out << label << ',';
    out << r.step << ',' << format_double(r.mae) << ',' << format_double(r.rmse) << ','
        << format_double(r.mape_percent) << '\n';
  }
}

std::vector<double> last_repeat(const std::vector<double>& history, const std::vector<std::uint8_t>& observed,
                                std::size_t p, std::size_t n, std::size_t q, double fallback) {
  if (history.size() != p * n || observed.size() != p * n) throw ShapeError("last_repeat: history is not P x N");
  if (p == 0) throw UsageError("last_repeat: P must be >= 1");
  std::vector<double> last(n, fallback);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = p; t-- > 0;)
      if (observed[t * n + i]) {
        last[i] = history[t * n + i];
        break;
      }
  std::vector<double> out;
  out.reserve(q * n);
  for (std::size_t s = 0; s < q; ++s) out.insert(out.end(), last.begin(), last.end());
  return out;
}

std::vector<double> last_repeat(const Dataset& data, const std::vector<std::size_t>& starts) {
  const auto& s = data.series();
  const std::size_t p = data.split().p, q = data.split().q, n = s.sensors();
  std::vector<double> out;
  out.reserve(starts.size() * q * n);
  for (const auto st : starts) {
    const auto off = static_cast<std::ptrdiff_t>(st * n);
    const std::vector<double> h(s.values.begin() + off, s.values.begin() + off + static_cast<std::ptrdiff_t>(p * n));
    const std::vector<std::uint8_t> m(s.observed.begin() + off,
                                      s.observed.begin() + off + static_cast<std::ptrdiff_t>(p * n));
    const auto r = last_repeat(h, m, p, n, q, data.scaler().mean);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

// ---- synthetic ring --------------------------------------------------------

Timestamp synthetic_start() { return Timestamp::from_civil(2012, 3, 5); }

namespace {

constexpr LatLon kRingCentre{34.05, -118.25};
constexpr int kMorningPeakMinute = 7 * 60 + 30;
constexpr int kEveningPeakMinute = 17 * 60 + 30;
constexpr double kMorningWidth = 40.0;
constexpr double kEveningWidth = 45.0;

LatLon offset_miles(LatLon c, double north, double east) {
  const double per_lon = kEarthRadiusMiles * std::numbers::pi / 180.0 * std::cos(c.lat * std::numbers::pi / 180.0);
  const double per_lat = kEarthRadiusMiles * std::numbers::pi / 180.0;
  return {c.lat + north / per_lat, c.lon + east / per_lon};
}

double bump(int minute, int peak, double width) {
  const double d = minute - peak;
  return std::exp(-d * d / (2.0 * width * width));
}

std::vector<std::size_t> sensor_group(std::size_t n, std::size_t first) {
  return {first % n, (first + 1) % n, (first + 2) % n};
}

int wrap_minute(double m) {
  auto v = static_cast<int>(std::lround(m)) % kMinutesPerDay;
  return v < 0 ? v + kMinutesPerDay : v;
}

}  // namespace

double activity_congestion(const SyntheticConfig& config, const SyntheticBundle& bundle, std::size_t i,
                           Timestamp t) {
  double c = 0.0;
  const int minute = t.minute_of_day();
  if (t.weekday() < 5 && std::count(bundle.morning_sensors.begin(), bundle.morning_sensors.end(), i))
    c += config.activity_amplitude * bump(minute, kMorningPeakMinute, kMorningWidth);
  if (std::count(bundle.evening_sensors.begin(), bundle.evening_sensors.end(), i))
    c += config.activity_amplitude * bump(minute, kEveningPeakMinute, kEveningWidth);
  return c;
}

SyntheticBundle make_synthetic_dataset(const SyntheticConfig& config) {
  const std::size_t n = config.n_sensors;
  if (n < 4) throw UsageError("synthetic dataset needs at least 4 sensors");
  if (config.n_days == 0) throw UsageError("synthetic dataset needs at least one day");
  SyntheticBundle out;
  out.morning_sensors = sensor_group(n, n / 10);
  out.evening_sensors = sensor_group(n, 3 * n / 5);

  // One-way freeway ring with a midpoint node between consecutive sensors,
  // plus two-way surface spokes from every fifth sensor node to a hub.
  const std::size_t ring = 2 * n;
  const double radius = config.spacing_miles * static_cast<double>(n) / (2.0 * std::numbers::pi);
  std::vector<RoadNode> nodes;
  char buf[32];
  for (std::size_t j = 0; j < ring; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(ring);
    std::snprintf(buf, sizeof buf, "r%03zu", j);
    nodes.push_back({buf, offset_miles(kRingCentre, radius * std::cos(a), radius * std::sin(a))});
  }
  nodes.push_back({"hub", kRingCentre});
  std::vector<EdgeRecord> edges;
  for (std::size_t j = 0; j < ring; ++j) {
    const auto& a = nodes[j];
    const auto& b = nodes[(j + 1) % ring];
    std::snprintf(buf, sizeof buf, "f%03zu", j);
    edges.push_back({buf, a.id, b.id, haversine_miles(a.pos, b.pos), true});
  }
  for (std::size_t i = 0; i < n; i += 5) {
    const auto& a = nodes[2 * i];
    const double len = 1.2 * haversine_miles(a.pos, kRingCentre);
    std::snprintf(buf, sizeof buf, "s%03zu", i);
    edges.push_back({std::string(buf) + "i", a.id, "hub", len, false});
    edges.push_back({std::string(buf) + "o", "hub", a.id, len, false});
  }
  out.graph = RoadGraph::build(nodes, edges);

  auto& series = out.series;
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "s%02zu", i);
    series.sensor_ids.emplace_back(buf);
    const double a = 2.0 * std::numbers::pi * static_cast<double>(2 * i) / static_cast<double>(ring);
    const double r = radius + 0.01;  // a few yards off the carriageway
    out.sensors.push_back({buf, offset_miles(kRingCentre, r * std::cos(a), r * std::sin(a)), std::nullopt, 0.0});
  }

  const std::size_t steps = config.n_days * kBinsPerDay;
  const Timestamp start = synthetic_start();
  for (std::size_t t = 0; t < steps; ++t)
    series.timestamps.push_back(start.plus_minutes(static_cast<std::int64_t>(t) * kBinMinutes));

  Rng pulse_rng(derive_seed(config.seed, 1));
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i)
      if (pulse_rng.bernoulli(config.pulse_rate))
        out.pulses.push_back({i, t, pulse_rng.uniform(config.pulse_min, config.pulse_max)});

  // A pulse at (i, t) reaches sensor i+k at step t+k, decaying per hop, and
  // fades linearly over pulse_length steps at each sensor.
  std::vector<double> depression(steps * n, 0.0);
  for (const auto& p : out.pulses)
    for (std::size_t k = 0; k <= config.pulse_hops; ++k) {
      const double amp = p.amplitude * std::pow(config.pulse_decay, static_cast<double>(k));
      const std::size_t s = (p.sensor + k) % n;
      for (std::size_t tau = 0; tau < config.pulse_length; ++tau) {
        const std::size_t t = p.step + k + tau;
        if (t >= steps) break;
        depression[t * n + s] +=
            amp * (1.0 - static_cast<double>(tau) / static_cast<double>(config.pulse_length));
      }
    }

  Rng noise_rng(derive_seed(config.seed, 2));
  Rng mask_rng(derive_seed(config.seed, 3));
  series.values.resize(steps * n);
  series.observed.resize(steps * n);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      double v = config.free_flow_mph - depression[t * n + i] -
                 activity_congestion(config, out, i, series.timestamps[t]);
      if (config.noise_mph > 0.0) v += config.noise_mph * noise_rng.normal();
      v = std::round(std::clamp(v, 3.0, 70.0) * 100.0) / 100.0;
      const bool seen = !mask_rng.bernoulli(config.missing_rate);
      series.values[t * n + i] = seen ? v : 0.0;
      series.observed[t * n + i] = seen ? 1 : 0;
    }

  // Survey: peaked work and shopping trips over a uniform background.
  Rng survey_rng(derive_seed(config.seed, 4));
  for (std::size_t r = 0; r < config.survey_rows; ++r) {
    const double u = survey_rng.uniform();
    SurveyRow row;
    if (u < 0.3) {
      row.category = kMorningCategory;
      row.weekday = static_cast<int>(survey_rng.below(5));
      row.start_minute = wrap_minute(kMorningPeakMinute + kMorningWidth * survey_rng.normal());
    } else if (u < 0.6) {
      row.category = kEveningCategory;
      row.weekday = static_cast<int>(survey_rng.below(7));
      row.start_minute = wrap_minute(kEveningPeakMinute + kEveningWidth * survey_rng.normal());
    } else {
      row.category = 1 + static_cast<int>(survey_rng.below(kDefaultActivityCategories));
      row.weekday = static_cast<int>(survey_rng.below(7));
      row.start_minute = static_cast<int>(survey_rng.below(kMinutesPerDay));
    }
    out.survey.push_back(row);
  }
  return out;
}

}  // namespace uagc::training
