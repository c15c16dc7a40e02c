#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "uagc/error.hpp"
#include "uagc/training.hpp"

using namespace uagc;
using namespace uagc::training;

namespace {

TrafficSeries load(const std::string& text, const std::vector<std::string>* ids = nullptr) {
  std::istringstream in(text);
  return load_traffic_csv(in, ids);
}

TrafficSeries constant_series(std::size_t steps, std::size_t n, double v) {
  TrafficSeries s;
  for (std::size_t i = 0; i < n; ++i) s.sensor_ids.push_back("x" + std::to_string(i));
  for (std::size_t t = 0; t < steps; ++t) s.timestamps.push_back(synthetic_start().plus_minutes(5 * t));
  s.values.assign(steps * n, v);
  s.observed.assign(steps * n, 1);
  return s;
}


// A week of a 6-sensor ring with a tiny model: fast enough for unit tests.
const fixtures::RingPipeline& small_ring() {
  static const auto ring = [] {
    SyntheticConfig c;
    c.n_sensors = 6;
    c.n_days = 7;
    c.survey_rows = 3000;
    c.seed = 5;
    return fixtures::build_ring(c);
  }();
  return ring;
}

models::ModelConfig small_model(models::Architecture arch = models::Architecture::gcrn) {
  models::ModelConfig c;
  c.architecture = arch;
  c.n_sensors = 6;
  c.d_model = 4;
  c.p = 3;
  c.q = 3;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_key = 2;
  return c;
}

Dataset small_dataset() {
  const auto& r = small_ring();
  return Dataset(r.bundle.series, split_dataset(r.bundle.series, 3, 3), models::EmbeddingMode::activity, r.activity);
}

TrainConfig quick(std::size_t epochs, double lr = 0.01) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.lr = lr;
  c.window_stride = 12;
  c.batch_size = 16;
  c.record_time = false;
  c.seed = 9;
  return c;
}

}  // namespace

TEST(TrafficCsv, BlankAndZeroCellsAreMissing) {
  const auto s = load("timestamp,a,b\n2012-03-05T00:00:00,55.5,60\n2012-03-05T00:05:00,,61\n2012-03-05 00:10,0,62.25\n");
  ASSERT_EQ(s.steps(), 3u);
  ASSERT_EQ(s.sensors(), 2u);
  EXPECT_EQ(std::count(s.observed.begin(), s.observed.end(), 0), 2);
  EXPECT_FALSE(s.is_observed(1, 0));
  EXPECT_FALSE(s.is_observed(2, 0));
  EXPECT_DOUBLE_EQ(s.value(2, 1), 62.25);
  const auto one_blank = load("timestamp,a,b\n2012-03-05T00:00:00,1,2\n2012-03-05T00:05:00,,3\n2012-03-05T00:10:00,4,5\n");
  EXPECT_EQ(std::count(one_blank.observed.begin(), one_blank.observed.end(), 0), 1);

  std::istringstream in("timestamp,a\n2012-03-05T00:00:00,0\n");
  LoadOptions keep;
  keep.zero_is_missing = false;
  EXPECT_TRUE(load_traffic_csv(in, nullptr, keep).is_observed(0, 0));
}

TEST(TrafficCsv, RoundTrip) {
  const auto& s = small_ring().bundle.series;
  std::stringstream ss;
  write_traffic_csv(s, ss);
  const auto back = load_traffic_csv(ss, &s.sensor_ids);
  EXPECT_EQ(back.sensor_ids, s.sensor_ids);
  EXPECT_EQ(back.timestamps, s.timestamps);
  EXPECT_EQ(back.values, s.values);
  EXPECT_EQ(back.observed, s.observed);
}

TEST(TrafficCsv, Errors) {
  auto expect_line = [](const std::string& text, const std::string& needle) {
    try {
      load(text);
      ADD_FAILURE() << "no error for: " << text;
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_line("timestamp,a\n2012-03-05T00:00:00,1\n2012-03-05T00:15:00,2\n", "line 3");
  expect_line("timestamp,a\n2012-03-05T00:00:00,1\n2012-03-05T00:05:00,fast\n", "line 3");
  expect_line("timestamp,a\n2012-03-05T00:00:00,1,2\n", "line 2");
  expect_line("timestamp,a\n2012-03-05T00:00:00,nan\n", "non-finite");
  expect_line("time,a\n", "header");
  expect_line("timestamp,a\n", "no rows");
  const std::vector<std::string> ids{"a", "c"};
  EXPECT_THROW(load("timestamp,a,b\n2012-03-05T00:00:00,1,2\n", &ids), InputError);
}

TEST(Standardize, MeanAndStdFixture) {
  // 34 and 74 in equal numbers: mean 54, population std 20.
  auto s = constant_series(4, 2, 34.0);
  for (std::size_t k = 0; k < 8; k += 2) s.values[k] = 74.0;
  s.observed[7] = 0;
  s.values[7] = 0.0;
  s.observed[5] = 0;  // drop one of each so the balance holds
  s.values[5] = 0.0;
  s.observed[4] = 0;
  s.observed[6] = 0;
  const auto sc = fit_scaler(s, {0, 4});
  EXPECT_DOUBLE_EQ(sc.mean, 54.0);
  EXPECT_DOUBLE_EQ(sc.std, 20.0);
  EXPECT_DOUBLE_EQ(sc.apply(54.0), 0.0);
  const auto z = standardize(s, sc);
  EXPECT_DOUBLE_EQ(z[0], 1.0);
  EXPECT_DOUBLE_EQ(z[1], -1.0);
  EXPECT_EQ(z[7], 0.0);  // missing -> standardized mean
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = r.uniform(0, 80);
    EXPECT_NEAR(sc.invert(sc.apply(x)), x, 1e-12);
  }
}

TEST(Standardize, Errors) {
  EXPECT_THROW(fit_scaler(constant_series(10, 2, 60.0), {0, 10}), NumericError);
  EXPECT_THROW(fit_scaler(constant_series(10, 2, 60.0), {3, 3}), UsageError);
  auto s = constant_series(10, 2, 60.0);
  std::fill(s.observed.begin(), s.observed.end(), 0);
  EXPECT_THROW(fit_scaler(s, {0, 10}), NumericError);
}

TEST(Split, ChronologicalWithTrainOnlyScaler) {
  auto s = constant_series(100, 1, 50.0);
  for (std::size_t t = 0; t < 100; ++t) s.values[t] = static_cast<double>(t);
  s.observed[0] = 1;
  const auto sp = split_dataset(s, 3, 2);
  EXPECT_EQ(sp.train.end, 70u);
  EXPECT_EQ(sp.val.begin, 70u);
  EXPECT_EQ(sp.val.end, 80u);
  EXPECT_EQ(sp.test.end, 100u);
  EXPECT_DOUBLE_EQ(sp.scaler.mean, 34.5);  // mean of 0..69
  const auto w = sp.windows(sp.val);
  ASSERT_FALSE(w.empty());
  EXPECT_EQ(w.front(), 70u);
  EXPECT_EQ(w.back() + 5, 80u);  // never straddles the boundary
  EXPECT_EQ(sp.windows(sp.train, 4).size(), 17u);
  EXPECT_THROW(split_dataset(s, 3, 2, 0.9, 0.1), UsageError);
  EXPECT_THROW(sp.windows(sp.val, 0), UsageError);
}

TEST(DatasetBatch, AlignsHistoryTargetMaskAndContext) {
  const auto data = small_dataset();
  const auto& s = data.series();
  const std::size_t n = 6;
  const auto b = data.batch({10, 500});
  ASSERT_EQ(b.history.shape(), (ad::Shape{2, 3, n}));
  ASSERT_EQ(b.context.shape(), (ad::Shape{2, 6, 9}));
  for (std::size_t k = 0; k < 2; ++k) {
    const std::size_t st = k == 0 ? 10 : 500;
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t i = 0; i < n; ++i) {
        const double h = s.is_observed(st + t, i) ? data.scaler().apply(s.value(st + t, i)) : 0.0;
        EXPECT_DOUBLE_EQ(b.history[(k * 3 + t) * n + i], h);
        EXPECT_EQ(b.mask[(k * 3 + t) * n + i], s.is_observed(st + 3 + t, i) ? 1.0 : 0.0);
      }
    const auto rows = data.context_rows(s.timestamps[st]);
    for (std::size_t j = 0; j < rows.size(); ++j) EXPECT_EQ(b.context[k * rows.size() + j], rows[j]);
  }
  EXPECT_THROW(data.batch({s.steps() - 2}), UsageError);
}

TEST(Metrics, HandComputedFixture) {
  // W=1, Q=2, N=2: step 1 row (1,2) vs (2,4); step 2 row exact.
  const std::vector<double> pred{1, 2, 5, 6}, truth{2, 4, 5, 6};
  const std::vector<std::uint8_t> all{1, 1, 1, 1};
  const auto m = masked_metrics(pred, truth, all, 2, 2, {1, 2});
  EXPECT_NEAR(m[0].mae, 1.5, 1e-12);
  EXPECT_NEAR(m[0].rmse, std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(m[0].mape_percent, 50.0, 1e-12);
  EXPECT_EQ(m[1].mae, 0.0);
  EXPECT_EQ(m[1].rmse, 0.0);
  EXPECT_EQ(m[1].mape_percent, 0.0);
  const auto masked = masked_metrics(pred, truth, {1, 0, 1, 1}, 2, 2, {1});
  EXPECT_EQ(masked[0].count, 1u);
  EXPECT_NEAR(masked[0].mae, 1.0, 1e-12);
  EXPECT_NEAR(masked[0].mape_percent, 50.0, 1e-12);
  EXPECT_NEAR(masked_mae(pred, truth, all), 0.75, 1e-12);
}

TEST(Metrics, UndefinedAndErrors) {
  const std::vector<double> pred{1, 2}, truth{0, 4};
  const auto m = masked_metrics(pred, truth, {0, 0}, 1, 2, {1});
  EXPECT_FALSE(m[0].defined());
  EXPECT_TRUE(std::isnan(m[0].mae));
  const auto zero_truth = masked_metrics(pred, truth, {1, 0}, 1, 2, {1});
  EXPECT_EQ(zero_truth[0].mape_count, 0u);
  EXPECT_TRUE(std::isnan(zero_truth[0].mape_percent));
  EXPECT_EQ(zero_truth[0].mae, 1.0);
  EXPECT_THROW(masked_metrics(pred, truth, {1, 1}, 1, 2, {2}), UsageError);
  EXPECT_THROW(masked_metrics(pred, truth, {1, 1}, 1, 2, {0}), UsageError);
  EXPECT_THROW(masked_metrics(pred, {1.0}, {1}, 1, 2, {1}), ShapeError);
}

TEST(Metrics, HorizonIndexingMatchesRecomputation) {
  Rng r(3);
  const std::size_t w = 7, q = 12, n = 5;
  std::vector<double> pred(w * q * n), truth(w * q * n);
  std::vector<std::uint8_t> obs(w * q * n);
  for (std::size_t k = 0; k < pred.size(); ++k) {
    pred[k] = r.uniform(20, 70);
    truth[k] = r.uniform(20, 70);
    obs[k] = r.uniform() < 0.8;
  }
  EXPECT_EQ(report_steps(12), (std::vector<std::size_t>{3, 6, 12}));
  EXPECT_EQ(report_steps(9), (std::vector<std::size_t>{3, 6, 9}));
  EXPECT_EQ(report_steps(4), (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(report_steps(2), (std::vector<std::size_t>{2}));
  const auto m = masked_metrics(pred, truth, obs, q, n, report_steps(q));
  for (const auto& row : m) {
    double s = 0;
    std::size_t c = 0;
    for (std::size_t k = 0; k < w; ++k)
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = k * q * n + (row.step - 1) * n + i;
        if (obs[idx]) {
          s += std::abs(pred[idx] - truth[idx]);
          ++c;
        }
      }
    EXPECT_EQ(row.count, c);
    EXPECT_NEAR(row.mae, s / c, 1e-12);
  }
}

TEST(Report, CsvLayout) {
  HorizonMetrics a;
  a.step = 3;
  a.mae = 1.5;
  a.rmse = 2.0;
  a.mape_percent = 4.25;
  std::ostringstream out;
  write_report_csv({a}, out);
  EXPECT_EQ(out.str(), "horizon_step,mae,rmse,mape_percent\n3,1.5,2,4.25\n");
  std::ostringstream labelled;
  write_report_csv({a}, labelled, "model", "GCRN");
  EXPECT_EQ(labelled.str(), "model,horizon_step,mae,rmse,mape_percent\nGCRN,3,1.5,2,4.25\n");
}

TEST(LastRepeat, Rules) {
  // P=3, N=2; sensor 1 missing at the last step, sensor 0 never seen
  const std::vector<double> h{0, 50, 0, 60, 0, 0};
  const std::vector<std::uint8_t> m{0, 1, 0, 1, 0, 0};
  const auto y = last_repeat(h, m, 3, 2, 4, 54.0);
  ASSERT_EQ(y.size(), 8u);
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(y[s * 2], 54.0);
    EXPECT_EQ(y[s * 2 + 1], 60.0);
  }
  EXPECT_TRUE(last_repeat(h, m, 3, 2, 0, 54.0).empty());
  const std::vector<double> at60{60, 60};
  const auto all60 = last_repeat(at60, {1, 1}, 1, 2, 3, 0.0);
  for (const double v : all60) EXPECT_EQ(v, 60.0);
}

TEST(LastRepeat, ConstantDatasetHasZeroError) {
  auto s = constant_series(300, 3, 42.0);
  s.values[0] = 41.0;  // keep the std above zero
  const Dataset data(s, split_dataset(s, 4, 4), models::EmbeddingMode::none, std::nullopt);
  const auto w = data.split().windows(data.split().test);
  const auto t = window_truth(data, w);
  EXPECT_EQ(masked_mae(last_repeat(data, w), t.values, t.observed), 0.0);
}

TEST(Train, ZeroLearningRateLeavesParametersUntouched) {
  const auto data = small_dataset();
  models::Model m(small_model(), models::GraphOperators::from(small_ring().adjacency), 1);
  std::vector<ad::Tensor> before;
  for (std::size_t i = 0; i < m.params().size(); ++i) before.push_back(m.params()[i].value);
  auto cfg = quick(2, 0.0);
  cfg.patience = 10;
  const auto r = train(m, data, cfg);
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(m.params()[i].value, before[i]);
  // lr = 0: the shuffling seed cannot matter
  models::Model m2(small_model(), models::GraphOperators::from(small_ring().adjacency), 1);
  cfg.seed = 1234;
  train(m2, data, cfg);
  for (std::size_t i = 0; i < m.params().size(); ++i) EXPECT_EQ(m2.params()[i].value, before[i]);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto data = small_dataset();
  auto run_once = [&] {
    models::Model m(small_model(), models::GraphOperators::from(small_ring().adjacency), 3);
    std::string log;
    const auto r = train(m, data, quick(3), [&](const EpochRecord& e) { log += to_jsonl(e) + "\n"; });
    return std::make_pair(log, r.best_checkpoint);
  };
  const auto a = run_once(), b = run_once();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first.find("\"seconds\":0"), std::string::npos);
}

TEST(Train, LossFallsAndMetricsAreInMph) {
  const auto data = small_dataset();
  models::Model m(small_model(), models::GraphOperators::from(small_ring().adjacency), 3);
  auto cfg = quick(4);
  cfg.window_stride = 3;
  const auto r = train(m, data, cfg);
  ASSERT_GE(r.log.size(), 2u);
  EXPECT_LT(r.log.back().train_mae, r.log.front().train_mae);
  // the model holds the best epoch; its validation MAE recomputed in mph matches the log
  const auto vw = data.split().windows(data.split().val);
  const auto t = window_truth(data, vw);
  EXPECT_NEAR(masked_mae(predict(m, data, vw), t.values, t.observed), r.best_val_mae, 1e-9);
  // standardized-space MAE times std is the mph MAE
  const auto pred = predict(m, data, vw);
  double z = 0;
  std::size_t c = 0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    if (t.observed[k]) {
      z += std::abs(data.scaler().apply(pred[k]) - data.scaler().apply(t.values[k]));
      ++c;
    }
  EXPECT_NEAR(z / c * data.scaler().std, r.best_val_mae, 1e-9);
  // checkpoint bytes are those of the restored parameters
  std::ostringstream ck;
  models::save_checkpoint(m.params(), ck);
  EXPECT_EQ(ck.str(), r.best_checkpoint);
}

TEST(Train, EarlyStoppingAndLrSchedule) {
  // An lr this small cannot move any parameter, so every epoch after the first
  // is non-improving: lr drops x0.1 after each two bad epochs and training
  // stops once five have accumulated.
  const auto data = small_dataset();
  models::Model m(small_model(models::Architecture::lstm), {}, 3);
  auto cfg = quick(30, 1e-300);
  const auto r = train(m, data, cfg);
  EXPECT_EQ(r.best_epoch, 1u);
  ASSERT_EQ(r.log.size(), 6u);
  const double want[] = {1e-300, 1e-300, 1e-300, 1e-301, 1e-301, 1e-302};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.log[i].lr / want[i], 1.0, 1e-12) << i;

  // with a real learning rate the run still never outlives best_epoch + patience
  models::Model m2(small_model(models::Architecture::lstm), {}, 3);
  const auto r2 = train(m2, data, quick(30, 0.05));
  EXPECT_LE(r2.log.size(), r2.best_epoch + 5);
  for (std::size_t i = 1; i < r2.log.size(); ++i) EXPECT_LE(r2.log[i].lr, r2.log[i - 1].lr);
}

TEST(Train, Errors) {
  const auto data = small_dataset();
  auto bad = small_model();
  bad.n_sensors = 5;
  models::Model m(bad, {}, 1);
  EXPECT_THROW(train(m, data, quick(1)), UsageError);
  auto pq = small_model(models::Architecture::lstm);
  pq.q = 4;
  models::Model m2(pq, {}, 1);
  EXPECT_THROW(train(m2, data, quick(1)), UsageError);
  models::Model m3(small_model(models::Architecture::lstm), {}, 1);
  EXPECT_THROW(train(m3, data, quick(1, std::numeric_limits<double>::infinity())), NumericError);
}

TEST(Synthetic, SameSeedSameData) {
  SyntheticConfig c;
  c.n_sensors = 8;
  c.n_days = 2;
  c.survey_rows = 500;
  const auto a = make_synthetic_dataset(c), b = make_synthetic_dataset(c);
  EXPECT_EQ(a.series.values, b.series.values);
  EXPECT_EQ(a.series.observed, b.series.observed);
  EXPECT_EQ(a.survey.size(), b.survey.size());
  c.seed = 1;
  EXPECT_NE(make_synthetic_dataset(c).series.values, a.series.values);
  const double missing = std::count(a.series.observed.begin(), a.series.observed.end(), 0) /
                         static_cast<double>(a.series.observed.size());
  EXPECT_NEAR(missing, 0.02, 0.01);
  c.n_sensors = 3;
  EXPECT_THROW(make_synthetic_dataset(c), UsageError);
}

TEST(Synthetic, ReplayFromPulseSchedule) {
  SyntheticConfig c;
  c.n_sensors = 10;
  c.n_days = 3;
  c.noise_mph = 0.0;
  c.missing_rate = 0.0;
  c.survey_rows = 100;
  const auto b = make_synthetic_dataset(c);
  const std::size_t n = c.n_sensors, steps = b.series.steps();
  ASSERT_FALSE(b.pulses.empty());
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      // every pulse that can reach (i, t): hop k = (i - sensor) mod n, age = t - step - k
      double dep = 0.0;
      for (const auto& p : b.pulses) {
        for (std::size_t k = (i + n - p.sensor) % n; k <= c.pulse_hops; k += n) {
          if (t < p.step + k) continue;
          const std::size_t age = t - p.step - k;
          if (age >= c.pulse_length) continue;
          dep += p.amplitude * std::pow(c.pulse_decay, static_cast<double>(k)) *
                 (1.0 - static_cast<double>(age) / c.pulse_length);
        }
      }
      const double want =
          std::round(std::clamp(60.0 - dep - activity_congestion(c, b, i, b.series.timestamps[t]), 3.0, 70.0) * 100) /
          100;
      ASSERT_NEAR(b.series.value(t, i), want, 1e-9) << "t=" << t << " i=" << i;
    }
}

TEST(Synthetic, PulsePropagatesDownstreamWithOneStepLag) {
  SyntheticConfig c;
  c.n_sensors = 12;
  c.n_days = 2;
  c.noise_mph = 0.0;
  c.missing_rate = 0.0;
  c.activity_amplitude = 0.0;
  c.pulse_rate = 0.0005;
  c.survey_rows = 10;
  const auto b = make_synthetic_dataset(c);
  ASSERT_FALSE(b.pulses.empty());
  for (const auto& p : b.pulses) {
    if (p.step + 2 >= b.series.steps()) continue;
    const std::size_t down = (p.sensor + 1) % c.n_sensors;
    EXPECT_LT(b.series.value(p.step, p.sensor), 60.0);
    EXPECT_LT(b.series.value(p.step + 1, down), 60.0);
  }
}

TEST(Synthetic, ActivityGroupsAndSurvey) {
  SyntheticConfig c;
  const auto b = make_synthetic_dataset(c);
  EXPECT_EQ(b.morning_sensors, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(b.evening_sensors, (std::vector<std::size_t>{12, 13, 14}));
  const auto monday_730 = synthetic_start().plus_minutes(450);
  const auto saturday_730 = synthetic_start().plus_minutes(5 * 1440 + 450);
  EXPECT_DOUBLE_EQ(activity_congestion(c, b, 2, monday_730), c.activity_amplitude);
  EXPECT_EQ(activity_congestion(c, b, 2, saturday_730), 0.0);
  EXPECT_NEAR(activity_congestion(c, b, 13, synthetic_start().plus_minutes(5 * 1440 + 1050)), c.activity_amplitude,
              1e-12);
  EXPECT_LT(activity_congestion(c, b, 7, monday_730), 1e-9);
  EXPECT_EQ(b.survey.size(), c.survey_rows);
  std::size_t work = 0;
  for (const auto& r : b.survey) work += r.category == kMorningCategory;
  EXPECT_GT(work, c.survey_rows / 3);  // 30% peaked + share of the background
}
