#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uagc/timestamp.hpp"

namespace uagc {

inline constexpr std::size_t kDefaultActivityCategories = 9;
inline constexpr std::size_t kTimestampFeatureSize = 7 + kBinsPerDay;  // 295

const std::vector<std::string>& default_activity_labels();

/// Weekly activity frequencies: one row per category, 2016 five-minute bins,
/// bin 0 = Monday 00:00-00:05.
class ActivityTable {
 public:
  ActivityTable() = default;
  explicit ActivityTable(std::vector<std::string> labels);

  std::size_t categories() const { return labels_.size(); }
  static constexpr std::size_t bins() { return kBinsPerWeek; }

  const std::vector<std::string>& labels() const { return labels_; }

  double& at(std::size_t category, std::size_t bin) { return values_[category * kBinsPerWeek + bin]; }
  double at(std::size_t category, std::size_t bin) const {
    return values_[category * kBinsPerWeek + bin];
  }

  const double* row(std::size_t category) const { return values_.data() + category * kBinsPerWeek; }
  double* row(std::size_t category) { return values_.data() + category * kBinsPerWeek; }

  double total(std::size_t category) const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

struct SurveyRow {
  int category = 1;  // 1..K_H
  int weekday = 0;   // Monday = 0
  int start_minute = 0;
};

/// `category,weekday,start_minute`
std::vector<SurveyRow> parse_survey_csv(std::istream& in);
void write_survey_csv(const std::vector<SurveyRow>& rows, std::ostream& out);

/// Counts each row into bin weekday*288 + start_minute/5 of its category.
ActivityTable build_histogram(const std::vector<SurveyRow>& rows,
                              const std::vector<std::string>& labels = default_activity_labels());

/// Circular Gaussian smoothing over the week (kernel truncated at ±4 sigma and
/// renormalised to unit mass).
ActivityTable smooth_histogram(const ActivityTable& table, double sigma_bins = 2.0);

/// Per-category z-score with population std; rows with std < 1e-12 become
/// zeros. With `center` false the mean is kept and only the scale changes.
ActivityTable normalize_activity(const ActivityTable& table, bool center = true);

/// (P+Q) x K_H row-major window starting at `start` (the first history step),
/// stepping `step_minutes` and wrapping weekly.
std::vector<double> slice_window(const ActivityTable& table, Timestamp start, std::size_t p,
                                 std::size_t q, int step_minutes = kBinMinutes);

/// Weekday one-hot (Monday = 0) followed by the 288-slot time-of-day one-hot.
std::array<std::uint8_t, kTimestampFeatureSize> timestamp_feature(Timestamp t);

/// `bin,<label1>,...` with 2016 rows.
void write_activity_csv(const ActivityTable& table, std::ostream& out);
ActivityTable read_activity_csv(std::istream& in);

}  // namespace uagc
