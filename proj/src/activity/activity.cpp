#include "uagc/activity.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "uagc/error.hpp"
#include "uagc/text.hpp"

namespace uagc {

const std::vector<std::string>& default_activity_labels() {
  static const std::vector<std::string> labels{
      "home",     "work",  "school",        "shopping", "social_recreation",
      "errands",  "transport_others", "meals", "other"};
  return labels;
}

ActivityTable::ActivityTable(std::vector<std::string> labels)
    : labels_(std::move(labels)), values_(labels_.size() * kBinsPerWeek, 0.0) {}

double ActivityTable::total(std::size_t category) const {
  double s = 0.0;
  for (std::size_t b = 0; b < kBinsPerWeek; ++b) s += at(category, b);
  return s;
}

std::vector<SurveyRow> parse_survey_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "category,weekday,start_minute")
    throw InputError("survey csv line 1: expected header 'category,weekday,start_minute'");
  std::vector<SurveyRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ',');
    try {
      if (f.size() != 3) throw InputError("expected 3 fields");
      rows.push_back(SurveyRow{static_cast<int>(parse_int(f[0])), static_cast<int>(parse_int(f[1])),
                               static_cast<int>(parse_int(f[2]))});
    } catch (const InputError& e) {
      throw InputError("survey csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

void write_survey_csv(const std::vector<SurveyRow>& rows, std::ostream& out) {
  out << "category,weekday,start_minute\n";
  for (const auto& r : rows) out << r.category << ',' << r.weekday << ',' << r.start_minute << '\n';
}

ActivityTable build_histogram(const std::vector<SurveyRow>& rows,
                              const std::vector<std::string>& labels) {
  ActivityTable table(labels);
  const auto k = static_cast<int>(labels.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.category < 1 || r.category > k || r.weekday < 0 || r.weekday > 6 || r.start_minute < 0 ||
        r.start_minute >= kMinutesPerDay)
      throw InputError("survey row " + std::to_string(i) + " out of range");
    const auto bin = static_cast<std::size_t>(r.weekday * kBinsPerDay + r.start_minute / kBinMinutes);
    table.at(static_cast<std::size_t>(r.category - 1), bin) += 1.0;
  }
  return table;
}

ActivityTable smooth_histogram(const ActivityTable& table, double sigma_bins) {
  if (!(sigma_bins > 0.0)) throw UsageError("smoothing sigma must be positive");
  const auto radius = static_cast<long>(std::ceil(4.0 * sigma_bins));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double mass = 0.0;
  for (long d = -radius; d <= radius; ++d) {
    const double w = std::exp(-0.5 * static_cast<double>(d * d) / (sigma_bins * sigma_bins));
    kernel[static_cast<std::size_t>(d + radius)] = w;
    mass += w;
  }
  for (auto& w : kernel) w /= mass;

  const long n = kBinsPerWeek;
  ActivityTable out(table.labels());
  for (std::size_t c = 0; c < table.categories(); ++c) {
    const double* src = table.row(c);
    double* dst = out.row(c);
    for (long b = 0; b < n; ++b) {
      double acc = 0.0;
      for (long d = -radius; d <= radius; ++d) {
        const long j = ((b - d) % n + n) % n;
        acc += kernel[static_cast<std::size_t>(d + radius)] * src[j];
      }
      dst[b] = acc;
    }
  }
  return out;
}

ActivityTable normalize_activity(const ActivityTable& table, bool center) {
  ActivityTable out(table.labels());
  const double n = static_cast<double>(kBinsPerWeek);
  for (std::size_t c = 0; c < table.categories(); ++c) {
    const double* src = table.row(c);
    double mean = 0.0;
    for (std::size_t b = 0; b < kBinsPerWeek; ++b) mean += src[b];
    mean /= n;
    double var = 0.0;
    for (std::size_t b = 0; b < kBinsPerWeek; ++b) var += (src[b] - mean) * (src[b] - mean);
    const double sd = std::sqrt(var / n);
    double* dst = out.row(c);
    if (sd < 1e-12) continue;
    const double shift = center ? mean : 0.0;
    for (std::size_t b = 0; b < kBinsPerWeek; ++b) dst[b] = (src[b] - shift) / sd;
  }
  return out;
}

std::vector<double> slice_window(const ActivityTable& table, Timestamp start, std::size_t p,
                                 std::size_t q, int step_minutes) {
  if (step_minutes <= 0 || step_minutes % kBinMinutes != 0)
    throw UsageError("activity step must be a positive multiple of 5 minutes");
  const std::size_t k = table.categories();
  std::vector<double> out((p + q) * k);
  for (std::size_t s = 0; s < p + q; ++s) {
    const auto bin = static_cast<std::size_t>(
        start.plus_minutes(static_cast<std::int64_t>(s) * step_minutes).week_bin());
    for (std::size_t c = 0; c < k; ++c) out[s * k + c] = table.at(c, bin);
  }
  return out;
}

std::array<std::uint8_t, kTimestampFeatureSize> timestamp_feature(Timestamp t) {
  std::array<std::uint8_t, kTimestampFeatureSize> f{};
  f[static_cast<std::size_t>(t.weekday())] = 1;
  f[7 + static_cast<std::size_t>(t.minute_of_day() / kBinMinutes)] = 1;
  return f;
}

void write_activity_csv(const ActivityTable& table, std::ostream& out) {
  out << "bin";
  for (const auto& l : table.labels()) out << ',' << l;
  out << '\n';
  for (std::size_t b = 0; b < kBinsPerWeek; ++b) {
    out << b;
    for (std::size_t c = 0; c < table.categories(); ++c) out << ',' << format_double(table.at(c, b));
    out << '\n';
  }
}

ActivityTable read_activity_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("activity csv: missing header");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || header[0] != "bin")
    throw InputError("activity csv line 1: expected 'bin,<label>,...'");
  std::vector<std::string> labels;
  for (std::size_t i = 1; i < header.size(); ++i) labels.emplace_back(trim(header[i]));
  ActivityTable table(labels);
  std::vector<bool> seen(kBinsPerWeek, false);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ',');
    try {
      if (f.size() != header.size()) throw InputError("wrong field count");
      const auto bin = parse_u64(f[0]);
      if (bin >= kBinsPerWeek || seen[bin]) throw InputError("bad or repeated bin");
      seen[bin] = true;
      for (std::size_t c = 0; c < labels.size(); ++c) {
        const double v = parse_double(f[c + 1]);
        if (!std::isfinite(v) || v < 0.0) throw InputError("frequencies must be finite and >= 0");
        table.at(c, bin) = v;
      }
    } catch (const InputError& e) {
      throw InputError("activity csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (std::size_t b = 0; b < kBinsPerWeek; ++b)
    if (!seen[b]) throw InputError("activity csv: missing bin " + std::to_string(b));
  return table;
}

}  // namespace uagc
