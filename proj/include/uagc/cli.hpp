#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "uagc/models.hpp"
#include "uagc/training.hpp"

namespace uagc::cli {

/// Runs the `uagc` command line. Returns the process exit code: 0 success,
/// 2 usage, 3 input format, 4 numeric failure. Errors go to `err` as one line
/// `error[<code>]: <message>`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

/// `HH:MM-HH:MM` on the 5-minute grid. The start is the first history step fed
/// to the model; the window must be long enough to hold the P history steps.
struct ScenarioWindow {
  int start_minute = 0;
  int end_minute = 0;
  static ScenarioWindow parse(std::string_view text);  // throws UsageError
};

/// First history step of a scenario window on the reference week (weekday 0 =
/// Monday 2012-03-05).
Timestamp scenario_start(int weekday, const ScenarioWindow& w, std::size_t p);

struct SimulationResult {
  std::vector<double> first;   // mph per sensor
  std::vector<double> second;  // mph per sensor
  std::vector<double> delta;   // first - second
  double max_abs_delta() const;
};

/// Every sensor held at `speed_mph` over the P history steps; returns the
/// de-standardised predictions at 1-based horizon `step` for the two scenarios.
SimulationResult simulate_activity_response(models::Model& model, const training::Scaler& scaler,
                                            const ActivityTable* activity, Timestamp first, Timestamp second,
                                            double speed_mph, std::size_t step);

}  // namespace uagc::cli
