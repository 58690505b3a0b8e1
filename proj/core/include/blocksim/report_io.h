#pragma once

#include <string>
#include <vector>

#include "blocksim/driver.h"
#include "blocksim/metrics.h"

namespace blocksim {

// Writes the run artifacts into `dir` (created if missing):
//   summary.txt     key = value aggregates
//   requests.csv    per-request rows
//   timeseries.csv  per-dispatch memory balance
//   probes.csv      probe summary rows
//   probe_predictions.csv  one row per (probe, instance)
//   events.log      "<seconds> <kind> <a> <b>" per processed event
// All numbers print with fixed formatting so identical runs produce
// byte-identical files. `smooth_sigma` > 0 adds timeseries_smoothed.csv.
void write_run_report(const std::string& dir, const RunReport& report, const RunLog& log,
                      double smooth_sigma = 0);

void write_sweep_summary(const std::string& dir, const std::vector<SweepCell>& cells);

void write_capacity_table(const std::string& dir, const CapacityTable& table);

std::string read_file(const std::string& path);

}  // namespace blocksim
