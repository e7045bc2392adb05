#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace dcwm {

// One logging event.  Real fields default to NaN ("not logged this row"),
// which serializes as literal `nan`.
struct MetricsRow {
  int64_t env_step = 0;
  int64_t episode = 0;
  double episodic_return = std::numeric_limits<double>::quiet_NaN();
  double eval_return_mean = std::numeric_limits<double>::quiet_NaN();
  double loss_world = std::numeric_limits<double>::quiet_NaN();
  double loss_critic = std::numeric_limits<double>::quiet_NaN();
  double loss_actor = std::numeric_limits<double>::quiet_NaN();
  double active_code_fraction = std::numeric_limits<double>::quiet_NaN();
  double wall_clock_s = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr const char* kMetricsHeader =
    "env_step,episode,episodic_return,eval_return_mean,loss_world,loss_critic,loss_actor,"
    "active_code_fraction,wall_clock_s";

// %.17g reals so the CSV parses back to the exact logged bits.
std::string format_metrics_row(const MetricsRow& row);

// Header on open, one flushed line per append: the file is readable (and
// plottable) while a run is still going.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void append(const MetricsRow& row);

 private:
  std::ofstream out_;
};

struct MetricsFile {
  std::vector<MetricsRow> rows;
  size_t skipped = 0;  // malformed data lines, already warned to stderr
};

// Throws ContractError on a missing/foreign header; malformed rows are
// skipped with a warning instead (the caller decides how many is too many).
MetricsFile read_metrics(const std::string& path);

// return.svg (episodic and eval return vs env_step) and active_codes.svg.
// Rows with NaN in a series are left out of that polyline.  Throws
// ContractError when more than 1% of data lines were malformed.
void emit_plots(const std::string& metrics_csv, const std::string& out_dir);

}  // namespace dcwm
