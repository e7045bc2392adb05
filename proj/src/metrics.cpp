#include "dcwm/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "dcwm/errors.hpp"

namespace dcwm {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_real(const std::string& s, double* out) {
  if (s == "nan") {
    *out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  try {
    size_t used = 0;
    *out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_count(const std::string& s, int64_t* out) {
  try {
    size_t used = 0;
    *out = std::stoll(s, &used);
    return used == s.size() && *out >= 0;
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_row(const std::string& line, MetricsRow* row) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) fields.push_back(tok);
  if (fields.size() != 9) return false;
  double* reals[] = {&row->episodic_return, &row->eval_return_mean, &row->loss_world,
                     &row->loss_critic,     &row->loss_actor,       &row->active_code_fraction,
                     &row->wall_clock_s};
  if (!parse_count(fields[0], &row->env_step) || !parse_count(fields[1], &row->episode))
    return false;
  for (int i = 0; i < 7; ++i)
    if (!parse_real(fields[i + 2], reals[i])) return false;
  return true;
}

}  // namespace

std::string format_metrics_row(const MetricsRow& r) {
  std::ostringstream out;
  out << r.env_step << ',' << r.episode << ',' << fmt(r.episodic_return) << ','
      << fmt(r.eval_return_mean) << ',' << fmt(r.loss_world) << ',' << fmt(r.loss_critic) << ','
      << fmt(r.loss_actor) << ',' << fmt(r.active_code_fraction) << ',' << fmt(r.wall_clock_s);
  return out.str();
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw ContractError("cannot open metrics file for writing: " + path);
  out_ << kMetricsHeader << '\n';
  out_.flush();
}

void MetricsWriter::append(const MetricsRow& row) {
  out_ << format_metrics_row(row) << '\n';
  out_.flush();
  if (!out_) throw ContractError("metrics write failed");
}

MetricsFile read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw ContractError("not a metrics file (bad header): " + path);
  MetricsFile out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    MetricsRow row;
    if (parse_row(line, &row)) {
      out.rows.push_back(row);
    } else {
      std::cerr << "warning: " << path << ":" << lineno << ": skipping malformed metrics row\n";
      ++out.skipped;
    }
  }
  return out;
}

namespace {

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> pts;  // (env_step, value), finite only
};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Fixed 800x500 canvas; one polyline per series, data mapped into the axes
// box with y growing upward.
void write_chart(const std::string& path, const std::string& title,
                 const std::vector<Series>& series) {
  const double width = 800, height = 500;
  const double left = 70, right = 780, top = 40, bottom = 460;

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool any = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.pts) {
      if (!any) {
        x_lo = x_hi = x;
        y_lo = y_hi = y;
        any = true;
      }
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (right - left); };
  auto sy = [&](double y) { return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top); };

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ContractError("cannot write plot: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << (width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
      << "font-family=\"sans-serif\">" << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (width / 2) << "\" y=\"" << (height - 8)
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">env_step</text>\n";

  if (!any) {
    out << "<text x=\"" << (width / 2) << "\" y=\"" << ((top + bottom) / 2)
        << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\" "
        << "fill=\"gray\">no data</text>\n";
  } else {
    out << "<text x=\"" << (left - 6) << "\" y=\"" << (bottom + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(y_lo)
        << "</text>\n";
    out << "<text x=\"" << (left - 6) << "\" y=\"" << (top + 4)
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(y_hi)
        << "</text>\n";
    out << "<text x=\"" << left << "\" y=\"" << (bottom + 16)
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(x_lo)
        << "</text>\n";
    out << "<text x=\"" << right << "\" y=\"" << (bottom + 16)
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(x_hi)
        << "</text>\n";
  }

  double legend_y = top + 12;
  for (const auto& s : series) {
    if (!s.pts.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (size_t i = 0; i < s.pts.size(); ++i) {
        if (i) out << ' ';
        out << px(sx(s.pts[i].first)) << ',' << px(sy(s.pts[i].second));
      }
      out << "\"/>\n";
    }
    out << "<text x=\"" << (right - 160) << "\" y=\"" << legend_y
        << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << s.color << "\">" << s.label
        << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
  if (!out) throw ContractError("short write while emitting plot: " + path);
}

}  // namespace

void emit_plots(const std::string& metrics_csv, const std::string& out_dir) {
  const MetricsFile mf = read_metrics(metrics_csv);
  const size_t total = mf.rows.size() + mf.skipped;
  if (total > 0 && mf.skipped * 100 > total)
    throw ContractError("metrics file too damaged to plot: " + std::to_string(mf.skipped) +
                        " of " + std::to_string(total) + " rows malformed");

  std::filesystem::create_directories(out_dir);
  Series train{"episodic_return", "steelblue", {}};
  Series eval{"eval_return_mean", "darkorange", {}};
  Series codes{"active_code_fraction", "seagreen", {}};
  for (const auto& r : mf.rows) {
    const auto x = static_cast<double>(r.env_step);
    if (std::isfinite(r.episodic_return)) train.pts.emplace_back(x, r.episodic_return);
    if (std::isfinite(r.eval_return_mean)) eval.pts.emplace_back(x, r.eval_return_mean);
    if (std::isfinite(r.active_code_fraction)) codes.pts.emplace_back(x, r.active_code_fraction);
  }
  write_chart(out_dir + "/return.svg", "return vs env_step", {train, eval});
  write_chart(out_dir + "/active_codes.svg", "active code fraction vs env_step", {codes});
}

}  // namespace dcwm
