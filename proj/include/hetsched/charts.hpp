#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hetsched/drm.hpp"
#include "hetsched/model.hpp"

namespace hetsched {

namespace chart_detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string bar_color(int key) {
  return "hsl(" + std::to_string((key * 137) % 360) + ",60%,70%)";
}

inline int gantt_lanes(const EpisodeResult& result) {
  PeId max_pe = 0;
  for (const auto& a : result.schedule) max_pe = std::max(max_pe, a.pe_id);
  return result.schedule.empty() ? 1 : max_pe + 1;
}

}  // namespace chart_detail

/// Fixed-width text GANTT: one lane per PE, one column per ms, bars filled
/// with the task id's last digit, plus an exact interval legend.
inline std::string gantt_text(const EpisodeResult& result) {
  const int lanes = chart_detail::gantt_lanes(result);
  const Tick width = std::max<Tick>(result.makespan, 1);
  std::vector<std::string> lane(static_cast<std::size_t>(lanes),
                                std::string(static_cast<std::size_t>(width), '-'));
  for (const auto& a : result.schedule) {
    const char c = static_cast<char>('0' + a.task_id % 10);
    for (Tick t = a.start_tick; t < a.finish_tick; ++t)
      lane[static_cast<std::size_t>(a.pe_id)][static_cast<std::size_t>(t)] = c;
  }
  std::ostringstream out;
  out << "makespan " << result.makespan << " ms\n";
  for (int p = 0; p < lanes; ++p) out << "PE" << p << " |" << lane[static_cast<std::size_t>(p)] << "|\n";
  auto sorted = result.schedule;
  std::sort(sorted.begin(), sorted.end(), [](const Assignment& a, const Assignment& b) {
    return std::tie(a.pe_id, a.start_tick, a.task_id) < std::tie(b.pe_id, b.start_tick, b.task_id);
  });
  for (const auto& a : sorted)
    out << "  T" << a.task_id << " on PE" << a.pe_id << " [" << a.start_tick << ","
        << a.finish_tick << ")\n";
  return out.str();
}

/// SVG GANTT; every assignment becomes one <rect> carrying
/// data-task/data-pe/data-start/data-finish attributes.
inline std::string gantt_svg(const EpisodeResult& result) {
  const int lanes = chart_detail::gantt_lanes(result);
  const Tick span = std::max<Tick>(result.makespan, 1);
  const double px_per_ms = 900.0 / static_cast<double>(span);
  const int lane_h = 34, top = 30, left = 50;
  const int height = top + lanes * lane_h + 30;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"980\" height=\"" << height
      << "\" font-family=\"monospace\" font-size=\"11\">\n";
  out << "<text x=\"" << left << "\" y=\"18\">GANTT makespan=" << result.makespan
      << "ms</text>\n";
  for (int p = 0; p < lanes; ++p) {
    const int y = top + p * lane_h;
    out << "<text x=\"8\" y=\"" << (y + 20) << "\">PE" << p << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << (y + lane_h - 4) << "\" x2=\"950\" y2=\""
        << (y + lane_h - 4) << "\" stroke=\"#ccc\"/>\n";
  }
  for (const auto& a : result.schedule) {
    const double x = left + static_cast<double>(a.start_tick) * px_per_ms;
    const double w =
        std::max(1.0, static_cast<double>(a.finish_tick - a.start_tick) * px_per_ms);
    const int y = top + a.pe_id * lane_h + 2;
    out << "<rect x=\"" << chart_detail::fmt(x) << "\" y=\"" << y << "\" width=\""
        << chart_detail::fmt(w) << "\" height=\"" << (lane_h - 8) << "\" fill=\""
        << chart_detail::bar_color(a.task_id) << "\" stroke=\"#333\""
        << " data-task=\"" << a.task_id << "\" data-pe=\"" << a.pe_id << "\" data-start=\""
        << a.start_tick << "\" data-finish=\"" << a.finish_tick << "\"/>\n";
    out << "<text x=\"" << chart_detail::fmt(x + 3) << "\" y=\""
        << (y + 16) << "\">T" << a.task_id << "</text>\n";
  }
  out << "<text x=\"" << left << "\" y=\"" << (height - 8) << "\">0</text>\n";
  out << "<text x=\"930\" y=\"" << (height - 8) << "\">" << span << "ms</text>\n";
  out << "</svg>\n";
  return out.str();
}

/// Trailing rolling mean clipped at the series start:
/// window 2 turns [100, 90, 80] into [100, 95, 85].
inline std::vector<double> rolling_mean(const std::vector<double>& xs, int window) {
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= static_cast<std::size_t>(window)) acc -= xs[i - static_cast<std::size_t>(window)];
    const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

/// Execution time versus episode, one polyline per scheduler. Series with
/// several seeds are averaged per episode before smoothing.
inline std::string curve_svg(const std::map<std::string, std::vector<double>>& series,
                             int rolling_window = 20) {
  const double width = 960, height = 540, left = 60, right = 20, top = 20, bottom = 40;
  double max_y = 1.0, min_y = 0.0;
  std::size_t max_len = 1;
  for (const auto& [_, xs] : series) {
    for (double v : xs) max_y = std::max(max_y, v);
    max_len = std::max(max_len, xs.size());
  }
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto sx = [&](std::size_t i) {
    return left + (max_len <= 1 ? 0.0
                                : plot_w * static_cast<double>(i) /
                                      static_cast<double>(max_len - 1));
  };
  auto sy = [&](double v) { return top + plot_h * (1.0 - (v - min_y) / (max_y - min_y)); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"monospace\" font-size=\"12\">\n";
  out << "<line x1=\"" << left << "\" y1=\"" << (top + plot_h) << "\" x2=\"" << (left + plot_w)
      << "\" y2=\"" << (top + plot_h) << "\" stroke=\"#000\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << (top + plot_h) << "\" stroke=\"#000\"/>\n";
  out << "<text x=\"" << (left + plot_w / 2 - 60) << "\" y=\"" << (height - 8)
      << "\">episode (0.." << (max_len - 1) << ")</text>\n";
  out << "<text x=\"6\" y=\"" << (top + 12) << "\">" << chart_detail::fmt(max_y)
      << " ms</text>\n";
  out << "<text x=\"6\" y=\"" << (top + plot_h) << "\">0</text>\n";

  int idx = 0;
  for (const auto& [name, xs] : series) {
    const auto smoothed = rolling_window > 1 ? rolling_mean(xs, rolling_window) : xs;
    out << "<polyline fill=\"none\" stroke=\"" << chart_detail::bar_color(idx * 3 + 1)
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < smoothed.size(); ++i)
      out << chart_detail::fmt(sx(i)) << "," << chart_detail::fmt(sy(smoothed[i])) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << (left + plot_w - 120) << "\" y=\"" << (top + 16 + idx * 16)
        << "\" fill=\"" << chart_detail::bar_color(idx * 3 + 1) << "\">" << name
        << "</text>\n";
    ++idx;
  }
  out << "</svg>\n";
  return out.str();
}

/// Heat strip over the encoding vector, cells shaded by normalized magnitude
/// and the four layout blocks labeled.
inline std::string saliency_svg(const std::vector<double>& saliency,
                                const EncodingLayout& layout) {
  if (static_cast<int>(saliency.size()) != layout.dim())
    throw std::invalid_argument("saliency_svg: vector does not match the encoding layout");
  double max_v = 0.0;
  for (double v : saliency) max_v = std::max(max_v, v);
  const double norm = max_v > 0.0 ? max_v : 1.0;

  const int cell_w = std::max(2, 960 / layout.dim());
  const double width = 40 + cell_w * layout.dim();
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"120\" font-family=\"monospace\" font-size=\"10\">\n";
  for (int i = 0; i < layout.dim(); ++i) {
    const double m = saliency[static_cast<std::size_t>(i)] / norm;
    const int shade = 255 - static_cast<int>(std::lround(m * 205.0));
    out << "<rect x=\"" << (20 + i * cell_w)
        << "\" y=\"40\" width=\"" << cell_w << "\" height=\"40\" fill=\"rgb(255," << shade
        << "," << shade << ")\" stroke=\"#eee\" data-index=\"" << i << "\" data-value=\""
        << chart_detail::fmt(saliency[static_cast<std::size_t>(i)]) << "\"/>\n";
  }
  const int offsets[5] = {layout.status_offset(), layout.assignment_offset(),
                          layout.adjacency_offset(), layout.exec_offset(), layout.dim()};
  for (int b = 0; b < 4; ++b) {
    out << "<line x1=\"" << (20 + offsets[b] * cell_w) << "\" y1=\"30\" x2=\""
        << (20 + offsets[b] * cell_w) << "\" y2=\"90\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << (22 + offsets[b] * cell_w) << "\" y=\"26\">"
        << EncodingLayout::block_labels[b] << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

/// One CSV row per entry: block label, offset inside the block, value.
inline std::string saliency_csv(const std::vector<double>& saliency,
                                const EncodingLayout& layout) {
  if (static_cast<int>(saliency.size()) != layout.dim())
    throw std::invalid_argument("saliency_csv: vector does not match the encoding layout");
  const int offsets[5] = {layout.status_offset(), layout.assignment_offset(),
                          layout.adjacency_offset(), layout.exec_offset(), layout.dim()};
  std::ostringstream out;
  out << "block,offset,value\n";
  for (int b = 0; b < 4; ++b)
    for (int i = offsets[b]; i < offsets[b + 1]; ++i)
      out << EncodingLayout::block_labels[b] << "," << (i - offsets[b]) << ","
          << chart_detail::fmt(saliency[static_cast<std::size_t>(i)]) << "\n";
  return out.str();
}

}  // namespace hetsched
