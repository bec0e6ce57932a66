#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "dpv/rule_clustering.hpp"

namespace dpv {

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string rgb(int r, int g, int b) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

// linear blend from white toward the given color
inline std::string shade(double t, int r, int g, int b) {
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](int c) { return static_cast<int>(std::lround(255.0 + t * (c - 255.0))); };
  return rgb(mix(r), mix(g), mix(b));
}

inline std::string rect(double x, double y, double w, double h, const std::string& fill,
                        const std::string& extra = "") {
  return "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
         num(h) + "\" fill=\"" + fill + "\"" + extra + "/>\n";
}

inline std::string line(double x1, double y1, double x2, double y2) {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
         num(y2) + "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, int size = 10,
                        const std::string& anchor = "start") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
         "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" + xml::escape(s) +
         "</text>\n";
}

inline std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n" +
         rect(0, 0, w, h, "#ffffff");
}

// (x, y) drawing position per dendrogram node id; leaves take the row order
// given in `leaf_y`. x runs from the root (largest distance) on the left to
// the leaves on the right.
struct DendroLayout {
  std::map<std::size_t, double> x, y;
  double max_dist = 0.0;

  DendroLayout(const Dendrogram& dg, const std::map<std::size_t, double>& leaf_y, double left,
               double width) {
    for (const auto& s : dg.steps) max_dist = std::max(max_dist, s.distance);
    if (max_dist <= 0.0) max_dist = 1.0;
    auto x_of = [&](double dist) { return left + (1.0 - dist / max_dist) * width; };
    for (const auto& [leaf, yy] : leaf_y) {
      x[leaf] = x_of(0.0);
      y[leaf] = yy;
    }
    for (std::size_t s = 0; s < dg.steps.size(); ++s) {
      const auto& step = dg.steps[s];
      x[dg.n + s] = x_of(step.distance);
      y[dg.n + s] = (y[step.cluster_a] + y[step.cluster_b]) / 2.0;
    }
  }

  std::string draw(const Dendrogram& dg) const {
    std::string out;
    for (std::size_t s = 0; s < dg.steps.size(); ++s) {
      const auto& step = dg.steps[s];
      const double xm = x.at(dg.n + s);
      const double ya = y.at(step.cluster_a), yb = y.at(step.cluster_b);
      out += line(x.at(step.cluster_a), ya, xm, ya);
      out += line(x.at(step.cluster_b), yb, xm, yb);
      out += line(xm, ya, xm, yb);
    }
    return out;
  }
};

}  // namespace svg_detail

// Jaccard heatmap in dendrogram leaf order with a left dendrogram and side
// columns: support on L+ and L- (orange) and signed importance (green for
// positive, red for negative coefficients).
inline std::string heatmap_svg(const DistanceMatrix& dm, const Dendrogram& dg,
                               const std::vector<std::string>& rule_names,
                               const std::vector<double>& support_pos,
                               const std::vector<double>& support_neg,
                               const std::vector<double>& importances) {
  using namespace svg_detail;
  const std::vector<std::size_t> order = leaf_order(dg);
  const std::size_t n = dm.n;
  const double cell = 18.0;
  const double dendro_w = 70.0, side_w = 16.0, label_w = 64.0;
  const double top = 40.0;
  const double grid_x = dendro_w + 3 * side_w + label_w + 20.0;
  const double width = grid_x + static_cast<double>(n) * cell + 20.0;
  const double height = top + static_cast<double>(n) * cell + 30.0;

  double max_abs = 1e-12;
  for (double v : importances) max_abs = std::max(max_abs, std::abs(v));

  std::string out = header(width, height);
  std::map<std::size_t, double> leaf_y;
  for (std::size_t row = 0; row < n; ++row)
    leaf_y[order[row]] = top + (static_cast<double>(row) + 0.5) * cell;
  DendroLayout layout(dg, leaf_y, 5.0, dendro_w - 10.0);
  out += layout.draw(dg);

  out += text(dendro_w + 0.5 * side_w, top - 6, "s+", 9, "middle");
  out += text(dendro_w + 1.5 * side_w, top - 6, "s-", 9, "middle");
  out += text(dendro_w + 2.5 * side_w, top - 6, "imp", 9, "middle");
  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t r = order[row];
    const double y = top + static_cast<double>(row) * cell;
    out += rect(dendro_w, y, side_w, cell, shade(support_pos[r], 230, 120, 20));
    out += rect(dendro_w + side_w, y, side_w, cell, shade(support_neg[r], 230, 120, 20));
    const double imp = importances[r] / max_abs;
    out += rect(dendro_w + 2 * side_w, y, side_w, cell,
                imp >= 0 ? shade(imp, 0, 120, 40) : shade(-imp, 180, 20, 30));
    out += text(dendro_w + 3 * side_w + 4, y + cell * 0.7, rule_names[r], 9);
    for (std::size_t col = 0; col < n; ++col) {
      const std::size_t c = order[col];
      out += rect(grid_x + static_cast<double>(col) * cell, y, cell, cell,
                  shade(dm.at(r, c), 8, 48, 107),
                  " stroke=\"#dddddd\" stroke-width=\"0.5\"");
    }
  }
  for (std::size_t col = 0; col < n; ++col)
    out += text(grid_x + (static_cast<double>(col) + 0.5) * cell, top - 6, rule_names[order[col]],
                9, "middle");
  out += "</svg>\n";
  return out;
}

inline std::string dendrogram_svg(const Dendrogram& dg, const std::vector<std::string>& leaf_labels) {
  using namespace svg_detail;
  const std::vector<std::size_t> order = leaf_order(dg);
  const std::size_t n = dg.n;
  const double row_h = 22.0, top = 20.0, tree_w = 320.0, label_x = tree_w + 14.0;
  const double width = label_x + 220.0;
  const double height = top + static_cast<double>(n) * row_h + 20.0;

  std::string out = header(width, height);
  std::map<std::size_t, double> leaf_y;
  for (std::size_t row = 0; row < n; ++row)
    leaf_y[order[row]] = top + (static_cast<double>(row) + 0.5) * row_h;
  DendroLayout layout(dg, leaf_y, 10.0, tree_w - 10.0);
  out += layout.draw(dg);
  for (std::size_t row = 0; row < n; ++row)
    out += text(label_x, leaf_y[order[row]] + 3, leaf_labels[order[row]], 11);
  // distance scale
  out += line(10.0, height - 10.0, tree_w, height - 10.0);
  out += text(10.0, height - 14.0, num(layout.max_dist), 9);
  out += text(tree_w, height - 14.0, "0", 9, "end");
  out += "</svg>\n";
  return out;
}

// Grouped bars, one group per metric, one bar per trace group (clusters plus
// the L+ and L- baselines).
inline std::string metrics_svg(const std::vector<std::string>& group_names,
                               const std::vector<std::string>& metric_names,
                               const std::vector<std::vector<double>>& values) {
  using namespace svg_detail;
  static const std::array<const char*, 8> palette = {"#4c78a8", "#f58518", "#54a24b", "#e45756",
                                                     "#72b7b2", "#b279a2", "#9d755d", "#bab0ac"};
  const double bar_w = 16.0, gap = 28.0, top = 46.0, bottom = 30.0, left = 44.0;
  const double plot_h = 180.0;
  const double group_w = bar_w * static_cast<double>(group_names.size()) + gap;
  const double width = left + group_w * static_cast<double>(metric_names.size()) + 30.0;
  const double height = top + plot_h + bottom;
  const double zero_y = top + plot_h / 2.0;  // y range [-1, 1]

  std::string out = header(width, height);
  out += line(left - 6, top, left - 6, top + plot_h);
  out += text(left - 10, top + 4, "1", 9, "end");
  out += text(left - 10, zero_y + 4, "0", 9, "end");
  out += text(left - 10, top + plot_h + 4, "-1", 9, "end");
  out += "<line x1=\"" + num(left - 6) + "\" y1=\"" + num(zero_y) + "\" x2=\"" +
         num(width - 20) + "\" y2=\"" + num(zero_y) +
         "\" stroke=\"#999999\" stroke-width=\"1\" stroke-dasharray=\"3,3\"/>\n";

  for (std::size_t g = 0; g < group_names.size(); ++g) {
    const double lx = left + static_cast<double>(g) * 110.0;
    out += rect(lx, 8, 10, 10, palette[g % palette.size()]);
    out += text(lx + 14, 17, group_names[g], 10);
  }
  for (std::size_t mi = 0; mi < metric_names.size(); ++mi) {
    const double gx = left + group_w * static_cast<double>(mi);
    out += text(gx + (group_w - gap) / 2.0, top + plot_h + 16, metric_names[mi], 10, "middle");
    for (std::size_t g = 0; g < group_names.size(); ++g) {
      const double v = std::clamp(values[g][mi], -1.0, 1.0);
      const double h = std::abs(v) * plot_h / 2.0;
      const double y = v >= 0 ? zero_y - h : zero_y;
      out += rect(gx + static_cast<double>(g) * bar_w, y, bar_w - 2.0, std::max(h, 0.5),
                  palette[g % palette.size()]);
    }
  }
  out += "</svg>\n";
  return out;
}

inline std::string placeholder_svg(const std::string& message) {
  using namespace svg_detail;
  std::string out = header(420, 80);
  out += text(210, 44, message, 12, "middle");
  out += "</svg>\n";
  return out;
}

}  // namespace dpv
