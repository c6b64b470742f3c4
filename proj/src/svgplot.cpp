#include "neuronml/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace neuronml {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 70, kTop = 50, kBottom = 50;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                     const char* color) {
  std::ostringstream p;
  p << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i)
    p << fmt(xs[i]) << ',' << fmt(ys[i]) << ' ';
  p << "\"/>\n";
  return p.str();
}

}  // namespace

std::string render_metrics_svg(const std::vector<MetricsRecord>& records,
                               const std::string& title) {
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double loss_lo = 0.0, loss_hi = 1.0;
  bool log_scale = !records.empty();
  for (const MetricsRecord& r : records)
    if (!(r.weight_loss > 0.0)) log_scale = false;
  if (!records.empty()) {
    loss_lo = records.front().weight_loss;
    loss_hi = records.front().weight_loss;
    for (const MetricsRecord& r : records) {
      loss_lo = std::min(loss_lo, r.weight_loss);
      loss_hi = std::max(loss_hi, r.weight_loss);
    }
    if (log_scale) {
      loss_lo = std::log10(loss_lo);
      loss_hi = std::log10(loss_hi);
    }
    if (loss_hi - loss_lo < 1e-12) loss_hi = loss_lo + 1.0;
  }
  const double iter_hi =
      records.empty() ? 1.0 : std::max<double>(1.0, double(records.back().iteration));

  auto x_of = [&](double iter) { return kLeft + plot_w * iter / iter_hi; };
  auto y_of_loss = [&](double loss) {
    const double v = log_scale ? std::log10(loss) : loss;
    return kTop + plot_h * (1.0 - (v - loss_lo) / (loss_hi - loss_lo));
  };
  auto y_of_density = [&](double d) { return kTop + plot_h * (1.0 - d); };

  std::vector<double> xs, loss_ys, dens_ys;
  for (const MetricsRecord& r : records) {
    xs.push_back(x_of(double(r.iteration)));
    loss_ys.push_back(y_of_loss(r.weight_loss));
    dens_ys.push_back(y_of_density(r.mask_density));
  }

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
      << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n"
      // Axes.
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
      << kLeft + plot_w << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kLeft + plot_w << "\" y1=\"" << kTop << "\" x2=\""
      << kLeft + plot_w << "\" y2=\"" << kTop + plot_h << "\" stroke=\"#888\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
         "iteration</text>\n"
      << "<text x=\"18\" y=\"" << kTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 18 "
      << kTop + plot_h / 2 << ")\">" << (log_scale ? "loss (log10)" : "loss")
      << "</text>\n"
      << "<text x=\"" << kWidth - 18 << "\" y=\"" << kTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(90 "
      << kWidth - 18 << ' ' << kTop + plot_h / 2 << ")\">mask density</text>\n";

  if (!records.empty()) {
    svg << polyline(xs, loss_ys, "#c0392b") << polyline(xs, dens_ys, "#2980b9");
    // Axis extents.
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << fmt(log_scale ? std::pow(10.0, loss_hi) : loss_hi) << "</text>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + plot_h + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << fmt(log_scale ? std::pow(10.0, loss_lo) : loss_lo) << "</text>\n"
        << "<text x=\"" << kLeft + plot_w + 6 << "\" y=\"" << kTop + 4
        << "\" font-family=\"sans-serif\" font-size=\"10\">1</text>\n"
        << "<text x=\"" << kLeft + plot_w + 6 << "\" y=\"" << kTop + plot_h + 4
        << "\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n";
  }
  // Legend.
  svg << "<rect x=\"" << kLeft + 10 << "\" y=\"" << kTop + 8
      << "\" width=\"12\" height=\"3\" fill=\"#c0392b\"/>\n"
      << "<text x=\"" << kLeft + 28 << "\" y=\"" << kTop + 13
      << "\" font-family=\"sans-serif\" font-size=\"11\">weight loss</text>\n"
      << "<rect x=\"" << kLeft + 10 << "\" y=\"" << kTop + 24
      << "\" width=\"12\" height=\"3\" fill=\"#2980b9\"/>\n"
      << "<text x=\"" << kLeft + 28 << "\" y=\"" << kTop + 29
      << "\" font-family=\"sans-serif\" font-size=\"11\">mask density</text>\n"
      << "</svg>\n";
  return svg.str();
}

}  // namespace neuronml
