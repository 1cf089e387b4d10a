#include "deskdrive/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace deskdrive {

namespace {

std::string fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string results_to_csv(std::span<const ResultRow> rows) {
  std::string out =
      "arm,fraction,hours,finetuned,n_seeds,front_mean,front_std,side_mean,"
      "side_std,rear_mean,rear_std,offroad_mean,offroad_std,l2_mean,l2_std,"
      "i1k_mean,i1k_std,miles_mean\n";
  for (const ResultRow& r : rows) {
    out += r.arm;
    out += "," + fmt("%.9g", r.fraction) + "," + fmt("%.9g", r.hours);
    out += std::string(",") + (r.finetuned ? "1" : "0");
    out += "," + std::to_string(r.n_seeds);
    const double vals[] = {r.mean.front_per_1k,   r.stddev.front_per_1k,
                           r.mean.side_per_1k,    r.stddev.side_per_1k,
                           r.mean.rear_per_1k,    r.stddev.rear_per_1k,
                           r.mean.offroad_per_1k, r.stddev.offroad_per_1k,
                           r.mean.l2_m,           r.stddev.l2_m,
                           r.mean.i1k,            r.stddev.i1k,
                           r.mean.miles};
    for (double v : vals) out += "," + fmt("%.9g", v);
    out.push_back('\n');
  }
  return out;
}

std::vector<ResultRow> results_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<ResultRow> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 18)
      throw std::runtime_error("results csv: malformed line " +
                               std::to_string(lineno));
    try {
      ResultRow r;
      r.arm = f[0];
      r.fraction = std::stod(f[1]);
      r.hours = std::stod(f[2]);
      r.finetuned = f[3] == "1";
      r.n_seeds = std::stoi(f[4]);
      r.mean.front_per_1k = std::stod(f[5]);
      r.stddev.front_per_1k = std::stod(f[6]);
      r.mean.side_per_1k = std::stod(f[7]);
      r.stddev.side_per_1k = std::stod(f[8]);
      r.mean.rear_per_1k = std::stod(f[9]);
      r.stddev.rear_per_1k = std::stod(f[10]);
      r.mean.offroad_per_1k = std::stod(f[11]);
      r.stddev.offroad_per_1k = std::stod(f[12]);
      r.mean.l2_m = std::stod(f[13]);
      r.stddev.l2_m = std::stod(f[14]);
      r.mean.i1k = std::stod(f[15]);
      r.stddev.i1k = std::stod(f[16]);
      r.mean.miles = std::stod(f[17]);
      rows.push_back(std::move(r));
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("results csv: malformed line " +
                               std::to_string(lineno));
    }
  }
  return rows;
}

std::string render_table(std::span<const ResultRow> rows) {
  auto cell = [](double mean, double std, int n, const char* f) {
    std::string s = fmt(f, mean);
    if (n >= 2) s += " \xC2\xB1 (" + fmt(f, std) + ")";
    return s;
  };
  std::vector<std::array<std::string, 7>> body;
  for (const ResultRow& r : rows) {
    std::array<std::string, 7> c;
    c[0] = fmt("%.3g", r.hours) + "h " + r.arm + (r.finetuned ? "" : " (no FT)");
    c[1] = cell(r.mean.front_per_1k, r.stddev.front_per_1k, r.n_seeds, "%.0f");
    c[2] = cell(r.mean.side_per_1k, r.stddev.side_per_1k, r.n_seeds, "%.0f");
    c[3] = cell(r.mean.rear_per_1k, r.stddev.rear_per_1k, r.n_seeds, "%.0f");
    c[4] = cell(r.mean.offroad_per_1k, r.stddev.offroad_per_1k, r.n_seeds, "%.0f");
    c[5] = cell(r.mean.l2_m, r.stddev.l2_m, r.n_seeds, "%.2f");
    c[6] = cell(r.mean.i1k, r.stddev.i1k, r.n_seeds, "%.0f");
    body.push_back(std::move(c));
  }
  const std::array<std::string, 7> head = {"Training Data", "Front Collisions",
                                           "Side Collisions", "Rear Collisions",
                                           "Off-road",        "L2 error",
                                           "I1k"};
  std::array<size_t, 7> width{};
  auto display_len = [](const std::string& s) {
    // the +- sign is two bytes of UTF-8 but one column
    size_t len = 0;
    for (size_t i = 0; i < s.size(); ++i)
      if ((s[i] & 0xC0) != 0x80) ++len;
    return len;
  };
  for (int i = 0; i < 7; ++i) width[static_cast<size_t>(i)] = display_len(head[static_cast<size_t>(i)]);
  for (const auto& r : body)
    for (int i = 0; i < 7; ++i)
      width[static_cast<size_t>(i)] =
          std::max(width[static_cast<size_t>(i)], display_len(r[static_cast<size_t>(i)]));

  std::string out;
  auto emit_row = [&](const std::array<std::string, 7>& r) {
    for (int i = 0; i < 7; ++i) {
      const std::string& s = r[static_cast<size_t>(i)];
      out += s;
      size_t pad = width[static_cast<size_t>(i)] - display_len(s);
      out.append(pad, ' ');
      out += i == 6 ? "\n" : "  ";
    }
  };
  emit_row(head);
  size_t total = 0;
  for (size_t w : width) total += w + 2;
  out.append(total - 2, '-');
  out.push_back('\n');
  for (const auto& r : body) emit_row(r);
  // Rates count one terminal event per 30 s segment; absolute values are
  // specific to this workbench and comparable only within it.
  return out;
}

namespace {

constexpr double kSvgW = 640.0, kSvgH = 440.0;
constexpr double kMarL = 70.0, kMarR = 20.0, kMarT = 20.0, kMarB = 50.0;

double nice_ceil(double v) {
  if (v <= 0.0) return 1.0;
  double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (v <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string render_curves_svg(std::span<const CurveSpec> curves) {
  double xmax = 0.0, ymax = 0.0;
  for (const CurveSpec& c : curves)
    for (const ResultRow& r : c.points) {
      xmax = std::max(xmax, r.hours);
      ymax = std::max(ymax, r.mean.i1k + r.stddev.i1k);
    }
  xmax = xmax > 0.0 ? xmax * 1.05 : 1.0;
  ymax = nice_ceil(ymax * 1.05);

  auto px = [&](double h) { return kMarL + (kSvgW - kMarL - kMarR) * (h / xmax); };
  auto py = [&](double v) { return kSvgH - kMarB - (kSvgH - kMarT - kMarB) * (v / ymax); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kSvgW) +
       "\" height=\"" + fmt("%.0f", kSvgH) + "\" viewBox=\"0 0 " +
       fmt("%.0f", kSvgW) + " " + fmt("%.0f", kSvgH) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  s += "<line x1=\"" + fmt("%.2f", kMarL) + "\" y1=\"" + fmt("%.2f", kMarT) +
       "\" x2=\"" + fmt("%.2f", kMarL) + "\" y2=\"" + fmt("%.2f", kSvgH - kMarB) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt("%.2f", kMarL) + "\" y1=\"" + fmt("%.2f", kSvgH - kMarB) +
       "\" x2=\"" + fmt("%.2f", kSvgW - kMarR) + "\" y2=\"" +
       fmt("%.2f", kSvgH - kMarB) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double v = ymax * i / 5.0;
    double y = py(v);
    s += "<line x1=\"" + fmt("%.2f", kMarL - 4) + "\" y1=\"" + fmt("%.2f", y) +
         "\" x2=\"" + fmt("%.2f", kSvgW - kMarR) + "\" y2=\"" + fmt("%.2f", y) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + fmt("%.2f", kMarL - 8) + "\" y=\"" + fmt("%.2f", y + 4) +
         "\" font-size=\"12\" text-anchor=\"end\">" + fmt("%.0f", v) + "</text>\n";
    double h = xmax * i / 5.0;
    double x = px(h);
    s += "<text x=\"" + fmt("%.2f", x) + "\" y=\"" + fmt("%.2f", kSvgH - kMarB + 18) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + fmt("%.2f", h) + "</text>\n";
  }
  s += "<text x=\"" + fmt("%.2f", (kMarL + kSvgW - kMarR) / 2) + "\" y=\"" +
       fmt("%.2f", kSvgH - 12) +
       "\" font-size=\"13\" text-anchor=\"middle\">Training data (hours)</text>\n";
  s += "<text x=\"16\" y=\"" + fmt("%.2f", (kMarT + kSvgH - kMarB) / 2) +
       "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fmt("%.2f", (kMarT + kSvgH - kMarB) / 2) +
       ")\">Interventions per 1000 miles</text>\n";

  int legend_i = 0;
  for (const CurveSpec& c : curves) {
    std::string pts;
    for (const ResultRow& r : c.points) {
      pts += fmt("%.2f", px(r.hours)) + "," + fmt("%.2f", py(r.mean.i1k)) + " ";
      double lo = py(r.mean.i1k - r.stddev.i1k);
      double hi = py(r.mean.i1k + r.stddev.i1k);
      double x = px(r.hours);
      s += "<line x1=\"" + fmt("%.2f", x) + "\" y1=\"" + fmt("%.2f", hi) +
           "\" x2=\"" + fmt("%.2f", x) + "\" y2=\"" + fmt("%.2f", lo) +
           "\" stroke=\"" + c.color + "\"/>\n";
      s += "<rect x=\"" + fmt("%.2f", px(r.hours) - 3) + "\" y=\"" +
           fmt("%.2f", py(r.mean.i1k) - 3) +
           "\" width=\"6\" height=\"6\" fill=\"" + c.color + "\"/>\n";
    }
    if (!pts.empty()) pts.pop_back();
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + c.color +
         "\" stroke-width=\"1.5\"/>\n";
    double ly = kMarT + 16 + 18 * legend_i;
    s += "<line x1=\"" + fmt("%.2f", kSvgW - kMarR - 170) + "\" y1=\"" +
         fmt("%.2f", ly - 4) + "\" x2=\"" + fmt("%.2f", kSvgW - kMarR - 150) +
         "\" y2=\"" + fmt("%.2f", ly - 4) + "\" stroke=\"" + c.color +
         "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt("%.2f", kSvgW - kMarR - 144) + "\" y=\"" +
         fmt("%.2f", ly) + "\" font-size=\"12\">" + c.label + "</text>\n";
    ++legend_i;
  }
  s += "</svg>\n";
  return s;
}

std::vector<CurveSpec> sweep_curves(std::span<const ResultRow> rows) {
  const std::array<std::pair<std::string, std::string>, 3> palette = {
      std::pair<std::string, std::string>{"hd", "#d62728"},
      {"vision", "#1f77b4"},
      {"sim_vision", "#7f7f7f"}};
  std::vector<CurveSpec> curves;
  for (const auto& [arm, color] : palette) {
    CurveSpec c;
    c.label = arm;
    c.color = color;
    for (const ResultRow& r : rows)
      if (r.arm == arm && r.finetuned) c.points.push_back(r);
    std::sort(c.points.begin(), c.points.end(),
              [](const ResultRow& a, const ResultRow& b) { return a.hours < b.hours; });
    if (!c.points.empty()) curves.push_back(std::move(c));
  }
  return curves;
}

std::vector<CurveSpec> ablation_curves(std::span<const ResultRow> rows,
                                       const std::string& arm) {
  std::vector<CurveSpec> curves;
  for (bool ft : {false, true}) {
    CurveSpec c;
    c.label = arm + (ft ? " - fine-tuned" : " - no fine-tuning");
    c.color = ft ? "#1f77b4" : "#17becf";
    for (const ResultRow& r : rows)
      if (r.arm == arm && r.finetuned == ft) c.points.push_back(r);
    std::sort(c.points.begin(), c.points.end(),
              [](const ResultRow& a, const ResultRow& b) { return a.hours < b.hours; });
    curves.push_back(std::move(c));
  }
  return curves;
}

std::string render_trace_svg(const SimTrace& trace, const Segment& segment) {
  const DriveLog& log = *segment.log;
  double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
  auto grow = [&](const Vec2& p) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  };
  for (const auto& poly : log.map.drivable_area)
    for (const Vec2& p : poly) grow(p);
  double pad = 8.0;
  minx -= pad; miny -= pad; maxx += pad; maxy += pad;
  double scale = 900.0 / std::max(maxx - minx, maxy - miny);
  double w = (maxx - minx) * scale, h = (maxy - miny) * scale;
  auto X = [&](double x) { return (x - minx) * scale; };
  auto Y = [&](double y) { return h - (y - miny) * scale; };

  auto poly_str = [&](std::span<const Vec2> pts) {
    std::string s;
    for (const Vec2& p : pts)
      s += fmt("%.1f", X(p.x)) + "," + fmt("%.1f", Y(p.y)) + " ";
    if (!s.empty()) s.pop_back();
    return s;
  };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                  fmt("%.0f", w) + "\" height=\"" + fmt("%.0f", h) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>\n";
  for (const auto& poly : log.map.drivable_area)
    s += "<polygon points=\"" + poly_str(poly) + "\" fill=\"#e6e6e6\" stroke=\"#999999\"/>\n";
  for (const Lane& lane : log.map.lanes)
    s += "<polyline points=\"" + poly_str(lane.centerline) +
         "\" fill=\"none\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& cw : log.map.crosswalks)
    s += "<polygon points=\"" + poly_str(cw) + "\" fill=\"#fff2cc\" stroke=\"#bfa34d\"/>\n";

  // agent boxes every second, fading with time
  for (int k = segment.start; k <= segment.end; k += kFps) {
    const SceneFrame& f = log.frames[static_cast<size_t>(k)];
    double opacity = 0.15 + 0.35 * (k - segment.start) /
                                std::max(1, segment.end - segment.start);
    for (const AgentBox& a : f.agents) {
      auto corners = obb_corners(a);
      s += "<polygon points=\"" + poly_str(corners) +
           "\" fill=\"none\" stroke=\"#17a2b8\" opacity=\"" + fmt("%.2f", opacity) +
           "\"/>\n";
    }
  }

  std::vector<Vec2> logged;
  for (int k = segment.start; k <= segment.end; ++k)
    logged.push_back(log.frames[static_cast<size_t>(k)].ego.pose.position());
  s += "<polyline points=\"" + poly_str(logged) +
       "\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\"/>\n";

  std::vector<Vec2> sim;
  for (const SimStep& st : trace.steps) sim.push_back(st.pose.position());
  s += "<polyline points=\"" + poly_str(sim) +
       "\" fill=\"none\" stroke=\"#d63384\" stroke-width=\"1.5\"/>\n";
  s += "<text x=\"10\" y=\"16\" font-size=\"13\">segment " +
       std::to_string(trace.segment_id) + " - " + to_string(trace.term) +
       "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace deskdrive
