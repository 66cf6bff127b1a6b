#include "hjscc/harness/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "hjscc/harness/image_io.hpp"

namespace hjscc::harness {

namespace {

// 3x5 glyphs, one 3-bit row per entry, top to bottom.
const std::map<char, std::array<int, 5>>& glyphs() {
  static const std::map<char, std::array<int, 5>> g = {
      {'0', {7, 5, 5, 5, 7}}, {'1', {2, 6, 2, 2, 7}}, {'2', {7, 1, 7, 4, 7}},
      {'3', {7, 1, 7, 1, 7}}, {'4', {5, 5, 7, 1, 1}}, {'5', {7, 4, 7, 1, 7}},
      {'6', {7, 4, 7, 5, 7}}, {'7', {7, 1, 1, 1, 1}}, {'8', {7, 5, 7, 5, 7}},
      {'9', {7, 5, 7, 1, 7}}, {'.', {0, 0, 0, 0, 2}}, {'-', {0, 0, 7, 0, 0}},
      {'=', {0, 7, 0, 7, 0}}, {'A', {2, 5, 7, 5, 5}}, {'B', {6, 5, 6, 5, 6}},
      {'C', {3, 4, 4, 4, 3}}, {'D', {6, 5, 5, 5, 6}}, {'E', {7, 4, 6, 4, 7}},
      {'F', {7, 4, 6, 4, 4}}, {'G', {3, 4, 5, 5, 3}}, {'H', {5, 5, 7, 5, 5}},
      {'I', {7, 2, 2, 2, 7}}, {'K', {5, 5, 6, 5, 5}}, {'L', {4, 4, 4, 4, 7}},
      {'M', {5, 7, 7, 5, 5}}, {'N', {6, 5, 5, 5, 5}}, {'O', {2, 5, 5, 5, 2}},
      {'P', {6, 5, 6, 4, 4}}, {'R', {6, 5, 6, 5, 5}}, {'S', {3, 4, 2, 1, 6}},
      {'T', {7, 2, 2, 2, 2}}, {'V', {5, 5, 5, 5, 2}}, {'W', {5, 5, 7, 7, 5}},
  };
  return g;
}

struct Rgb {
  std::uint8_t r, g, b;
};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {}

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    const std::size_t i = (static_cast<std::size_t>(y) * w_ + x) * 3;
    px_[i] = c.r;
    px_[i + 1] = c.g;
    px_[i + 2] = c.b;
  }

  void line(int x0, int y0, int x1, int y1, Rgb c, int thickness = 1) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      dot(x0, y0, c, thickness);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void dot(int x, int y, Rgb c, int radius) {
    for (int oy = -radius / 2; oy <= radius / 2; ++oy)
      for (int ox = -radius / 2; ox <= radius / 2; ++ox) set(x + ox, y + oy, c);
  }

  void text(int x, int y, const std::string& s, Rgb c, int scale = 2) {
    for (char ch : s) {
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      if (auto it = glyphs().find(up); it != glyphs().end()) {
        for (int row = 0; row < 5; ++row)
          for (int col = 0; col < 3; ++col)
            if (it->second[row] & (4 >> col))
              for (int a = 0; a < scale; ++a)
                for (int b = 0; b < scale; ++b) set(x + col * scale + b, y + row * scale + a, c);
      }
      x += 4 * scale;
    }
  }

  static int text_width(const std::string& s, int scale = 2) { return static_cast<int>(s.size()) * 4 * scale; }

  std::vector<std::uint8_t> take() { return std::move(px_); }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (a != 0.0 && a < 0.1) {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  } else if (a < 10.0) {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f", v);
  }
  return buf;
}

std::string num_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  std::string s = buf;
  std::replace(s.begin(), s.end(), '.', 'p');
  std::replace(s.begin(), s.end(), '-', 'm');
  return s;
}

std::string pretty(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Largest decrease of y between consecutive points ordered by x (0 when monotone).
double max_drop(const std::vector<double>& y) {
  double drop = 0.0;
  for (std::size_t i = 1; i < y.size(); ++i) drop = std::max(drop, y[i - 1] - y[i]);
  return drop;
}

}  // namespace

std::vector<std::uint8_t> render_plot(const Curve& curve, int width, int height) {
  Canvas cv(width, height);
  const Rgb black{0, 0, 0}, grey{200, 200, 200}, blue{31, 90, 180};
  const int left = 70, right = width - 20, top = 40, bottom = height - 50;

  double xmin = *std::min_element(curve.x.begin(), curve.x.end());
  double xmax = *std::max_element(curve.x.begin(), curve.x.end());
  double ymin = *std::min_element(curve.y.begin(), curve.y.end());
  double ymax = *std::max_element(curve.y.begin(), curve.y.end());
  auto widen = [](double& lo, double& hi) {
    const double pad = hi > lo ? 0.08 * (hi - lo) : std::max(1e-3, 0.05 * std::abs(lo));
    lo -= pad;
    hi += pad;
  };
  widen(xmin, xmax);
  widen(ymin, ymax);
  auto px = [&](double x) { return left + static_cast<int>(std::lround((x - xmin) / (xmax - xmin) * (right - left))); };
  auto py = [&](double y) { return bottom - static_cast<int>(std::lround((y - ymin) / (ymax - ymin) * (bottom - top))); };

  constexpr int kTicks = 4;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / kTicks;
    const double fy = ymin + (ymax - ymin) * i / kTicks;
    cv.line(px(fx), top, px(fx), bottom, grey);
    cv.line(left, py(fy), right, py(fy), grey);
    const std::string lx = tick_label(fx), ly = tick_label(fy);
    cv.text(px(fx) - Canvas::text_width(lx) / 2, bottom + 8, lx, black);
    cv.text(left - Canvas::text_width(ly) - 6, py(fy) - 5, ly, black);
  }
  cv.line(left, bottom, right, bottom, black, 2);
  cv.line(left, top, left, bottom, black, 2);
  for (std::size_t i = 0; i + 1 < curve.x.size(); ++i) {
    cv.line(px(curve.x[i]), py(curve.y[i]), px(curve.x[i + 1]), py(curve.y[i + 1]), blue, 2);
  }
  for (std::size_t i = 0; i < curve.x.size(); ++i) cv.dot(px(curve.x[i]), py(curve.y[i]), blue, 7);

  cv.text(left + 20, 12, curve.name, black);
  cv.text((left + right - Canvas::text_width(curve.x_label)) / 2, height - 20, curve.x_label, black);
  cv.text(4, 12, "PSNR DB", black);
  return cv.take();
}

ReportResult sweep_report(const std::vector<MetricsRow>& input, const std::filesystem::path& out_dir) {
  ReportResult result;
  result.summary = {{"curves", nlohmann::json::array()}};
  if (input.empty()) {
    result.warnings.push_back("no metric rows; nothing to report");
    result.summary["warnings"] = result.warnings;
    return result;
  }
  std::vector<MetricsRow> rows;
  for (const auto& r : input)
    if (r.image_id == "mean") rows.push_back(r);
  if (rows.empty()) rows = input;

  struct Point {
    double x, y, cbr;
  };
  using CbrKey = std::tuple<double, bool, double>;  // lambda, feedback, snr
  using SnrKey = std::tuple<double, bool, double>;  // lambda, feedback, alpha
  std::map<CbrKey, std::map<double, std::vector<Point>>> by_cbr;  // keyed by alpha
  std::map<SnrKey, std::map<double, std::vector<Point>>> by_snr;  // keyed by snr
  for (const auto& r : rows) {
    by_cbr[{r.lambda, r.feedback, r.snr_db}][r.alpha].push_back({r.cbr_total, r.psnr_db, r.cbr_total});
    by_snr[{r.lambda, r.feedback, r.alpha}][r.snr_db].push_back({r.snr_db, r.psnr_db, r.cbr_total});
  }

  std::filesystem::create_directories(out_dir);
  auto averaged = [](const std::map<double, std::vector<Point>>& m) {
    std::vector<Point> pts;
    for (const auto& [key, list] : m) {
      Point p{0, 0, 0};
      for (const auto& q : list) {
        p.x += q.x / list.size();
        p.y += q.y / list.size();
        p.cbr += q.cbr / list.size();
      }
      pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
    return pts;
  };
  auto emit = [&](const std::string& kind, const std::string& file_stem, const std::string& title,
                  const std::string& x_label, const std::vector<Point>& pts, nlohmann::json meta) {
    if (pts.size() < 2) {
      result.warnings.push_back(file_stem + ": fewer than two points, curve skipped");
      return;
    }
    Curve c{title, x_label, {}, {}};
    for (const auto& p : pts) {
      c.x.push_back(p.x);
      c.y.push_back(p.y);
    }
    const auto path = out_dir / (file_stem + ".png");
    constexpr int kWidth = 640, kHeight = 420;
    save_png_rgb8(path, kWidth, kHeight, render_plot(c, kWidth, kHeight));
    result.files.push_back(path);
    const double drop = max_drop(c.y);
    meta["kind"] = kind;
    meta["file"] = path.filename().string();
    meta["x"] = c.x;
    meta["psnr_db"] = c.y;
    meta["psnr_non_decreasing"] = drop == 0.0;
    meta["max_psnr_drop_db"] = drop;
    result.summary["curves"].push_back(meta);
  };

  for (const auto& [key, m] : by_cbr) {
    const auto& [lambda, fb, snr] = key;
    const std::string stem = "psnr_vs_cbr_lambda" + num_tag(lambda) + "_snr" + num_tag(snr) + (fb ? "_fb" : "");
    emit("psnr_vs_cbr", stem, "L=" + pretty(lambda) + " SNR=" + pretty(snr) + (fb ? " FB" : ""), "CBR",
         averaged(m), {{"lambda", lambda}, {"feedback", fb}, {"snr_db", snr}});
  }
  for (const auto& [key, m] : by_snr) {
    const auto& [lambda, fb, alpha] = key;
    const std::string stem = "psnr_vs_snr_lambda" + num_tag(lambda) + "_alpha" + num_tag(alpha) + (fb ? "_fb" : "");
    std::vector<Point> pts = averaged(m);
    nlohmann::json meta = {{"lambda", lambda}, {"feedback", fb}, {"alpha", alpha}};
    std::vector<double> cbr;
    for (const auto& p : pts) cbr.push_back(p.cbr);
    meta["cbr_total"] = cbr;
    emit("psnr_vs_snr", stem, "L=" + pretty(lambda) + " A=" + pretty(alpha) + (fb ? " FB" : ""), "SNR DB",
         pts, meta);
  }
  result.summary["warnings"] = result.warnings;
  std::ofstream(out_dir / "summary.json", std::ios::binary) << result.summary.dump(2) << "\n";
  result.files.push_back(out_dir / "summary.json");
  return result;
}

}  // namespace hjscc::harness
