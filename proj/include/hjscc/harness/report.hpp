#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjscc/harness/runner.hpp"

namespace hjscc::harness {

struct Curve {
  std::string name;
  std::string x_label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ReportResult {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
  nlohmann::json summary;
};

/// PSNR-vs-CBR curves (one per lambda/SNR/feedback, swept over alpha) and PSNR-vs-SNR
/// curves (one per lambda/alpha/feedback). Mean rows are used when present. Curves with
/// fewer than two points are skipped with a warning. Writes one PNG per curve plus
/// summary.json; nothing is written for empty input.
ReportResult sweep_report(const std::vector<MetricsRow>& rows, const std::filesystem::path& out_dir);

/// Line plot with axes, tick labels and a title, as 8-bit RGB.
std::vector<std::uint8_t> render_plot(const Curve& curve, int width, int height);

}  // namespace hjscc::harness
