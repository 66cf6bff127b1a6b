#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjscc/harness/config.hpp"
#include "hjscc/harness/dataset.hpp"

namespace hjscc::harness {

using LogSink = std::function<void(const std::string&)>;

/// Raised when the training loss stops being finite. A diagnostic dump is written first.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::filesystem::path dump)
      : std::runtime_error(what), dump_dir(std::move(dump)) {}
  std::filesystem::path dump_dir;
};

struct TrainOptions {
  /// Continue from this checkpoint instead of a fresh initialization.
  std::optional<std::filesystem::path> resume;
  /// Stop (and checkpoint) once this many steps are done; negative runs to config.training.steps.
  long stop_after = -1;
  LogSink log;
};

struct StepRecord {
  long step = 0;
  double learning_rate = 0.0;
  double loss = 0.0;
  double rate_term = 0.0;
  double d_compress = 0.0;
  double d_transmit = 0.0;
  double psnr_db = 0.0;
  double cbr_total = 0.0;
  double grad_norm = 0.0;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path curve;
  long final_step = 0;
  /// Every step run by this call, in order.
  std::vector<StepRecord> steps;
};

/// Outputs under config.resolved_output_dir(): config.json, checkpoint.bin, curve.csv.
TrainResult train(const RunConfig& config, const TrainOptions& options = {});

/// The training image source of a configuration: train_dir, or procedural images.
ImageDataset training_dataset(const RunConfig& config);

struct MetricsRow {
  std::string image_id;
  bool feedback = false;
  double snr_db = 0.0;
  std::optional<double> feedback_snr_db;
  double alpha = 0.0;
  double lambda = 0.0;
  double cbr_total = 0.0;
  double cbr_payload = 0.0;
  double cbr_side_info = 0.0;
  double psnr_db = 0.0;
  double rate_nats = 0.0;
  double rate_term = 0.0;
  double d_compress = 0.0;
  double d_transmit = 0.0;
  double loss_total = 0.0;
  long payload_reals = 0;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  /// Image directory; empty selects procedural images.
  std::filesystem::path data;
  std::vector<double> snr_db{10.0};
  std::vector<double> alphas;  // empty: the checkpoint's training alphas
  bool feedback = false;
  std::optional<double> feedback_snr_db;
  /// Overrides the checkpoint's channel power budget.
  std::optional<double> power;
  /// Centre crop size, 0 for full images padded to divisibility.
  int crop = 0;
  int synthetic_images = 12;
  std::uint64_t seed = 2024;
};

struct EvalResult {
  std::vector<MetricsRow> per_image;
  /// One row per (SNR, alpha) cell with image_id "mean".
  std::vector<MetricsRow> means;
  std::vector<std::string> warnings;
};

EvalResult evaluate(const EvalOptions& options);
/// Evaluates an in-memory model; `config` supplies the loss and rate settings.
EvalResult evaluate_model(const HjsccModel& model, const RunConfig& config,
                          const std::vector<Sample>& samples, const EvalOptions& options);

/// Eval-split samples for the options (directory or procedural).
ImageDataset evaluation_dataset(const EvalOptions& options, int divisibility,
                                std::vector<std::string>* warnings = nullptr);

std::vector<std::string> metrics_columns();
std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);
nlohmann::json metrics_json(const EvalResult& result);

/// Writes metrics.csv and metrics.json into `dir`.
void write_metrics(const std::filesystem::path& dir, const EvalResult& result);

}  // namespace hjscc::harness
