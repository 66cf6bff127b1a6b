#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjscc/pipeline.hpp"

namespace hjscc::harness {

struct LossConfig {
  double lambda = 64.0;
  double beta = 1.0;
  /// Training draws alpha from this list; evaluation sweeps it by default.
  std::vector<double> alphas{0.5, 1.0, 2.0};
};

struct TrainingConfig {
  long steps = 2000;
  int batch = 4;
  double learning_rate = 1e-4;
  long warmup_steps = 50;
  double lr_floor_ratio = 0.05;
  double grad_clip = 5.0;
  std::uint64_t seed = 7;
  int crop = 32;
  long log_every = 50;
  long checkpoint_every = 500;
  /// Training SNRs in dB; each sample draws one.
  std::vector<double> snr_db{10.0};
  bool feedback = false;
  /// Procedural images used when no train_dir is given.
  int synthetic_images = 0;
};

struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  RateConfig rate;
  channel::ChannelSpec channel;
  TrainingConfig training;
  std::string train_dir;
  std::string eval_dir;
  std::string output_dir = "runs/default";

  void validate() const;
  /// output_dir, placed under $HJSCC_OUTPUT_ROOT when that is set and output_dir is relative.
  std::filesystem::path resolved_output_dir() const;
};

/// Places a relative path under $HJSCC_OUTPUT_ROOT when that variable is set.
std::filesystem::path output_path(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& config);

/// Forward options for one sample under this configuration.
ForwardOptions forward_options(const RunConfig& config, Phase phase, double alpha, double snr_db);

}  // namespace hjscc::harness
