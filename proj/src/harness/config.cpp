#include "hjscc/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <string>

namespace hjscc::harness {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  model.hierarchy.validate();
  channel.validate();
  if (loss.lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (!(loss.beta > 0.0)) throw ConfigError("beta must be positive");
  if (loss.alphas.empty()) throw ConfigError("at least one alpha is required");
  for (double a : loss.alphas) {
    if (!(a > 0.0)) throw ConfigError("alpha values must be positive");
  }
  if (rate.index_bits <= 0 || rate.index_bits > 16) throw ConfigError("index_bits out of range");
  if (rate.patch.h <= 0 || rate.patch.w <= 0) throw ConfigError("patch sizes must be positive");
  if (training.steps < 0 || training.batch <= 0) throw ConfigError("invalid steps/batch");
  if (!(training.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (training.crop <= 0 || training.crop % model.hierarchy.downsampling.front() != 0) {
    throw ConfigError("crop size must be a positive multiple of the coarsest downsampling");
  }
  if (training.snr_db.empty()) throw ConfigError("at least one training SNR is required");
  if (training.log_every <= 0 || training.checkpoint_every <= 0) {
    throw ConfigError("log_every and checkpoint_every must be positive");
  }
}

std::filesystem::path output_path(const std::filesystem::path& path) {
  if (const char* root = std::getenv("HJSCC_OUTPUT_ROOT"); root && *root && path.is_relative()) {
    return std::filesystem::path(root) / path;
  }
  return path;
}

std::filesystem::path RunConfig::resolved_output_dir() const { return output_path(output_dir); }

json to_json(const RunConfig& c) {
  json j;
  j["model"] = {
      {"latent_channels", c.model.hierarchy.latent_channels},
      {"downsampling", c.model.hierarchy.downsampling},
      {"width", c.model.hierarchy.width},
      {"blocks", c.model.hierarchy.blocks},
      {"codec_width", c.model.codec.width},
      {"codec_blocks", c.model.codec.blocks},
      {"rate_attention", c.model.codec.rate_attention},
      {"attention_hidden", c.model.codec.attention_hidden},
      {"init_seed", c.model.init_seed},
  };
  j["loss"] = {{"lambda", c.loss.lambda}, {"beta", c.loss.beta}, {"alphas", c.loss.alphas}};
  j["rate"] = {{"index_bits", c.rate.index_bits},
               {"patch", {c.rate.patch.h, c.rate.patch.w}},
               {"options", c.rate.options}};
  if (c.rate.bits_per_symbol) j["rate"]["bits_per_symbol"] = *c.rate.bits_per_symbol;
  j["channel"] = {{"snr_db", c.channel.snr_db}, {"power", c.channel.power}};
  j["channel"]["feedback_snr_db"] =
      c.channel.feedback_snr_db ? json(*c.channel.feedback_snr_db) : json("noiseless");
  const auto& t = c.training;
  j["training"] = {
      {"steps", t.steps},
      {"batch", t.batch},
      {"learning_rate", t.learning_rate},
      {"warmup_steps", t.warmup_steps},
      {"lr_floor_ratio", t.lr_floor_ratio},
      {"grad_clip", t.grad_clip},
      {"seed", t.seed},
      {"crop", t.crop},
      {"log_every", t.log_every},
      {"checkpoint_every", t.checkpoint_every},
      {"snr_db", t.snr_db},
      {"feedback", t.feedback},
      {"synthetic_images", t.synthetic_images},
  };
  j["train_dir"] = c.train_dir;
  j["eval_dir"] = c.eval_dir;
  j["output_dir"] = c.output_dir;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  if (!j.is_object()) throw ConfigError("configuration must be an object");
  for (const char* section : {"model", "loss", "rate", "channel", "training"}) {
    if (j.contains(section) && !j.at(section).is_object()) {
      throw ConfigError(std::string("section '") + section + "' must be an object");
    }
  }
  try {
    if (j.contains("model")) {
      const json& m = j.at("model");
      read(m, "latent_channels", c.model.hierarchy.latent_channels);
      read(m, "downsampling", c.model.hierarchy.downsampling);
      read(m, "width", c.model.hierarchy.width);
      read(m, "blocks", c.model.hierarchy.blocks);
      read(m, "codec_width", c.model.codec.width);
      read(m, "codec_blocks", c.model.codec.blocks);
      read(m, "rate_attention", c.model.codec.rate_attention);
      read(m, "attention_hidden", c.model.codec.attention_hidden);
      read(m, "init_seed", c.model.init_seed);
    }
    if (j.contains("loss")) {
      const json& l = j.at("loss");
      read(l, "lambda", c.loss.lambda);
      read(l, "beta", c.loss.beta);
      read(l, "alphas", c.loss.alphas);
    }
    if (j.contains("rate")) {
      const json& r = j.at("rate");
      read(r, "index_bits", c.rate.index_bits);
      if (r.contains("patch")) {
        const auto p = r.at("patch").get<std::vector<int>>();
        if (p.size() != 2) throw ConfigError("rate.patch must be [rows, cols]");
        c.rate.patch = {p[0], p[1]};
      }
      read(r, "options", c.rate.options);
      if (r.contains("bits_per_symbol")) c.rate.bits_per_symbol = r.at("bits_per_symbol").get<double>();
    }
    if (j.contains("channel")) {
      const json& ch = j.at("channel");
      read(ch, "snr_db", c.channel.snr_db);
      read(ch, "power", c.channel.power);
      if (ch.contains("feedback_snr_db")) {
        const json& f = ch.at("feedback_snr_db");
        if (f.is_string()) {
          if (f.get<std::string>() != "noiseless") {
            throw ConfigError("feedback_snr_db must be a number or \"noiseless\"");
          }
          c.channel.feedback_snr_db.reset();
        } else {
          c.channel.feedback_snr_db = f.get<double>();
        }
      }
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      auto& o = c.training;
      read(t, "steps", o.steps);
      read(t, "batch", o.batch);
      read(t, "learning_rate", o.learning_rate);
      read(t, "warmup_steps", o.warmup_steps);
      read(t, "lr_floor_ratio", o.lr_floor_ratio);
      read(t, "grad_clip", o.grad_clip);
      read(t, "seed", o.seed);
      read(t, "crop", o.crop);
      read(t, "log_every", o.log_every);
      read(t, "checkpoint_every", o.checkpoint_every);
      read(t, "snr_db", o.snr_db);
      read(t, "feedback", o.feedback);
      read(t, "synthetic_images", o.synthetic_images);
    }
    read(j, "train_dir", c.train_dir);
    read(j, "eval_dir", c.eval_dir);
    read(j, "output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(config).dump(2) << "\n";
}

ForwardOptions forward_options(const RunConfig& config, Phase phase, double alpha, double snr_db) {
  ForwardOptions o;
  o.phase = phase;
  o.alpha = alpha;
  o.lambda = config.loss.lambda;
  o.beta = config.loss.beta;
  o.channel = config.channel;
  o.channel.snr_db = snr_db;
  o.rate = config.rate;
  return o;
}

}  // namespace hjscc::harness
