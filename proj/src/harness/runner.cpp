#include "hjscc/harness/runner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hjscc/harness/checkpoint.hpp"
#include "hjscc/harness/image_io.hpp"
#include "hjscc/harness/optimizer.hpp"
#include "hjscc/harness/seeds.hpp"

namespace hjscc::harness {

namespace {

constexpr int kDefaultSyntheticImages = 256;
constexpr std::uint64_t kSyntheticEvalSalt = 0x5e7a1ULL;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
const T& pick(const std::vector<T>& values, std::uint64_t seed) {
  return values[seed % values.size()];
}

struct SlotInput {
  Sample sample;
  double alpha = 0.0;
  double snr = 0.0;
  LossBreakdown breakdown;
};

std::filesystem::path dump_divergence(const std::filesystem::path& out, long step, int slot,
                                      const SlotInput& in, const std::string& reason) {
  const auto dir = out / ("divergence_step_" + std::to_string(step));
  std::filesystem::create_directories(dir);
  save_png(dir / "input.png", in.sample.image.tensor());
  const LossBreakdown& b = in.breakdown;
  nlohmann::json j = {{"step", step},        {"slot", slot},
                      {"reason", reason},    {"image_id", in.sample.id},
                      {"alpha", in.alpha},   {"snr_db", in.snr},
                      {"loss", fmt(b.total)}, {"rate_term", fmt(b.rate_term)},
                      {"d_compress", fmt(b.d_compress)}, {"d_transmit", fmt(b.d_transmit)}};
  std::ofstream(dir / "diagnostic.json") << j.dump(2) << "\n";
  return dir;
}

std::string curve_header() {
  return "step,learning_rate,loss,rate_term,d_compress,d_transmit,psnr_db,cbr_total,grad_norm";
}

std::string curve_row(const StepRecord& r) {
  return std::to_string(r.step) + "," + fmt(r.learning_rate) + "," + fmt(r.loss) + "," +
         fmt(r.rate_term) + "," + fmt(r.d_compress) + "," + fmt(r.d_transmit) + "," +
         fmt(r.psnr_db) + "," + fmt(r.cbr_total) + "," + fmt(r.grad_norm);
}

// Keeps rows logged at or before `step` so a resumed run appends a consistent curve.
void truncate_curve(const std::filesystem::path& path, long step) {
  std::vector<std::string> kept;
  if (std::ifstream in(path); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line == curve_header()) continue;
      if (std::stol(line.substr(0, line.find(','))) <= step) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  out << curve_header() << "\n";
  for (const auto& l : kept) out << l << "\n";
}

}  // namespace

ImageDataset training_dataset(const RunConfig& config) {
  IngestOptions io;
  io.split = Split::train;
  io.crop = config.training.crop;
  io.seed = config.training.seed;
  if (!config.train_dir.empty()) return ImageDataset::ingest(config.train_dir, io);
  const int count = config.training.synthetic_images > 0 ? config.training.synthetic_images
                                                          : kDefaultSyntheticImages;
  const int side = 2 * config.training.crop;
  return ImageDataset::synthetic(count, side, side, config.training.seed, io);
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  const auto out = config.resolved_output_dir();
  std::filesystem::create_directories(out);
  save_config(out / "config.json", config);
  auto log = [&](const std::string& m) {
    if (options.log) options.log(m);
  };

  HjsccModel model(config.model);
  Adam adam(model.params());
  long start = 0;
  if (options.resume) {
    const Checkpoint ckpt = read_checkpoint(*options.resume);
    restore_params(ckpt, model.params());
    adam.set_state(ckpt.optimizer);
    start = ckpt.step;
    log("resumed from step " + std::to_string(start));
  }

  const ImageDataset data = training_dataset(config);
  for (const auto& w : data.warnings()) log("warning: " + w);

  TrainResult result;
  result.checkpoint = out / "checkpoint.bin";
  result.curve = out / "curve.csv";
  truncate_curve(result.curve, start);
  std::ofstream curve(result.curve, std::ios::app);

  const auto& t = config.training;
  const long end = options.stop_after >= 0 ? std::min(options.stop_after, t.steps) : t.steps;
  for (long step = start; step < end; ++step) {
    const double lr = cosine_learning_rate(t.learning_rate, step, t.steps, t.warmup_steps, t.lr_floor_ratio);
    model.params().zero_grad();
    StepRecord rec;
    rec.step = step + 1;
    rec.learning_rate = lr;
    std::vector<SlotInput> inputs;
    for (int slot = 0; slot < t.batch; ++slot) {
      const auto s = static_cast<std::uint64_t>(step);
      const auto k = static_cast<std::uint64_t>(slot);
      SlotInput in;
      in.sample = data.train_sample(step, slot);
      in.alpha = pick(config.loss.alphas, derive_seed({t.seed, s, k, 1}));
      in.snr = pick(t.snr_db, derive_seed({t.seed, s, k, 2}));
      auto diverged = [&](const std::string& reason) {
        const auto dir = dump_divergence(out, step + 1, slot, in, reason);
        return TrainingDiverged(reason + " at step " + std::to_string(step + 1) +
                                    "; diagnostics in " + dir.string(),
                                dir);
      };
      ForwardOptions fo = forward_options(config, Phase::train, in.alpha, in.snr);
      NoiseStreams noise = NoiseStreams::from_seed(derive_seed({t.seed, s, k, 3}));
      ForwardResult r;
      try {
        r = t.feedback ? forward_feedback(model, in.sample.image, fo, noise)
                       : forward_no_feedback(model, in.sample.image, fo, noise);
      } catch (const NonFiniteError& e) {
        throw diverged(std::string("non-finite activations (") + e.what() + ")");
      }
      in.breakdown = r.breakdown;
      if (!std::isfinite(r.breakdown.total)) throw diverged("non-finite loss");
      backward(ops::scale(r.loss, 1.0 / t.batch));
      const double inv = 1.0 / t.batch;
      rec.loss += r.breakdown.total * inv;
      rec.rate_term += r.breakdown.rate_term * inv;
      rec.d_compress += r.breakdown.d_compress * inv;
      rec.d_transmit += r.breakdown.d_transmit * inv;
      rec.psnr_db += r.report.psnr_db * inv;
      rec.cbr_total += r.report.cbr_total * inv;
      inputs.push_back(std::move(in));
    }
    rec.grad_norm = adam.clip_gradients(t.grad_clip);
    if (!std::isfinite(rec.grad_norm)) {
      const auto dir = dump_divergence(out, step + 1, 0, inputs.front(), "non-finite gradient");
      throw TrainingDiverged("non-finite gradient at step " + std::to_string(step + 1) +
                                 "; diagnostics in " + dir.string(),
                             dir);
    }
    adam.step(lr);
    result.steps.push_back(rec);

    if (rec.step % t.log_every == 0) {
      curve << curve_row(rec) << "\n" << std::flush;
      char line[160];
      std::snprintf(line, sizeof(line), "step %ld loss %.4f psnr %.2f dB cbr %.4f lr %.2e",
                    rec.step, rec.loss, rec.psnr_db, rec.cbr_total, lr);
      log(line);
    }
    if (rec.step % t.checkpoint_every == 0) {
      save_checkpoint(result.checkpoint, config, rec.step, model.params(), adam.state());
    }
  }
  result.final_step = std::max(start, end);
  save_checkpoint(result.checkpoint, config, result.final_step, model.params(), adam.state());
  return result;
}

ImageDataset evaluation_dataset(const EvalOptions& options, int divisibility,
                                std::vector<std::string>* warnings) {
  IngestOptions io;
  io.split = Split::eval;
  io.crop = options.crop;
  io.divisibility = divisibility;
  io.seed = options.seed;
  if (!options.data.empty()) {
    ImageDataset ds = ImageDataset::ingest(options.data, io);
    if (warnings) *warnings = ds.warnings();
    return ds;
  }
  const int side = options.crop > 0 ? options.crop : 32;
  return ImageDataset::synthetic(options.synthetic_images, side, side,
                                 derive_seed({options.seed, kSyntheticEvalSalt}), io);
}

EvalResult evaluate_model(const HjsccModel& model, const RunConfig& config,
                          const std::vector<Sample>& samples, const EvalOptions& options) {
  const std::vector<double> alphas = options.alphas.empty() ? config.loss.alphas : options.alphas;
  if (options.snr_db.empty() || alphas.empty()) throw ConfigError("empty SNR or alpha list");
  for (double a : alphas) {
    if (!(a > 0.0)) throw ConfigError("alpha values must be positive");
  }
  RunConfig cfg = config;
  cfg.channel.feedback_snr_db = options.feedback_snr_db;
  if (options.power) cfg.channel.power = *options.power;
  cfg.channel.validate();

  EvalResult result;
  NoGradGuard no_grad;
  for (std::size_t si = 0; si < options.snr_db.size(); ++si) {
    for (double alpha : alphas) {
      MetricsRow mean;
      mean.image_id = "mean";
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& sample = samples[i];
        ForwardOptions fo = forward_options(cfg, Phase::eval, alpha, options.snr_db[si]);
        fo.valid_height = sample.height;
        fo.valid_width = sample.width;
        NoiseStreams noise = NoiseStreams::from_seed(derive_seed({options.seed, i, si}));
        const ForwardResult r = options.feedback ? forward_feedback(model, sample.image, fo, noise)
                                                 : forward_no_feedback(model, sample.image, fo, noise);
        MetricsRow row;
        row.image_id = sample.id;
        row.feedback = options.feedback;
        row.snr_db = options.snr_db[si];
        row.feedback_snr_db = options.feedback_snr_db;
        row.alpha = alpha;
        row.lambda = cfg.loss.lambda;
        row.cbr_payload = r.report.cbr_payload;
        row.cbr_side_info = r.report.cbr_side_info;
        row.cbr_total = row.cbr_payload + row.cbr_side_info;
        row.psnr_db = r.report.psnr_db;
        row.rate_nats = r.breakdown.rate_nats_total;
        row.rate_term = r.breakdown.rate_term;
        row.d_compress = r.breakdown.d_compress;
        row.d_transmit = r.breakdown.d_transmit;
        row.loss_total = r.breakdown.total;
        row.payload_reals = r.report.payload_reals;
        result.per_image.push_back(row);

        const double inv = 1.0 / static_cast<double>(samples.size());
        mean.cbr_payload += row.cbr_payload * inv;
        mean.cbr_side_info += row.cbr_side_info * inv;
        mean.psnr_db += row.psnr_db * inv;
        mean.rate_nats += row.rate_nats * inv;
        mean.rate_term += row.rate_term * inv;
        mean.d_compress += row.d_compress * inv;
        mean.d_transmit += row.d_transmit * inv;
        mean.loss_total += row.loss_total * inv;
        mean.payload_reals += row.payload_reals;
      }
      mean.feedback = options.feedback;
      mean.snr_db = options.snr_db[si];
      mean.feedback_snr_db = options.feedback_snr_db;
      mean.alpha = alpha;
      mean.lambda = cfg.loss.lambda;
      mean.cbr_total = mean.cbr_payload + mean.cbr_side_info;
      result.means.push_back(mean);
    }
  }
  return result;
}

EvalResult evaluate(const EvalOptions& options) {
  const Checkpoint ckpt = read_checkpoint(options.checkpoint);
  HjsccModel model(ckpt.config.model);
  restore_params(ckpt, model.params());
  std::vector<std::string> warnings;
  const ImageDataset ds =
      evaluation_dataset(options, ckpt.config.model.hierarchy.downsampling.front(), &warnings);
  EvalResult result = evaluate_model(model, ckpt.config, ds.eval_all(), options);
  result.warnings = std::move(warnings);
  return result;
}

std::vector<std::string> metrics_columns() {
  return {"image_id",  "feedback",   "snr_db",     "feedback_snr_db", "alpha",
          "lambda",    "cbr_total",  "cbr_payload", "cbr_side_info",  "psnr_db",
          "rate_nats", "rate_term",  "d_compress", "d_transmit",      "loss_total",
          "payload_reals"};
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  const auto cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& r : rows) {
    os << r.image_id << "," << (r.feedback ? 1 : 0) << "," << fmt(r.snr_db) << ","
       << (r.feedback_snr_db ? fmt(*r.feedback_snr_db) : std::string("noiseless")) << ","
       << fmt(r.alpha) << "," << fmt(r.lambda) << "," << fmt(r.cbr_total) << ","
       << fmt(r.cbr_payload) << "," << fmt(r.cbr_side_info) << "," << fmt(r.psnr_db) << ","
       << fmt(r.rate_nats) << "," << fmt(r.rate_term) << "," << fmt(r.d_compress) << ","
       << fmt(r.d_transmit) << "," << fmt(r.loss_total) << "," << r.payload_reals << "\n";
  }
  return os.str();
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return {};
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  for (const auto& c : metrics_columns()) {
    if (!index.contains(c)) throw ConfigError("metrics CSV lacks column " + c);
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw ConfigError("ragged metrics row: " + line);
    auto num = [&](const char* name) { return std::stod(cells[index.at(name)]); };
    MetricsRow r;
    r.image_id = cells[index.at("image_id")];
    r.feedback = cells[index.at("feedback")] == "1";
    r.snr_db = num("snr_db");
    const std::string& fb = cells[index.at("feedback_snr_db")];
    if (fb != "noiseless") r.feedback_snr_db = std::stod(fb);
    r.alpha = num("alpha");
    r.lambda = num("lambda");
    r.cbr_total = num("cbr_total");
    r.cbr_payload = num("cbr_payload");
    r.cbr_side_info = num("cbr_side_info");
    r.psnr_db = num("psnr_db");
    r.rate_nats = num("rate_nats");
    r.rate_term = num("rate_term");
    r.d_compress = num("d_compress");
    r.d_transmit = num("d_transmit");
    r.loss_total = num("loss_total");
    r.payload_reals = std::stol(cells[index.at("payload_reals")]);
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json metrics_json(const EvalResult& result) {
  auto row_json = [](const MetricsRow& r) {
    nlohmann::json j = {{"image_id", r.image_id},     {"feedback", r.feedback},
                        {"snr_db", r.snr_db},         {"alpha", r.alpha},
                        {"lambda", r.lambda},         {"cbr_total", r.cbr_total},
                        {"cbr_payload", r.cbr_payload}, {"cbr_side_info", r.cbr_side_info},
                        {"psnr_db", r.psnr_db},       {"rate_nats", r.rate_nats},
                        {"rate_term", r.rate_term},   {"d_compress", r.d_compress},
                        {"d_transmit", r.d_transmit}, {"loss_total", r.loss_total},
                        {"payload_reals", r.payload_reals}};
    j["feedback_snr_db"] = r.feedback_snr_db ? nlohmann::json(*r.feedback_snr_db)
                                             : nlohmann::json("noiseless");
    return j;
  };
  nlohmann::json j;
  j["per_image"] = nlohmann::json::array();
  for (const auto& r : result.per_image) j["per_image"].push_back(row_json(r));
  j["means"] = nlohmann::json::array();
  for (const auto& r : result.means) j["means"].push_back(row_json(r));
  j["warnings"] = result.warnings;
  return j;
}

void write_metrics(const std::filesystem::path& dir, const EvalResult& result) {
  std::filesystem::create_directories(dir);
  std::vector<MetricsRow> rows = result.per_image;
  rows.insert(rows.end(), result.means.begin(), result.means.end());
  std::ofstream(dir / "metrics.csv", std::ios::binary) << metrics_csv(rows);
  std::ofstream(dir / "metrics.json", std::ios::binary) << metrics_json(result).dump(2) << "\n";
}

}  // namespace hjscc::harness
