// hjscc command line: train, eval, report, synth.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hjscc/harness/checkpoint.hpp"
#include "hjscc/harness/config.hpp"
#include "hjscc/harness/report.hpp"
#include "hjscc/harness/runner.hpp"
#include "hjscc/harness/synth.hpp"

using namespace hjscc;
using namespace hjscc::harness;

namespace {

std::optional<double> parse_feedback_snr(const std::string& text) {
  if (text.empty() || text == "noiseless") return std::nullopt;
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw ConfigError("--feedback-snr-db expects a number or 'noiseless', got '" + text + "'");
  }
}

void print_log(const std::string& line) { std::cerr << line << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical joint source-channel coding: training, evaluation and reporting"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
  std::string config_path, resume_path, train_out, train_fb_snr;
  long steps_override = -1;
  std::optional<double> train_snr, train_power;
  train_cmd->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", resume_path, "checkpoint to continue from")->check(CLI::ExistingFile);
  train_cmd->add_option("--steps", steps_override, "override training.steps");
  train_cmd->add_option("--output", train_out, "override output_dir");
  train_cmd->add_option("--snr-db", train_snr, "training SNR in dB");
  train_cmd->add_option("--feedback-snr-db", train_fb_snr, "feedback SNR in dB or 'noiseless'");
  train_cmd->add_option("--power", train_power, "channel power budget P");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint over SNR and alpha grids");
  EvalOptions eval;
  std::string eval_data, eval_out = "eval", eval_fb_snr;
  eval_cmd->add_option("--ckpt", eval.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval_data, "image directory (omit for procedural images)");
  eval_cmd->add_option("--snr-db", eval.snr_db, "SNR list in dB")->delimiter(',');
  eval_cmd->add_option("--alpha", eval.alphas, "alpha list")->delimiter(',');
  eval_cmd->add_flag("--feedback", eval.feedback, "use the feedback pipeline");
  eval_cmd->add_option("--feedback-snr-db", eval_fb_snr, "feedback SNR in dB or 'noiseless'");
  eval_cmd->add_option("--power", eval.power, "channel power budget P");
  eval_cmd->add_option("--crop", eval.crop, "centre crop size, 0 keeps full images");
  eval_cmd->add_option("--images", eval.synthetic_images, "procedural image count");
  eval_cmd->add_option("--seed", eval.seed, "evaluation seed");
  eval_cmd->add_option("--out", eval_out, "output directory");

  // report
  auto* report_cmd = app.add_subcommand("report", "plots and summary from metrics CSVs");
  std::vector<std::string> report_in;
  std::string report_out = "report";
  report_cmd->add_option("--in", report_in, "metrics CSV files")->required();
  report_cmd->add_option("--out", report_out, "output directory");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write procedural PNG images");
  std::string synth_out;
  int synth_count = 16, synth_size = 64;
  std::uint64_t synth_seed = 1;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--count", synth_count, "number of images");
  synth_cmd->add_option("--size", synth_size, "image side length");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      RunConfig cfg = load_config(config_path);
      if (steps_override >= 0) cfg.training.steps = steps_override;
      if (!train_out.empty()) cfg.output_dir = train_out;
      if (train_snr) {
        cfg.channel.snr_db = *train_snr;
        cfg.training.snr_db = {*train_snr};
      }
      if (!train_fb_snr.empty()) cfg.channel.feedback_snr_db = parse_feedback_snr(train_fb_snr);
      if (train_power) cfg.channel.power = *train_power;
      cfg.validate();
      TrainOptions opts;
      if (!resume_path.empty()) opts.resume = resume_path;
      opts.log = print_log;
      const TrainResult r = train(cfg, opts);
      std::cout << "checkpoint " << r.checkpoint.string() << " (step " << r.final_step << ")\n"
                << "curve " << r.curve.string() << "\n";
    } else if (*eval_cmd) {
      eval.data = eval_data;
      if (!eval_fb_snr.empty()) eval.feedback_snr_db = parse_feedback_snr(eval_fb_snr);
      const EvalResult r = evaluate(eval);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      const auto out = output_path(eval_out);
      write_metrics(out, r);
      for (const auto& m : r.means) {
        std::cout << "snr " << m.snr_db << " dB  alpha " << m.alpha << "  cbr " << m.cbr_total
                  << " (payload " << m.cbr_payload << ", side " << m.cbr_side_info << ")  psnr "
                  << m.psnr_db << " dB\n";
      }
      std::cout << "metrics in " << out.string() << "\n";
    } else if (*report_cmd) {
      std::vector<MetricsRow> rows;
      for (const auto& path : report_in) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto part = parse_metrics_csv(ss.str());
        rows.insert(rows.end(), part.begin(), part.end());
      }
      const ReportResult r = sweep_report(rows, output_path(report_out));
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& f : r.files) std::cout << f.string() << "\n";
      return r.files.empty() ? 2 : 0;
    } else if (*synth_cmd) {
      write_synthetic_dataset(output_path(synth_out), synth_count, synth_size, synth_size, synth_seed);
      std::cout << "wrote " << synth_count << " images to " << output_path(synth_out).string() << "\n";
    }
  } catch (const CheckpointVersionError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 3;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
