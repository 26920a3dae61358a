// home_cli: train / eval / moments / diagnose.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
// Failures print one JSON error record on stderr.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "home/runner.hpp"

namespace {

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<double> lr;
  std::optional<int> threads;
  std::optional<std::size_t> epochs;
  std::string out_dir;
  std::string checkpoint;
  std::string input;
  std::optional<std::size_t> samples;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config_file, "config file (key = value with [sections])");
  sub->add_option("--set", f.sets, "override one key, e.g. --set train.epochs=20")
      ->type_name("KEY=VALUE");
  sub->add_option("--seed", f.seed, "run seed");
  sub->add_option("--threads", f.threads, "worker threads (1 = deterministic sequential)");
  sub->add_option("--out", f.out_dir, std::string("output directory (default $") +
                                          home::kOutputDirEnv + " or ./" +
                                          home::kDefaultOutputDir + ")");
}

home::RunConfig build_config(const CommonFlags& f) {
  home::RunConfig cfg;
  if (!f.config_file.empty()) cfg.load_file(f.config_file);
  for (const auto& s : f.sets) cfg.set_assignment(s);
  if (f.seed) cfg.set("run.seed", std::to_string(*f.seed));
  if (f.variant) cfg.set("run.variant", *f.variant);
  if (f.lr) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *f.lr);
    cfg.set("train.base_lr", buf);
  }
  if (f.threads) cfg.set("run.threads", std::to_string(*f.threads));
  if (f.epochs) cfg.set("train.epochs", std::to_string(*f.epochs));
  if (f.samples) cfg.set("diagnose.samples", std::to_string(*f.samples));
  return cfg;
}

void error_record(const char* kind, const std::string& message, int code) {
  home::Json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  j["version"] = home::kVersion;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HOME self-supervised loss: training, evaluation and moment audits"};
  app.set_version_flag("--version", std::string(home::kVersion));
  app.require_subcommand(1);

  CommonFlags f;
  auto* train = app.add_subcommand("train", "train encoder + projector with a HOME loss variant");
  add_common(train, f);
  train->add_option("--variant", f.variant, "loss variant, e.g. HOME-T2-O3-Self-All");
  train->add_option("--lr", f.lr, "base learning rate");
  train->add_option("--epochs", f.epochs, "training epochs");

  auto* eval = app.add_subcommand("eval", "linear probe on a checkpoint's encoder");
  add_common(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint (default <out>/checkpoint.bin)");

  auto* moments = app.add_subcommand("moments", "mixed-moment audit of a CSV or checkpoint");
  add_common(moments, f);
  moments->add_option("--input", f.input, "numeric CSV, rows = samples");
  moments->add_option("--checkpoint", f.checkpoint,
                      "checkpoint (default <out>/checkpoint.bin) when no --input");

  auto* diagnose = app.add_subcommand("diagnose", "XOR / total-correlation claim check");
  add_common(diagnose, f);
  diagnose->add_option("--samples", f.samples, "samples drawn");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_record("UsageError", e.what(), 1);
    return 1;
  }

  try {
    home::RunContext ctx;
    ctx.config = build_config(f);
    ctx.out_dir = f.out_dir.empty() ? home::default_output_dir() : f.out_dir;
    ctx.checkpoint = f.checkpoint;
    ctx.input_csv = f.input;
    if (train->parsed()) return home::cmd_train(ctx);
    if (eval->parsed()) return home::cmd_eval(ctx);
    if (moments->parsed()) return home::cmd_moments(ctx);
    return home::cmd_diagnose(ctx);
  } catch (const home::ConfigError& e) {
    error_record("ConfigError", e.what(), 1);
    return 1;
  } catch (const home::IoError& e) {
    error_record("IoError", e.what(), 2);
    return 2;
  } catch (const home::DivergenceError& e) {
    error_record("DivergenceError", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    error_record("RuntimeError", e.what(), 2);
    return 2;
  }
}
