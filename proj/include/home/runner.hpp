#pragma once

// Subcommand implementations behind the home_cli executable. Each command
// writes its artifacts into an output directory and returns an exit status;
// errors propagate as exceptions and are turned into error records by the
// caller.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>

#include <json.hpp>

#include "home/config.hpp"
#include "home/data.hpp"
#include "home/diagnostics.hpp"
#include "home/error.hpp"
#include "home/model.hpp"
#include "home/trainer.hpp"
#include "home/version.hpp"

namespace home {

using Json = nlohmann::ordered_json;

inline constexpr const char* kOutputDirEnv = "HOME_SSL_OUT_DIR";
inline constexpr const char* kDefaultOutputDir = "home_out";

inline std::string default_output_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return env && *env ? env : kDefaultOutputDir;
}

struct RunContext {
  RunConfig config;
  std::string out_dir;
  std::string checkpoint;  // eval / moments
  std::string input_csv;   // moments
  std::ostream* out = &std::cout;
};

namespace detail {

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write '" + p.string() + "'");
  return f;
}

inline void finish(std::ofstream& f, const std::filesystem::path& p) {
  f.flush();
  if (!f) throw IoError("write failed for '" + p.string() + "'");
}

inline Json stamp(Json j, const RunConfig& cfg) {
  j["config_hash"] = cfg.hash();
  j["version"] = kVersion;
  return j;
}

inline void write_json_file(const std::filesystem::path& p, const Json& j) {
  auto f = open_out(p);
  f << j.dump(2) << '\n';
  finish(f, p);
}

inline void check_model_input(const MlpModel& model, std::size_t dim, const std::string& path) {
  if (model.input_dim() != dim) {
    throw ShapeError("checkpoint '" + path + "' expects inputs of width " +
                     std::to_string(model.input_dim()) + ", data has " + std::to_string(dim));
  }
}

}  // namespace detail

// Files: metrics.jsonl (deterministic), timing.jsonl (wall clock),
// checkpoint_init.bin, checkpoint.bin, config.ini, summary.json.
inline int cmd_train(const RunContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const TrainerConfig tc = cfg.trainer();
  const auto dir = detail::prepare_dir(ctx.out_dir);

  {
    auto f = detail::open_out(dir / "config.ini");
    f << "# config_hash " << cfg.hash() << "\n" << cfg.canonical();
    detail::finish(f, dir / "config.ini");
  }
  save_checkpoint(init_train_state(tc).model, (dir / "checkpoint_init.bin").string());

  auto metrics = detail::open_out(dir / "metrics.jsonl");
  auto timing = detail::open_out(dir / "timing.jsonl");
  const std::string hash = cfg.hash();
  auto sink = [&](const MetricsRecord& r) {
    Json m;
    m["iteration"] = r.iteration;
    m["epoch"] = r.epoch;
    m["lr"] = r.lr;
    m["loss_total"] = r.loss_total;
    m["loss_invariance"] = r.loss_invariance;
    m["loss_redundancy_per_view"] = r.loss_redundancy;
    m["config_hash"] = hash;
    m["version"] = kVersion;
    metrics << m.dump() << '\n';
    Json t;
    t["iteration"] = r.iteration;
    t["wall_ms"] = r.wall_ms;
    t["config_hash"] = hash;
    t["version"] = kVersion;
    timing << t.dump() << '\n';
  };
  const TrainState st = train(tc, sink);
  detail::finish(metrics, dir / "metrics.jsonl");
  detail::finish(timing, dir / "timing.jsonl");
  save_checkpoint(st.model, (dir / "checkpoint.bin").string());

  Json summary;
  summary["kind"] = "train_summary";
  summary["variant"] = std::string(to_string(tc.variant));
  summary["seed"] = tc.seed;
  summary["epochs"] = tc.epochs;
  summary["iterations"] = tc.epochs * tc.steps_per_epoch();
  summary["epoch_loss"] = st.epoch_loss;
  summary["checkpoint"] = (dir / "checkpoint.bin").string();
  summary = detail::stamp(summary, cfg);
  detail::write_json_file(dir / "summary.json", summary);
  *ctx.out << summary.dump() << '\n';
  return 0;
}

// Linear probe of the encoder: fit on the training split, score on the
// holdout split. Writes probe.json.
inline int cmd_eval(const RunContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const DatasetParams dp = cfg.dataset();
  const ProbeConfig pc = cfg.probe();
  const std::size_t holdout = cfg.holdout();
  const std::string ckpt =
      ctx.checkpoint.empty() ? (std::filesystem::path(ctx.out_dir) / "checkpoint.bin").string()
                             : ctx.checkpoint;
  const MlpModel model = load_checkpoint(ckpt);
  detail::check_model_input(model, dp.dim, ckpt);
  const auto dir = detail::prepare_dir(ctx.out_dir);

  const ProbeResult r = probe_encoder(model, generate(dp), generate_holdout(dp, holdout), pc);
  Json j;
  j["kind"] = "probe";
  j["checkpoint"] = ckpt;
  j["accuracy"] = r.accuracy;
  j["per_class_accuracy"] = r.per_class_accuracy;
  j["train_size"] = r.train_size;
  j["test_size"] = r.test_size;
  j = detail::stamp(j, cfg);
  detail::write_json_file(dir / "probe.json", j);
  *ctx.out << j.dump() << '\n';
  return 0;
}

// Moment audit of a raw CSV matrix or of a checkpoint's projector outputs
// on the holdout split. Writes moments.csv, audit_summary.csv and
// audit_histogram.csv.
inline int cmd_moments(const RunContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const double eps = cfg.get_double("loss.epsilon");
  Matrix raw;
  std::string source;
  if (!ctx.input_csv.empty()) {
    std::ifstream f(ctx.input_csv);
    if (!f) throw IoError("cannot open input '" + ctx.input_csv + "'");
    raw = read_matrix_csv(f);
    source = ctx.input_csv;
  } else {
    const DatasetParams dp = cfg.dataset();
    const std::string ckpt =
        ctx.checkpoint.empty() ? (std::filesystem::path(ctx.out_dir) / "checkpoint.bin").string()
                               : ctx.checkpoint;
    const MlpModel model = load_checkpoint(ckpt);
    detail::check_model_input(model, dp.dim, ckpt);
    raw = forward(model, generate_holdout(dp, cfg.holdout()).samples).embeddings;
    source = ckpt;
  }
  if (!raw.all_finite()) throw NonFiniteError("moments: input contains non-finite values");
  const MomentSpec spec = cfg.audit_spec(raw.cols());
  const MomentAudit audit = moment_audit(raw, spec, eps);
  const auto dir = detail::prepare_dir(ctx.out_dir);
  {
    auto f = detail::open_out(dir / "moments.csv");
    write_csv(audit.report, f);
    detail::finish(f, dir / "moments.csv");
  }
  {
    auto f = detail::open_out(dir / "audit_summary.csv");
    write_audit_summary_csv(audit, f);
    detail::finish(f, dir / "audit_summary.csv");
  }
  {
    auto f = detail::open_out(dir / "audit_histogram.csv");
    write_audit_histogram_csv(audit, f);
    detail::finish(f, dir / "audit_histogram.csv");
  }
  Json j;
  j["kind"] = "moment_audit";
  j["source"] = source;
  j["samples"] = raw.rows();
  j["dim"] = raw.cols();
  Json orders = Json::array();
  for (const auto& o : audit.orders) {
    orders.push_back({{"order", o.order},
                      {"tuples", o.tuples},
                      {"max_abs", o.max_abs},
                      {"mean_abs", o.mean_abs}});
  }
  j["orders"] = orders;
  j = detail::stamp(j, cfg);
  *ctx.out << j.dump() << '\n';
  return 0;
}

inline constexpr double kMaxPairwiseMi = 0.01;
inline constexpr double kMinXorTc = 0.6;
inline constexpr double kXorTcTolerance = 0.02;

// XOR triple: pairwise independent, jointly dependent. Returns 0 when every
// claim holds, 2 otherwise. Writes diagnose.json.
inline int cmd_diagnose(const RunContext& ctx) {
  const RunConfig& cfg = ctx.config;
  const std::size_t n = cfg.get_size("diagnose.samples");
  if (n < 4) throw ConfigError("diagnose.samples must be >= 4");
  const XorDiagnostic d = xor_diagnostic(n, cfg.seed());
  const double log2 = std::numbers::ln2;

  struct Claim {
    const char* name;
    bool pass;
    double value;
    double threshold;
  };
  const Claim claims[] = {
      {"pairwise_mi_max <= 0.01", d.max_pairwise_mi() <= kMaxPairwiseMi, d.max_pairwise_mi(),
       kMaxPairwiseMi},
      {"total_correlation >= 0.6", d.total_correlation >= kMinXorTc, d.total_correlation,
       kMinXorTc},
      {"|total_correlation - log 2| <= 0.02",
       std::abs(d.total_correlation - log2) <= kXorTcTolerance,
       std::abs(d.total_correlation - log2), kXorTcTolerance},
  };
  bool all = true;
  Json list = Json::array();
  for (const auto& c : claims) {
    *ctx.out << (c.pass ? "PASS " : "FAIL ") << c.name << "  (value " << c.value << ")\n";
    all = all && c.pass;
    list.push_back({{"claim", c.name}, {"pass", c.pass}, {"value", c.value},
                    {"threshold", c.threshold}});
  }
  Json j;
  j["kind"] = "diagnose";
  j["samples"] = n;
  j["seed"] = cfg.seed();
  j["pairwise_mi"] = d.pairwise_mi;
  j["total_correlation"] = d.total_correlation;
  j["claims"] = list;
  j["pass"] = all;
  j = detail::stamp(j, cfg);
  const auto dir = detail::prepare_dir(ctx.out_dir);
  detail::write_json_file(dir / "diagnose.json", j);
  *ctx.out << j.dump() << '\n';
  return all ? 0 : 2;
}

}  // namespace home
