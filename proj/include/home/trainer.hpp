#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "home/data.hpp"
#include "home/diagnostics.hpp"
#include "home/error.hpp"
#include "home/loss.hpp"
#include "home/model.hpp"
#include "home/optim.hpp"
#include "home/rng.hpp"
#include "home/variants.hpp"

namespace home {

struct TrainerConfig {
  ModelShape shape;
  DatasetParams data;
  ViewConfig views;  // seed and view count are set by the trainer
  Variant variant = Variant::T2O3SelfAll;
  LossConfig loss;
  std::size_t batch_size = 256;
  std::size_t epochs = 200;
  double base_lr = 0.05;
  double final_lr = 0.002;
  std::size_t warmup_epochs = 10;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;

  std::size_t effective_batch() const { return std::min(batch_size, data.samples); }
  std::size_t steps_per_epoch() const { return data.samples / effective_batch(); }

  void validate() const {
    data.validate();
    views.validate();
    loss.validate();
    if (shape.input_dim != data.dim) {
      throw InvalidArgument("trainer: model input_dim " + std::to_string(shape.input_dim) +
                            " != data dim " + std::to_string(data.dim));
    }
    if (batch_size < 2) throw InvalidArgument("trainer: batch_size must be >= 2");
    if (epochs < 1) throw InvalidArgument("trainer: epochs must be >= 1");
    if (!(base_lr >= 0.0) || !(final_lr >= 0.0)) throw InvalidArgument("trainer: negative lr");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("trainer: momentum in [0,1)");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("trainer: negative weight decay");
  }
};

struct MetricsRecord {
  std::uint64_t iteration = 0;
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_invariance = 0.0;
  std::vector<double> loss_redundancy;  // per plan unit
  double wall_ms = 0.0;
};

struct TrainState {
  MlpModel model;
  OptimState optim;
  LossPlan plan;
  LossConfig loss;
  Schedule schedule;
  std::uint64_t seed = 0;
  std::vector<double> epoch_loss;  // mean total loss per epoch
};

// Seed streams derived from the run seed.
enum class SeedStream : std::uint64_t { Model = 1, Plan = 2, Views = 3, Shuffle = 4, Sampling = 5 };

inline std::uint64_t stream_seed(std::uint64_t seed, SeedStream s) {
  return derive_seed(seed, {static_cast<std::uint64_t>(s)});
}

inline TrainState init_train_state(const TrainerConfig& cfg) {
  cfg.validate();
  TrainState st;
  st.seed = cfg.seed;
  st.model = MlpModel::create(cfg.shape, stream_seed(cfg.seed, SeedStream::Model));
  st.optim = OptimState::for_model(st.model, cfg.momentum, cfg.weight_decay);
  st.plan = build_plan(cfg.variant, stream_seed(cfg.seed, SeedStream::Plan));
  st.loss = cfg.loss;
  if (!st.loss.sampling.full) {
    st.loss.sampling.seed = stream_seed(cfg.seed, SeedStream::Sampling);
  }
  const std::size_t steps = cfg.steps_per_epoch();
  st.schedule = Schedule{cfg.base_lr, cfg.final_lr, cfg.warmup_epochs * steps,
                         cfg.epochs * steps};
  return st;
}

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(stream_seed(seed, SeedStream::Shuffle), {epoch});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// One optimization step on a batch; returns the loss before the update.
inline LossValue train_step(TrainState& st, const Matrix& batch, const ViewConfig& views,
                            std::uint64_t iteration, double lr) {
  const auto xs = make_views(batch, views, iteration);
  std::vector<ForwardResult> fwd;
  std::vector<EmbeddingBatch> emb;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    fwd.push_back(forward(st.model, xs[t]));
    emb.push_back({fwd.back().embeddings, static_cast<int>(t + 1)});
  }
  LossValue lv = home_loss(emb, st.plan, st.loss, iteration, true);
  if (!std::isfinite(lv.total)) {
    throw DivergenceError("training diverged at iteration " + std::to_string(iteration));
  }
  ModelGradients grads = ModelGradients::zeros_like(st.model);
  for (std::size_t t = 0; t < fwd.size(); ++t) backward(st.model, fwd[t].cache, lv.gradients[t], grads);
  sgd_step(st.model, grads, st.optim, lr);
  return lv;
}

using MetricsSink = std::function<void(const MetricsRecord&)>;

// Per iteration: draw a batch, make T views, forward, HOME loss, backward,
// SGD-momentum update. Emits one record per iteration.
inline TrainState train(const TrainerConfig& cfg, const MetricsSink& sink = {},
                        const SyntheticDataset* dataset = nullptr) {
  TrainState st = init_train_state(cfg);
  const SyntheticDataset owned = dataset ? SyntheticDataset{} : generate(cfg.data);
  const SyntheticDataset& ds = dataset ? *dataset : owned;
  if (ds.samples.cols() != cfg.shape.input_dim) throw ShapeError("train: dataset width");

  ViewConfig views = cfg.views;
  views.views = st.plan.views;
  views.seed = stream_seed(cfg.seed, SeedStream::Views);

  const std::size_t batch = std::min(cfg.effective_batch(), ds.size());
  const std::size_t steps = ds.size() / batch;
  std::uint64_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = epoch_order(ds.size(), cfg.seed, epoch);
    CompensatedSum epoch_sum;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      const Matrix x = gather_rows(
          ds.samples, std::span<const std::size_t>(order.data() + s * batch, batch));
      const double lr = lr_at(iteration, st.schedule);
      const LossValue lv = train_step(st, x, views, iteration, lr);
      epoch_sum.add(lv.total);
      if (sink) {
        const auto t1 = std::chrono::steady_clock::now();
        sink({iteration, epoch, lr, lv.total, lv.invariance_term, lv.redundancy_per_unit,
              std::chrono::duration<double, std::milli>(t1 - t0).count()});
      }
      ++iteration;
    }
    st.epoch_loss.push_back(epoch_sum.value() / static_cast<double>(steps));
  }
  return st;
}

// Linear probe on frozen encoder outputs; the projector is not used.
inline ProbeResult probe_encoder(const MlpModel& model, const SyntheticDataset& train_set,
                                 const SyntheticDataset& test_set, const ProbeConfig& cfg = {}) {
  return linear_probe(encode(model, train_set.samples), train_set.labels,
                      encode(model, test_set.samples), test_set.labels, cfg);
}

// Moment audit of the projector outputs on `inputs`.
inline MomentAudit audit_model(const MlpModel& model, const Matrix& inputs,
                               const MomentSpec& spec, double epsilon = kDefaultEpsilon) {
  return moment_audit(forward(model, inputs).embeddings, spec, epsilon);
}

}  // namespace home
