#include <gtest/gtest.h>

#include <sstream>

#include "home/config.hpp"

using namespace home;

namespace {

RunConfig parsed(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  c.parse(is);
  return c;
}

}  // namespace

TEST(Config, DefaultsBuildValidTrainer) {
  const RunConfig c;
  const TrainerConfig t = c.trainer();
  EXPECT_EQ(t.batch_size, 256u);
  EXPECT_EQ(t.epochs, 200u);
  EXPECT_EQ(t.base_lr, 0.05);
  EXPECT_EQ(t.final_lr, 0.002);
  EXPECT_EQ(t.momentum, 0.9);
  EXPECT_EQ(t.weight_decay, 5e-4);
  EXPECT_EQ(t.loss.lambda, 1.0);
  EXPECT_EQ(t.shape.encoder_widths, (std::vector<std::size_t>{256, 128}));
  EXPECT_EQ(t.shape.projector_width, 64u);
  EXPECT_EQ(t.variant, Variant::T2O3SelfAll);
  EXPECT_EQ(t.data.classes, 4u);
  EXPECT_EQ(t.data.dim, 32u);
}

TEST(Config, SectionsCommentsAndOverrides) {
  auto c = parsed(
      "# top comment\n"
      "run.seed = 3\n"
      "[train]\n"
      "epochs = 12   ; trailing\n"
      "\n"
      "[loss]\n"
      "sampling = sampled\n"
      "sample_counts = 2:100, 3:200\n");
  EXPECT_EQ(c.seed(), 3u);
  EXPECT_EQ(c.trainer().epochs, 12u);
  const auto loss = c.loss();
  EXPECT_FALSE(loss.sampling.full);
  EXPECT_EQ(loss.sampling.per_order_count.at(3), 200u);
  c.set_assignment("train.epochs=4");
  EXPECT_EQ(c.trainer().epochs, 4u);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parsed("[train]\nepochz = 3\n"), ConfigError);
  EXPECT_THROW(parsed("nosection = 1\n"), ConfigError);
  RunConfig c;
  EXPECT_THROW(c.set("model.depth", "3"), ConfigError);
  EXPECT_THROW(c.set_assignment("train.epochs"), ConfigError);
}

TEST(Config, SyntaxErrors) {
  EXPECT_THROW(parsed("[train\n"), ConfigError);
  EXPECT_THROW(parsed("[train]\njust words\n"), ConfigError);
  EXPECT_THROW(parsed("[]\n"), ConfigError);
}

TEST(Config, ValuesValidatedBeforeUse) {
  EXPECT_THROW(parsed("[train]\nepochs = ten\n").trainer(), ConfigError);
  EXPECT_THROW(parsed("[train]\nepochs = 0\n").trainer(), ConfigError);
  EXPECT_THROW(parsed("[run]\nvariant = HOME-T4\n").variant(), ConfigError);
  EXPECT_THROW(parsed("[loss]\nlambda = -1\n").loss(), ConfigError);
  EXPECT_THROW(parsed("[loss]\nsampling = some\n").loss(), ConfigError);
  EXPECT_THROW(parsed("[loss]\nsampling = sampled\n").loss(), ConfigError);
  EXPECT_THROW(parsed("[probe]\nstandardize = maybe\n").probe(), ConfigError);
  EXPECT_THROW(parsed("[run]\nthreads = 0\n").threads(), ConfigError);
  EXPECT_THROW(parsed("[views]\nmask_prob = 1.5\n").trainer(), ConfigError);
  EXPECT_THROW(parsed("[model]\nprojector_width = 2\n").trainer(), ConfigError);
}

TEST(Config, ModelInputFollowsDataDim) {
  const auto t = parsed("[data]\ndim = 16\n").trainer();
  EXPECT_EQ(t.shape.input_dim, 16u);
}

TEST(Config, HashTracksContent) {
  const RunConfig a;
  RunConfig b;
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  b.set("train.epochs", "3");
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_NE(b.canonical().find("train.epochs=3\n"), std::string::npos);
}

TEST(Config, AuditSpecCapsCountsAtDimension) {
  const RunConfig c;
  const auto spec = c.audit_spec(8);
  EXPECT_EQ(spec.sampling.per_order_count.at(2), 28u);
  EXPECT_EQ(spec.sampling.per_order_count.at(3), 56u);
  const auto wide = c.audit_spec(64);
  EXPECT_EQ(wide.sampling.per_order_count.at(3), 10000u);
}

TEST(Config, DataSeedDefaultsToRunSeed) {
  auto c = parsed("[run]\nseed = 9\n");
  EXPECT_EQ(c.dataset().seed, 9u);
  c.set("data.seed", "4");
  EXPECT_EQ(c.dataset().seed, 4u);
}
