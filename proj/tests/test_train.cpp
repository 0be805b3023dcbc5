#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcat/cli/gradsuite.hpp"
#include "tcat/cli/train.hpp"
#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"

using namespace tcat;
using diff::Tensor;

namespace {

// Leaves w = [1, 2] with gradient [3, -1] from the readout sum(w * c).
struct OneParam {
  diff::ParamStore store;
  Tensor w = store.add("w", {2}, {1.0, 2.0});

  void accumulate() {
    diff::Tape tape;
    Tensor loss;
    {
      diff::TapeScope scope(tape);
      loss = diff::sum(diff::mul(w, Tensor::from({2}, {3.0, -1.0})));
    }
    tape.backward(loss);
  }
  void step(cli::GradientStep& s, double lr, double scale) {
    store.zero_grad();
    accumulate();
    s.apply(store, lr, scale);
  }
};

std::vector<data::LabeledCloud> tiny_set(const net::ModelConfig& cfg, std::size_t count) {
  std::vector<data::LabeledCloud> out;
  for (std::size_t i = 0; i < count; ++i) {
    data::ArchSpec s;
    s.teeth = 4;
    s.seed = 40 + i;
    data::distribute_points(s, cfg.n_input);
    out.push_back(data::resample(data::generate_arch(s), cfg.n_input, 0));
  }
  return out;
}

struct TrainRun {
  std::string log, final_ckpt, best_ckpt;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainRun train_once(const net::TrainConfig& tc, std::size_t samples, const std::string& tag) {
  const net::ModelConfig cfg = cli::reduced_grad_config();
  net::Model model = net::build_model(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "tcat_train_test";
  std::filesystem::create_directories(dir);
  std::ostringstream log;
  const auto r = cli::train(model, tiny_set(cfg, samples), tc, log, dir / (tag + ".ckpt"),
                            dir / (tag + ".best"));
  EXPECT_FALSE(r.aborted);
  EXPECT_EQ(r.epochs.size(), tc.epochs);
  return {log.str(), slurp(dir / (tag + ".ckpt")), slurp(dir / (tag + ".best"))};
}

}  // namespace

TEST(GradientStep, PlainDescent) {
  OneParam p;
  net::TrainConfig tc;
  tc.optimizer = net::Optimizer::sgd;
  cli::GradientStep s(tc, p.store);
  p.step(s, 0.1, 0.5);
  EXPECT_DOUBLE_EQ(p.w.data()[0], 1.0 - 0.1 * 0.5 * 3.0);
  EXPECT_DOUBLE_EQ(p.w.data()[1], 2.0 + 0.1 * 0.5 * 1.0);
}

TEST(GradientStep, MomentumAccumulates) {
  OneParam p;
  net::TrainConfig tc;
  tc.optimizer = net::Optimizer::momentum;
  tc.momentum = 0.9;
  cli::GradientStep s(tc, p.store);
  p.step(s, 0.1, 1.0);
  p.step(s, 0.1, 1.0);
  // Velocities g then 1.9 g.
  EXPECT_NEAR(p.w.data()[0], 1.0 - 0.1 * 3.0 * 2.9, 1e-15);
  EXPECT_NEAR(p.w.data()[1], 2.0 + 0.1 * 1.0 * 2.9, 1e-15);
}

TEST(GradientStep, AdamFirstStepIsSignTimesRate) {
  OneParam p;
  net::TrainConfig tc;
  tc.optimizer = net::Optimizer::adam;
  cli::GradientStep s(tc, p.store);
  p.step(s, 0.01, 1.0);
  EXPECT_NEAR(p.w.data()[0], 1.0 - 0.01, 1e-10);
  EXPECT_NEAR(p.w.data()[1], 2.0 + 0.01, 1e-10);
}

TEST(Train, OversizedBatchEqualsFullBatch) {
  net::TrainConfig tc;
  tc.epochs = 3;
  const TrainRun full = train_once(tc, 3, "full");
  tc.batch_size = 3;
  const TrainRun exact = train_once(tc, 3, "exact");
  tc.batch_size = 10;
  const TrainRun over = train_once(tc, 3, "over");
  EXPECT_EQ(full.log, exact.log);
  EXPECT_EQ(full.log, over.log);
  EXPECT_EQ(full.final_ckpt, over.final_ckpt);
  EXPECT_EQ(full.best_ckpt, over.best_ckpt);
}

TEST(Train, SmallerBatchesStepMoreOften) {
  net::TrainConfig tc;
  tc.epochs = 3;
  const TrainRun full = train_once(tc, 3, "full");
  tc.batch_size = 1;
  const TrainRun single = train_once(tc, 3, "single");
  std::istringstream a(full.log), b(single.log);
  std::string la, lb;
  // Epoch 1 of the per-sample run already reflects two updates.
  std::getline(a, la);
  std::getline(b, lb);
  EXPECT_NE(la, lb);
  EXPECT_NE(full.final_ckpt, single.final_ckpt);

  std::istringstream log(single.log);
  std::size_t expect = 1;
  for (std::string line; std::getline(log, line); ++expect) {
    EXPECT_EQ(std::stoul(line), expect) << line;
  }
  EXPECT_EQ(expect, 4u);
}

TEST(Train, LoggedTotalIsSumOfParts) {
  net::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  std::istringstream log(train_once(tc, 3, "parts").log);
  for (std::string line; std::getline(log, line);) {
    std::istringstream f(line);
    double epoch, seg, tcp, off, total;
    f >> epoch >> seg >> tcp >> off >> total;
    EXPECT_DOUBLE_EQ(total, seg + tcp + off);
    EXPECT_GT(seg, 0.0);
  }
}

TEST(Train, EmptySetIsRejected) {
  net::Model model = net::build_model(cli::reduced_grad_config());
  std::ostringstream log;
  EXPECT_THROW(cli::train(model, {}, net::TrainConfig{}, log, "unused.ckpt", "unused.best"),
               ValidationError);
}
