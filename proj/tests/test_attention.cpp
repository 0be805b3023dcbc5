#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tcat/attention/cwa.hpp"
#include "tcat/diff/gradcheck.hpp"
#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"
#include "reference.hpp"

using namespace tcat;
using namespace tcat::diff;
using attn::CWAParams;
using attn::PointSet;
using ref::Vec;
using ref::cwa_ref;
using ref::row;

namespace {

struct Fixture {
  ParamStore store;
  Rng rng{11};
  CWAParams params;
  PointSet queries;
  PointSet keys;

  Fixture(std::size_t nq, std::size_t nk, std::size_t C) {
    params = attn::make_cwa(store, "cwa", C, rng);
    queries = random_set(nq, C);
    keys = random_set(nk, C);
  }

  PointSet random_set(std::size_t n, std::size_t C) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec x(n * 3), f(n * C);
    for (double& v : x) v = u(rng);
    for (double& v : f) v = u(rng);
    return attn::make_point_set(Tensor::from({n, 3}, x), Tensor::from({n, C}, f));
  }
};

void zero_mlp(const MLPParams& m) {
  for (const auto& l : m.layers) {
    Tensor w = l.weight, b = l.bias;
    std::fill(w.leaf_data().begin(), w.leaf_data().end(), 0.0);
    std::fill(b.leaf_data().begin(), b.leaf_data().end(), 0.0);
  }
}

}  // namespace

TEST(CwaWeights, SingleAndIdenticalKeys) {
  Fixture fx(1, 1, 4);
  const Tensor w1 = attn::cwa_weights(fx.params, {0.1, 0.2, 0.3}, Tensor::from({4}, row(fx.queries.F, 0)),
                                      fx.keys);
  for (double v : w1.data()) EXPECT_EQ(v, 1.0);

  const PointSet twins = attn::make_point_set(
      concat({fx.keys.X, fx.keys.X}, 0), concat({fx.keys.F, fx.keys.F}, 0));
  const Tensor w2 =
      attn::cwa_weights(fx.params, {0.1, 0.2, 0.3}, Tensor::from({4}, row(fx.queries.F, 0)), twins);
  for (double v : w2.data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(CwaUpdate, HandComputedTwoKeys) {
  Fixture fx(1, 2, 2);
  zero_mlp(fx.params.w_pos);
  zero_mlp(fx.params.w_gate);
  for (const auto& l : fx.params.w_gate.layers) {
    Tensor w = l.weight;
    w.leaf_data() = {1, 0, 0, 1};
  }
  // logits = relu(f_q - f_k): key deltas (1,0) and (0,-2) give logits (1,0) and (0,0).
  const PointSet q = attn::make_point_set(Tensor::zeros({1, 3}), Tensor::from({1, 2}, {1, 0}));
  const PointSet k = attn::make_point_set(Tensor::from({2, 3}, {1, 0, 0, 0, 1, 0}),
                                          Tensor::from({2, 2}, {0, 0, 1, 2}));
  const Tensor out = attn::cwa_update(fx.params, q, k);
  const double e = std::exp(1.0);
  EXPECT_NEAR(out.at(0, 0), e / (1.0 + e), 1e-15);
  EXPECT_NEAR(out.at(0, 1), -1.0, 1e-15);
}

TEST(CwaUpdate, MatchesScalarReference) {
  Fixture fx(5, 7, 6);
  const Tensor out = attn::cwa_update(fx.params, fx.queries, fx.keys);
  std::vector<Vec> xk, fk;
  for (std::size_t k = 0; k < 7; ++k) {
    xk.push_back(row(fx.keys.X, k));
    fk.push_back(row(fx.keys.F, k));
  }
  for (std::size_t q = 0; q < 5; ++q) {
    const Vec ref = cwa_ref(fx.params, row(fx.queries.X, q), row(fx.queries.F, q), xk, fk);
    const Vec got = row(out, q);
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(got[c], ref[c], 1e-12);
  }
}

TEST(CwaUpdate, SelfAndSingleKey) {
  Fixture fx(3, 1, 4);
  const std::vector<std::size_t> first{0};
  const PointSet q0 =
      attn::make_point_set(gather(fx.queries.X, 0, first), gather(fx.queries.F, 0, first));
  const Tensor self = attn::cwa_update(fx.params, q0, q0);
  for (double v : self.data()) EXPECT_EQ(v, 0.0);

  const Tensor single = attn::cwa_update(fx.params, fx.queries, fx.keys);
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(single.at(q, c), fx.queries.F.at(q, c) - fx.keys.F.at(0, c));
    }
  }
}

TEST(CwaUpdate, Errors) {
  Fixture fx(2, 3, 4);
  const PointSet empty = attn::make_point_set(Tensor::zeros({0, 3}), Tensor::zeros({0, 4}));
  EXPECT_THROW(attn::cwa_update(fx.params, fx.queries, empty), SizeError);
  const PointSet narrow = attn::make_point_set(Tensor::zeros({3, 3}), Tensor::zeros({3, 5}));
  EXPECT_THROW(attn::cwa_update(fx.params, fx.queries, narrow), DimensionError);
  EXPECT_THROW(attn::make_point_set(Tensor::zeros({2, 3}), Tensor::zeros({3, 4})), DimensionError);
}

TEST(CwaWeights, ChannelsSumToOne) {
  Fixture fx(4, 9, 5);
  for (std::size_t q = 0; q < 4; ++q) {
    const Tensor w = attn::cwa_weights(fx.params, {fx.queries.X.at(q, 0), fx.queries.X.at(q, 1),
                                                   fx.queries.X.at(q, 2)},
                                       Tensor::from({5}, row(fx.queries.F, q)), fx.keys);
    for (std::size_t c = 0; c < 5; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < 9; ++k) s += w.at(k, c);
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
  }
}

TEST(CwaUpdate, KeyPermutationInvariance) {
  Fixture fx(4, 8, 5);
  const std::vector<std::size_t> perm{5, 2, 7, 0, 1, 6, 3, 4};
  const PointSet shuffled =
      attn::make_point_set(gather(fx.keys.X, 0, perm), gather(fx.keys.F, 0, perm));
  const Tensor a = attn::cwa_update(fx.params, fx.queries, fx.keys);
  const Tensor b = attn::cwa_update(fx.params, fx.queries, shuffled);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
}

TEST(CwaUpdate, TranslationInvariance) {
  Fixture fx(4, 8, 5);
  const Tensor t = Tensor::from({3}, {3.5, -2.0, 0.25});
  const PointSet q2 = attn::make_point_set(add(fx.queries.X, t), fx.queries.F);
  const PointSet k2 = attn::make_point_set(add(fx.keys.X, t), fx.keys.F);
  const Tensor a = attn::cwa_update(fx.params, fx.queries, fx.keys);
  const Tensor b = attn::cwa_update(fx.params, q2, k2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
}

TEST(CwaMasked, FullMaskEqualsDense) {
  Fixture fx(3, 5, 4);
  const auto table = geom::knn(geom::from_tensor(fx.queries.X), geom::from_tensor(fx.keys.X), 5);
  const Tensor dense = attn::cwa_update(fx.params, fx.queries, fx.keys);
  const Tensor masked = attn::cwa_update_masked(fx.params, fx.queries, fx.keys, table);
  for (std::size_t i = 0; i < dense.size(); ++i) EXPECT_NEAR(dense.data()[i], masked.data()[i], 1e-14);
}

TEST(CwaMasked, PaddedDuplicatesCollapse) {
  Fixture fx(1, 3, 4);
  geom::NeighborTable padded{4, {0, 0, 0, 1}, {4}, {0}};
  geom::NeighborTable plain{2, {0, 1}, {2}, {0}};
  const Tensor a = attn::cwa_update_masked(fx.params, fx.queries, fx.keys, padded);
  const Tensor b = attn::cwa_update_masked(fx.params, fx.queries, fx.keys, plain);
  EXPECT_EQ(row(a, 0), row(b, 0));

  geom::NeighborTable bad{1, {3}, {1}, {0}};
  EXPECT_THROW(attn::cwa_update_masked(fx.params, fx.queries, fx.keys, bad), IndexError);
}

TEST(CwaMasked, SelfOnlyIsZero) {
  Fixture fx(2, 1, 4);
  geom::NeighborTable self{1, {0, 1}, {1, 1}, {0, 0}};
  const Tensor out = attn::cwa_update_masked(fx.params, fx.queries, fx.queries, self);
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(CwaUpdate, GradientCheck) {
  Fixture fx(3, 5, 4);
  Tensor qf = fx.store.add("qf", {3, 4}, {fx.queries.F.data().begin(), fx.queries.F.data().end()});
  Tensor kf = fx.store.add("kf", {5, 4}, {fx.keys.F.data().begin(), fx.keys.F.data().end()});
  const Tensor readout = Tensor::from({3, 4}, {0.3, -1, 0.7, 0.2, 1.1, -0.4, 0.5, 0.9, -0.6, 0.1,
                                               0.8, -0.2});
  auto f = [&] {
    const PointSet q = attn::make_point_set(fx.queries.X, qf);
    const PointSet k = attn::make_point_set(fx.keys.X, kf);
    return sum(mul(attn::cwa_update(fx.params, q, k), readout));
  };
  const auto r = finite_diff_check(f, fx.store.entries(), 1e-5, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_rel_err << " " << r.diagnostic;
}
