#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "playenv/errors.hpp"
#include "playenv/metrics.hpp"
#include "playenv/renderer.hpp"
#include "test_util.hpp"

namespace playenv {
namespace {

// (1/J) sum |d_j - mean of its label|^2 / ((1/J) sum |d_j - mean|^2), component by component.
double delta_mse_oracle(const std::vector<Vec3>& d, const std::vector<int>& a) {
  const int J = static_cast<int>(d.size());
  double grand[3] = {0, 0, 0};
  for (const auto& x : d)
    for (int c = 0; c < 3; ++c) grand[c] += x[c] / J;
  double var = 0.0, num = 0.0;
  for (int j = 0; j < J; ++j) {
    double mu[3] = {0, 0, 0};
    int count = 0;
    for (int i = 0; i < J; ++i)
      if (a[i] == a[j]) {
        ++count;
        for (int c = 0; c < 3; ++c) mu[c] += d[i][c];
      }
    for (int c = 0; c < 3; ++c) {
      num += std::pow(d[j][c] - mu[c] / count, 2);
      var += std::pow(d[j][c] - grand[c], 2);
    }
  }
  return num / var;
}

TEST(DeltaMse, ConstantPerActionIsZero) {
  const std::vector<Vec3> d{{1, 0, 0}, {1, 0, 0}, {0, 0, 2}, {0, 0, 2}};
  const std::vector<int> a{3, 3, 1, 1};
  EXPECT_EQ(delta_mse(d, a), 0.0);
}

TEST(DeltaMse, SingleActionIsExactlyOne) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> d;
    for (int j = 0; j < 2 + trial; ++j) d.emplace_back(n(rng), n(rng), n(rng));
    const std::vector<int> a(d.size(), 0);
    EXPECT_EQ(delta_mse(d, a), 1.0);
  }
}

TEST(DeltaMse, MatchesOracle) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> d;
    std::vector<int> a;
    for (int j = 0; j < 20; ++j) {
      a.push_back(static_cast<int>(rng() % 4));
      d.emplace_back(n(rng) + a.back(), n(rng), n(rng));
    }
    EXPECT_NEAR(delta_mse(d, a), delta_mse_oracle(d, a), 1e-12);
  }
}

TEST(DeltaMse, ScaleInvariantAndNonnegative) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> d;
  std::vector<int> a;
  for (int j = 0; j < 40; ++j) {
    a.push_back(j % 3);
    d.emplace_back(n(rng), n(rng), n(rng));
  }
  const double base = delta_mse(d, a);
  EXPECT_GE(base, 0.0);
  for (double c : {0.01, 3.0, 1e4}) {
    std::vector<Vec3> scaled;
    for (const auto& x : d) scaled.push_back(c * x);
    EXPECT_NEAR(delta_mse(scaled, a), base, 1e-12);
  }
}

TEST(DeltaMse, Errors) {
  const std::vector<Vec3> same{{1, 1, 1}, {1, 1, 1}};
  EXPECT_THROW(delta_mse(same, std::vector<int>{0, 1}), DomainError);
  EXPECT_THROW(delta_mse(std::vector<Vec3>{{1, 0, 0}}, std::vector<int>{0}), DomainError);
  EXPECT_THROW(delta_mse(same, std::vector<int>{0}), DomainError);
}

TEST(DeltaAcc, SeparatedClustersAndSingleClass) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<Vec3> d;
  std::vector<int> a;
  for (int j = 0; j < 90; ++j) {
    a.push_back(j % 3);
    d.emplace_back(5.0 * a.back() + n(rng), n(rng), n(rng));
  }
  EXPECT_EQ(delta_acc(d, a), 100.0);
  EXPECT_EQ(delta_acc(d, std::vector<int>(d.size(), 2)), 100.0);
  EXPECT_THROW(delta_acc(std::vector<Vec3>{}, std::vector<int>{}), DomainError);
}

TEST(DeltaAcc, RandomLabelsOnIdenticalDistributions) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> d;
  std::vector<int> a;
  for (int j = 0; j < 10000; ++j) {
    d.emplace_back(n(rng), n(rng), n(rng));
    a.push_back(static_cast<int>(rng() % 2));
  }
  EXPECT_NEAR(delta_acc(d, a), 50.0, 5.0);
}

TEST(DeltaAcc, RangeAndPermutationInvariance) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec3> d;
    std::vector<int> a, permuted;
    const int perm[4] = {2, 0, 3, 1};
    for (int j = 0; j < 50; ++j) {
      a.push_back(static_cast<int>(rng() % 4));
      permuted.push_back(perm[a.back()]);
      d.emplace_back(n(rng) + 0.5 * a.back(), n(rng), n(rng));
    }
    const double acc = delta_acc(d, a);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 100.0);
    EXPECT_EQ(acc, delta_acc(d, permuted));
  }
}

Detection det(int id, double cx, double cy, bool valid = true) {
  return Detection{id, {cx - 5, cy - 10, cx + 5, cy + 10}, valid};
}

TEST(Add, IdenticalAndShifted) {
  const std::vector<DetectionFrame> gt{{det(1, 10, 10), det(2, 50, 40)}, {det(1, 12, 11)}};
  EXPECT_EQ(*add_metric(gt, gt), 0.0);
  std::vector<DetectionFrame> shifted;
  for (const auto& f : gt) {
    DetectionFrame s;
    for (const auto& d : f) s.push_back(det(d.object_id, d.bbox.center().x() + 3, d.bbox.center().y() + 4));
    shifted.push_back(s);
  }
  EXPECT_DOUBLE_EQ(*add_metric(gt, shifted), 5.0);
}

TEST(Add, UnmatchedExcludedAndAbsentWhenNothingMatches) {
  const std::vector<DetectionFrame> gt{{det(1, 0, 0), det(2, 100, 100)}};
  const std::vector<DetectionFrame> rec{{det(1, 3, 4)}};
  EXPECT_DOUBLE_EQ(*add_metric(gt, rec), 5.0);
  const std::vector<DetectionFrame> none{{det(1, 3, 4, false)}};
  EXPECT_FALSE(add_metric(gt, none));
  EXPECT_THROW(add_metric(gt, std::vector<DetectionFrame>{}), DomainError);
}

TEST(Add, SymmetricWhenFullyMatched) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<DetectionFrame> a, b;
  for (int f = 0; f < 20; ++f) {
    a.push_back({det(1, u(rng), u(rng)), det(2, u(rng), u(rng))});
    b.push_back({det(2, u(rng), u(rng)), det(1, u(rng), u(rng))});
  }
  EXPECT_DOUBLE_EQ(*add_metric(a, b), *add_metric(b, a));
}

TEST(Mdr, Counting) {
  std::vector<DetectionFrame> gt, rec, half, empty;
  for (int f = 0; f < 10; ++f) {
    gt.push_back({det(1, 10, 10)});
    rec.push_back({det(1, 11, 10)});
    half.push_back(f % 2 ? DetectionFrame{det(1, 11, 10)} : DetectionFrame{});
    empty.push_back({});
  }
  EXPECT_EQ(mdr(gt, rec), 0.0);
  EXPECT_EQ(mdr(gt, half), 50.0);
  EXPECT_EQ(mdr(gt, empty), 100.0);
  EXPECT_THROW(mdr(empty, empty), DomainError);
}

TEST(Mdr, InvalidRecDoesNotMatchAndAddingDetectionsNeverHurts) {
  std::mt19937_64 rng(8);
  std::vector<DetectionFrame> gt, rec;
  for (int f = 0; f < 30; ++f) {
    gt.push_back({det(1, 10, 10), det(2, 20, 20), det(3, 30, 30)});
    rec.push_back({det(1, 10, 10, false)});
  }
  double prev = mdr(gt, rec);
  EXPECT_EQ(prev, 100.0);
  for (int step = 0; step < 60; ++step) {
    rec[rng() % 30].push_back(det(1 + static_cast<int>(rng() % 3), 0, 0));
    const double now = mdr(gt, rec);
    EXPECT_LE(now, prev);
    prev = now;
  }
}

Image noise_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h, 3);
  for (double& v : img.data) v = u(rng);
  return img;
}

TEST(WarpEval, IdentityOnIdenticalImages) {
  const Image img = noise_image(20, 10, 1);
  const auto r = warp_eval(img, img, Homography{Mat3::Identity()});
  EXPECT_EQ(r.l1, 0.0);
  EXPECT_EQ(r.coverage, 1.0);
}

TEST(WarpEval, FullyOutOfBoundsThrows) {
  const Image img = noise_image(20, 10, 1);
  Mat3 t = Mat3::Identity();
  t(0, 2) = 20.0;
  EXPECT_THROW(warp_eval(img, img, Homography{t}), DomainError);
}

TEST(WarpEval, IntegerShiftIsExactOnOverlap) {
  const Image rendered = noise_image(20, 10, 2);
  Image original(20, 10, 3);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 17; ++x)
      for (int c = 0; c < 3; ++c) original.at(x, y, c) = rendered.at(x + 3, y, c);
  Mat3 t = Mat3::Identity();
  t(0, 2) = 3.0;
  const auto r = warp_eval(original, rendered, Homography{t});
  EXPECT_NEAR(r.l1, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.coverage, 17.0 / 20.0);
}

TEST(WarpEval, MaskRestrictsCoverage) {
  const Image img = noise_image(10, 10, 3);
  std::vector<bool> mask(100, false);
  for (int i = 0; i < 30; ++i) mask[i] = true;
  const auto r = warp_eval(img, img, Homography{Mat3::Identity()}, &mask);
  EXPECT_DOUBLE_EQ(r.coverage, 0.3);
  EXPECT_THROW(warp_eval(img, noise_image(10, 9, 3), Homography{Mat3::Identity()}), DomainError);
}

}  // namespace
}  // namespace playenv
