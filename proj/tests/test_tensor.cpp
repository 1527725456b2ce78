// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "ela/kernels.hpp"
#include "ela/parallel.hpp"
#include "oracles.hpp"

using namespace ela;
using oracle::rand3;
using oracle::rand4;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Max relative error between `analytic` and central differences of f with
// respect to every entry of `values`.
double fd_max_rel(std::span<double> values, std::span<const double> analytic,
                  const std::function<double()>& f) {
  double worst = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    worst = std::max(worst, oracle::rel_err(analytic[i], oracle::central_diff(f, values[i])));
  return worst;
}

const Shape4 kShapes[] = {{1, 4, 3, 3}, {2, 4, 3, 7}, {1, 16, 7, 3}, {2, 16, 7, 7}};

}  // namespace

TEST_CASE("tensor constructors validate shapes") {
  CHECK_THROWS_AS(Tensor4<double>({0, 1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(Tensor4<double>({1, 1, 2, 2}, std::vector<double>(3)), ShapeError);
  CHECK_THROWS_AS(Tensor3<double>({1, 0, 1}), ShapeError);
  Tensor4<double> t({1, 2, 3, 4});
  CHECK(t.size() == 24);
  t(0, 1, 2, 3) = 5;
  CHECK(t.vec().back() == 5);
  CHECK(t.plane(0, 1).size() == 12);
}

TEST_CASE("strip pooling matches loop oracles and is linear") {
  for (const auto& s : kShapes) {
    const auto x = rand4(s, 11);
    CHECK(max_abs_diff(strip_pool_h(x).data(), oracle::pool_over_w(x).data()) < 1e-12);
    CHECK(max_abs_diff(strip_pool_w(x).data(), oracle::pool_over_h(x).data()) < 1e-12);
    CHECK(strip_pool_h(x).shape() == Shape3{s.n, s.c, s.h});
    CHECK(strip_pool_w(x).shape() == Shape3{s.n, s.c, s.w});

    const auto y = rand4(s, 12);
    const double a = 0.7, b = -1.3;
    Tensor4<double> mix(s);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.vec()[i] = a * x.vec()[i] + b * y.vec()[i];
    const auto px = strip_pool_h(x), py = strip_pool_h(y), pm = strip_pool_h(mix);
    for (std::size_t i = 0; i < pm.size(); ++i)
      CHECK(std::abs(pm.vec()[i] - (a * px.vec()[i] + b * py.vec()[i])) < 1e-12);
  }
}

TEST_CASE("strip pooling orientation on a non-square input") {
  // Rows are constant, so the per-row descriptor keeps the row value and the
  // per-column descriptor is the mean of the rows.
  Tensor4<double> x({1, 1, 2, 3}, std::vector<double>{1, 1, 1, 4, 4, 4});
  const auto zh = strip_pool_h(x), zw = strip_pool_w(x);
  CHECK(zh.vec() == std::vector<double>{1, 4});
  CHECK(zw.vec() == std::vector<double>{2.5, 2.5, 2.5});
}

TEST_CASE("strip pool backward matches finite differences") {
  for (const auto& s : kShapes)
    for (PoolAxis axis : {PoolAxis::width, PoolAxis::height}) {
      auto x = rand4(s, 21);
      const Shape3 zs{s.n, s.c, axis == PoolAxis::width ? s.h : s.w};
      const auto dz = rand3(zs, 22);
      auto pool = [&] { return axis == PoolAxis::width ? strip_pool_h(x) : strip_pool_w(x); };
      const auto dx = strip_pool_backward(dz, s, axis);
      CHECK(fd_max_rel(x.data(), dx.data(), [&] { return oracle::project(pool().vec(), dz.vec()); }) < 1e-6);
    }
}

TEST_CASE("global average pooling") {
  Tensor4<double> x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  CHECK(global_avg_pool(x)(0, 0, 0) == doctest::Approx(2.5).epsilon(1e-15));
  Tensor4<double> k({2, 3, 4, 5}, 1.75);
  const auto gk = global_avg_pool(k);
  for (double v : gk.vec()) CHECK(v == 1.75);
  const auto r = rand4({2, 4, 3, 7}, 5);
  const auto g = global_avg_pool(r);
  const auto zh = strip_pool_h(r);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 4; ++c) {
      double m = 0;
      for (std::size_t i = 0; i < 3; ++i) m += zh(n, c, i);
      CHECK(std::abs(g(n, c, 0) - m / 3) < 1e-12);
    }
  auto xr = rand4({2, 4, 3, 7}, 6);
  const auto dz = rand3({2, 4, 1}, 7);
  const auto dx = global_avg_pool_backward(dz, xr.shape());
  CHECK(fd_max_rel(xr.data(), dx.data(), [&] { return oracle::project(global_avg_pool(xr).vec(), dz.vec()); }) <
        1e-6);
}

TEST_CASE("grouped conv1d matches the direct oracle") {
  struct Case {
    std::size_t n, c, l, k, groups;
  };
  for (const Case& t : {Case{1, 4, 3, 3, 1}, Case{2, 16, 7, 5, 16}, Case{2, 16, 7, 7, 2}, Case{1, 8, 1, 5, 8},
                        Case{2, 24, 9, 3, 3}}) {
    const Conv1dSpec spec{t.c, t.c, t.k, t.groups};
    const auto x = rand3({t.n, t.c, t.l}, 31);
    const auto w = oracle::randv(spec.weight_size(), 32);
    const auto b = oracle::randv(t.c, 33);
    CHECK(max_abs_diff(conv1d_grouped<double>(x, w, spec).data(),
                       oracle::conv1d(x, w, t.c, t.k, t.groups).data()) < 1e-12);
    CHECK(max_abs_diff(conv1d_grouped<double>(x, w, spec, b).data(),
                       oracle::conv1d(x, w, t.c, t.k, t.groups, b).data()) < 1e-12);
  }
}

TEST_CASE("conv1d known values: same padding keeps length") {
  // k=3 box filter over [1,2,3] with zero padding.
  Tensor3<double> x({1, 1, 3}, std::vector<double>{1, 2, 3});
  const std::vector<double> w{1, 1, 1};
  const auto y = conv1d_grouped<double>(x, w, Conv1dSpec{1, 1, 3, 1});
  CHECK(y.vec() == std::vector<double>{3, 6, 5});
  // Cross-correlation, no flip: weight [0,0,1] reads the right neighbour.
  const auto r = conv1d_grouped<double>(x, std::vector<double>{0, 0, 1}, Conv1dSpec{1, 1, 3, 1});
  CHECK(r.vec() == std::vector<double>{2, 3, 0});
}

TEST_CASE("conv1d rejects invalid specs") {
  const auto x = rand3({1, 6, 4}, 1);
  CHECK_THROWS_AS(conv1d_grouped<double>(x, std::vector<double>(6 * 6 * 4), Conv1dSpec{6, 6, 4, 1}), ConfigError);
  CHECK_THROWS_AS(conv1d_grouped<double>(x, std::vector<double>(6 * 2 * 3), Conv1dSpec{6, 6, 3, 4}), ConfigError);
  CHECK_THROWS_AS(conv1d_grouped<double>(x, std::vector<double>(5), Conv1dSpec{6, 6, 3, 6}), ShapeError);
}

TEST_CASE("conv1d backward matches finite differences") {
  for (std::size_t groups : {1u, 4u, 16u}) {
    const Conv1dSpec spec{16, 16, 5, groups};
    auto x = rand3({2, 16, 7}, 41);
    auto w = oracle::randv(spec.weight_size(), 42);
    auto b = oracle::randv(16, 43);
    const auto dy = rand3({2, 16, 7}, 44);
    const auto g = conv1d_grouped_backward<double>(dy, x, w, spec, true);
    auto f = [&] { return oracle::project(conv1d_grouped<double>(x, w, spec, b).vec(), dy.vec()); };
    CHECK(fd_max_rel(x.data(), g.dx.data(), f) < 1e-6);
    CHECK(fd_max_rel(w, g.dweight, f) < 1e-6);
    CHECK(fd_max_rel(b, g.dbias, f) < 1e-6);
  }
}

TEST_CASE("conv1x1 matches loops and its backward matches finite differences") {
  auto x = rand3({2, 6, 5}, 51);
  auto w = oracle::randv(4 * 6, 52);
  auto b = oracle::randv(4, 53);
  const auto y = conv1x1<double>(x, w, 4, b);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t l = 0; l < 5; ++l) {
        long double acc = b[o];
        for (std::size_t i = 0; i < 6; ++i) acc += static_cast<long double>(w[o * 6 + i]) * x(n, i, l);
        CHECK(std::abs(y(n, o, l) - static_cast<double>(acc)) < 1e-12);
      }
  const auto dy = rand3({2, 4, 5}, 54);
  const auto g = conv1x1_backward<double>(dy, x, w, true);
  auto f = [&] { return oracle::project(conv1x1<double>(x, w, 4, b).vec(), dy.vec()); };
  CHECK(fd_max_rel(x.data(), g.dx.data(), f) < 1e-6);
  CHECK(fd_max_rel(w, g.dweight, f) < 1e-6);
  CHECK(fd_max_rel(b, g.dbias, f) < 1e-6);
}

TEST_CASE("batch norm: eval identity, constant input, running statistics") {
  const std::vector<double> one(3, 1.0), zero(3, 0.0);
  NormState<double> st(3);
  st.initialized = true;
  st.mode = Mode::eval;
  const auto x = rand3({2, 3, 4}, 61);
  const auto y = batch_norm<double>(x, st, one, zero);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.vec()[i] == doctest::Approx(x.vec()[i] / std::sqrt(1 + 1e-5)));

  NormState<double> tr(3);
  const auto k = Tensor3<double>({2, 3, 4}, 3.25);
  const auto yk = batch_norm<double>(k, tr, one, zero);
  for (double v : yk.vec()) CHECK(std::abs(v) < 1e-6);

  // Running update: r = (1 - m) r + m * stat, with the unbiased variance.
  NormState<double> up(3);
  batch_norm<double>(x, up, one, zero);
  for (std::size_t c = 0; c < 3; ++c) {
    long double m = 0, v = 0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t l = 0; l < 4; ++l) m += x(n, c, l);
    m /= 8;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t l = 0; l < 4; ++l) v += (x(n, c, l) - m) * (x(n, c, l) - m);
    v /= 7;
    CHECK(up.running_mean[c] == doctest::Approx(static_cast<double>(0.1 * m)).epsilon(1e-12));
    CHECK(up.running_var[c] == doctest::Approx(static_cast<double>(0.9 + 0.1 * v)).epsilon(1e-12));
  }
  CHECK(up.initialized);
}

TEST_CASE("batch norm preconditions") {
  const std::vector<double> one(2, 1.0), zero(2, 0.0);
  NormState<double> st(2);
  st.mode = Mode::eval;
  CHECK_THROWS_AS(batch_norm<double>(rand3({1, 2, 3}, 1), st, one, zero), StateError);
  NormState<double> tr(2);
  CHECK_THROWS_AS(batch_norm<double>(rand3({1, 2, 1}, 1), tr, one, zero), ShapeError);
  CHECK_THROWS_AS(batch_norm<double>(rand3({2, 2, 3}, 1), tr, std::vector<double>(3, 1.0), zero), ShapeError);
}

TEST_CASE("per-sample independence: GN and eval BN yes, train BN no") {
  const std::size_t c = 8;
  const std::vector<double> gamma = oracle::randv(c, 71), beta = oracle::randv(c, 72);
  auto x = rand3({4, c, 6}, 73);
  auto x2 = x;
  for (std::size_t n = 1; n < 4; ++n)
    for (auto& v : x2.row(n, 0)) v = v * 3 + 1;
  for (std::size_t cc = 0; cc < c; ++cc) x2(2, cc, 3) = 100.0;

  auto sample0 = [](const Tensor3<double>& t) {
    return std::vector<double>(t.sample(0).begin(), t.sample(0).end());
  };

  CHECK(sample0(group_norm<double>(x, 4, gamma, beta)) == sample0(group_norm<double>(x2, 4, gamma, beta)));

  NormState<double> st(c);
  batch_norm<double>(rand3({4, c, 6}, 74), st, gamma, beta);  // populate running stats
  st.mode = Mode::eval;
  CHECK(sample0(batch_norm<double>(x, st, gamma, beta)) == sample0(batch_norm<double>(x2, st, gamma, beta)));

  NormState<double> a(c), b(c);
  const auto ya = sample0(batch_norm<double>(x, a, gamma, beta));
  const auto yb = sample0(batch_norm<double>(x2, b, gamma, beta));
  CHECK(max_abs_diff(ya, yb) > 1e-3);
}

TEST_CASE("group norm matches the two-pass oracle and known values") {
  for (std::size_t groups : {1u, 2u, 4u, 16u}) {
    const auto x = rand3({2, 16, 5}, 81, 2.0, 0.5);
    const std::vector<double> one(16, 1.0), zero(16, 0.0);
    CHECK(max_abs_diff(group_norm<double>(x, groups, one, zero).data(),
                       oracle::group_norm_pre_affine(x, groups, 1e-5).data()) < 1e-12);
  }
  Tensor3<double> x({1, 1, 2}, std::vector<double>{1, 3});
  const auto y = group_norm<double>(x, 1, std::vector<double>{1}, std::vector<double>{0}, 1e-5);
  CHECK(std::abs(y(0, 0, 0) + 1) < 1e-4);
  CHECK(std::abs(y(0, 0, 1) - 1) < 1e-4);
  const Tensor3<double> k({2, 4, 3}, -7.5);
  const auto yk = group_norm<double>(k, 2, std::vector<double>(4, 1.3), std::vector<double>(4, 0.0));
  for (double v : yk.vec()) CHECK(std::abs(v) < 1e-6);
  CHECK_THROWS_AS(group_norm<double>(rand3({1, 6, 3}, 1), 4, std::vector<double>(6, 1.0),
                                     std::vector<double>(6, 0.0)),
                  ConfigError);
}

TEST_CASE("group norm statistics: zero mean, unit variance up to eps") {
  const std::size_t groups = 4, c = 16, l = 9;
  const std::vector<double> one(c, 1.0), zero(c, 0.0);
  for (double scale : {0.06, 0.1, 1.0, 30.0})
    for (double offset : {0.0, 5.0, -200.0}) {
      const auto x = rand3({2, c, l}, 91, scale, offset);
      for (double eps : {1e-5, 1e-12}) {
        const auto y = group_norm<double>(x, groups, one, zero, eps);
        for (std::size_t n = 0; n < 2; ++n)
          for (std::size_t g = 0; g < groups; ++g) {
            long double m = 0, v = 0, mi = 0, vi = 0;
            const std::size_t cg = c / groups, cnt = cg * l;
            for (std::size_t cc = g * cg; cc < (g + 1) * cg; ++cc)
              for (std::size_t i = 0; i < l; ++i) m += y(n, cc, i), mi += x(n, cc, i);
            m /= cnt;
            mi /= cnt;
            for (std::size_t cc = g * cg; cc < (g + 1) * cg; ++cc)
              for (std::size_t i = 0; i < l; ++i)
                v += (y(n, cc, i) - m) * (y(n, cc, i) - m), vi += (x(n, cc, i) - mi) * (x(n, cc, i) - mi);
            v /= cnt;
            vi /= cnt;
            REQUIRE(vi > 1e-3);
            CHECK(std::abs(static_cast<double>(m)) < 1e-8);
            // Exact for any eps: var(y) = var(x) / (var(x) + eps).
            CHECK(std::abs(static_cast<double>(v - vi / (vi + eps))) < 1e-9);
            if (eps == 1e-12) CHECK(std::abs(static_cast<double>(v) - 1) < 1e-6);
          }
      }
    }
}

TEST_CASE("group norm near scale invariance") {
  // Scaling x by alpha is the same as shrinking eps to eps / alpha^2, so the
  // outputs differ by the factor sqrt(v + eps) / sqrt(v + eps / alpha^2).
  const double eps = 1e-5;
  const std::vector<double> one(8, 1.0), zero(8, 0.0);
  const auto x = rand3({2, 8, 6}, 95, 2.0);
  const auto y1 = group_norm<double>(x, 2, one, zero, eps);
  for (double alpha : {1.0, 2.5, 40.0}) {
    Tensor3<double> ax = x;
    for (auto& v : ax.vec()) v *= alpha;
    const auto ya = group_norm<double>(ax, 2, one, zero, eps);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t g = 0; g < 2; ++g) {
        long double m = 0, v = 0;
        for (std::size_t c = g * 4; c < g * 4 + 4; ++c)
          for (std::size_t l = 0; l < 6; ++l) m += x(n, c, l);
        m /= 24;
        for (std::size_t c = g * 4; c < g * 4 + 4; ++c)
          for (std::size_t l = 0; l < 6; ++l) v += (x(n, c, l) - m) * (x(n, c, l) - m);
        v /= 24;
        REQUIRE(v >= 1.0);
        const double factor = std::sqrt(static_cast<double>(v) + eps) /
                              std::sqrt(static_cast<double>(v) + eps / (alpha * alpha));
        for (std::size_t c = g * 4; c < g * 4 + 4; ++c)
          for (std::size_t l = 0; l < 6; ++l) {
            CHECK(std::abs(ya(n, c, l) - y1(n, c, l) * factor) < 1e-12);
            // |diff| <= |xhat| * eps / (2 v): about 1e-6 once v >= 10.
            CHECK(std::abs(ya(n, c, l) - y1(n, c, l)) <= std::abs(y1(n, c, l)) * eps / (2 * static_cast<double>(v)) + 1e-12);
          }
      }
  }
}

TEST_CASE("normalization backward matches finite differences") {
  const std::size_t c = 8;
  auto gamma = oracle::randv(c, 101, 0.5);
  for (auto& g : gamma) g += 1;
  auto beta = oracle::randv(c, 102, 0.5);
  auto x = rand3({2, c, 5}, 103);
  const auto dy = rand3({2, c, 5}, 104);

  SUBCASE("group norm") {
    NormCache<double> cache;
    group_norm<double>(x, 4, gamma, beta, 1e-5, &cache);
    const auto g = group_norm_backward<double>(dy, cache, gamma);
    auto f = [&] { return oracle::project(group_norm<double>(x, 4, gamma, beta).vec(), dy.vec()); };
    CHECK(fd_max_rel(x.data(), g.dx.data(), f) < 1e-6);
    CHECK(fd_max_rel(gamma, g.dgamma, f) < 1e-6);
    CHECK(fd_max_rel(beta, g.dbeta, f) < 1e-6);
  }
  SUBCASE("batch norm, train") {
    NormCache<double> cache;
    NormState<double> st(c);
    batch_norm<double>(x, st, gamma, beta, &cache);
    const auto g = batch_norm_backward<double>(dy, cache, gamma);
    auto f = [&] {
      NormState<double> s2(c);
      return oracle::project(batch_norm<double>(x, s2, gamma, beta).vec(), dy.vec());
    };
    CHECK(fd_max_rel(x.data(), g.dx.data(), f) < 1e-6);
    CHECK(fd_max_rel(gamma, g.dgamma, f) < 1e-6);
    CHECK(fd_max_rel(beta, g.dbeta, f) < 1e-6);
  }
  SUBCASE("batch norm, eval") {
    NormState<double> st(c);
    batch_norm<double>(rand3({3, c, 5}, 105), st, gamma, beta);
    st.mode = Mode::eval;
    NormCache<double> cache;
    batch_norm<double>(x, st, gamma, beta, &cache);
    const auto g = batch_norm_backward<double>(dy, cache, gamma);
    auto f = [&] { return oracle::project(batch_norm<double>(x, st, gamma, beta).vec(), dy.vec()); };
    CHECK(fd_max_rel(x.data(), g.dx.data(), f) < 1e-6);
    CHECK(fd_max_rel(gamma, g.dgamma, f) < 1e-6);
  }
}

TEST_CASE("activations") {
  CHECK(ela::sigmoid(0.0) == 0.5);
  for (double v : {-30.0, -3.0, -0.1, 0.7, 12.0}) {
    CHECK(std::abs(ela::sigmoid(v) + ela::sigmoid(-v) - 1) < 1e-12);
    CHECK(ela::sigmoid(v) == doctest::Approx(oracle::sigmoid(v)).epsilon(1e-14));
  }
  CHECK(ela::sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(ela::sigmoid(-800.0)));
  CHECK(ela::sigmoid(800.0) == 1.0);
  for (double v : {-5.0, -3.0, -1.5, 0.0, 2.0, 3.0, 4.5})
    CHECK(ela::hard_swish(v) == doctest::Approx(v * std::clamp(v + 3, 0.0, 6.0) / 6));

  auto x = rand3({2, 3, 5}, 111, 2.0);
  for (auto& v : x.vec())
    if (std::abs(std::abs(v) - 3) < 1e-3) v += 0.01;  // keep clear of the hard-swish kinks
  const auto dy = rand3({2, 3, 5}, 112);
  const auto s = ela::sigmoid(x);
  CHECK(fd_max_rel(x.data(), sigmoid_backward(dy, s).data(),
                   [&] { return oracle::project(ela::sigmoid(x).vec(), dy.vec()); }) < 1e-7);
  CHECK(fd_max_rel(x.data(), hard_swish_backward(dy, x).data(),
                   [&] { return oracle::project(ela::hard_swish(x).vec(), dy.vec()); }) < 1e-7);
}

TEST_CASE("broadcast_mul_hw: identities and quadruple-loop oracle") {
  for (const auto& s : kShapes) {
    const auto x = rand4(s, 121);
    const Tensor3<double> ones({s.n, s.c, s.h}, 1.0), onesw({s.n, s.c, s.w}, 1.0);
    CHECK(broadcast_mul_hw(x, ones, onesw) == x);
    const Tensor3<double> half({s.n, s.c, s.h}, 0.5), halfw({s.n, s.c, s.w}, 0.5);
    const auto q = broadcast_mul_hw(x, half, halfw);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(q.vec()[i] == 0.25 * x.vec()[i]);

    const auto ah = rand3({s.n, s.c, s.h}, 122), aw = rand3({s.n, s.c, s.w}, 123);
    const auto y = broadcast_mul_hw(x, ah, aw);
    bool exact = true;
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c)
        for (std::size_t i = 0; i < s.h; ++i)
          for (std::size_t j = 0; j < s.w; ++j) exact &= y(n, c, i, j) == x(n, c, i, j) * ah(n, c, i) * aw(n, c, j);
    CHECK(exact);
  }
  CHECK_THROWS_AS(broadcast_mul_hw(rand4({1, 2, 3, 4}, 1), rand3({1, 2, 4}, 2), rand3({1, 2, 4}, 3)), ShapeError);
}

TEST_CASE("gating backward matches finite differences") {
  auto x = rand4({2, 4, 3, 5}, 131);
  auto ah = rand3({2, 4, 3}, 132);
  auto aw = rand3({2, 4, 5}, 133);
  const auto dy = rand4({2, 4, 3, 5}, 134);
  const auto g = broadcast_mul_hw_backward(dy, x, ah, aw);
  auto f = [&] { return oracle::project(broadcast_mul_hw(x, ah, aw).vec(), dy.vec()); };
  CHECK(fd_max_rel(x.data(), g.dx.data(), f) < 1e-6);
  CHECK(fd_max_rel(ah.data(), g.dah.data(), f) < 1e-6);
  CHECK(fd_max_rel(aw.data(), g.daw.data(), f) < 1e-6);

  auto gate = rand3({2, 4, 1}, 135);
  const auto [dx, dgate] = channel_scale_backward(dy, x, gate);
  auto fc = [&] { return oracle::project(channel_scale(x, gate).vec(), dy.vec()); };
  CHECK(fd_max_rel(x.data(), dx.data(), fc) < 1e-6);
  CHECK(fd_max_rel(gate.data(), dgate.data(), fc) < 1e-6);
}

TEST_CASE("concat and split along the spatial axis") {
  Tensor3<double> a({1, 1, 2}, std::vector<double>{1, 2}), b({1, 1, 1}, std::vector<double>{3});
  CHECK(concat_spatial(a, b).vec() == std::vector<double>{1, 2, 3});
  const auto p = rand3({2, 3, 4}, 141), q = rand3({2, 3, 5}, 142);
  const auto [p2, q2] = split_spatial(concat_spatial(p, q), 4);
  CHECK(p2 == p);
  CHECK(q2 == q);
  CHECK_THROWS_AS(split_spatial(p, 0), ShapeError);
  CHECK_THROWS_AS(split_spatial(p, 4), ShapeError);
  CHECK_THROWS_AS(concat_spatial(p, rand3({2, 2, 4}, 1)), ShapeError);
}

TEST_CASE("parallel_for visits every index once and propagates exceptions") {
  const std::size_t saved = worker_threads();
  for (std::size_t t : {1u, 2u, 5u}) {
    set_worker_threads(t);
    std::vector<std::atomic<int>> hits(37);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                      if (i == 7) throw StateError("boom");
                    }),
                    StateError);
  }
  set_worker_threads(saved);
}
