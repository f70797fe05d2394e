#include <doctest.h>

#include <cmath>

#include "fairvic/loss.hpp"
#include "fairvic/rng.hpp"

using namespace fairvic;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Central-difference gradient of f at x, one coordinate at a time.
template <typename F>
Vector fd_grad(F f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("lambda weights validate sum and sign") {
  CHECK_NOTHROW(LambdaWeights(1, 0, 0, 0));
  CHECK_NOTHROW(LambdaWeights(0.1, 0.1, 0.1, 0.7));
  CHECK_NOTHROW(LambdaWeights(0.25, 0.25, 0.25, 0.25 + 5e-7));  // inside 1e-6
  CHECK_THROWS_AS(LambdaWeights(0.5, 0.5, 0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(LambdaWeights(0.1, 0.1, 0.1, 0.7 + 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(LambdaWeights(-0.1, 0.4, 0.4, 0.3), std::invalid_argument);
}

TEST_CASE("variance config validates") {
  CHECK_NOTHROW(VarianceConfig(1.0, 1e-4));
  CHECK_NOTHROW(VarianceConfig(1.0, 0.0));  // epsilon 0 allowed for exact hand cases
  CHECK_THROWS_AS(VarianceConfig(0.0, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(VarianceConfig(1.0, -1e-9), std::invalid_argument);
}

TEST_CASE("bce closed-form examples") {
  CHECK(bce_loss(vec({1 - 1e-7, 1e-7}), vec({1, 0})).value <= 1e-6);
  CHECK(bce_loss(vec({0.5, 0.5}), vec({1, 0})).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(vec({0.9}), vec({0})).value == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
}

TEST_CASE("bce clamps out-of-range inputs instead of blowing up") {
  const auto r = bce_loss(vec({1.0, 0.0}), vec({0, 1}));
  CHECK(std::isfinite(r.value));
  CHECK(r.value == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
  CHECK(std::isfinite(r.grad(0)));
  CHECK(std::isfinite(r.grad(1)));
}

TEST_CASE("bce rejects length mismatch") {
  CHECK_THROWS_AS(bce_loss(vec({0.5, 0.5}), vec({1})), ShapeError);
}

TEST_CASE("bce gradient matches finite differences") {
  SplitMix64 rng(11);
  for (int t = 0; t < 20; ++t) {
    Vector p(7), y(7);
    for (int i = 0; i < 7; ++i) {
      p(i) = rng.uniform(0.05, 0.95);
      y(i) = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    }
    const auto r = bce_loss(p, y);
    const Vector g = fd_grad([&](const Vector& q) { return bce_loss(q, y).value; }, p);
    for (int i = 0; i < 7; ++i)
      CHECK(r.grad(i) == doctest::Approx(g(i)).epsilon(1e-6));
  }
}

TEST_CASE("variance closed-form examples") {
  // every per-dimension std at or above gamma -> hinge inactive
  Matrix spread(4, 2);
  spread << 0, 0, 2, 2, 4, 4, 6, 6;  // pop std sqrt(5) > 1 per dim
  CHECK(variance_loss(spread, VarianceConfig(1.0, 1e-4)).value == 0.0);

  // all embeddings identical, gamma=1, eps=1e-4 -> 1 - sqrt(1e-4) = 0.99
  Matrix flat = Matrix::Constant(5, 3, 0.7);
  CHECK(variance_loss(flat, VarianceConfig(1.0, 1e-4)).value ==
        doctest::Approx(0.99).epsilon(1e-12));

  // rows [0,0] and [1,1], gamma=1, eps=0 -> per-dim pop std 0.5, loss 0.5
  Matrix two(2, 2);
  two << 0, 0, 1, 1;
  CHECK(variance_loss(two, VarianceConfig(1.0, 0.0)).value == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("variance needs two rows") {
  CHECK_THROWS_AS(variance_loss(Matrix::Zero(1, 2), VarianceConfig()), std::invalid_argument);
}

TEST_CASE("variance is non-increasing in per-dimension spread") {
  Matrix base(4, 1);
  base << 0, 0.1, 0.2, 0.3;
  double prev = variance_loss(base, VarianceConfig()).value;
  for (double s : {1.5, 2.5, 4.0}) {
    Matrix wider = base * s;
    const double cur = variance_loss(wider, VarianceConfig()).value;
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("variance gradient matches finite differences") {
  SplitMix64 rng(12);
  const VarianceConfig cfg(1.0, 1e-4);
  for (int t = 0; t < 10; ++t) {
    Matrix z(5, 3);
    for (int i = 0; i < z.size(); ++i) z(i / 3, i % 3) = rng.uniform(-0.5, 0.5);
    const auto r = variance_loss(z, cfg);
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        Matrix a = z, b = z;
        a(i, j) += 1e-6;
        b(i, j) -= 1e-6;
        const double fd =
            (variance_loss(a, cfg).value - variance_loss(b, cfg).value) / 2e-6;
        CHECK(r.grad(i, j) == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

TEST_CASE("invariance closed-form examples") {
  CHECK(invariance_loss(vec({0.3, 0.8}), vec({0.3, 0.8})).value == 0.0);
  CHECK(invariance_loss(vec({0.8, 0.2}), vec({0.6, 0.2})).value ==
        doctest::Approx(0.02).epsilon(1e-15));
  // symmetry
  const double ab = invariance_loss(vec({0.9, 0.1, 0.4}), vec({0.2, 0.3, 0.4})).value;
  const double ba = invariance_loss(vec({0.2, 0.3, 0.4}), vec({0.9, 0.1, 0.4})).value;
  CHECK(ab == ba);
  CHECK(ab > 0.0);
}

TEST_CASE("invariance zero iff equal") {
  SplitMix64 rng(13);
  for (int t = 0; t < 50; ++t) {
    Vector a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = rng.uniform01();
      b(i) = rng.uniform01();
    }
    const double v = invariance_loss(a, b).value;
    if ((a - b).cwiseAbs().maxCoeff() == 0.0)
      CHECK(v == 0.0);
    else
      CHECK(v > 0.0);
  }
}

TEST_CASE("invariance gradients are +2d/N and -2d/N") {
  const Vector a = vec({0.8, 0.2, 0.6});
  const Vector b = vec({0.5, 0.2, 0.9});
  const auto r = invariance_loss(a, b);
  for (int i = 0; i < 3; ++i) {
    const double d = a(i) - b(i);
    CHECK(r.grad_a(i) == doctest::Approx(2 * d / 3).epsilon(1e-15));
    CHECK(r.grad_b(i) == doctest::Approx(-2 * d / 3).epsilon(1e-15));
  }
}

TEST_CASE("covariance closed-form examples") {
  CHECK(covariance_loss(Vector::Constant(6, 0.42), vec({1, 0, 1, 0, 1, 1})).value == 0.0);
  CHECK(covariance_loss(vec({1, 0}), vec({1, 0})).value == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(covariance_loss(vec({1, 0}), vec({0, 0})).value == 0.0);
}

TEST_CASE("covariance is invariant to constant prediction shifts") {
  SplitMix64 rng(14);
  for (int t = 0; t < 20; ++t) {
    Vector p(8), g(8);
    for (int i = 0; i < 8; ++i) {
      p(i) = rng.uniform01();
      g(i) = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    }
    const double v0 = covariance_loss(p, g).value;
    const double v1 = covariance_loss((p.array() + 0.37).matrix(), g).value;
    CHECK(v0 == doctest::Approx(v1).epsilon(1e-12));
  }
}

TEST_CASE("covariance subgradient is zero when the root argument vanishes") {
  const auto r = covariance_loss(Vector::Constant(4, 0.6), vec({1, 1, 0, 0}));
  CHECK(r.value == 0.0);
  CHECK(r.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("covariance gradient matches finite differences") {
  SplitMix64 rng(15);
  for (int t = 0; t < 20; ++t) {
    Vector p(6), P(6);
    for (int i = 0; i < 6; ++i) {
      p(i) = rng.uniform(0.1, 0.9);
      P(i) = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    }
    if (covariance_loss(p, P).value < 1e-6) continue;  // avoid the sqrt kink
    const auto r = covariance_loss(p, P);
    const Vector g = fd_grad([&](const Vector& q) { return covariance_loss(q, P).value; }, p);
    for (int i = 0; i < 6; ++i)
      CHECK(r.grad(i) == doctest::Approx(g(i)).epsilon(1e-5));
  }
}

TEST_CASE("all four terms are nonnegative on random inputs") {
  SplitMix64 rng(16);
  for (int t = 0; t < 50; ++t) {
    Vector p(5), q(5), y(5), P(5);
    Matrix z(5, 2);
    for (int i = 0; i < 5; ++i) {
      p(i) = rng.uniform01();
      q(i) = rng.uniform01();
      y(i) = rng.uniform01() < 0.5 ? 0.0 : 1.0;
      P(i) = rng.uniform01() < 0.5 ? 0.0 : 1.0;
      z(i, 0) = rng.uniform(-2, 2);
      z(i, 1) = rng.uniform(-2, 2);
    }
    CHECK(bce_loss(p, y).value >= 0.0);
    CHECK(variance_loss(z, VarianceConfig()).value >= 0.0);
    CHECK(invariance_loss(p, q).value >= 0.0);
    CHECK(covariance_loss(p, P).value >= 0.0);
  }
}

TEST_CASE("total_loss closed-form examples") {
  const LossBreakdown a = total_loss(0.63, 0.1, 0.2, 0.3, 0.0, LambdaWeights(1, 0, 0, 0));
  CHECK(a.l_total == doctest::Approx(0.63).epsilon(1e-15));

  const LossBreakdown b = total_loss(1, 1, 1, 1, 0.0, LambdaWeights(0.1, 0.1, 0.1, 0.7));
  CHECK(b.l_total == doctest::Approx(1.0).epsilon(1e-12));

  const LossBreakdown c =
      total_loss(0.5, 0.2, 0.1, 0.3, 0.01, LambdaWeights(0.2, 0.1, 0.1, 0.6));
  CHECK(c.l_total == doctest::Approx(0.32).epsilon(1e-12));
  CHECK(c.l_reg == 0.01);
}

TEST_CASE("total_loss is linear in each part") {
  const LambdaWeights w(0.2, 0.1, 0.1, 0.6);
  const double base = total_loss(1, 2, 3, 4, 0.5, w).l_total;
  CHECK(total_loss(1 + 10, 2, 3, 4, 0.5, w).l_total ==
        doctest::Approx(base + 10 * 0.2).epsilon(1e-12));
  CHECK(total_loss(1, 2 + 10, 3, 4, 0.5, w).l_total ==
        doctest::Approx(base + 10 * 0.1).epsilon(1e-12));
  CHECK(total_loss(1, 2, 3 + 10, 4, 0.5, w).l_total ==
        doctest::Approx(base + 10 * 0.1).epsilon(1e-12));
  CHECK(total_loss(1, 2, 3, 4 + 10, 0.5, w).l_total ==
        doctest::Approx(base + 10 * 0.6).epsilon(1e-12));
}

TEST_CASE("flip_protected examples") {
  Matrix m(3, 3);
  m << 0, 7.5, 1,
       1, -2.0, 1,
       1, 0.25, 0;
  const Matrix f = flip_protected(m, 0);
  CHECK(f(0, 0) == 1.0);
  CHECK(f(1, 0) == 0.0);
  CHECK(f(2, 0) == 0.0);
  // other columns bit-identical
  CHECK(f.col(1) == m.col(1));
  CHECK(f.col(2) == m.col(2));
  // involution
  CHECK(flip_protected(f, 0) == m);

  Matrix bad = m;
  bad(1, 0) = 0.5;
  CHECK_THROWS_AS(flip_protected(bad, 0), std::invalid_argument);
}
