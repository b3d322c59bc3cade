#include <gtest/gtest.h>

#include <cmath>

#include "hyperme/error.hpp"
#include "hyperme/info_geometry.hpp"
#include "hyperme/parallel.hpp"

using namespace hyperme;

namespace {

constexpr double kFisherAt07 = 4.7619047619047619048;  // 1 / (0.7 * 0.3)

ModelFamily bernoulli(std::size_t nodes, double offset = kDefaultBoundaryOffset) {
  auto s = spaces::two_state();
  return ModelFamily::by_target(s, {observables::identity(s)}, ParameterGrid({Axis::uniform("A", 0, 1, nodes, offset)}));
}

ModelFamily gaussian(const SpacePtr& s, ParameterGrid grid) {
  return ModelFamily::explicit_family(
      s, std::move(grid),
      [s](std::span<const double> t) {
        std::vector<double> f(s->size());
        for (std::size_t k = 0; k < f.size(); ++k) {
          const double z = (s->points()[k] - t[0]) / t[1];
          f[k] = std::exp(-0.5 * z * z);
        }
        return normalize(s, f);
      },
      "gaussian");
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no hyperme::Error thrown";
  return ErrorKind::kUsage;
}

}  // namespace

TEST(Axis, UniformNodesAndTrapezoidWeights) {
  const Axis a = Axis::uniform("A", 0.0, 1.0, 5, 0.1);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_DOUBLE_EQ(a.nodes().front(), 0.1);
  EXPECT_DOUBLE_EQ(a.nodes().back(), 0.9);
  EXPECT_NEAR(a.weights()[0], 0.1, 1e-15);
  EXPECT_NEAR(a.weights()[2], 0.2, 1e-15);
  double total = 0;
  for (double w : a.weights()) total += w;
  EXPECT_NEAR(total, 0.8, 1e-15);
  EXPECT_THROW(Axis::uniform("A", 1.0, 0.0, 5), Error);
  EXPECT_THROW(Axis::from_nodes("A", {0.2, 0.1}, 0.0, 1.0), Error);
}

TEST(ParameterGrid, RowMajorIndexing) {
  const ParameterGrid g({Axis::uniform("a", 0, 1, 3), Axis::uniform("b", 0, 1, 4)});
  EXPECT_EQ(g.size(), 12u);
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    const auto idx = g.multi_index(flat);
    EXPECT_EQ(g.flat_index(idx), flat);
  }
  EXPECT_EQ(g.multi_index(5), (std::vector<std::size_t>{1, 1}));
  EXPECT_NEAR(g.weight(5), g.axis(0).weights()[1] * g.axis(1).weights()[1], 1e-16);
  const std::vector<double> outside{1.5, 0.5};
  EXPECT_FALSE(g.contains(outside));
}

TEST(Fisher, BernoulliAnalyticAndScore) {
  const ModelFamily f = bernoulli(11);
  const std::vector<double> theta{0.7};
  EXPECT_NEAR(fisher_metric(f, theta, MetricMethod::kAnalytic)(0, 0), kFisherAt07, 1e-12);
  EXPECT_NEAR(fisher_metric(f, theta, MetricMethod::kFiniteDifference)(0, 0), kFisherAt07, 1e-6 * kFisherAt07);
  EXPECT_NEAR(hessian_entropy(f, theta)(0, 0), kFisherAt07, 1e-6 * kFisherAt07);
}

TEST(Fisher, MultiplierCoordinatesGiveCovariance) {
  auto s = spaces::binomial_units(8);
  const ModelFamily f =
      ModelFamily::by_multiplier(s, {observables::identity(s)}, ParameterGrid({Axis::uniform("lambda", -2, 2, 9)}));
  const std::vector<double> lam{0.4};
  const double q = 1.0 / (1.0 + std::exp(0.4));
  EXPECT_NEAR(fisher_metric(f, lam)(0, 0), 8 * q * (1 - q), 1e-12);
  EXPECT_NEAR(fisher_metric(f, lam, MetricMethod::kFiniteDifference)(0, 0), 8 * q * (1 - q), 1e-7);
}

TEST(Fisher, DualityOnTwoObservables) {
  auto s = spaces::k_state(5);
  const std::vector<Observable> obs{observables::identity(s), observables::power(s, 2.0, "x2")};
  const ModelFamily f = ModelFamily::by_target(
      s, obs, ParameterGrid({Axis::uniform("A1", 0, 4, 5), Axis::uniform("A2", 0, 16, 5)}));
  const std::vector<double> theta{2.1, 5.9};
  const Eigen::MatrixXd cinv = f.solve(theta).covariance.inverse();
  const double scale = cinv.lpNorm<Eigen::Infinity>();
  EXPECT_LE((fisher_metric(f, theta, MetricMethod::kFiniteDifference) - cinv).lpNorm<Eigen::Infinity>(), 1e-4 * scale);
  EXPECT_LE((hessian_entropy(f, theta) - cinv).lpNorm<Eigen::Infinity>(), 1e-4 * scale);
}

TEST(Fisher, GaussianLocationScale) {
  auto s = spaces::uniform_grid(-30, 30, 6001);
  const ModelFamily f = gaussian(s, ParameterGrid({Axis::uniform("mu", -1, 1, 3), Axis::uniform("sigma", 0.5, 2, 3)}));
  const std::vector<double> theta{0.3, 1.2};
  const Eigen::MatrixXd g = fisher_metric(f, theta);
  EXPECT_NEAR(g(0, 0), 1.0 / 1.44, 1e-6);
  EXPECT_NEAR(g(1, 1), 2.0 / 1.44, 1e-6);
  EXPECT_NEAR(g(0, 1), 0.0, 1e-9);
  EXPECT_THROW(fisher_metric(f, theta, MetricMethod::kAnalytic), Error);
}

TEST(Fisher, SupportChangeIsReported) {
  // Uniform on [0, theta]: the support moves with theta.
  auto s = spaces::uniform_grid(0, 1, 101);
  const ModelFamily f = ModelFamily::explicit_family(
      s, ParameterGrid({Axis::uniform("theta", 0.2, 1.0, 5)}), [s](std::span<const double> t) {
        std::vector<double> v(s->size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = s->points()[k] <= t[0] ? 1.0 : 0.0;
        return normalize(s, v);
      });
  const std::vector<double> theta{0.5};
  EXPECT_EQ(kind_of([&] { fisher_metric(f, theta); }), ErrorKind::kDomain);
}

TEST(Stencil, StaysInsideBounds) {
  const Axis a = Axis::uniform("A", 0.0, 1.0, 101, 1e-3);
  EXPECT_DOUBLE_EQ(stencil_step(a, 0.5), 1e-4);
  EXPECT_DOUBLE_EQ(stencil_step(a, 1e-3), 1e-5);
  EXPECT_EQ(kind_of([&] { stencil_step(a, 0.0); }), ErrorKind::kBoundary);
}

TEST(Determinant, ClampsRoundingAndRejectsIndefinite) {
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 1.0, 1.0, 1.0 - 1e-17;
  EXPECT_GE(metric_determinant(g), 0.0);
  g << 1.0, 0.0, 0.0, -0.5;
  EXPECT_EQ(kind_of([&] { metric_determinant(g); }), ErrorKind::kNumericalFailure);
}

TEST(MetricField, IndependentOfWorkerCount) {
  const ModelFamily f = bernoulli(501);
  set_worker_count(1);
  const MetricField a = metric_field(f, MetricMethod::kFiniteDifference);
  set_worker_count(4);
  const MetricField b = metric_field(f, MetricMethod::kFiniteDifference);
  set_worker_count(0);
  for (std::size_t k = 0; k < a.det.size(); ++k) ASSERT_EQ(a.det[k], b.det[k]) << k;
}

TEST(Pullback, SquareMapTransformsMetricAndVolume) {
  const ModelFamily f = bernoulli(2001, 1e-2);
  const MetricField field = metric_field(f);
  const MetricField image = pullback_metric(field, Reparametrization::square());
  // g'(u) = g(A) / (2A)^2 at u = A^2
  const std::size_t k = 700;
  const double A = f.grid().coords(k)[0];
  EXPECT_NEAR(image.grid.coords(k)[0], A * A, 1e-15);
  EXPECT_NEAR(image.g[k](0, 0), field.g[k](0, 0) / (4 * A * A), 1e-12 * image.g[k](0, 0));

  auto volume = [](const MetricField& m, std::size_t i, std::size_t j) {
    const auto x = m.grid.axis(0).nodes();
    double v = 0;
    for (std::size_t n = i; n < j; ++n) v += 0.5 * (std::sqrt(m.det[n]) + std::sqrt(m.det[n + 1])) * (x[n + 1] - x[n]);
    return v;
  };
  EXPECT_NEAR(volume(image, 100, 1900), volume(field, 100, 1900), 1e-5 * volume(field, 100, 1900));
}

TEST(Pullback, DecreasingMapReversesAxis) {
  const ModelFamily f = bernoulli(101);
  const MetricField field = metric_field(f);
  const MetricField image = pullback_metric(field, Reparametrization::scale(-2.0));
  EXPECT_LT(image.grid.axis(0).nodes().front(), image.grid.axis(0).nodes().back());
  EXPECT_NEAR(image.g[0](0, 0), field.g[100](0, 0) / 4.0, 1e-12 * image.g[0](0, 0));
  Reparametrization flat{"flat", [](std::size_t, double) { return 1.0; }, [](std::size_t, double) { return 0.0; }};
  EXPECT_EQ(kind_of([&] { pullback_metric(field, flat); }), ErrorKind::kSingularity);
}

TEST(NegativeHessian, ExactOnQuadratics) {
  const ParameterGrid g({Axis::uniform("x", -1, 1, 3), Axis::uniform("y", -1, 1, 3)});
  auto f = [](std::span<const double> t) { return -(2 * t[0] * t[0] + 3 * t[0] * t[1] + 0.5 * t[1] * t[1]); };
  const std::vector<double> at{0.1, -0.2};
  const Eigen::MatrixXd h = negative_hessian(f, at, g);
  EXPECT_NEAR(h(0, 0), 4.0, 1e-6);
  EXPECT_NEAR(h(0, 1), 3.0, 1e-6);
  EXPECT_NEAR(h(1, 1), 1.0, 1e-6);
}
