#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hyperme/error.hpp"
#include "hyperme/hyper_me.hpp"

using namespace hyperme;

namespace {

// Reference values from tests/oracle/derive_reference_values.py.
constexpr double kZetaOffset1e3 = 4.6245303986967772534;
constexpr double kZetaOffset1e2 = 4.3422056324963050427;
constexpr double kBayesMode = 0.5998;

ModelFamily bernoulli(std::size_t nodes, double offset) {
  auto s = spaces::two_state();
  return ModelFamily::by_target(s, {observables::identity(s)}, ParameterGrid({Axis::uniform("A", 0, 1, nodes, offset)}));
}

HyperDistribution prior_of(const ModelFamily& f, double alpha = 1.0) {
  const FamilyTable t = tabulate(f);
  return entropic_prior(t.profile, t.metric, alpha);
}

}  // namespace

TEST(EntropicPrior, BernoulliNormalizer) {
  const HyperDistribution h = prior_of(bernoulli(39921, 1e-3));
  EXPECT_NEAR(std::exp(h.log_zeta), kZetaOffset1e3, 1e-6 * kZetaOffset1e3);
  const HyperDistribution coarse = prior_of(bernoulli(3961, 1e-2));
  EXPECT_NEAR(std::exp(coarse.log_zeta), kZetaOffset1e2, 1e-5 * kZetaOffset1e2);
}

TEST(EntropicPrior, NormalizedAndPeakedAtMaximumEntropy) {
  const HyperDistribution h = prior_of(bernoulli(401, 1e-2));
  double mass = 0.0;
  for (std::size_t k = 0; k < h.pi.size(); ++k) mass += h.pi[k] * h.grid.weight(k);
  EXPECT_NEAR(mass, 1.0, 1e-13);
  EXPECT_NEAR(h.grid.coords(argmax_scalar(h))[0], 0.5, 1e-12);
  // the total density, g^{1/2} included, piles up at the ends
  EXPECT_GT(h.pi.front(), h.pi[200]);
  EXPECT_NEAR(moments(h).mean(0), 0.5, 1e-12);
}

TEST(EntropicPrior, SigmaEqualsLogNormalizerAtAlphaOne) {
  const FamilyTable t = tabulate(bernoulli(2001, 1e-3));
  const HyperDistribution h = entropic_prior(t.profile, t.metric, 1.0);
  EXPECT_NEAR(sigma_entropy(h, t.profile), h.log_zeta, 1e-8);
}

TEST(EntropicPrior, AlphaOneMaximizesSigma) {
  const FamilyTable t = tabulate(bernoulli(2001, 1e-3));
  const std::vector<double> alphas{0.25, 0.5, 0.9, 1.1, 1.5, 2.0, 4.0};
  const AlphaReport r = alpha_optimality_check(t.profile, t.metric, alphas);
  EXPECT_TRUE(r.alpha_one_is_max);
  EXPECT_FALSE(r.tie);
  for (double m : r.margins) EXPECT_GT(m, 0.0);
  // margins grow away from alpha = 1
  EXPECT_LT(r.margins[2], r.margins[1]);
  EXPECT_LT(r.margins[3], r.margins[4]);
}

TEST(EntropicPrior, FlatEntropyIsATie) {
  const ParameterGrid g({Axis::uniform("t", 0, 1, 101)});
  MetricField m{g, std::vector<Eigen::MatrixXd>(g.size(), Eigen::MatrixXd::Identity(1, 1)),
                std::vector<double>(g.size(), 1.0)};
  EntropyProfile p{g, std::vector<double>(g.size(), 0.3), {}};
  const std::vector<double> alphas{0.5, 2.0};
  const AlphaReport r = alpha_optimality_check(p, m, alphas);
  EXPECT_TRUE(r.tie);
}

TEST(MakeHyper, RejectsBadInputs) {
  const ParameterGrid g({Axis::uniform("t", 0, 1, 5)});
  MetricField m{g, std::vector<Eigen::MatrixXd>(5, Eigen::MatrixXd::Identity(1, 1)), std::vector<double>(5, 1.0)};
  EXPECT_THROW(make_hyper(m, std::vector<double>(4, 0.0), 1.0), Error);
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_THROW(make_hyper(m, std::vector<double>(5, ninf), 1.0), Error);
  // huge exponents normalize in log space
  const HyperDistribution h = make_hyper(m, std::vector<double>(5, 1e4), 1.0);
  EXPECT_TRUE(std::isfinite(h.log_zeta));
  EXPECT_NEAR(h.pi[2], 1.0 / (h.grid.axis(0).nodes().back() - h.grid.axis(0).nodes().front()), 1e-12);
}

TEST(Repeat, AdditivityAndNaiveConcentration) {
  const ModelFamily f = bernoulli(201, 1e-2);
  double prev = moments(prior_of(f)).covariance(0, 0);
  for (int n : {2, 3}) {
    const RepeatReport r = repeat_family(f, n);
    EXPECT_LE(r.entropy_deviation, 1e-9) << n;
    EXPECT_LE(r.metric_deviation, 1e-9) << n;
    const double var = moments(r.naive_prior).covariance(0, 0);
    EXPECT_LT(var, prev) << n;
    prev = var;
  }
}

TEST(Repeat, ConstrainedPriorMarginalizesBack) {
  const ModelFamily f = bernoulli(201, 1e-2);
  const HyperDistribution h1 = prior_of(f);
  for (int n : {2, 3}) {
    const ConsistencyReport c = consistency_constrained_prior(f, n);
    EXPECT_LE(c.max_relative_deviation, 1e-12) << n;
    for (std::size_t k = 0; k < h1.pi.size(); ++k) EXPECT_NEAR(c.prior.pi[k], h1.pi[k], 1e-12 * h1.pi[k]);
  }
}

TEST(Bayes, PosteriorModeMatchesOracle) {
  const ModelFamily f = bernoulli(1001, 1e-3);
  const HyperDistribution h = prior_of(f);
  std::vector<double> obs(100, 0.0);
  std::fill_n(obs.begin(), 60, 1.0);
  const HyperDistribution post = bayes_update(h, f, obs);
  const auto mode = std::max_element(post.pi.begin(), post.pi.end()) - post.pi.begin();
  EXPECT_EQ(mode, 600);
  EXPECT_NEAR(post.grid.coords(mode)[0], kBayesMode, 1e-12);
  EXPECT_THROW(bayes_update(h, f, std::vector<double>{0.5}), Error);
}

TEST(Bayes, PosteriorConcentrates) {
  const ModelFamily f = bernoulli(1001, 1e-3);
  const HyperDistribution h = prior_of(f);
  double prev = std::sqrt(moments(h).covariance(0, 0));
  for (int n : {10, 100, 1000}) {
    std::vector<double> obs(n, 0.0);
    std::fill_n(obs.begin(), n * 3 / 10, 1.0);
    const double sd = std::sqrt(moments(bayes_update(h, f, obs)).covariance(0, 0));
    EXPECT_LT(sd, prev) << n;
    prev = sd;
  }
}

TEST(Reparametrize, IntervalProbabilitiesInvariant) {
  const ModelFamily f = bernoulli(10001, 1e-2);
  const HyperDistribution h = prior_of(f);
  const HyperDistribution u = reparametrize(h, Reparametrization::square());
  const std::size_t n = h.pi.size();
  for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, n / 4}, {n / 4, n / 2}, {n / 3, n - 1}}) {
    EXPECT_NEAR(interval_probability(u, i, j), interval_probability(h, i, j), 1e-5) << i << "," << j;
  }
  const HyperDistribution r = reparametrize(h, Reparametrization::scale(-3.0));
  EXPECT_NEAR(interval_probability(r, 0, n / 4), interval_probability(h, n - 1 - n / 4, n - 1), 1e-12);
}

TEST(Gaussian, ScaleMarginalAndConstant) {
  auto s = spaces::uniform_grid(-30, 30, 6001);
  const ParameterGrid grid({Axis::uniform("mu", -1, 1, 5), Axis::uniform("sigma", 0.5, 2, 31)});
  const ModelFamily f = ModelFamily::explicit_family(
      s, grid,
      [s](std::span<const double> t) {
        std::vector<double> v(s->size());
        for (std::size_t k = 0; k < v.size(); ++k) {
          const double z = (s->points()[k] - t[0]) / t[1];
          v[k] = std::exp(-0.5 * z * z);
        }
        return normalize(s, v);
      },
      "gaussian");
  const FamilyTable t = tabulate(f);
  const HyperDistribution h = entropic_prior(t.profile, t.metric, 1.0);
  const double c = std::sqrt(4.0 * M_PI * std::exp(1.0));
  for (std::size_t k = 0; k < grid.size(); k += 7) {
    const double sigma = grid.coords(k)[1];
    EXPECT_NEAR(std::exp(t.profile.entropy[k]) * h.sqrt_det(k) * sigma, c, 1e-4 * c) << k;
  }
  const std::vector<double> marg = marginal(h, 1);
  const auto sig = grid.axis(1).nodes();
  const double slope = std::log(marg.back() / marg.front()) / std::log(sig.back() / sig.front());
  EXPECT_NEAR(slope, -1.0, 1e-3);
}

TEST(TotalVariation, Basic) {
  const ParameterGrid g({Axis::uniform("t", -0.5, 1.5, 3, 0.25)});
  const std::vector<double> p{1, 1, 1}, q{2, 1, 0};
  EXPECT_NEAR(total_variation(p, q, g), 0.5 * (0.25 + 0.25), 1e-15);
}
