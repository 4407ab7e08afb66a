#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mixdens/kernels.hpp"
#include "mixdens/random.hpp"

using namespace mixdens;

TEST_CASE("log_density closed forms") {
  CHECK(KernelModel(Family::Gaussian).log_density(0.0, 0.0) == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
  CHECK(KernelModel(Family::Poisson).log_density(0.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(KernelModel(Family::Binomial).log_density(5.0, 0.5) ==
        doctest::Approx(std::log(252.0 / 1024.0)).epsilon(1e-12));
}

TEST_CASE("gamma log_density against a long double evaluation") {
  // shape 10, rate theta: 10 log theta + 9 log y - theta y - log 9!
  for (double theta : {0.3, 1.0, 2.5}) {
    for (double y : {0.5, 10.0, 31.0}) {
      const long double ref = 10.0L * std::log(static_cast<long double>(theta)) +
                              9.0L * std::log(static_cast<long double>(y)) -
                              static_cast<long double>(theta) * static_cast<long double>(y) - std::log(362880.0L);
      CHECK(KernelModel(Family::Gamma).log_density(y, theta) ==
            doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
    }
  }
}

TEST_CASE("boundary parameters give the limiting values") {
  const KernelModel b(Family::Binomial);
  CHECK(b.log_density(0.0, 0.0) == 0.0);
  CHECK(b.log_density(10.0, 1.0) == 0.0);
  CHECK(std::isinf(b.log_density(3.0, 0.0)));
  const KernelModel p(Family::Poisson);
  CHECK(p.log_density(0.0, 0.0) == 0.0);
  CHECK(std::isinf(p.log_density(2.0, 0.0)));
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(KernelModel(Family::Poisson).log_density(1.0, -0.1), std::domain_error);
  CHECK_THROWS_AS(KernelModel(Family::Poisson).log_density(1.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(KernelModel(Family::Binomial).log_density(11.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(KernelModel(Family::Binomial).log_density(3.0, 1.5), std::domain_error);
  CHECK_THROWS_AS(KernelModel(Family::Gamma).log_density(-1.0, 1.0), std::domain_error);
  Rng rng(1);
  CHECK_THROWS_AS(KernelModel(Family::Poisson).sample(-1.0, rng), std::domain_error);
  CHECK_THROWS_AS(validate(Observations{}, KernelModel(Family::Gaussian)), std::domain_error);
}

TEST_CASE("densities normalize") {
  for (double theta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    double s = 0.0;
    for (int y = 0; y <= 10; ++y) s += std::exp(KernelModel(Family::Binomial).log_density(y, theta));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (double theta : {0.5, 1.0, 3.0, 7.0, 12.0}) {
    double s = 0.0;
    for (int y = 0; y <= 200; ++y) s += std::exp(KernelModel(Family::Poisson).log_density(y, theta));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  auto integrate = [](const KernelModel& k, double theta, double lo, double hi) {
    const int m = 200000;
    const double step = (hi - lo) / m;
    double acc = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double y = lo + step * i;
      const double f = y > 0.0 || k.family() == Family::Gaussian ? std::exp(k.log_density(y, theta)) : 0.0;
      acc += (i == 0 || i == m ? 0.5 : 1.0) * f;
    }
    return acc * step;
  };
  for (double theta : {-3.0, -1.0, 0.0, 2.0, 5.0}) {
    CHECK(integrate(KernelModel(Family::Gaussian), theta, -20.0, 20.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (double theta : {0.2, 0.5, 1.0, 2.0, 4.0}) {
    CHECK(integrate(KernelModel(Family::Gamma), theta, 0.0, 40.0 / theta + 60.0 / theta) ==
          doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("degenerate and moment checks for sample") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) CHECK(KernelModel(Family::Poisson).sample(0.0, rng) == 0.0);
  for (int i = 0; i < 100; ++i) CHECK(KernelModel(Family::Binomial).sample(1.0, rng) == 10.0);
  double s = 0.0;
  const int m = 100000;
  for (int i = 0; i < m; ++i) s += KernelModel(Family::Gaussian).sample(3.0, rng);
  CHECK(std::fabs(s / m - 3.0) < 0.02);
}

TEST_CASE("sample and log_density agree") {
  Rng rng(11);
  const KernelModel g(Family::Gaussian);
  std::vector<double> y(10000);
  for (double& v : y) v = g.sample(1.5, rng);
  auto ll = [&](double theta) {
    double acc = 0.0;
    for (double v : y) acc += g.log_density(v, theta);
    return acc;
  };
  CHECK(ll(1.5) > ll(0.5));
  CHECK(ll(1.5) > ll(2.5));
}

TEST_CASE("support transforms") {
  CHECK(KernelModel(Family::Gaussian).to_support(1.7) == 1.7);
  CHECK(KernelModel(Family::Binomial).to_support(0.0) == 0.5);
  CHECK(KernelModel(Family::Poisson).to_support(0.0) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
  Rng rng(3);
  for (Family f : {Family::Gaussian, Family::Poisson, Family::Gamma, Family::Binomial}) {
    const KernelModel k(f);
    for (int i = 0; i < 1000; ++i) {
      const double a = 20.0 * rng.uniform() - 10.0, b = 20.0 * rng.uniform() - 10.0;
      if (a == b) continue;
      CHECK((a < b) == (k.to_support(a) < k.to_support(b)));
    }
    for (double x : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
      CHECK(k.from_support(k.to_support(x)) == doctest::Approx(x).epsilon(1e-10));
      const double h = 1e-6;
      const double fd = (k.to_support(x + h) - k.to_support(x - h)) / (2 * h);
      CHECK(k.to_support_derivative(x) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("natural terms reproduce log_density") {
  Rng rng(5);
  for (Family f : {Family::Gaussian, Family::Poisson, Family::Gamma, Family::Binomial}) {
    const KernelModel k(f);
    for (int i = 0; i < 50; ++i) {
      const double x = 6.0 * rng.uniform() - 3.0;
      const double theta = k.to_support(x);
      const double y = f == Family::Gaussian ? rng.normal() : f == Family::Gamma ? 0.1 + 20.0 * rng.uniform()
                                                                                 : static_cast<double>(rng.below(11));
      const NaturalTerms nt = natural_terms(f, x);
      CHECK(log_base_measure(f, y) + y * nt.p + nt.q == doctest::Approx(k.log_density(y, theta)).epsilon(1e-10));
      const double h = 1e-6;
      const NaturalTerms up = natural_terms(f, x + h), dn = natural_terms(f, x - h);
      CHECK(nt.dp == doctest::Approx((up.p - dn.p) / (2 * h)).epsilon(1e-5));
      CHECK(nt.dq == doctest::Approx((up.q - dn.q) / (2 * h)).epsilon(1e-5));
    }
    const NaturalTerms far = natural_terms(f, -60.0);
    CHECK(std::isfinite(far.p));
    CHECK(std::isfinite(far.q));
  }
}

TEST_CASE("collapse groups equal values") {
  const CollapsedObservations c = collapse(Observations{{3, 1, 3, 2, 1, 3}});
  CHECK(c.values == std::vector<double>{1, 2, 3});
  CHECK(c.counts == std::vector<double>{2, 1, 3});
  std::vector<double> out(3);
  c.aggregate(std::vector<double>{1, 2, 3, 4, 5, 6}, out);
  CHECK(out == std::vector<double>{7, 4, 10});
}
