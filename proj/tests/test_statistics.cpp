#include <cmath>

#include "doctest.h"
#include "squeezelab/channels.hpp"
#include "squeezelab/distributions.hpp"
#include "squeezelab/error.hpp"
#include "squeezelab/model.hpp"
#include "squeezelab/statistics.hpp"

using namespace squeezelab;

namespace {

MarginalDist fock(std::size_t n, std::size_t dim) {
  MarginalDist m;
  m.probs.assign(dim, 0.0);
  m.probs[n] = 1.0;
  return m;
}

JointDist product(const MarginalDist& a, const MarginalDist& b) {
  JointDist j(a.dim(), b.dim());
  for (std::size_t m = 0; m < a.dim(); ++m)
    for (std::size_t n = 0; n < b.dim(); ++n) j(m, n) = a.probs[m] * b.probs[n];
  j.close_mass();
  return j;
}

// Direct double-loop factorial moment, the oracle for the batched code.
double brute_joint_moment(const JointDist& j, int a, int b) {
  double s = 0.0;
  for (std::size_t m = 0; m < j.dim_s(); ++m)
    for (std::size_t n = 0; n < j.dim_i(); ++n) {
      double f = 1.0;
      for (int l = 0; l < a; ++l) f *= static_cast<double>(m) - l;
      for (int l = 0; l < b; ++l) f *= static_cast<double>(n) - l;
      s += f * j(m, n);
    }
  return s / j.total();
}

}  // namespace

TEST_CASE("factorial moments") {
  CHECK(factorial_moment(fock(2, 5), 2) == 2.0);
  MarginalDist p;
  p.probs = {0.5, 0.3, 0.2};
  CHECK(factorial_moment(p, 1, TailCheck::Skip) == doctest::Approx(0.7));
  CHECK(factorial_moment(p, 2, TailCheck::Skip) == doctest::Approx(0.4));
  for (double mu : {0.5, 1.0, 3.0}) {
    const MarginalDist th = background_marginal(Background::Thermal, mu, 600, 1e-15);
    double fact = 1.0;
    for (int n = 1; n <= 6; ++n) {
      fact *= n;
      CHECK(factorial_moment(th, n) == doctest::Approx(fact * std::pow(mu, n)).epsilon(1e-9));
      CHECK(std::abs(g_n(th, n) - fact) < 1e-9 * fact);
    }
  }
}

TEST_CASE("tail guard") {
  // Thermal mu = 3 cut at 40 photons: the 6th moment is tail dominated.
  MarginalDist th = background_marginal(Background::Thermal, 3.0, 40, 1.0);
  try {
    factorial_moment(th, 6);
    FAIL("expected truncation-unreliable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TruncationUnreliable);
  }
  CHECK_NOTHROW(factorial_moment(th, 6, TailCheck::Skip));
  // Histograms are never rejected in Auto mode.
  th.n_events = 1000;
  CHECK_NOTHROW(factorial_moment(th, 6));
}

TEST_CASE("correlation functions") {
  for (double mu : {0.5, 1.0, 4.0}) {
    const double x = mu / (1.0 + mu);
    const JointDist t = tmsv_joint(std::sqrt(x), 600);
    CHECK(g_mn(t, 1, 1) == doctest::Approx(2.0 + 1.0 / mu).epsilon(1e-10));
  }
  const JointDist j = model_output(ModelParams{0.6, 0.7, 3.0, 1.3, 0.1, 0.2, 0.05, 0.0}, 90, 90);
  for (int a = 1; a <= 4; ++a)
    for (int b = 0; b <= 4; ++b) {
      CHECK(joint_factorial_moment(j, a, b) == doctest::Approx(brute_joint_moment(j, a, b)).epsilon(1e-11));
    }
  const std::vector<double> surf = g_surface(j, 5, 6);
  REQUIRE(surf.size() == 30u);
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 6; ++b) CHECK(surf[(a - 1) * 6 + (b - 1)] == doctest::Approx(g_mn(j, a, b)).epsilon(1e-13));

  MarginalDist vac;
  vac.probs = {1.0, 0.0};
  try {
    g_n(vac, 2);
    FAIL("expected zero-mean");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroMean);
  }
}

TEST_CASE("loss invariance of normalized correlations") {
  const ModelParams states[] = {ModelParams{1, 1, 1.0, 1.0, 0, 0, 0, 0}, ModelParams{1, 1, 2.0, 1.5, 0.3, 0.1, 0.2, 0.4}};
  for (const ModelParams& p : states) {
    const JointDist pre = compose_state(p, choose_dim(p, 1e-15) + 40, 1e-15);
    for (double eta : {0.3, 0.64, 1.0}) {
      const JointDist post = apply_loss(pre, eta, eta);
      for (int a = 1; a <= 6; ++a)
        for (int b = 1; b <= 6; ++b) {
          const double g0 = g_mn(pre, a, b);
          CHECK(std::abs(g_mn(post, a, b) - g0) < 1e-6 * g0);
        }
      const auto m0 = marginals(pre);
      const auto m1 = marginals(post);
      for (int n = 2; n <= 6; ++n) CHECK(std::abs(g_n(m1.first, n) - g_n(m0.first, n)) < 1e-6 * g_n(m0.first, n));
    }
  }
}

TEST_CASE("nrf") {
  CHECK(nrf(tmsv_joint(0.5, 80)) == doctest::Approx(0.0).epsilon(1e-12));
  const JointDist pp = product(background_marginal(Background::Poisson, 1.3, 60, 1e-15),
                               background_marginal(Background::Poisson, 0.4, 60, 1e-15));
  CHECK(std::abs(nrf(pp) - 1.0) < 1e-9);
  for (double eta : {0.36, 0.6, 0.66}) {
    CHECK(nrf(apply_loss(tmsv_joint(0.7, 200), eta, eta)) == doctest::Approx(1.0 - eta).epsilon(1e-9));
  }
  const JointDist j = model_output(ModelParams{0.3, 0.9, 2.0, 1.7, 0.5, 0.0, 0.3, 0.0}, 60, 60);
  CHECK(nrf(j) >= 0.0);
}

TEST_CASE("parity") {
  CHECK(parity(fock(1, 3)) == -1.0);
  CHECK(parity(fock(0, 3)) == 1.0);
  CHECK(parity(background_marginal(Background::Thermal, 0.5, 120, 1e-15)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("heralding") {
  const JointDist t = tmsv_joint(0.8, 400);
  const Herald h3 = herald(t, Arm::Idler, 3);
  CHECK(h3.dist.probs[3] == doctest::Approx(1.0));
  CHECK(parity(h3.dist) == doctest::Approx(-1.0));
  CHECK(h3.probability == doctest::Approx(t(3, 3)));
  for (std::size_t h = 1; h <= 20; ++h) {
    const Herald hd = herald(t, Arm::Signal, h);
    CHECK(std::abs(g_n(hd.dist, 2) - (1.0 - 1.0 / static_cast<double>(h))) < 1e-14);
  }
  CHECK(std::abs(g_n(herald(t, Arm::Idler, 2).dist, 2) - 0.5) < 1e-15);

  JointDist empty(3, 3);
  empty(0, 0) = 1.0;
  try {
    herald(empty, Arm::Idler, 2);
    FAIL("expected empty-herald");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyHerald);
  }

  // Heralded lossy TMSV: parity = (1 - 2 eta_s)^h times a factor below 1 per
  // herald step, so its magnitude falls toward 0 and its sign follows
  // (1 - 2 eta_s)^h.
  const JointDist lossy = apply_loss(tmsv_joint(0.8, 300), 0.7, 0.7);
  double prev = 1.0;
  for (std::size_t h = 0; h <= 15; ++h) {
    const double p = parity(herald(lossy, Arm::Idler, h).dist);
    CHECK(std::abs(p) < std::abs(prev));
    CHECK((p < 0.0) == (h % 2 == 1));
    prev = p;
  }
  const JointDist weak = apply_loss(tmsv_joint(0.8, 300), 0.3, 0.7);
  prev = 1.0;
  for (std::size_t h = 0; h <= 15; ++h) {
    const double p = parity(herald(weak, Arm::Idler, h).dist);
    CHECK(p > 0.0);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("effective mode number") {
  CHECK(effective_mode_number(background_marginal(Background::Thermal, 1.0, 200, 1e-15)) ==
        doctest::Approx(1.0).epsilon(1e-9));
  // At low gain the marginal g2 approaches 1 + 1/K.
  const MarginalDist m = multimode_pdc_diagonal(1e-4, 2.0, 40);
  CHECK(std::abs(effective_mode_number(m) - 2.0) < 1e-3);
  // Exact identity: K_hat = (sum mu_k)^2 / sum mu_k^2 of the per-mode means.
  const MarginalDist m2 = multimode_pdc_diagonal(1.5, 2.0, 120);
  const SchmidtSpectrum s = schmidt_spectrum(2.0);
  const double b = solve_gain(s.lambdas, 1.5);
  double s1 = 0.0, s2 = 0.0;
  for (double l : s.lambdas) {
    const double mu = std::pow(std::sinh(b * l), 2);
    s1 += mu;
    s2 += mu * mu;
  }
  CHECK(effective_mode_number(m2) == doctest::Approx(s1 * s1 / s2).epsilon(1e-6));
  try {
    effective_mode_number(background_marginal(Background::Poisson, 1.0, 40));
    FAIL("expected undefined-K");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UndefinedK);
  }
}

TEST_CASE("moment matrix") {
  const JointDist t = tmsv_joint(std::sqrt(0.5), 200);
  const MomentMatrix mm = nonclassicality_matrix(t, 2);
  REQUIRE(mm.size() == 6u);
  CHECK(mm(0, 0) == 1.0);
  const std::pair<int, int> order[] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  for (std::size_t r = 0; r < 6; ++r) CHECK(mm.basis[r] == order[r]);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 6; ++c) {
      CHECK(std::abs(mm(r, c) - mm(c, r)) < 1e-12);
      const int p = mm.basis[r].first + mm.basis[c].first;
      const int q = mm.basis[r].second + mm.basis[c].second;
      CHECK(mm(r, c) == doctest::Approx(std::ldexp(brute_joint_moment(t, p, q), -(p + q))).epsilon(1e-11));
    }
  CHECK(mm.min_eigenvalue < 0.0);

  const JointDist pp = product(background_marginal(Background::Poisson, 1.0, 60, 1e-15),
                               background_marginal(Background::Poisson, 2.0, 60, 1e-15));
  CHECK(nonclassicality_matrix(pp, 2).min_eigenvalue >= -1e-10);
}

TEST_CASE("jacobi eigenvalues") {
  const double a = 2.0, b = 0.7, c = -1.3;
  const auto ev = symmetric_eigenvalues({a, b, b, c}, 2);
  const double mid = 0.5 * (a + c);
  const double rad = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  CHECK(std::abs(ev[0] - (mid - rad)) < 1e-12);
  CHECK(std::abs(ev[1] - (mid + rad)) < 1e-12);

  // Hilbert matrix 5x5: known smallest eigenvalue 3.28792877e-6.
  std::vector<double> h(25);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) h[i * 5 + j] = 1.0 / (i + j + 1);
  const auto hev = symmetric_eigenvalues(h, 5);
  CHECK(hev[0] == doctest::Approx(3.287928772e-6).epsilon(1e-8));
  CHECK(hev[4] == doctest::Approx(1.567050691).epsilon(1e-9));
}

TEST_CASE("squeezing") {
  const Squeezing zero = squeezing_db(0.0, 0.5);
  CHECK(zero.potential_db == 0.0);
  CHECK(std::abs(zero.measurable_db) < 1e-15);
  const Squeezing full = squeezing_db(2.9, 1.0);
  CHECK(full.potential_db == doctest::Approx(25.19).epsilon(1e-3));
  CHECK(full.measurable_db == doctest::Approx(full.potential_db));
  CHECK(squeezing_db(2.9, 0.66).measurable_db == doctest::Approx(4.68).epsilon(1e-2));
}

TEST_CASE("statistic grammar") {
  const JointDist t = apply_loss(tmsv_joint(0.6, 120), 0.8, 0.7);
  const auto ms = marginals(t);
  CHECK(make_statistic("mean:s").eval(t)[0] == mean(ms.first));
  CHECK(make_statistic("g2:i").eval(t)[0] == g_n(ms.second, 2));
  CHECK(make_statistic("gn:s:3").eval(t)[0] == g_n(ms.first, 3));
  CHECK(make_statistic("nrf").eval(t)[0] == nrf(t));
  CHECK(make_statistic("gmn:2,3").eval(t)[0] == g_mn(t, 2, 3));
  CHECK(make_statistic("gsurface:2,2").eval(t).size() == 4u);
  CHECK(make_statistic("gsurface:2,2").labels[1] == "g(1,2)");
  CHECK(make_statistic("herald-parity:i:1").eval(t)[0] == parity(herald(t, Arm::Idler, 1).dist));
  CHECK(make_statistic("mineig:2").eval(t)[0] == nonclassicality_matrix(t, 2).min_eigenvalue);
  CHECK_THROWS_AS(make_statistic("bogus"), Error);
  CHECK_THROWS_AS(make_statistic("g2:x"), Error);
  CHECK_THROWS_AS(make_statistic("gmn:2"), Error);
}
