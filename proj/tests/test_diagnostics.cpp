#include "qbda/diagnostics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qbda;

namespace {

Matrix iid_normal(std::mt19937_64& rng, Index n, Index p) {
  std::normal_distribution<double> normal;
  Matrix m(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) m(i, j) = normal(rng);
  return m;
}

Matrix ar1(std::mt19937_64& rng, Index n, double rho) {
  std::normal_distribution<double> normal;
  Matrix m(n, 1);
  double x = normal(rng) / std::sqrt(1.0 - rho * rho);
  for (Index i = 0; i < n; ++i) {
    x = rho * x + normal(rng);
    m(i, 0) = x;
  }
  return m;
}

AcceptRecord promoted(double a2) {
  AcceptRecord r;
  r.promoted = true;
  r.stage2_prob = a2;
  return r;
}

}  // namespace

TEST_CASE("multiESS of iid draws is close to n") {
  std::mt19937_64 rng(1);
  const EssReport r = multi_ess(iid_normal(rng, 10000, 3));
  CHECK(r.multi_ess == doctest::Approx(10000.0).epsilon(0.1));
  CHECK(r.batch_size == 100);
  CHECK(r.n_batches == 100);
  CHECK(r.ess_per_iter == doctest::Approx(r.multi_ess / 10000.0));
  CHECK(std::isnan(r.ess_per_second));
  EssReport timed = r;
  timed.attach_wall_clock(2.0);
  CHECK(timed.ess_per_second == doctest::Approx(r.multi_ess / 2.0));
}

TEST_CASE("AR(1) effective sample size ratio") {
  std::mt19937_64 rng(2);
  double total = 0.0;
  for (int rep = 0; rep < 4; ++rep) total += multi_ess(ar1(rng, 50000, 0.5)).ess_per_iter;
  CHECK(total / 4.0 == doctest::Approx(1.0 / 3.0).epsilon(0.15));
}

TEST_CASE("duplicated draws halve the effective sample size") {
  std::mt19937_64 rng(3);
  const Matrix base = iid_normal(rng, 5000, 2);
  Matrix dup(10000, 2);
  for (Index i = 0; i < 5000; ++i) {
    dup.row(2 * i) = base.row(i);
    dup.row(2 * i + 1) = base.row(i);
  }
  const double iid = multi_ess(iid_normal(rng, 10000, 2)).multi_ess;
  CHECK(multi_ess(dup).multi_ess / iid == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("multiESS is affine invariant") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (Index p : {1, 2, 4, 6}) {
    Matrix draws = iid_normal(rng, 4000, p);
    for (Index i = 1; i < draws.rows(); ++i) draws.row(i) += 0.7 * draws.row(i - 1);
    const double base = multi_ess(draws).multi_ess;
    for (int t = 0; t < 5; ++t) {
      Matrix a(p, p);
      for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) a(i, j) = normal(rng) + (i == j ? 2.0 : 0.0);
      Eigen::RowVectorXd shift(p);
      for (Index j = 0; j < p; ++j) shift(j) = 10.0 * normal(rng);
      const Matrix moved = (draws * a.transpose()).rowwise() + shift;
      CHECK(std::abs(multi_ess(moved).multi_ess - base) <= 1e-6 * base);
    }
  }
}

TEST_CASE("multiESS of a reversed chain") {
  std::mt19937_64 rng(5);
  Matrix draws = iid_normal(rng, 2500, 3);  // b = 50 divides n
  for (Index i = 1; i < draws.rows(); ++i) draws.row(i) += 0.5 * draws.row(i - 1);
  const Matrix reversed = draws.colwise().reverse();
  CHECK(multi_ess(reversed).multi_ess == doctest::Approx(multi_ess(draws).multi_ess).epsilon(1e-10));
}

TEST_CASE("multiESS edge cases") {
  std::mt19937_64 rng(6);
  CHECK_THROWS_AS(multi_ess(iid_normal(rng, 10, 3)), InsufficientSamples);
  Matrix degenerate = iid_normal(rng, 400, 2);
  degenerate.col(1) = 2.0 * degenerate.col(0);
  const EssReport r = multi_ess(degenerate);
  CHECK(r.rank_deficient);
  CHECK(std::isnan(r.multi_ess));
  CHECK_FALSE(r.diagnostic.empty());

  const EssReport few = multi_ess(iid_normal(rng, 400, 5));
  CHECK(few.n_batches == 20);
  CHECK_FALSE(few.diagnostic.empty());
}

TEST_CASE("mcse from multiESS") {
  std::mt19937_64 rng(7);
  const Matrix draws = iid_normal(rng, 10000, 2);
  const EssReport r = multi_ess(draws);
  const Vector se = mcse(draws, r.multi_ess);
  const Matrix cov = empirical_cov(draws).matrix();
  for (Index j = 0; j < 2; ++j) CHECK(se(j) == doctest::Approx(std::sqrt(cov(j, j) / r.multi_ess)));
}

TEST_CASE("percentiles") {
  std::vector<AcceptRecord> ones(10, promoted(1.0));
  const Percentiles all = acceptance_percentiles(ones);
  CHECK(all.p25 == 1.0);
  CHECK(all.p50 == 1.0);
  CHECK(all.p75 == 1.0);

  std::vector<AcceptRecord> spread;
  for (int i = 10; i >= 1; --i) spread.push_back(promoted(0.1 * i));
  AcceptRecord skipped;
  skipped.stage2_prob = 0.0;
  spread.push_back(skipped);
  const Percentiles p = acceptance_percentiles(spread);
  CHECK(p.p50 == doctest::Approx(0.55));
  CHECK(p.p25 == doctest::Approx(0.325));
  CHECK(p.p75 == doctest::Approx(0.775));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  for (int t = 0; t < 100; ++t) {
    std::vector<AcceptRecord> rs;
    for (int i = 0; i < 1 + t % 17; ++i) rs.push_back(promoted(u(rng)));
    const Percentiles q = acceptance_percentiles(rs);
    CHECK(q.p25 <= q.p50);
    CHECK(q.p50 <= q.p75);
  }
  CHECK_THROWS_AS(acceptance_percentiles(std::vector<AcceptRecord>(3)), NoPromotions);
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(median({4.0, 1.0}) == 2.5);
}

TEST_CASE("histogram") {
  const std::vector<double> single{0.5};
  const Histogram h = histogram(single);
  CHECK(h.frequency.size() == 20);
  CHECK(h.edges.size() == 21);
  CHECK(h.frequency[10] == 1.0);

  const std::vector<double> top(7, 1.0);
  CHECK(histogram(top).frequency.back() == 1.0);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u;
  std::vector<double> uniform(1000000);
  for (auto& v : uniform) v = u(rng);
  for (double f : histogram(uniform).frequency) CHECK(std::abs(f - 0.05) < 0.005);

  const std::vector<double> outside{-0.5, 0.2, 1.5};
  const Histogram o = histogram(outside);
  CHECK(o.n_out_of_range == 2);
  CHECK(o.frequency[4] == 1.0);
  CHECK_THROWS_AS(histogram(std::vector<double>{}), EmptyInput);
}

TEST_CASE("two-sample Kolmogorov-Smirnov") {
  const KsResult disjoint = ks_two_sample({1, 2, 3}, {4, 5, 6});
  CHECK(disjoint.statistic == 1.0);

  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal;
  std::vector<double> a(2000), b(2000), c(2000);
  for (auto& v : a) v = normal(rng);
  for (auto& v : b) v = normal(rng);
  for (auto& v : c) v = normal(rng) + 0.3;
  const KsResult same = ks_two_sample(a, b);
  CHECK(same.p_value > 0.01);
  CHECK(same.statistic < 0.06);
  CHECK(ks_two_sample(a, c).p_value < 1e-6);
  CHECK(ks_two_sample(a, a).statistic == 0.0);
  CHECK(ks_two_sample(a, a).p_value == doctest::Approx(1.0));

  // Rejection rate under the null stays near the nominal level.
  int rejects = 0;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(300), y(300);
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    rejects += ks_two_sample(x, y).p_value < 0.05 ? 1 : 0;
  }
  CHECK(rejects < 25);
}

TEST_CASE("thinning") {
  const std::vector<double> v{0, 1, 2, 3, 4, 5, 6};
  CHECK(thin(v, 3) == std::vector<double>{0, 3, 6});
  CHECK(thin(v, 1) == v);
  CHECK(thinning_spacing(10000, 500.0) == 20);
  CHECK(thinning_spacing(10000, 9000.0) == 5);
  CHECK(thinning_spacing(1000, 900.0) == 2);
  CHECK(thinning_spacing(1000, std::nan("")) == 1);
}
