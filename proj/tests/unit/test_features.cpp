#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lobsim/features.hpp"
#include "synthetic.hpp"

using namespace lobsim;
using lobsim::testing::synthetic_intervals;

namespace {

MarketObservation quote(Seconds t, Price bid, Price ask) {
  MarketObservation o;
  o.time = t;
  o.best_bid = bid;
  o.best_ask = ask;
  return o;
}

ModelSpec spec(Variant v, Timing t = Timing::Lagged, Target y = Target::Dpb) {
  ModelSpec s;
  s.variant = v;
  s.timing = t;
  s.target = y;
  return s;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Moments, Example) {
  const std::vector<double> x{std::log(1.0), std::log(100.0)};
  const auto m = moments(x);
  ASSERT_TRUE(m);
  EXPECT_NEAR(m->mean, 2.3026, 1e-4);
  EXPECT_NEAR(m->m2, 5.3019, 1e-4);
  EXPECT_NEAR(m->m3, 0.0, 1e-12);
  EXPECT_NEAR(m->m4, m->m2 * m->m2, 1e-9);
  EXPECT_FALSE(moments(std::vector<double>{}));
}

TEST(Moments, MatchDirectSums) {
  std::mt19937_64 gen(3);
  std::exponential_distribution<double> e(0.7);
  std::vector<double> x(1000);
  for (double& v : x) v = e(gen);
  const auto m = *moments(x);
  long double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  long double c[5] = {};
  for (double v : x)
    for (int k = 2; k <= 4; ++k) c[k] += std::pow(static_cast<long double>(v) - mean, k);
  EXPECT_NEAR(m.mean, static_cast<double>(mean), 1e-12);
  for (int k = 2; k <= 4; ++k) EXPECT_NEAR(m.get(k), static_cast<double>(c[k] / x.size()), 1e-9);
}

TEST(Intervals, ConstantSpread) {
  std::vector<MarketObservation> obs;
  for (int i = 0; i < 600; ++i) obs.push_back(quote(i + 0.5, 100, 102));
  const auto rs = sample_intervals(obs, 1.0);
  ASSERT_EQ(rs.size(), 10u);
  for (const auto& r : rs) {
    EXPECT_DOUBLE_EQ(r.spread->mean, 2.0);
    EXPECT_EQ(r.spread->m2, 0.0);
  }
  EXPECT_FALSE(rs[0].dpb);
  // Quotes never move: dpb is the log spread, dps its negative.
  EXPECT_NEAR(*rs[1].dpb, std::log(102.0 / 100.0), 1e-15);
  EXPECT_NEAR(*rs[1].dps, -std::log(102.0 / 100.0), 1e-15);
}

TEST(Intervals, BidJumpCase) {
  // bid 100 -> 100, ask 101 -> 100 crossing bid_{t-1}: dpb = 0.
  const std::vector<MarketObservation> obs{quote(10, 100, 101), quote(70, 99, 100)};
  const auto rs = sample_intervals(obs, 1.0, default_cells(), 0.0, 120.0);
  ASSERT_EQ(rs.size(), 2u);
  EXPECT_EQ(*rs[1].dpb, 0.0);
  EXPECT_NEAR(*rs[1].dps, std::log(99.0 / 101.0), 1e-15);
}

TEST(Intervals, CountsAndRates) {
  std::vector<MarketObservation> obs;
  for (int i = 0; i < 30; ++i) {
    MarketObservation o = quote(i * 4.0, 100, 101);
    o.cell = Cell{Side::Bid, OrderType::Limit, EventKind::Arrival};
    o.distance = i % 3;
    o.qty = 1 + i % 2;
    obs.push_back(o);
  }
  const auto rs = sample_intervals(obs, 1.0, default_cells(), 0.0, 150.0);
  ASSERT_EQ(rs.size(), 3u);
  const Cell c{Side::Bid, OrderType::Limit, EventKind::Arrival};
  EXPECT_EQ(rs[0].cells.at(c).count, 15u);
  EXPECT_DOUBLE_EQ(rs[0].cells.at(c).rate, 15.0 / 60.0);
  EXPECT_TRUE(rs[2].short_interval);
  EXPECT_DOUBLE_EQ(rs[2].end, 150.0);
  EXPECT_EQ(rs[2].cells.at(c).count, 0u);
  EXPECT_FALSE(rs[2].cells.at(c).dl);
  EXPECT_NEAR(rs[0].cells.at(c).dl->mean, (5 * 0 + 5 * std::log(2.0) + 5 * std::log(3.0)) / 15.0, 1e-12);
  EXPECT_THROW(sample_intervals(obs, 0.0), Error);
}

TEST(Intervals, CsvRoundTrip) {
  const auto rs = synthetic_intervals(50, 1.0, 8);
  std::stringstream ss;
  write_intervals_csv(ss, rs);
  const auto back = read_intervals_csv(ss);
  ASSERT_EQ(back.size(), rs.size());
  const auto a = build_design(rs, spec(Variant::A1));
  const auto b = build_design(back, spec(Variant::A1));
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.y, b.y);
}

TEST(Design, ParameterCounts) {
  EXPECT_EQ(model_terms(spec(Variant::A4)).size(), 43u);
  EXPECT_EQ(model_terms(spec(Variant::A3)).size(), 59u);
  EXPECT_EQ(model_terms(spec(Variant::A2)).size(), 139u);
  EXPECT_EQ(model_terms(spec(Variant::A1)).size(), 547u);
}

TEST(Design, ModelsAreNested) {
  const Variant order[] = {Variant::A4, Variant::A3, Variant::A2, Variant::A1};
  for (int i = 0; i + 1 < 4; ++i) {
    const auto small = model_terms(spec(order[i])), big = model_terms(spec(order[i + 1]));
    ASSERT_LT(small.size(), big.size());
    for (std::size_t j = 0; j < small.size(); ++j) EXPECT_EQ(term_label(small[j]), term_label(big[j]));
  }
}

TEST(Design, LabelsAreUnique) {
  const auto terms = model_terms(spec(Variant::A1));
  std::set<std::string> labels;
  for (const auto& t : terms) labels.insert(term_label(t));
  EXPECT_EQ(labels.size(), terms.size());
}

TEST(Design, TooFewRecords) {
  const auto rs = synthetic_intervals(1, 1.0, 1);
  try {
    build_design(rs, spec(Variant::A4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientRows);
  }
}

TEST(Design, LaggedRowIsPreviousContemporaneousRow) {
  const auto rs = synthetic_intervals(40, 1.0, 2);
  const auto lag = build_design(rs, spec(Variant::A3, Timing::Lagged));
  const auto now = build_design(rs, spec(Variant::A3, Timing::Contemporaneous));
  ASSERT_EQ(now.X.rows(), 40);
  ASSERT_EQ(lag.X.rows(), 39);
  for (Eigen::Index i = 0; i < lag.X.rows(); ++i) {
    EXPECT_EQ(lag.X.row(i), now.X.row(i)) << i;
    EXPECT_EQ(lag.y(i), now.y(i + 1));
  }
}

TEST(Design, DropsIncompleteRows) {
  auto rs = synthetic_intervals(30, 1.0, 4);
  rs[10].cells[{Side::Ask, OrderType::Limit, EventKind::Cancellation}].q.reset();
  rs[20].dpb.reset();
  const auto d = build_design(rs, spec(Variant::A4));
  EXPECT_EQ(d.dropped, 2u);
  EXPECT_EQ(d.X.rows(), 27);
  EXPECT_EQ(std::count(d.rows.begin(), d.rows.end(), 11u), 0);
  EXPECT_EQ(std::count(d.rows.begin(), d.rows.end(), 20u), 0);
}

TEST(Ols, ExactFit) {
  Eigen::MatrixXd X(5, 2);
  X << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
  Eigen::VectorXd y(5);
  y << 1, 3, 5, 7, 9;
  const auto f = ols_fit(X, y);
  EXPECT_NEAR(f.coef(0), 1.0, 1e-12);
  EXPECT_NEAR(f.coef(1), 2.0, 1e-12);
  EXPECT_LT(f.residuals.norm(), 1e-12);
  EXPECT_FALSE(f.rank_deficient);
}

TEST(Ols, MatchesNormalEquations) {
  std::mt19937_64 gen(20);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(20, 3);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(gen);
    X(i, 2) = 5.0 + 0.1 * z(gen);
    y(i) = z(gen);
  }
  // Normal equations in long double via Gauss-Jordan.
  long double a[3][4] = {};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 20; ++i) a[r][c] += static_cast<long double>(X(i, r)) * X(i, c);
    for (int i = 0; i < 20; ++i) a[r][3] += static_cast<long double>(X(i, r)) * y(i);
  }
  for (int p = 0; p < 3; ++p) {
    for (int r = 0; r < 3; ++r) {
      if (r == p) continue;
      const long double m = a[r][p] / a[p][p];
      for (int c = 0; c < 4; ++c) a[r][c] -= m * a[p][c];
    }
  }
  const auto f = ols_fit(X, y);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(f.coef(j), static_cast<double>(a[j][3] / a[j][j]), 1e-8);
  EXPECT_LT((X.transpose() * f.residuals).norm(), 1e-10);
}

TEST(Ols, DuplicatedColumnIsRankDeficient) {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(30, 3);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(gen);
    X(i, 2) = X(i, 1);
    y(i) = 2.0 * X(i, 1) + 0.1 * z(gen);
  }
  const auto f = ols_fit(X, y);
  EXPECT_TRUE(f.rank_deficient);
  EXPECT_EQ(f.rank, 2u);
  EXPECT_FALSE(f.warning.empty());
  // Minimum norm splits the weight evenly.
  EXPECT_NEAR(f.coef(1), f.coef(2), 1e-8);
  EXPECT_NEAR(f.coef(1) + f.coef(2), 2.0, 0.1);
}

TEST(Ols, ResidualsOrthogonalOnRealDesign) {
  const auto rs = synthetic_intervals(400, 1.0, 5);
  const auto d = build_design(rs, spec(Variant::A3));
  const auto f = ols_fit(d.X, d.y);
  const Eigen::VectorXd g = d.X.transpose() * f.residuals;
  EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-8 * d.X.norm() * d.y.norm());
}

TEST(Metrics, Examples) {
  const std::vector<double> y{1, -1, 2, -2}, f{0.5, -0.5, -1, 0};
  EXPECT_DOUBLE_EQ(dpa(y, f), 50.0);
  const auto m = evaluate(y, y, 1);
  EXPECT_DOUBLE_EQ(m.r2, 1.0);
  EXPECT_DOUBLE_EQ(*m.adj_r2, 1.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_DOUBLE_EQ(*m.dpa, 100.0);

  // mean 0, sst 10, ssr = 0.25 + 0.25 + 9 + 4 = 13.5
  const auto e = evaluate(y, f, 1);
  EXPECT_NEAR(e.r2, 1.0 - 13.5 / 10.0, 1e-15);
  EXPECT_NEAR(*e.adj_r2, 1.0 - (1.0 - e.r2) * 3.0 / 2.0, 1e-15);
  EXPECT_NEAR(e.rmse, std::sqrt(13.5 / 4.0), 1e-15);
  EXPECT_FALSE(evaluate(y, f, 3).adj_r2);
  EXPECT_FALSE(evaluate(y, f, 1, false).dpa);
}

TEST(Metrics, DpaScaleInvariant) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> z;
  std::vector<double> y(500), f(500), g(500);
  for (int i = 0; i < 500; ++i) y[i] = z(gen), f[i] = z(gen), g[i] = 37.5 * f[i];
  EXPECT_EQ(dpa(y, f), dpa(y, g));
}

TEST(Metrics, MincerZarnowitz) {
  const std::vector<double> y{1, 2, 3, 4}, f{2, 4, 6, 8}, flat{1, 1, 1, 1};
  EXPECT_NEAR(mincer_zarnowitz_r2(y, f), 1.0, 1e-15);
  EXPECT_EQ(mincer_zarnowitz_r2(y, flat), 0.0);
  EXPECT_THROW(mincer_zarnowitz_r2(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST(Rolling, PerfectForesight) {
  auto rs = synthetic_intervals(300, 1.0, 7, 0.0);
  const auto r = rolling_forecast(rs, spec(Variant::A4), 100);
  EXPECT_EQ(r.predicted.size(), 299u - 100u);
  EXPECT_LT(r.rmspe, 1e-8);
  EXPECT_NEAR(r.r2_mz, 1.0, 1e-9);
  EXPECT_GT(r.dpa, 99.0);
}

TEST(Rolling, NoiseOnly) {
  const auto rs = synthetic_intervals(3000, 0.0, 8);
  const auto r = rolling_forecast(rs, spec(Variant::A4), 500);
  EXPECT_NEAR(r.dpa, 50.0, 4.0);
  EXPECT_LT(r.r2_mz, 0.01);
}

TEST(Rolling, EqualsDirectWindowFit) {
  const auto rs = synthetic_intervals(1400, 1.0, 9);
  const auto d = build_design(rs, spec(Variant::A3));
  const std::size_t w = 200;
  const auto r = rolling_forecast(d, w);
  for (std::size_t i : {w, w + 1, w + 511, w + 700, static_cast<std::size_t>(d.X.rows()) - 1}) {
    const auto lo = static_cast<Eigen::Index>(i - w);
    const auto fit = ols_fit(d.X.middleRows(lo, static_cast<Eigen::Index>(w)), d.y.segment(lo, static_cast<Eigen::Index>(w)));
    const double direct = d.X.row(static_cast<Eigen::Index>(i)).dot(fit.coef);
    EXPECT_NEAR(r.predicted[i - w], direct, 1e-7 * (1.0 + std::abs(direct))) << i;
  }
}

TEST(Rolling, Windows) {
  EXPECT_EQ(default_window(1), 10'000u);
  EXPECT_EQ(default_window(10), 2'500u);
  EXPECT_EQ(default_window(240), 100u);
  for (int m : kIntervalMinutes) EXPECT_GT(default_window(m), 0u);
  EXPECT_THROW(default_window(7), Error);
  const auto rs = synthetic_intervals(100, 1.0, 1);
  try {
    rolling_forecast(rs, spec(Variant::A4), 99);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::WindowTooLarge);
  }
}

TEST(Nested, InSampleR2Dominance) {
  const auto rs = synthetic_intervals(1200, 0.5, 10);
  double prev = -1.0;
  for (Variant v : {Variant::A4, Variant::A3, Variant::A2, Variant::A1}) {
    const auto d = build_design(rs, spec(v));
    const auto f = ols_fit(d.X, d.y);
    const double r2 = evaluate(to_vec(d.y), to_vec(f.fitted), f.k - 1).r2;
    EXPECT_GE(r2, prev - 1e-9) << to_string(v);
    prev = r2;
  }
}

TEST(Nested, ContemporaneousUsesSameInterval) {
  // Target equal to the same-interval spread mean is fitted exactly by the
  // contemporaneous model but not by the lagged one.
  auto rs = synthetic_intervals(300, 0.0, 11);
  for (auto& r : rs) r.dpb = 3.0 * r.spread->mean - 1.0;
  const auto now = build_design(rs, spec(Variant::A4, Timing::Contemporaneous));
  const auto lag = build_design(rs, spec(Variant::A4, Timing::Lagged));
  EXPECT_LT(ols_fit(now.X, now.y).residuals.norm(), 1e-9);
  EXPECT_GT(ols_fit(lag.X, lag.y).residuals.norm(), 1.0);
}
