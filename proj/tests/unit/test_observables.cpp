#include <gtest/gtest.h>

#include <random>

#include "lobsim/observables.hpp"

using namespace lobsim;

namespace {

BookState make(std::initializer_list<std::pair<Price, Qty>> bids, std::initializer_list<std::pair<Price, Qty>> asks) {
  BookState book;
  OrderId id = 0;
  for (auto [p, q] : bids) book.submit(Order::limit(++id, Side::Bid, p, q));
  for (auto [p, q] : asks) book.submit(Order::limit(++id, Side::Ask, p, q));
  return book;
}

// Unit-by-unit walk: expand each level into single units and stop once the
// running value reaches the target.
double unit_walk_vwap(const std::vector<std::pair<Price, Qty>>& levels, double target) {
  double value = 0, units = 0;
  for (auto [p, q] : levels)
    for (Qty i = 0; i < q && value < target; ++i) {
      value += static_cast<double>(p);
      units += 1;
    }
  return value / units;
}

}  // namespace

TEST(Snapshot, Definitions) {
  const BookState book = make({{100, 5}}, {{102, 3}});
  const Snapshot s = snapshot(book);
  EXPECT_EQ(s.best_bid, 100);
  EXPECT_EQ(s.best_ask, 102);
  EXPECT_EQ(s.spread, 2);
  EXPECT_DOUBLE_EQ(*s.mid, 101.0);
  EXPECT_EQ(s.bid_quantity, 5);
  EXPECT_DOUBLE_EQ(s.ask_volume, 306.0);
}

TEST(Snapshot, EmptyBookHasNoQuotes) {
  const Snapshot s = snapshot(BookState{});
  EXPECT_FALSE(s.best_bid);
  EXPECT_FALSE(s.best_ask);
  EXPECT_FALSE(s.spread);
  EXPECT_FALSE(s.mid);
  EXPECT_TRUE(s.ask_levels.empty());
}

TEST(Snapshot, LevelAggregates) {
  const BookState book = make({{100, 5}, {100, 2}, {99, 1}}, {});
  const Snapshot s = snapshot(book);
  ASSERT_EQ(s.bid_levels.size(), 2u);
  EXPECT_EQ(s.bid_levels[0].price, 100);
  EXPECT_EQ(s.bid_levels[0].quantity, 7);
  EXPECT_EQ(s.bid_levels[0].orders, 2u);
  EXPECT_DOUBLE_EQ(s.bid_levels[0].volume, 700.0);
  Qty total = 0;
  for (const auto& l : s.bid_levels) total += l.quantity;
  EXPECT_EQ(total, s.bid_quantity);
}

TEST(Snapshot, IsPure) {
  const BookState book = make({{100, 5}, {98, 2}}, {{103, 1}});
  const Snapshot a = snapshot(book), b = snapshot(book);
  EXPECT_EQ(a.best_bid, b.best_bid);
  EXPECT_EQ(a.bid_volume, b.bid_volume);
  EXPECT_EQ(a.ask_levels.size(), b.ask_levels.size());
}

TEST(Imbalance, Examples) {
  EXPECT_DOUBLE_EQ(imbalance_q(make({{100, 4}}, {{101, 4}})), 0.0);
  EXPECT_DOUBLE_EQ(imbalance_q(make({{100, 2}}, {{101, 6}})), 0.5);
  EXPECT_DOUBLE_EQ(imbalance_q(make({}, {{101, 6}})), 1.0);
  EXPECT_THROW(imbalance_q(BookState{}), Error);
  EXPECT_THROW(imbalance_v(BookState{}), Error);
  EXPECT_NEAR(imbalance_v(make({{100, 2}}, {{101, 6}})), (606.0 - 200.0) / 806.0, 1e-15);
}

TEST(Imbalance, BoundedAndAntisymmetric) {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 500; ++t) {
    BookState a, b;
    OrderId id = 0;
    for (int i = 0; i < 10; ++i) {
      const Qty q = 1 + static_cast<Qty>(gen() % 9);
      const Price d = 1 + static_cast<Price>(gen() % 5);
      const bool bid = gen() % 2;
      ++id;
      a.submit(Order::limit(id, bid ? Side::Bid : Side::Ask, bid ? 100 - d : 100 + d, q));
      b.submit(Order::limit(id, bid ? Side::Ask : Side::Bid, bid ? 100 + d : 100 - d, q));
    }
    const double iq = imbalance_q(a), iv = imbalance_v(a);
    EXPECT_LE(std::abs(iq), 1.0);
    EXPECT_LE(std::abs(iv), 1.0);
    EXPECT_NEAR(imbalance_q(b), -iq, 1e-15);
  }
}

TEST(Xlm, SingleLevel) {
  const BookState book = make({{998, 1000}}, {{1000, 1000}});
  const auto m = xlm(book, 20'000.0);
  EXPECT_DOUBLE_EQ(m.vwap_ask, 1000.0);
  EXPECT_DOUBLE_EQ(m.vwap_bid, 998.0);
  EXPECT_NEAR(m.xlm_a, 10000.0 * (1000.0 - 999.0) / 1000.0, 1e-9);
  EXPECT_NEAR(m.xlm_b, 10000.0 * (999.0 - 998.0) / 998.0, 1e-9);
  EXPECT_DOUBLE_EQ(m.xlm, m.xlm_a + m.xlm_b);
}

TEST(Xlm, WalksSecondLevel) {
  const BookState book = make({{98, 100}}, {{100, 10}, {110, 10}});
  const auto m = xlm(book, 3000.0);
  const double oracle = unit_walk_vwap({{100, 10}, {110, 10}}, 1500.0);
  EXPECT_NEAR(oracle, 1550.0 / 15.0, 1e-12);
  EXPECT_NEAR(m.vwap_ask, oracle, 1e-12);
  EXPECT_NEAR(m.xlm_a, 10000.0 * (oracle - 99.0) / oracle, 1e-9);
  EXPECT_NEAR(m.xlm_a, 419.35, 0.01);
}

TEST(Xlm, MatchesUnitWalkOnRandomBooks) {
  std::mt19937_64 gen(9);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::pair<Price, Qty>> asks;
    BookState book;
    OrderId id = 0;
    book.submit(Order::limit(++id, Side::Bid, 995, 100'000));
    Price p = 1000;
    for (int l = 0; l < 8; ++l) {
      p += 1 + static_cast<Price>(gen() % 3);
      const Qty q = 1 + static_cast<Qty>(gen() % 20);
      asks.push_back({p, q});
      book.submit(Order::limit(++id, Side::Ask, p, q));
    }
    const double target = 1000.0 + static_cast<double>(gen() % 50'000);
    Qty total_value = 0;
    for (auto [px, q] : asks) total_value += px * q;
    if (target > static_cast<double>(total_value)) {
      EXPECT_THROW(xlm(book, 2 * target), Error);
      continue;
    }
    EXPECT_NEAR(walk_vwap(book, Side::Ask, target), unit_walk_vwap(asks, target), 1e-9);
  }
}

TEST(Xlm, InsufficientDepth) {
  const BookState book = make({{98, 1}}, {{100, 1}});
  try {
    xlm(book, 1e6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientDepth);
  }
}

TEST(Xlm, SymmetricBookIsNearlySymmetric) {
  // Same tick distances either side of the mid. Inside the touch the halves
  // differ only by the VWAP in the denominator; deeper walks also differ in
  // units taken, since a value target buys more of the cheaper side.
  const BookState book = make({{999, 50}, {998, 50}}, {{1001, 50}, {1002, 50}});
  const auto m = xlm(book, 20'000.0);
  EXPECT_NEAR(m.xlm_a, 1e4 / 1001.0, 1e-9);
  EXPECT_NEAR(m.xlm_b, 1e4 / 999.0, 1e-9);
  EXPECT_NEAR(m.xlm_a, m.xlm_b, 0.005 * m.xlm_a);
  const auto deep = xlm(book, 120'000.0);
  EXPECT_GT(deep.xlm_b, deep.xlm_a);
}

TEST(Xlm, DepthAtBestNeverRaisesCost) {
  std::mt19937_64 gen(4);
  for (int t = 0; t < 300; ++t) {
    BookState book;
    OrderId id = 0;
    book.submit(Order::limit(++id, Side::Bid, 990, 100'000));
    for (int l = 0; l < 6; ++l) book.submit(Order::limit(++id, Side::Ask, 1000 + 2 * l, 1 + static_cast<Qty>(gen() % 30)));
    const double before = xlm(book, 40'000.0).xlm_a;
    book.submit(Order::limit(++id, Side::Ask, 1000, 1 + static_cast<Qty>(gen() % 30)));
    EXPECT_LE(xlm(book, 40'000.0).xlm_a, before + 1e-12);
  }
}

TEST(Xlm, FullSideVwap) {
  const BookState book = make({{98, 1}}, {{100, 10}, {110, 10}});
  EXPECT_DOUBLE_EQ(*full_side_vwap(book, Side::Ask), 105.0);
  EXPECT_FALSE(full_side_vwap(make({}, {{100, 1}}), Side::Bid));
}
