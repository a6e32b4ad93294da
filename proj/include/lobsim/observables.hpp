#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lobsim/book.hpp"

namespace lobsim {

struct LevelAggregate {
  Price price = 0;
  std::size_t orders = 0;  // N_k
  Qty quantity = 0;        // Q_k
  double volume = 0.0;     // V_k = k * Q_k, in ticks x units

  friend bool operator==(const LevelAggregate&, const LevelAggregate&) = default;
};

struct Snapshot {
  std::optional<Price> best_bid;
  std::optional<Price> best_ask;
  std::optional<Price> spread;
  std::optional<double> mid;
  std::vector<LevelAggregate> ask_levels;  // best first
  std::vector<LevelAggregate> bid_levels;  // best first
  Qty ask_quantity = 0;
  Qty bid_quantity = 0;
  double ask_volume = 0.0;
  double bid_volume = 0.0;

  const std::vector<LevelAggregate>& levels(Side s) const {
    return s == Side::Ask ? ask_levels : bid_levels;
  }

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

inline Snapshot snapshot(const BookState& book) {
  Snapshot s;
  s.best_bid = book.best_bid();
  s.best_ask = book.best_ask();
  if (s.best_bid && s.best_ask) {
    s.spread = *s.best_ask - *s.best_bid;
    s.mid = 0.5 * (static_cast<double>(*s.best_ask) + static_cast<double>(*s.best_bid));
  }
  auto collect = [](Side side, const BookState& b, std::vector<LevelAggregate>& out, Qty& qty,
                    double& vol) {
    b.for_each_level(side, [&](Price px, const BookState::Queue& q) {
      if (is_market_price(px)) return;
      LevelAggregate lvl{px, q.size(), 0, 0.0};
      for (const auto& o : q) lvl.quantity += o.qty;
      lvl.volume = static_cast<double>(px) * static_cast<double>(lvl.quantity);
      qty += lvl.quantity;
      vol += lvl.volume;
      out.push_back(lvl);
    });
  };
  collect(Side::Ask, book, s.ask_levels, s.ask_quantity, s.ask_volume);
  collect(Side::Bid, book, s.bid_levels, s.bid_quantity, s.bid_volume);
  return s;
}

// (Q^A - Q^B) / (Q^A + Q^B)
inline double imbalance_q(const BookState& book) {
  const auto qa = static_cast<double>(book.total_qty(Side::Ask));
  const auto qb = static_cast<double>(book.total_qty(Side::Bid));
  if (qa + qb <= 0.0) throw Error(Errc::EmptyBook, "quantity imbalance of an empty book");
  return (qa - qb) / (qa + qb);
}

// (V^A - V^B) / (V^A + V^B)
inline double imbalance_v(const BookState& book) {
  const Snapshot s = snapshot(book);
  if (s.ask_volume + s.bid_volume <= 0.0)
    throw Error(Errc::EmptyBook, "volume imbalance of an empty book");
  return (s.ask_volume - s.bid_volume) / (s.ask_volume + s.bid_volume);
}

struct LiquidityMeasure {
  double xlm_a = 0.0;  // basis points
  double xlm_b = 0.0;
  double xlm = 0.0;
  double round_trip_notional = 0.0;
  double vwap_ask = 0.0;  // ticks
  double vwap_bid = 0.0;
};

// Average execution price, in ticks, of a marketable order walking `side`
// best-first until its traded value reaches `target_value`. Whole units are
// taken, so the last level may overshoot the target by less than one unit.
inline double walk_vwap(const BookState& book, Side side, double target_value, double tick_value = 1.0) {
  double value = 0.0;
  double units = 0.0;
  double weighted = 0.0;
  bool done = target_value <= 0.0;
  book.for_each_level(side, [&](Price px, const BookState::Queue& q) {
    if (done || is_market_price(px)) return;
    const double unit_value = static_cast<double>(px) * tick_value;
    Qty level = 0;
    for (const auto& o : q) level += o.qty;
    const double needed = std::ceil((target_value - value) / unit_value - 1e-12);
    const double take = std::min(static_cast<double>(level), std::max(needed, 1.0));
    value += take * unit_value;
    units += take;
    weighted += take * static_cast<double>(px);
    if (value >= target_value * (1.0 - 1e-12)) done = true;
  });
  if (!done)
    throw Error(Errc::InsufficientDepth, std::string(to_string(side)) + " side holds less than " +
                                             std::to_string(target_value) + " in value");
  return weighted / units;
}

// VWAP over every resting order of a side, the literal all-levels reading of
// the liquidity formula. Diagnostic only.
inline std::optional<double> full_side_vwap(const BookState& book, Side side) {
  const Snapshot s = snapshot(book);
  const Qty q = side == Side::Ask ? s.ask_quantity : s.bid_quantity;
  if (q == 0) return std::nullopt;
  return (side == Side::Ask ? s.ask_volume : s.bid_volume) / static_cast<double>(q);
}

// Round-trip implementation shortfall: half of `round_trip_notional` is walked
// on each side. `tick_value` converts ticks to the notional's currency.
inline LiquidityMeasure xlm(const BookState& book, double round_trip_notional, double tick_value = 1.0) {
  const auto ba = book.best_ask();
  const auto bb = book.best_bid();
  if (!ba || !bb) throw Error(Errc::InsufficientDepth, "liquidity measure needs a two-sided book");
  const double mid = 0.5 * (static_cast<double>(*ba) + static_cast<double>(*bb));
  LiquidityMeasure m;
  m.round_trip_notional = round_trip_notional;
  m.vwap_ask = walk_vwap(book, Side::Ask, round_trip_notional / 2.0, tick_value);
  m.vwap_bid = walk_vwap(book, Side::Bid, round_trip_notional / 2.0, tick_value);
  m.xlm_a = 10000.0 * (m.vwap_ask - mid) / m.vwap_ask;
  m.xlm_b = 10000.0 * (mid - m.vwap_bid) / m.vwap_bid;
  m.xlm = m.xlm_a + m.xlm_b;
  return m;
}

}  // namespace lobsim
