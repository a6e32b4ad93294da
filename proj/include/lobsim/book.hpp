#pragma once

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lobsim/error.hpp"
#include "lobsim/rng.hpp"
#include "lobsim/types.hpp"

namespace lobsim {

struct Order {
  OrderId id = 0;
  Side side = Side::Ask;
  Price price = 0;
  Qty qty = 0;
  Seconds entry_time = 0.0;

  bool is_market() const noexcept { return is_market_price(price); }

  static Order limit(OrderId id, Side side, Price price, Qty qty, Seconds t = 0.0) {
    return {id, side, price, qty, t};
  }
  static Order market(OrderId id, Side side, Qty qty, Seconds t = 0.0) {
    return {id, side, market_price(side), qty, t};
  }

  friend bool operator==(const Order&, const Order&) = default;
};

struct TransactionRecord {
  Price price = 0;
  Qty qty = 0;
  Seconds time = 0.0;

  friend bool operator==(const TransactionRecord&, const TransactionRecord&) = default;
};

struct Fill {
  Price price = 0;
  Qty qty = 0;
  Seconds time = 0.0;
  OrderId maker_id = 0;
  OrderId taker_id = 0;

  friend bool operator==(const Fill&, const Fill&) = default;
};

enum class TradingMode { Continuous, AuctionCall };

struct SubmitResult {
  std::vector<Fill> fills;
  // Market-order quantity left over after the opposite side ran dry. It is
  // dropped, never rested.
  Qty discarded = 0;

  Qty filled() const noexcept {
    Qty total = 0;
    for (const auto& f : fills) total += f.qty;
    return total;
  }
};

struct AuctionResult {
  std::optional<Price> clearing_price;
  Qty executed_qty = 0;
  std::vector<Fill> fills;
};

struct CancelById {
  OrderId id = 0;
  Qty qty = 0;  // 0 cancels the whole remaining quantity
};

struct CancelAtLevel {
  Side side = Side::Ask;
  Price price = 0;
  Qty qty = 0;
};

// Price-time ordered limit order book.
//
// Asks are kept in ascending and bids in descending price order, each level a
// FIFO queue in ascending id order. Market orders only rest during an auction
// call phase, where their sentinel prices sort them ahead of every limit.
class BookState {
 public:
  using Queue = std::deque<Order>;
  using AskLadder = std::map<Price, Queue, std::less<>>;
  using BidLadder = std::map<Price, Queue, std::greater<>>;

  BookState() = default;

  const AskLadder& asks() const noexcept { return asks_; }
  const BidLadder& bids() const noexcept { return bids_; }
  const std::optional<TransactionRecord>& last_transaction() const noexcept { return last_; }
  OrderId max_id() const noexcept { return max_id_; }

  bool empty() const noexcept { return asks_.empty() && bids_.empty(); }
  bool empty(Side s) const noexcept { return s == Side::Ask ? asks_.empty() : bids_.empty(); }
  std::size_t order_count() const noexcept { return index_.size(); }
  std::size_t level_count(Side s) const noexcept { return s == Side::Ask ? asks_.size() : bids_.size(); }

  std::optional<Price> best_ask() const {
    for (const auto& [px, q] : asks_)
      if (!is_market_price(px)) return px;
    return std::nullopt;
  }
  std::optional<Price> best_bid() const {
    for (const auto& [px, q] : bids_)
      if (!is_market_price(px)) return px;
    return std::nullopt;
  }
  std::optional<Price> best(Side s) const { return s == Side::Ask ? best_ask() : best_bid(); }

  Qty total_qty(Side s) const {
    Qty total = 0;
    for_each_level(s, [&](Price, const Queue& q) {
      for (const auto& o : q) total += o.qty;
    });
    return total;
  }

  Qty level_qty(Side s, Price px) const {
    const Queue* q = find_level(s, px);
    Qty total = 0;
    if (q)
      for (const auto& o : *q) total += o.qty;
    return total;
  }

  Qty max_order_qty(Side s, Price px) const {
    const Queue* q = find_level(s, px);
    Qty m = 0;
    if (q)
      for (const auto& o : *q) m = std::max(m, o.qty);
    return m;
  }

  const Order* find(OrderId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return nullptr;
    const Queue* q = find_level(it->second.first, it->second.second);
    for (const auto& o : *q)
      if (o.id == id) return &o;
    return nullptr;
  }

  // Visit levels best-first: fn(price, queue).
  template <class Fn>
  void for_each_level(Side s, Fn&& fn) const {
    if (s == Side::Ask)
      for (const auto& [px, q] : asks_) fn(px, q);
    else
      for (const auto& [px, q] : bids_) fn(px, q);
  }

  // Matches against the opposite side in continuous mode; only enqueues during an auction call.
  SubmitResult submit(const Order& order, TradingMode mode = TradingMode::Continuous) {
    if (order.qty <= 0)
      throw Error(Errc::InvalidQuantity, "order " + std::to_string(order.id) + " has qty " +
                                             std::to_string(order.qty));
    if (order.id <= max_id_ || index_.contains(order.id))
      throw Error(Errc::DuplicateId, "order id " + std::to_string(order.id) +
                                         " is not greater than every id seen (" +
                                         std::to_string(max_id_) + ")");
    if (mode == TradingMode::AuctionCall) {
      max_id_ = order.id;
      rest(order);
      return {};
    }
    if (order.is_market() && empty(opposite(order.side)))
      throw Error(Errc::EmptyOppositeSide, "market order " + std::to_string(order.id) +
                                               " has no counterparty");
    max_id_ = order.id;

    SubmitResult result;
    Qty remaining = order.qty;
    if (order.side == Side::Bid)
      remaining = match_against(asks_, order, remaining, result.fills,
                                [&](Price ask) { return order.price >= ask; });
    else
      remaining = match_against(bids_, order, remaining, result.fills,
                                [&](Price bid) { return order.price <= bid; });

    if (remaining > 0) {
      if (order.is_market()) {
        result.discarded = remaining;
      } else {
        Order residual = order;
        residual.qty = remaining;
        rest(residual);
      }
    }
    return result;
  }

  // Cancel by id. Partial when 0 < qty < resting qty.
  Order cancel(const CancelById& c) {
    auto it = index_.find(c.id);
    if (it == index_.end())
      throw Error(Errc::UnknownOrder, "no resting order with id " + std::to_string(c.id));
    const auto [side, px] = it->second;
    Queue& q = *find_level_mut(side, px);
    auto pos = std::find_if(q.begin(), q.end(), [&](const Order& o) { return o.id == c.id; });
    return reduce(side, px, q, pos, c.qty == 0 ? pos->qty : c.qty);
  }

  // Cancel `qty` from one order picked uniformly among the orders resting at
  // (side, price) with at least `qty` units.
  template <class Rng>
  Order cancel(const CancelAtLevel& c, Rng& rng) {
    if (c.qty <= 0)
      throw Error(Errc::InvalidQuantity, "cancel qty must be positive");
    Queue* q = find_level_mut(c.side, c.price);
    std::vector<std::size_t> candidates;
    if (q)
      for (std::size_t i = 0; i < q->size(); ++i)
        if ((*q)[i].qty >= c.qty) candidates.push_back(i);
    if (candidates.empty())
      throw Error(Errc::CancelOnEmpty, std::string(to_string(c.side)) + " level " +
                                           std::to_string(c.price) + " holds no order with qty >= " +
                                           std::to_string(c.qty));
    const std::size_t pick = candidates[uniform_index(rng, candidates.size())];
    return reduce(c.side, c.price, *q, q->begin() + static_cast<std::ptrdiff_t>(pick), c.qty);
  }

  // Highest-executable-volume price. Ties go to the price closest to
  // `reference`, then to the lower price.
  std::optional<Price> indicative_price(std::optional<Price> reference = std::nullopt) const {
    return clearing_price(reference ? reference : last_price()).first;
  }

  // Uncross the book at a single price and record one transaction.
  AuctionResult auction_clear(Price reference, Seconds time) {
    AuctionResult result;
    const auto [price, volume] = clearing_price(reference);
    if (!price) return result;

    Qty remaining = volume;
    while (remaining > 0) {
      auto bid_level = bids_.begin();
      auto ask_level = asks_.begin();
      Order& bid = bid_level->second.front();
      Order& ask = ask_level->second.front();
      const Qty q = std::min({remaining, bid.qty, ask.qty});
      // The later entry is the aggressor.
      const bool bid_newer = bid.id > ask.id;
      result.fills.push_back({*price, q, time, bid_newer ? ask.id : bid.id, bid_newer ? bid.id : ask.id});
      remaining -= q;
      bid.qty -= q;
      ask.qty -= q;
      if (bid.qty == 0) pop_front(Side::Bid, bid_level->first);
      if (ask.qty == 0) pop_front(Side::Ask, ask_level->first);
    }
    result.clearing_price = price;
    result.executed_qty = volume;
    last_ = TransactionRecord{*price, volume, time};
    return result;
  }

  // Ladders, ids and the last transaction; the id high-water mark is not part
  // of the observable state.
  friend bool operator==(const BookState& a, const BookState& b) {
    return a.asks_ == b.asks_ && a.bids_ == b.bids_ && a.last_ == b.last_;
  }

 private:
  std::optional<Price> last_price() const {
    if (last_) return last_->price;
    return std::nullopt;
  }

  std::pair<std::optional<Price>, Qty> clearing_price(std::optional<Price> reference) const {
    std::vector<Price> candidates;
    for (const auto& [px, q] : asks_)
      if (!is_market_price(px)) candidates.push_back(px);
    for (const auto& [px, q] : bids_)
      if (!is_market_price(px)) candidates.push_back(px);
    if (candidates.empty()) {
      if (!reference) return {std::nullopt, 0};
      candidates.push_back(*reference);
    } else if (reference) {
      const auto [lo, hi] = std::minmax_element(candidates.begin(), candidates.end());
      candidates.push_back(std::clamp(*reference, *lo, *hi));
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::optional<Price> best;
    Qty best_volume = 0;
    for (Price p : candidates) {
      Qty demand = 0, supply = 0;
      for (const auto& [px, q] : bids_)
        if (px >= p)
          for (const auto& o : q) demand += o.qty;
      for (const auto& [px, q] : asks_)
        if (px <= p)
          for (const auto& o : q) supply += o.qty;
      const Qty volume = std::min(demand, supply);
      if (volume <= 0) continue;
      if (volume > best_volume) {
        best = p;
        best_volume = volume;
      } else if (volume == best_volume && reference &&
                 std::llabs(p - *reference) < std::llabs(*best - *reference)) {
        best = p;
      }
    }
    return {best, best_volume};
  }

  template <class Ladder, class Crosses>
  Qty match_against(Ladder& ladder, const Order& taker, Qty remaining, std::vector<Fill>& fills,
                    Crosses crosses) {
    while (remaining > 0 && !ladder.empty()) {
      auto level = ladder.begin();
      if (!crosses(level->first)) break;
      Queue& q = level->second;
      while (remaining > 0 && !q.empty()) {
        Order& maker = q.front();
        const Qty traded = std::min(remaining, maker.qty);
        fills.push_back({maker.price, traded, taker.entry_time, maker.id, taker.id});
        last_ = TransactionRecord{maker.price, traded, taker.entry_time};
        remaining -= traded;
        maker.qty -= traded;
        if (maker.qty == 0) {
          index_.erase(maker.id);
          q.pop_front();
        }
      }
      if (q.empty()) ladder.erase(level);
    }
    return remaining;
  }

  void rest(const Order& o) {
    if (o.side == Side::Ask)
      asks_[o.price].push_back(o);
    else
      bids_[o.price].push_back(o);
    index_.emplace(o.id, std::make_pair(o.side, o.price));
  }

  Order reduce(Side side, Price px, Queue& q, Queue::iterator pos, Qty qty) {
    if (qty <= 0 || qty > pos->qty)
      throw Error(Errc::InvalidQuantity, "cannot cancel " + std::to_string(qty) + " of order " +
                                             std::to_string(pos->id) + " holding " +
                                             std::to_string(pos->qty));
    Order removed = *pos;
    removed.qty = qty;
    pos->qty -= qty;
    if (pos->qty == 0) {
      index_.erase(pos->id);
      q.erase(pos);
      if (q.empty()) erase_level(side, px);
    }
    return removed;
  }

  void pop_front(Side side, Price px) {
    Queue& q = *find_level_mut(side, px);
    index_.erase(q.front().id);
    q.pop_front();
    if (q.empty()) erase_level(side, px);
  }

  void erase_level(Side side, Price px) {
    if (side == Side::Ask)
      asks_.erase(px);
    else
      bids_.erase(px);
  }

  const Queue* find_level(Side side, Price px) const {
    if (side == Side::Ask) {
      auto it = asks_.find(px);
      return it == asks_.end() ? nullptr : &it->second;
    }
    auto it = bids_.find(px);
    return it == bids_.end() ? nullptr : &it->second;
  }

  Queue* find_level_mut(Side side, Price px) { return const_cast<Queue*>(find_level(side, px)); }

  AskLadder asks_;
  BidLadder bids_;
  std::unordered_map<OrderId, std::pair<Side, Price>> index_;
  std::optional<TransactionRecord> last_;
  OrderId max_id_ = 0;
};

// Free-function surface over BookState.
inline SubmitResult submit_order(BookState& book, const Order& order,
                                 TradingMode mode = TradingMode::Continuous) {
  return book.submit(order, mode);
}

inline Order cancel_order(BookState& book, const CancelById& c) { return book.cancel(c); }

template <class Rng>
Order cancel_order(BookState& book, const CancelAtLevel& c, Rng& rng) {
  return book.cancel(c, rng);
}

inline AuctionResult auction_clear(BookState& book, Price reference, Seconds time) {
  return book.auction_clear(reference, time);
}

inline std::optional<Price> indicative_price(const BookState& book,
                                             std::optional<Price> reference = std::nullopt) {
  return book.indicative_price(reference);
}

}  // namespace lobsim
