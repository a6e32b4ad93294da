#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "lobsim/error.hpp"

namespace lobsim {

using Price = std::int64_t;  // integer ticks
using Qty = std::int64_t;    // units
using OrderId = std::uint64_t;
using Seconds = double;

enum class Side : std::uint8_t { Ask, Bid };

constexpr Side opposite(Side s) noexcept { return s == Side::Ask ? Side::Bid : Side::Ask; }

enum class OrderType : std::uint8_t { Limit, Market };
enum class EventKind : std::uint8_t { Arrival, Cancellation };

// Sentinel limits carried by market orders: an ask market order accepts any
// bid, a bid market order accepts any ask.
inline constexpr Price kMarketAskPrice = std::numeric_limits<Price>::min();
inline constexpr Price kMarketBidPrice = std::numeric_limits<Price>::max();

constexpr Price market_price(Side s) noexcept {
  return s == Side::Ask ? kMarketAskPrice : kMarketBidPrice;
}

constexpr bool is_market_price(Price p) noexcept {
  return p == kMarketAskPrice || p == kMarketBidPrice;
}

constexpr std::string_view to_string(Side s) noexcept { return s == Side::Ask ? "ask" : "bid"; }
constexpr std::string_view to_string(OrderType t) noexcept {
  return t == OrderType::Limit ? "limit" : "market";
}
constexpr std::string_view to_string(EventKind e) noexcept {
  return e == EventKind::Arrival ? "arrival" : "cancellation";
}

// Short labels used in column names: A/B, L/M, a/c.
constexpr char short_label(Side s) noexcept { return s == Side::Ask ? 'A' : 'B'; }
constexpr char short_label(OrderType t) noexcept { return t == OrderType::Limit ? 'L' : 'M'; }
constexpr char short_label(EventKind e) noexcept { return e == EventKind::Arrival ? 'a' : 'c'; }

inline Side parse_side(std::string_view s) {
  if (s == "ask" || s == "A" || s == "a" || s == "sell" || s == "S") return Side::Ask;
  if (s == "bid" || s == "B" || s == "b" || s == "buy") return Side::Bid;
  throw Error(Errc::ParseError, "unknown side '" + std::string(s) + "'");
}

inline OrderType parse_order_type(std::string_view s) {
  if (s == "limit" || s == "L") return OrderType::Limit;
  if (s == "market" || s == "M") return OrderType::Market;
  throw Error(Errc::ParseError, "unknown order type '" + std::string(s) + "'");
}

inline EventKind parse_event_kind(std::string_view s) {
  if (s == "arrival" || s == "a") return EventKind::Arrival;
  if (s == "cancellation" || s == "cancel" || s == "c") return EventKind::Cancellation;
  throw Error(Errc::ParseError, "unknown event kind '" + std::string(s) + "'");
}

// One (side, order type, event) combination of the rate decomposition.
struct Cell {
  Side side = Side::Ask;
  OrderType type = OrderType::Limit;
  EventKind event = EventKind::Arrival;

  friend constexpr bool operator==(const Cell&, const Cell&) = default;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

inline std::string label(const Cell& c) {
  return {short_label(c.side), '_', short_label(c.type), '_', short_label(c.event)};
}

}  // namespace lobsim
