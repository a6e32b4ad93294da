#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lobsim/book.hpp"
#include "lobsim/csv.hpp"
#include "lobsim/dgx.hpp"
#include "lobsim/observables.hpp"
#include "lobsim/rates.hpp"
#include "lobsim/ssa.hpp"

namespace lobsim {

enum class RawOrderType { Limit, Market, Iceberg, Mtl, Stop };
enum class RawEventKind { Arrival, Cancel, Modify, Fill };

constexpr std::string_view to_string(RawOrderType t) noexcept {
  switch (t) {
    case RawOrderType::Limit: return "limit";
    case RawOrderType::Market: return "market";
    case RawOrderType::Iceberg: return "iceberg";
    case RawOrderType::Mtl: return "mtl";
    case RawOrderType::Stop: return "stop";
  }
  return "?";
}
constexpr std::string_view to_string(RawEventKind e) noexcept {
  switch (e) {
    case RawEventKind::Arrival: return "arrival";
    case RawEventKind::Cancel: return "cancel";
    case RawEventKind::Modify: return "modify";
    case RawEventKind::Fill: return "fill";
  }
  return "?";
}

struct RawEvent {
  double ts = 0.0;
  std::string instr;
  Side side = Side::Ask;
  RawOrderType otype = RawOrderType::Limit;
  RawEventKind event = RawEventKind::Arrival;
  std::optional<Price> px;
  Qty qty = 0;  // Modify: new remaining quantity; Cancel: quantity removed
  std::string ref;
  std::size_t line = 0;  // 1-based source line, 0 if not parsed from a file

  // Iceberg, MTL and stop orders replay as plain orders of their visible size.
  bool replays_as_market() const noexcept { return !px.has_value(); }

  friend bool operator==(const RawEvent& a, const RawEvent& b) {
    return a.ts == b.ts && a.instr == b.instr && a.side == b.side && a.otype == b.otype && a.event == b.event &&
           a.px == b.px && a.qty == b.qty && a.ref == b.ref;
  }
};

// Natural log of the integer distance: log(max(d, 0) + 1).
inline double rel_distance(std::int64_t d_ticks) {
  return std::log(static_cast<double>(std::max<std::int64_t>(d_ticks, 0)) + 1.0);
}

namespace detail {

inline RawOrderType parse_raw_otype(const std::string& s) {
  if (s == "limit") return RawOrderType::Limit;
  if (s == "market") return RawOrderType::Market;
  if (s == "iceberg") return RawOrderType::Iceberg;
  if (s == "mtl") return RawOrderType::Mtl;
  if (s == "stop") return RawOrderType::Stop;
  throw Error(Errc::ParseError, "unknown otype '" + s + "'");
}

inline RawEventKind parse_raw_event(const std::string& s) {
  if (s == "arrival") return RawEventKind::Arrival;
  if (s == "cancel") return RawEventKind::Cancel;
  if (s == "modify") return RawEventKind::Modify;
  if (s == "fill") return RawEventKind::Fill;
  throw Error(Errc::ParseError, "unknown event '" + s + "'");
}

inline RawEvent parse_event_line(const std::string& text, std::size_t line) {
  const std::string at = "line " + std::to_string(line) + ": ";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, at + "invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw Error(Errc::ParseError, at + "expected a JSON object");
  static const std::set<std::string> known{"ts", "instr", "side", "otype", "event", "px", "qty", "ref"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw Error(Errc::ParseError, at + "unknown field '" + key + "'");
  for (const char* key : {"ts", "instr", "side", "otype", "event", "qty", "ref"})
    if (!j.contains(key)) throw Error(Errc::ParseError, at + "missing field '" + key + "'");

  RawEvent ev;
  ev.line = line;
  try {
    if (!j["ts"].is_number()) throw Error(Errc::ParseError, "ts must be a number");
    ev.ts = j["ts"].get<double>();
    if (!std::isfinite(ev.ts)) throw Error(Errc::ParseError, "ts must be finite");
    if (!j["instr"].is_string() || !j["side"].is_string() || !j["otype"].is_string() || !j["event"].is_string() ||
        !j["ref"].is_string())
      throw Error(Errc::ParseError, "instr, side, otype, event and ref must be strings");
    ev.instr = j["instr"].get<std::string>();
    const auto side = j["side"].get<std::string>();
    if (side == "ask") ev.side = Side::Ask;
    else if (side == "bid") ev.side = Side::Bid;
    else throw Error(Errc::ParseError, "side must be 'ask' or 'bid', got '" + side + "'");
    ev.otype = parse_raw_otype(j["otype"].get<std::string>());
    ev.event = parse_raw_event(j["event"].get<std::string>());
    ev.ref = j["ref"].get<std::string>();
    if (ev.ref.empty()) throw Error(Errc::ParseError, "ref must not be empty");
    if (!j["qty"].is_number_integer()) throw Error(Errc::ParseError, "qty must be an integer");
    ev.qty = j["qty"].get<Qty>();
    if (j.contains("px") && !j["px"].is_null()) {
      if (!j["px"].is_number_integer()) throw Error(Errc::ParseError, "px must be an integer number of ticks");
      ev.px = j["px"].get<Price>();
      if (*ev.px <= 0) throw Error(Errc::ParseError, "px must be positive");
    }
  } catch (const Error& e) {
    throw Error(Errc::ParseError, at + std::string(e.what()).substr(std::string("ParseError: ").size()));
  }
  if (ev.event == RawEventKind::Modify ? ev.qty < 0 : ev.qty <= 0)
    throw Error(Errc::ParseError, at + "qty must be positive, got " + std::to_string(ev.qty));
  const bool priced_type = ev.otype == RawOrderType::Limit || ev.otype == RawOrderType::Iceberg;
  if (ev.event == RawEventKind::Arrival && priced_type && !ev.px)
    throw Error(Errc::ParseError, at + std::string(to_string(ev.otype)) + " arrival needs px");
  if (ev.event == RawEventKind::Arrival && ev.otype == RawOrderType::Market && ev.px)
    throw Error(Errc::ParseError, at + "market arrival must not carry px");
  if (ev.event == RawEventKind::Fill && !ev.px) throw Error(Errc::ParseError, at + "fill needs px");
  return ev;
}

}  // namespace detail

// Strict JSONL reader: one event object per line, blank lines skipped.
// Timestamps must not decrease within an instrument.
inline std::vector<RawEvent> parse_event_log(std::istream& in) {
  std::vector<RawEvent> events;
  std::unordered_map<std::string, std::pair<double, std::size_t>> last;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    RawEvent ev = detail::parse_event_line(text, line);
    auto it = last.find(ev.instr);
    if (it != last.end() && ev.ts < it->second.first)
      throw Error(Errc::ParseError, "line " + std::to_string(line) + ": timestamp " + csv::format(ev.ts) +
                                        " precedes line " + std::to_string(it->second.second) + " (" +
                                        csv::format(it->second.first) + ") for instrument " + ev.instr);
    last[ev.instr] = {ev.ts, line};
    events.push_back(std::move(ev));
  }
  return events;
}

inline std::string to_jsonl(const RawEvent& ev) {
  nlohmann::ordered_json j;
  j["ts"] = ev.ts;
  j["instr"] = ev.instr;
  j["side"] = to_string(ev.side);
  j["otype"] = to_string(ev.otype);
  j["event"] = to_string(ev.event);
  if (ev.px) j["px"] = *ev.px;
  j["qty"] = ev.qty;
  j["ref"] = ev.ref;
  return j.dump();
}

inline void write_event_log(std::ostream& out, std::span<const RawEvent> events) {
  for (const auto& ev : events) out << to_jsonl(ev) << '\n';
}

// Converts a simulated run to log events. Order refs are the engine ids;
// each arrival is followed by one fill line per execution, naming the maker.
inline std::vector<RawEvent> export_run(const RunResult& run, const std::string& instr) {
  std::vector<RawEvent> out;
  std::size_t next_fill = 0;
  for (const auto& ev : run.events) {
    RawEvent r;
    r.ts = ev.time;
    r.instr = instr;
    r.side = ev.cell.side;
    r.ref = std::to_string(ev.order_id);
    r.qty = ev.qty;
    if (ev.cell.event == EventKind::Arrival) {
      r.event = RawEventKind::Arrival;
      r.otype = ev.cell.type == OrderType::Market ? RawOrderType::Market : RawOrderType::Limit;
      if (ev.cell.type == OrderType::Limit) r.px = ev.price;
    } else {
      r.event = RawEventKind::Cancel;
      r.otype = RawOrderType::Limit;
      r.px = ev.price;
    }
    out.push_back(r);
    for (std::uint32_t k = 0; k < ev.fills; ++k) {
      const Fill& f = run.fills[next_fill++];
      RawEvent fl;
      fl.ts = f.time;
      fl.instr = instr;
      fl.side = opposite(ev.cell.side);
      fl.otype = RawOrderType::Limit;
      fl.event = RawEventKind::Fill;
      fl.px = f.price;
      fl.qty = f.qty;
      fl.ref = std::to_string(f.maker_id);
      out.push_back(fl);
    }
  }
  return out;
}

struct Divergence {
  std::size_t line = 0;
  std::string message;
};

// What the replay saw for one non-fill event.
struct ReplayEvent {
  const RawEvent* raw = nullptr;
  std::size_t index = 0;                 // position in the event list
  std::optional<Price> opposite_best;    // before the event
  std::int64_t distance = 0;             // ticks from opposite best, crossing -> 0
  bool marketable = false;               // arrival reaching the opposite best
  std::vector<Fill> fills;               // engine fills caused by this event
};

struct ReplayResult {
  std::vector<TransactionRecord> transactions;
  std::vector<Fill> fills;
  std::vector<Divergence> divergences;
  BookState final_book;
  std::size_t events = 0;
};

// Replays one instrument's events through the matching engine. `visit` is
// called after every non-fill event as visit(event, book_after). Logged fills
// are compared with engine fills; mismatches become divergences.
template <class Visit>
ReplayResult replay(std::span<const RawEvent> events, BookState book, Visit&& visit) {
  ReplayResult out;
  std::unordered_map<std::string, OrderId> ids;
  std::unordered_map<OrderId, std::string> refs;
  book.for_each_level(Side::Ask, [&](Price, const BookState::Queue& q) {
    for (const auto& o : q) ids[std::to_string(o.id)] = o.id, refs[o.id] = std::to_string(o.id);
  });
  book.for_each_level(Side::Bid, [&](Price, const BookState::Queue& q) {
    for (const auto& o : q) ids[std::to_string(o.id)] = o.id, refs[o.id] = std::to_string(o.id);
  });

  std::deque<std::pair<Fill, std::size_t>> pending;  // engine fills not yet matched by a logged fill
  auto flush_pending = [&] {
    for (const auto& [f, line] : pending)
      out.divergences.push_back({line, "engine fill of " + std::to_string(f.qty) + " @ " + std::to_string(f.price) +
                                           " against " + refs[f.maker_id] + " not in log"});
    pending.clear();
  };
  auto lookup = [&](const RawEvent& ev) {
    auto it = ids.find(ev.ref);
    if (it == ids.end() || !book.find(it->second))
      throw Error(Errc::UnknownOrder, "line " + std::to_string(ev.line) + ": unknown order ref '" + ev.ref + "'");
    return it->second;
  };
  auto enter = [&](const RawEvent& ev, Qty qty, std::optional<Price> px, ReplayEvent& rec) {
    const OrderId id = book.max_id() + 1;
    const Side s = ev.side;
    const Order o = px ? Order::limit(id, s, *px, qty, ev.ts) : Order::market(id, s, qty, ev.ts);
    if (o.is_market() && book.empty(opposite(s))) {
      out.divergences.push_back({ev.line, "market order " + ev.ref + " met an empty book and was dropped"});
      return;
    }
    SubmitResult r = book.submit(o);
    if (r.discarded > 0)
      out.divergences.push_back({ev.line, "market order " + ev.ref + " left " + std::to_string(r.discarded) +
                                              " unfilled"});
    ids[ev.ref] = id;
    refs[id] = ev.ref;
    for (const auto& f : r.fills) {
      pending.emplace_back(f, ev.line);
      out.transactions.push_back({f.price, f.qty, f.time});
    }
    out.fills.insert(out.fills.end(), r.fills.begin(), r.fills.end());
    rec.fills = std::move(r.fills);
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const RawEvent& ev = events[i];
    if (ev.event == RawEventKind::Fill) {
      if (pending.empty()) {
        out.divergences.push_back({ev.line, "logged fill against " + ev.ref + " has no engine counterpart"});
        continue;
      }
      const auto [f, src] = pending.front();
      pending.pop_front();
      if (f.price != *ev.px || f.qty != ev.qty || refs[f.maker_id] != ev.ref)
        out.divergences.push_back({ev.line, "logged fill " + std::to_string(ev.qty) + " @ " +
                                                std::to_string(*ev.px) + " against " + ev.ref + " but engine filled " +
                                                std::to_string(f.qty) + " @ " + std::to_string(f.price) +
                                                " against " + refs[f.maker_id]});
      continue;
    }
    flush_pending();
    ++out.events;

    ReplayEvent rec;
    rec.raw = &ev;
    rec.index = i;
    rec.opposite_best = book.best(opposite(ev.side));

    switch (ev.event) {
      case RawEventKind::Arrival: {
        if (ev.px && rec.opposite_best) {
          const auto d = distance_to_opposite(ev.side, *ev.px, *rec.opposite_best);
          rec.marketable = d <= 0;
          rec.distance = std::max<std::int64_t>(d, 0);
        } else if (!ev.px) {
          rec.marketable = true;
        }
        enter(ev, ev.qty, ev.px, rec);
        break;
      }
      case RawEventKind::Cancel: {
        const OrderId id = lookup(ev);
        const Order* o = book.find(id);
        if (rec.opposite_best) rec.distance = std::max<std::int64_t>(distance_to_opposite(ev.side, o->price, *rec.opposite_best), 0);
        Qty q = ev.qty;
        if (q > o->qty) {
          out.divergences.push_back({ev.line, "cancel of " + std::to_string(q) + " exceeds the " +
                                                  std::to_string(o->qty) + " resting on " + ev.ref});
          q = o->qty;
        }
        book.cancel(CancelById{id, q});
        break;
      }
      case RawEventKind::Modify: {
        const OrderId id = lookup(ev);
        const Order o = *book.find(id);
        const Price px = ev.px.value_or(o.price);
        if (rec.opposite_best) rec.distance = std::max<std::int64_t>(distance_to_opposite(ev.side, px, *rec.opposite_best), 0);
        if (px == o.price && ev.qty < o.qty) {
          if (ev.qty == 0)
            book.cancel(CancelById{id, 0});
          else
            book.cancel(CancelById{id, o.qty - ev.qty});  // size reduction keeps priority
        } else {
          book.cancel(CancelById{id, 0});
          if (ev.qty > 0) enter(ev, ev.qty, px, rec);
        }
        break;
      }
      case RawEventKind::Fill:
        break;
    }
    visit(rec, static_cast<const BookState&>(book));
  }
  flush_pending();
  out.final_book = std::move(book);
  return out;
}

inline ReplayResult replay(std::span<const RawEvent> events, BookState book) {
  return replay(events, std::move(book), [](const ReplayEvent&, const BookState&) {});
}

// Groups events by instrument, keeping file order within each.
inline std::map<std::string, std::vector<RawEvent>> split_by_instrument(std::span<const RawEvent> events) {
  std::map<std::string, std::vector<RawEvent>> out;
  for (const auto& ev : events) out[ev.instr].push_back(ev);
  return out;
}

// Correlation between d_l and log qty within one cell.
struct CorrelationRecord {
  std::size_t n = 0;
  double r = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double z = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  bool valid() const noexcept { return !std::isnan(r); }
};

// r, se = sqrt((1 - r^2) / (n - 2)), z = r / se, two-sided normal p.
inline CorrelationRecord correlation(std::span<const double> x, std::span<const double> y) {
  CorrelationRecord c;
  c.n = x.size();
  if (x.size() != y.size() || x.size() < 3) return c;
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0 && syy > 0.0)) return c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  c.se = std::sqrt(std::max(1.0 - c.r * c.r, 0.0) / (n - 2.0));
  if (c.se == 0.0) {
    c.z = std::copysign(std::numeric_limits<double>::infinity(), c.r);
    c.p = 0.0;
  } else {
    c.z = c.r / c.se;
    c.p = std::erfc(std::abs(c.z) / std::numbers::sqrt2);
  }
  return c;
}

struct RawCell {
  Side side = Side::Ask;
  RawOrderType otype = RawOrderType::Limit;
  RawEventKind event = RawEventKind::Arrival;
  auto operator<=>(const RawCell&) const = default;
};

inline std::string label(const RawCell& c) {
  return std::string(to_string(c.side)) + "_" + std::string(to_string(c.otype)) + "_" + std::string(to_string(c.event));
}

struct CellStats {
  std::size_t count = 0;
  std::map<std::int64_t, std::size_t> dl_hist;    // bin index -> count
  std::map<std::int64_t, std::size_t> logq_hist;  // bin index -> count
  std::map<std::int64_t, std::size_t> distances;  // d_ticks -> count
  std::size_t marketable = 0;
  CorrelationRecord correlation;
  std::optional<DgxFit> dgx;  // fit over distances d >= 1
  std::string dgx_error;
};

struct EmpStats {
  double bin_width = 0.25;
  std::map<RawCell, CellStats> cells;
  EmpiricalTables frequencies;  // limit / market arrivals and cancellations
  std::size_t events = 0;

  // Share of arrivals of a side and order type that reached the opposite best.
  double marketable_share(Side s, RawOrderType t) const {
    auto it = cells.find({s, t, RawEventKind::Arrival});
    if (it == cells.end() || it->second.count == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(it->second.marketable) / static_cast<double>(it->second.count);
  }
};

// Accumulates statistics while events are replayed; feed it as the replay
// visitor, then call finish().
class EmpStatsBuilder {
 public:
  explicit EmpStatsBuilder(double bin_width = 0.25, std::size_t min_fit_samples = 100)
      : min_fit_(min_fit_samples) {
    stats_.bin_width = bin_width;
  }

  void operator()(const ReplayEvent& rec, const BookState&) {
    const RawEvent& ev = *rec.raw;
    if (ev.event == RawEventKind::Fill) return;
    ++stats_.events;
    const RawCell key{ev.side, ev.otype, ev.event};
    CellStats& c = stats_.cells[key];
    ++c.count;
    if (rec.marketable) ++c.marketable;
    const double dl = rel_distance(rec.distance);
    c.dl_hist[static_cast<std::int64_t>(std::floor(dl / stats_.bin_width))]++;
    c.distances[rec.distance]++;
    if (ev.qty > 0) {
      const double lq = std::log(static_cast<double>(ev.qty));
      c.logq_hist[static_cast<std::int64_t>(std::floor(lq / stats_.bin_width))]++;
      auto& xy = pairs_[key];
      xy.first.push_back(dl);
      xy.second.push_back(lq);
    }
    if (ev.qty > 0 && (ev.event == RawEventKind::Arrival || ev.event == RawEventKind::Cancel)) {
      const bool market = !ev.px.has_value() && ev.event == RawEventKind::Arrival;
      const Cell cell{ev.side, market ? OrderType::Market : OrderType::Limit,
                      ev.event == RawEventKind::Arrival ? EventKind::Arrival : EventKind::Cancellation};
      stats_.frequencies.add(cell, rec.distance, ev.qty);
    }
  }

  EmpStats finish() {
    for (auto& [key, c] : stats_.cells) {
      auto it = pairs_.find(key);
      if (it != pairs_.end()) c.correlation = correlation(it->second.first, it->second.second);
      const bool priced = key.otype != RawOrderType::Market && key.otype != RawOrderType::Mtl;
      if (!priced || key.event == RawEventKind::Fill) continue;
      // DGX describes non-marketable placements, k = d >= 1.
      std::vector<std::int64_t> ks;
      for (const auto& [d, n] : c.distances)
        if (d >= 1) ks.insert(ks.end(), n, d);
      try {
        c.dgx = dgx_fit_mle(ks, min_fit_);
      } catch (const Error& e) {
        c.dgx_error = e.what();
      }
    }
    return std::move(stats_);
  }

 private:
  EmpStats stats_;
  std::size_t min_fit_;
  std::map<RawCell, std::pair<std::vector<double>, std::vector<double>>> pairs_;
};

inline EmpStats empirical_stats(std::span<const RawEvent> events, const BookState& initial_book,
                                double bin_width = 0.25) {
  EmpStatsBuilder builder(bin_width);
  for (const auto& [instr, evs] : split_by_instrument(events)) replay(evs, initial_book, std::ref(builder));
  return builder.finish();
}

}  // namespace lobsim
