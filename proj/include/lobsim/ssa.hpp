#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "lobsim/book.hpp"
#include "lobsim/rates.hpp"
#include "lobsim/rng.hpp"

namespace lobsim {

struct SimEvent {
  Seconds time = 0.0;
  Cell cell;
  Price price = 0;            // resolved limit price, or the market sentinel
  std::int64_t distance = 0;  // ticks from the opposite best before the event; crossing -> 0
  Qty qty = 0;                // submitted or cancelled quantity
  OrderId order_id = 0;       // new id for arrivals, cancelled order for cancellations
  std::uint32_t fills = 0;    // number of fills this event produced
  Qty discarded = 0;          // unfilled market-order residual

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

enum class Termination { HorizonReached, EmptyBook, Stalled };

constexpr std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::HorizonReached: return "horizon";
    case Termination::EmptyBook: return "empty_book";
    case Termination::Stalled: return "stalled";
  }
  return "?";
}

struct RunResult {
  std::uint64_t seed = 0;
  std::uint64_t run_index = 0;
  std::vector<SimEvent> events;
  std::vector<Fill> fills;
  std::vector<TransactionRecord> transactions;
  Termination termination = Termination::HorizonReached;
  Seconds end_time = 0.0;
  BookState final_book;
};

// tau = log(1/u1) / r0 for u1 in (0, 1].
inline Seconds waiting_time(double r0, double u1) {
  if (!(r0 > 0.0)) throw Error(Errc::Stalled, "total event rate is zero");
  if (!(u1 > 0.0 && u1 <= 1.0)) throw Error(Errc::InvalidParameter, "u1 must lie in (0, 1]");
  return std::log(1.0 / u1) / r0;
}

struct Step {
  Seconds tau = 0.0;
  SimEvent event;
};

// Resolve a drawn category and size into a concrete event. `u3` in [0, 1).
inline SimEvent resolve_event(const BookState& book, const RateTable& table, const RateModel& model,
                              const Selection& sel, double u3, Seconds time) {
  const RateBlock& block = table.blocks()[sel.block];
  SimEvent ev;
  ev.time = time;
  ev.cell = block.cell;
  const Side s = block.cell.side;
  switch (block.placement) {
    case Placement::None:
      ev.price = market_price(s);
      ev.distance = 0;
      ev.qty = block.size->sample(u3);
      break;
    case Placement::Distance: {
      const auto ref = model.reference(book, opposite(s));
      if (!ref) throw Error(Errc::EmptyBook, "no reference quote for arrival placement");
      const std::int64_t d = sel.location;
      ev.price = s == Side::Ask ? *ref + d : std::max<Price>(*ref - d, 1);
      ev.distance = std::max<std::int64_t>(distance_to_opposite(s, ev.price, *ref), 0);
      ev.qty = block.size->sample(u3, ev.distance);
      break;
    }
    case Placement::Price: {
      ev.price = sel.location;
      const auto ref = model.reference(book, opposite(s));
      ev.distance = ref ? std::max<std::int64_t>(distance_to_opposite(s, ev.price, *ref), 0) : 0;
      const Qty q = block.size->sample(u3, ev.distance);
      ev.qty = std::min(q, book.max_order_qty(s, ev.price));
      break;
    }
  }
  return ev;
}

// One Gillespie step: waiting time from u1, category from u2, size from u3.
template <class Rng>
Step ssa_step(const BookState& book, const RateTable& table, const RateModel& model, Rng& rng,
              Seconds now = 0.0) {
  const double r0 = table.total_rate();
  if (!(r0 > 0.0)) throw Error(Errc::Stalled, "total event rate is zero");
  const double u1 = rng.uniform_open0();
  const double u2 = rng.uniform_open0();
  const double u3 = rng.uniform();
  Step step;
  step.tau = waiting_time(r0, u1);
  step.event = resolve_event(book, table, model, table.select(u2), u3, now + step.tau);
  return step;
}

// Apply an event to the book. Arrivals get the next id; cancellations pick
// the order at random among those at the level that can absorb the size.
template <class Rng>
void apply_event(BookState& book, SimEvent& ev, Rng& rng, std::vector<Fill>& fills) {
  if (ev.cell.event == EventKind::Arrival) {
    ev.order_id = book.max_id() + 1;
    SubmitResult r = book.submit(Order{ev.order_id, ev.cell.side, ev.price, ev.qty, ev.time});
    ev.fills = static_cast<std::uint32_t>(r.fills.size());
    ev.discarded = r.discarded;
    fills.insert(fills.end(), r.fills.begin(), r.fills.end());
  } else {
    const Order removed = book.cancel(CancelAtLevel{ev.cell.side, ev.price, ev.qty}, rng);
    ev.order_id = removed.id;
  }
}

inline bool two_sided(const BookState& book) { return book.best_ask() && book.best_bid(); }

struct RunOptions {
  Seconds horizon = 14'400.0;
  EmptyBookPolicy empty_book = EmptyBookPolicy::Terminate;
  bool record_events = true;
};

inline RunResult run_simulation(RateModel model, BookState book, std::uint64_t master_seed,
                                std::uint64_t run_index, const RunOptions& opt) {
  if (!two_sided(book))
    throw Error(Errc::EmptyBook, "initial book must hold quotes on both sides");
  CounterRng rng = CounterRng::substream(master_seed, run_index);
  RunResult out;
  out.seed = master_seed;
  out.run_index = run_index;
  Seconds now = 0.0;
  out.termination = Termination::HorizonReached;
  for (;;) {
    if (opt.empty_book == EmptyBookPolicy::Terminate && !two_sided(book)) {
      out.termination = Termination::EmptyBook;
      break;
    }
    const RateTable table = model.build(book);
    if (!(table.total_rate() > 0.0)) {
      out.termination = Termination::Stalled;
      break;
    }
    Step step = ssa_step(book, table, model, rng, now);
    if (now + step.tau > opt.horizon) {
      now = opt.horizon;
      break;
    }
    now = step.event.time;
    const std::size_t first_fill = out.fills.size();
    apply_event(book, step.event, rng, out.fills);
    for (std::size_t i = first_fill; i < out.fills.size(); ++i)
      out.transactions.push_back({out.fills[i].price, out.fills[i].qty, out.fills[i].time});
    if (opt.record_events) out.events.push_back(step.event);
  }
  out.end_time = now;
  out.final_book = std::move(book);
  return out;
}

inline RunResult run_simulation(const ScenarioConfig& cfg, const BookState& initial_book,
                                std::uint64_t run_index = 0,
                                const std::optional<EmpiricalTables>& empirical = std::nullopt) {
  return run_simulation(RateModel(cfg, empirical), initial_book, cfg.seed, run_index,
                        RunOptions{cfg.horizon, cfg.empty_book, true});
}

// Runs `cfg.runs` independent realisations in parallel. Run i always uses
// substream (seed, first_run + i), so results do not depend on thread count.
inline std::vector<RunResult> run_scenario(const ScenarioConfig& cfg, const BookState& initial_book,
                                           const std::optional<EmpiricalTables>& empirical = std::nullopt,
                                           unsigned threads = 0, bool record_events = true,
                                           std::uint64_t first_run = 0) {
  const RateModel proto(cfg, empirical);
  const auto n = static_cast<std::size_t>(std::max(cfg.runs, 0));
  std::vector<RunResult> results(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  const RunOptions opt{cfg.horizon, cfg.empty_book, record_events};

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = run_simulation(proto, initial_book, cfg.seed, first_run + i, opt);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

struct ScenarioSummary {
  double mu_bar_e3 = 0.0;
  double sigma_bar_e3 = 0.0;
  std::size_t runs = 0;       // runs with at least two transactions
  std::size_t terminations = 0;  // runs that ended on an empty book
};

// Per run: log price changes between consecutive transactions (event time),
// their mean and population standard deviation; then averaged across runs
// and scaled by 1e3.
inline ScenarioSummary scenario_summary(std::span<const RunResult> results) {
  ScenarioSummary s;
  double mu_sum = 0.0, sd_sum = 0.0;
  for (const auto& r : results) {
    if (r.termination == Termination::EmptyBook) ++s.terminations;
    if (r.transactions.size() < 2) continue;
    double sum = 0.0, sq = 0.0;
    const auto m = static_cast<double>(r.transactions.size() - 1);
    for (std::size_t i = 1; i < r.transactions.size(); ++i) {
      const double dp = std::log(static_cast<double>(r.transactions[i].price)) -
                        std::log(static_cast<double>(r.transactions[i - 1].price));
      sum += dp;
      sq += dp * dp;
    }
    const double mean = sum / m;
    mu_sum += mean;
    sd_sum += std::sqrt(std::max(sq / m - mean * mean, 0.0));
    ++s.runs;
  }
  if (s.runs == 0) throw Error(Errc::NoTransactions, "no run has two or more transactions");
  s.mu_bar_e3 = 1e3 * mu_sum / static_cast<double>(s.runs);
  s.sigma_bar_e3 = 1e3 * sd_sum / static_cast<double>(s.runs);
  return s;
}

// Synthetic starting book: `levels` consecutive price levels per side around
// `mid`, quantity per level growing geometrically away from the touch.
struct SeedBookSpec {
  Price mid = 1'000;
  Price spread = 2;
  int levels = 20;
  int orders_per_level = 2;
  double touch_qty = 20.0;
  double depth_growth = 1.1;
};

inline BookState make_seed_book(const SeedBookSpec& spec) {
  if (spec.spread < 1 || spec.levels < 1 || spec.orders_per_level < 1 || !(spec.touch_qty >= 1.0) ||
      !(spec.depth_growth > 0.0))
    throw Error(Errc::InvalidParameter, "seed book needs spread, levels, orders >= 1 and touch qty >= 1");
  const Price best_bid = spec.mid - spec.spread / 2;
  const Price best_ask = best_bid + spec.spread;
  if (best_bid - spec.levels + 1 < 1) throw Error(Errc::InvalidParameter, "seed book reaches non-positive prices");
  BookState book;
  OrderId id = 0;
  for (int i = 0; i < spec.levels; ++i) {
    const double level_qty = spec.touch_qty * std::pow(spec.depth_growth, i);
    const Qty per_order = std::max<Qty>(1, std::llround(level_qty / spec.orders_per_level));
    for (int k = 0; k < spec.orders_per_level; ++k) {
      book.submit(Order::limit(++id, Side::Ask, best_ask + i, per_order));
      book.submit(Order::limit(++id, Side::Bid, best_bid - i, per_order));
    }
  }
  return book;
}

}  // namespace lobsim
