#pragma once

#include <array>
#include <limits>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lobsim/book.hpp"
#include "lobsim/dgx.hpp"
#include "lobsim/discrete.hpp"
#include "lobsim/powerlaw.hpp"

namespace lobsim {

enum class PriceLaw { Uni, FixDgx, DynDgx, Empirical };
enum class SizeLawKind { PowerLaw, Empirical };
enum class EmptyBookPolicy { Terminate, Continue };

constexpr std::string_view to_string(PriceLaw p) noexcept {
  switch (p) {
    case PriceLaw::Uni: return "uni";
    case PriceLaw::FixDgx: return "fix";
    case PriceLaw::DynDgx: return "dyn";
    case PriceLaw::Empirical: return "emp";
  }
  return "?";
}
constexpr std::string_view to_string(SizeLawKind s) noexcept {
  return s == SizeLawKind::PowerLaw ? "pow" : "emp";
}

// Per-side base intensities r_{0,M,j,e} in events per second.
struct BaseRates {
  double limit_arrival = 0.12;
  double limit_cancellation = 0.10;
  double marketable_limit_arrival = 0.0025;
  double market_arrival = 0.0025;
};

struct ScenarioConfig {
  PriceLaw price_law = PriceLaw::FixDgx;
  SizeLawKind size_law = SizeLawKind::PowerLaw;

  std::array<BaseRates, 2> rates{};  // indexed by Side
  // In fix/dyn the marketable-limit mass is folded into the market-order rate.
  bool fold_marketable_into_market = true;

  double power_law_lambda = 1.6;

  int uni_levels_behind = 90;
  int uni_levels_crossing = 10;

  // Fixed DGX parameters, indexed by Side.
  std::array<DgxParams, 2> dgx_arrival{DgxParams{1.726301, 0.674654}, DgxParams{1.765909, 0.711773}};
  std::array<DgxParams, 2> dgx_cancellation{DgxParams{1.619866, 0.620127}, DgxParams{1.674366, 0.650024}};

  Price max_distance = 10'000;  // ticks
  Qty max_size = kMaxOrderSize;

  // Observation time behind empirical counts; rates are count / duration.
  double empirical_duration = 1'950'180.0;

  Seconds horizon = 14'400.0;
  int runs = 200;
  std::uint64_t seed = 1;
  EmptyBookPolicy empty_book = EmptyBookPolicy::Terminate;

  const BaseRates& side_rates(Side s) const { return rates[static_cast<std::size_t>(s)]; }

  std::string name() const {
    return std::string(to_string(price_law)) + "," + std::string(to_string(size_law));
  }
};

// Parses "fix,pow", "uni-emp", "emp_emp" and the like into the two laws.
inline void set_scenario(ScenarioConfig& cfg, std::string_view name) {
  std::string s(name);
  for (char& c : s)
    if (c == '-' || c == '_' || c == '/' || c == ' ') c = ',';
  const auto comma = s.find(',');
  if (comma == std::string::npos)
    throw Error(Errc::InvalidParameter, "scenario '" + std::string(name) + "' is not of the form <price>,<size>");
  const std::string price = s.substr(0, comma), size = s.substr(comma + 1);
  if (price == "uni") cfg.price_law = PriceLaw::Uni;
  else if (price == "fix") cfg.price_law = PriceLaw::FixDgx;
  else if (price == "dyn") cfg.price_law = PriceLaw::DynDgx;
  else if (price == "emp") cfg.price_law = PriceLaw::Empirical;
  else throw Error(Errc::InvalidParameter, "unknown price law '" + price + "'");
  if (size == "pow") cfg.size_law = SizeLawKind::PowerLaw;
  else if (size == "emp") cfg.size_law = SizeLawKind::Empirical;
  else throw Error(Errc::InvalidParameter, "unknown size law '" + size + "'");
}

inline ScenarioConfig scenario(std::string_view name) {
  ScenarioConfig cfg;
  set_scenario(cfg, name);
  return cfg;
}

// Unconditional event counts per (side, order type, event, distance, size).
// Distances are ticks from the opposite best, crossing arrivals at 0.
class EmpiricalTables {
 public:
  using Joint = std::map<std::pair<std::int64_t, Qty>, double>;

  void add(const Cell& cell, std::int64_t d_ticks, Qty qty, double count = 1.0) {
    if (d_ticks < 0 || qty <= 0 || count < 0.0)
      throw Error(Errc::ParseError, "empirical entry needs d_ticks >= 0, qty > 0, count >= 0");
    cells_[cell][{d_ticks, qty}] += count;
  }

  bool has(const Cell& cell) const {
    auto it = cells_.find(cell);
    return it != cells_.end() && count(cell) > 0.0;
  }

  const Joint& joint(const Cell& cell) const {
    auto it = cells_.find(cell);
    if (it == cells_.end())
      throw Error(Errc::MissingEmpirical, "no empirical frequencies for cell " + label(cell));
    return it->second;
  }

  const std::map<Cell, Joint>& cells() const noexcept { return cells_; }

  double count(const Cell& cell) const {
    auto it = cells_.find(cell);
    if (it == cells_.end()) return 0.0;
    double total = 0.0;
    for (const auto& [key, c] : it->second) total += c;
    return total;
  }

  DiscreteDistribution distance_marginal(const Cell& cell) const {
    std::map<std::int64_t, double> m;
    for (const auto& [key, c] : joint(cell)) m[key.first] += c;
    return from_map(m);
  }

  DiscreteDistribution size_marginal(const Cell& cell) const {
    std::map<std::int64_t, double> m;
    for (const auto& [key, c] : joint(cell)) m[key.second] += c;
    return from_map(m);
  }

  // Sizes observed together with distance d.
  DiscreteDistribution size_given_distance(const Cell& cell, std::int64_t d) const {
    std::map<std::int64_t, double> m;
    const Joint& j = joint(cell);
    for (auto it = j.lower_bound({d, 0}); it != j.end() && it->first.first == d; ++it) m[it->first.second] += it->second;
    return from_map(m);
  }

  // CSV with header: side,order_type,event,d_ticks,qty,count
  static EmpiricalTables read_csv(std::istream& in) {
    EmpiricalTables t;
    std::string line;
    std::size_t lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (header) {
        header = false;
        if (line != "side,order_type,event,d_ticks,qty,count")
          throw Error(Errc::ParseError, "line 1: expected header side,order_type,event,d_ticks,qty,count");
        continue;
      }
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string item;
      while (std::getline(ss, item, ',')) f.push_back(item);
      if (f.size() != 6) throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": expected 6 fields");
      try {
        const Cell cell{parse_side(f[0]), parse_order_type(f[1]), parse_event_kind(f[2])};
        t.add(cell, std::stoll(f[3]), std::stoll(f[4]), std::stod(f[5]));
      } catch (const Error& e) {
        throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": malformed number");
      }
    }
    return t;
  }

  void write_csv(std::ostream& out) const {
    out << "side,order_type,event,d_ticks,qty,count\n";
    for (const auto& [cell, j] : cells_)
      for (const auto& [key, c] : j)
        out << to_string(cell.side) << ',' << to_string(cell.type) << ',' << to_string(cell.event) << ','
            << key.first << ',' << key.second << ',' << c << '\n';
  }

 private:
  static DiscreteDistribution from_map(const std::map<std::int64_t, double>& m) {
    std::vector<std::int64_t> v;
    std::vector<double> w;
    for (const auto& [k, c] : m) {
      v.push_back(k);
      w.push_back(c);
    }
    return {std::move(v), w};
  }

  std::map<Cell, Joint> cells_;
};

// Size law of one cell: power law, empirical marginal, or empirical
// conditional on distance (joint sampling).
class SizeLaw {
 public:
  static SizeLaw power_law(double lambda, Qty cap) {
    SizeLaw s;
    s.lambda_ = lambda;
    s.cap_ = cap;
    return s;
  }
  static SizeLaw empirical(DiscreteDistribution marginal) {
    SizeLaw s;
    s.marginal_ = std::move(marginal);
    return s;
  }
  static SizeLaw joint(const EmpiricalTables& tables, const Cell& cell) {
    SizeLaw s;
    s.marginal_ = tables.size_marginal(cell);
    std::map<std::int64_t, bool> seen;
    for (const auto& [key, c] : tables.joint(cell)) seen[key.first] = true;
    for (const auto& [d, unused] : seen) s.conditional_.emplace(d, tables.size_given_distance(cell, d));
    return s;
  }

  bool is_power_law() const noexcept { return lambda_ > 0.0; }
  bool is_joint() const noexcept { return !conditional_.empty(); }
  double lambda() const noexcept { return lambda_; }

  Qty sample(double u, std::optional<std::int64_t> distance = std::nullopt) const {
    if (is_power_law()) return powerlaw_sample(u, lambda_, cap_);
    const double v = 1.0 - u;  // (0, 1]
    if (distance && is_joint()) {
      auto it = conditional_.find(*distance);
      if (it != conditional_.end() && !it->second.empty()) return it->second.sample(v);
    }
    return marginal_.sample(v);
  }

 private:
  double lambda_ = 0.0;
  Qty cap_ = kMaxOrderSize;
  DiscreteDistribution marginal_;
  std::map<std::int64_t, DiscreteDistribution> conditional_;
};

// Where a block's events land: a distance from the opposite best quote
// (arrivals), or an absolute resting price level (cancellations).
enum class Placement { Distance, Price, None };

struct RateBlock {
  Cell cell;
  double rate = 0.0;
  Placement placement = Placement::Distance;
  std::shared_ptr<const DiscreteDistribution> where;
  std::shared_ptr<const SizeLaw> size;
};

// One event category nu with its intensity r_nu.
struct RateEntry {
  Cell cell;
  Placement placement = Placement::Distance;
  std::int64_t location = 0;
  double rate = 0.0;
};

struct Selection {
  std::size_t block = 0;
  std::int64_t location = 0;
};

// Intensities of every possible next event. Iteration order is fixed: asks
// before bids; within a side limit arrivals, market arrivals, cancellations;
// within a block ascending location.
class RateTable {
 public:
  RateTable() = default;

  void add(RateBlock block) {
    if (!(block.rate >= 0.0)) throw Error(Errc::InvalidParameter, "negative rate");
    if (block.rate == 0.0) return;
    if (block.cell.type == OrderType::Market && block.cell.event == EventKind::Cancellation)
      throw Error(Errc::InvalidParameter, "market orders cannot be cancelled");
    total_ += block.rate;
    cum_.push_back(total_);
    blocks_.push_back(std::move(block));
  }

  const std::vector<RateBlock>& blocks() const noexcept { return blocks_; }
  double total_rate() const noexcept { return total_; }

  // Set when a side has no quote; the run policy decides what to do.
  bool one_sided() const noexcept { return one_sided_; }
  void set_one_sided(bool v) noexcept { one_sided_ = v; }

  // Flat list of categories. Summing `rate` in this order gives total_rate()
  // up to rounding.
  std::vector<RateEntry> entries() const {
    std::vector<RateEntry> out;
    for (const auto& b : blocks_) {
      if (!b.where) {
        out.push_back({b.cell, b.placement, 0, b.rate});
        continue;
      }
      for (std::size_t i = 0; i < b.where->size(); ++i)
        out.push_back({b.cell, b.placement, b.where->value(i), b.rate * b.where->probability(i)});
    }
    return out;
  }

  // Cumulative inversion over all categories with u in (0, 1]. Selecting the
  // block first and then the location within it is the same inversion, taken
  // in two stages.
  Selection select(double u) const {
    if (!(total_ > 0.0)) throw Error(Errc::Stalled, "total event rate is zero");
    const double target = u * total_;
    auto it = std::lower_bound(cum_.begin(), cum_.end(), target);
    std::size_t b = it == cum_.end() ? blocks_.size() - 1 : static_cast<std::size_t>(it - cum_.begin());
    const double lo = b == 0 ? 0.0 : cum_[b - 1];
    const RateBlock& block = blocks_[b];
    Selection s{b, 0};
    if (block.where) {
      const double inner = std::clamp((target - lo) / block.rate, 0.0, 1.0);
      s.location = block.where->sample(inner > 0.0 ? inner : std::numeric_limits<double>::min());
    }
    return s;
  }

 private:
  std::vector<RateBlock> blocks_;
  std::vector<double> cum_;
  double total_ = 0.0;
  bool one_sided_ = false;
};

// Distance of a resting order from the opposite best quote.
inline std::int64_t distance_to_opposite(Side side, Price price, Price opposite_best) {
  return side == Side::Ask ? price - opposite_best : opposite_best - price;
}

// Builds rate tables for one scenario. Parts that do not depend on the book
// (fixed arrival laws, size laws, DGX tables per spread) are cached.
class RateModel {
 public:
  explicit RateModel(ScenarioConfig cfg, std::optional<EmpiricalTables> empirical = std::nullopt)
      : cfg_(std::move(cfg)), empirical_(std::move(empirical)) {
    const bool needs_tables = cfg_.price_law == PriceLaw::Empirical || cfg_.size_law == SizeLawKind::Empirical;
    if (needs_tables && !empirical_)
      throw Error(Errc::MissingEmpirical, "scenario " + cfg_.name() + " needs empirical frequency tables");
    for (Side s : {Side::Ask, Side::Bid}) {
      const auto i = static_cast<std::size_t>(s);
      limit_arrival_size_[i] = make_size_law({s, OrderType::Limit, EventKind::Arrival});
      market_size_[i] = make_size_law({s, OrderType::Market, EventKind::Arrival});
      cancel_size_[i] = make_size_law({s, OrderType::Limit, EventKind::Cancellation});
      switch (cfg_.price_law) {
        case PriceLaw::Uni: {
          std::vector<std::int64_t> d;
          std::vector<double> w;
          // d <= 0 reaches the opposite best: crossing levels 1 - n .. 0, then 1 .. behind.
          for (int k = 1 - cfg_.uni_levels_crossing; k <= cfg_.uni_levels_behind; ++k) {
            d.push_back(k);
            w.push_back(1.0);
          }
          arrival_where_[i] = std::make_shared<DiscreteDistribution>(std::move(d), w);
          break;
        }
        case PriceLaw::FixDgx:
          arrival_where_[i] = dgx_distance_table(cfg_.dgx_arrival[i]);
          cancel_dgx_[i] = std::make_shared<Dgx>(cfg_.dgx_cancellation[i], 1, cfg_.max_distance);
          break;
        case PriceLaw::DynDgx:
          break;
        case PriceLaw::Empirical: {
          const Cell arrival{s, OrderType::Limit, EventKind::Arrival};
          arrival_where_[i] = std::make_shared<DiscreteDistribution>(empirical_->distance_marginal(arrival));
          const Cell cancel{s, OrderType::Limit, EventKind::Cancellation};
          if (empirical_->has(cancel)) {
            std::map<std::int64_t, double> f;
            const auto marg = empirical_->distance_marginal(cancel);
            for (std::size_t k = 0; k < marg.size(); ++k) f[marg.value(k)] = marg.weight(k);
            cancel_freq_[i] = std::move(f);
          }
          break;
        }
      }
    }
  }

  const ScenarioConfig& config() const noexcept { return cfg_; }

  // Base rate of a cell for this scenario.
  double base_rate(const Cell& cell) const {
    const BaseRates& r = cfg_.side_rates(cell.side);
    if (cfg_.price_law == PriceLaw::Empirical) return empirical_->count(cell) / cfg_.empirical_duration;
    if (cell.type == OrderType::Market)
      return cfg_.price_law == PriceLaw::Uni || !cfg_.fold_marketable_into_market
                 ? r.market_arrival
                 : r.market_arrival + r.marketable_limit_arrival;
    if (cell.event == EventKind::Cancellation) return r.limit_cancellation;
    // In uni the limit-arrival mass is spread evenly over every level,
    // including the crossing ones (0.12 over 100 levels = 0.0012 each).
    return r.limit_arrival;
  }

  // Reference quote used when a side is empty under the Continue policy.
  std::optional<Price> reference(const BookState& book, Side s) const {
    if (auto b = book.best(s)) return b;
    return last_best_[static_cast<std::size_t>(s)];
  }

  RateTable build(const BookState& book) {
    RateTable table;
    const auto ba = book.best_ask(), bb = book.best_bid();
    if (ba) last_best_[0] = ba;
    if (bb) last_best_[1] = bb;
    table.set_one_sided(!ba || !bb);

    std::shared_ptr<const DiscreteDistribution> dyn_where;
    std::shared_ptr<const Dgx> dyn_cancel;
    if (cfg_.price_law == PriceLaw::DynDgx) {
      const auto ra = reference(book, Side::Ask), rb = reference(book, Side::Bid);
      const Price spread = ra && rb ? std::max<Price>(*ra - *rb, 1) : 1;
      auto& entry = dyn_cache_[spread];
      if (!entry.first) {
        const DgxParams p = dyn_dgx_params(static_cast<double>(spread));
        entry.first = dgx_distance_table(p);
        entry.second = std::make_shared<Dgx>(p, 1, cfg_.max_distance);
      }
      dyn_where = entry.first;
      dyn_cancel = entry.second;
    }

    for (Side s : {Side::Ask, Side::Bid}) {
      const auto i = static_cast<std::size_t>(s);
      const auto opp = reference(book, opposite(s));
      if (opp) {
        table.add({{s, OrderType::Limit, EventKind::Arrival},
                   base_rate({s, OrderType::Limit, EventKind::Arrival}),
                   Placement::Distance,
                   dyn_where ? dyn_where : arrival_where_[i],
                   limit_arrival_size_[i]});
      }
      if (!book.empty(opposite(s))) {
        table.add({{s, OrderType::Market, EventKind::Arrival},
                   base_rate({s, OrderType::Market, EventKind::Arrival}),
                   Placement::None,
                   nullptr,
                   market_size_[i]});
      }
      if (!book.empty(s)) {
        auto where = cancellation_levels(book, s, opp, dyn_cancel ? dyn_cancel.get() : cancel_dgx_[i].get(),
                                         cancel_freq_[i] ? &*cancel_freq_[i] : nullptr);
        table.add({{s, OrderType::Limit, EventKind::Cancellation},
                   base_rate({s, OrderType::Limit, EventKind::Cancellation}),
                   Placement::Price,
                   std::move(where),
                   cancel_size_[i]});
      }
    }
    return table;
  }

 private:
  std::shared_ptr<const DiscreteDistribution> dgx_distance_table(const DgxParams& p) const {
    const Dgx law(p, 1, cfg_.max_distance);
    std::vector<std::int64_t> d;
    std::vector<double> w;
    d.reserve(static_cast<std::size_t>(cfg_.max_distance));
    w.reserve(d.capacity());
    for (std::int64_t k = 1; k <= cfg_.max_distance; ++k) {
      d.push_back(k);
      w.push_back(law.pmf(k));
    }
    return std::make_shared<DiscreteDistribution>(std::move(d), w);
  }

  // Weights over occupied levels of side s. Uniform for uni; DGX mass at the
  // level's distance or its empirical frequency otherwise, renormalised
  // over the occupied levels. Falls back to uniform when every occupied level
  // carries zero weight.
  std::shared_ptr<const DiscreteDistribution> cancellation_levels(const BookState& book, Side s,
                                                                  std::optional<Price> opp, const Dgx* dgx,
                                                                  const std::map<std::int64_t, double>* freq) const {
    std::vector<std::int64_t> prices;
    std::vector<double> w;
    double total = 0.0;
    book.for_each_level(s, [&](Price px, const BookState::Queue&) {
      if (is_market_price(px)) return;
      prices.push_back(px);
      double weight = 1.0;
      if (cfg_.price_law != PriceLaw::Uni && opp) {
        const std::int64_t d = std::max<std::int64_t>(distance_to_opposite(s, px, *opp), 0);
        if (dgx) {
          weight = dgx->pmf(d);
        } else if (freq) {
          auto it = freq->find(d);
          weight = it == freq->end() ? 0.0 : it->second;
        }
      }
      total += weight;
      w.push_back(weight);
    });
    if (!(total > 0.0)) std::fill(w.begin(), w.end(), 1.0);
    return std::make_shared<DiscreteDistribution>(std::move(prices), w);
  }

  std::shared_ptr<const SizeLaw> make_size_law(const Cell& cell) const {
    if (cfg_.size_law == SizeLawKind::PowerLaw)
      return std::make_shared<SizeLaw>(SizeLaw::power_law(cfg_.power_law_lambda, cfg_.max_size));
    if (!empirical_->has(cell)) {
      // A cell without observations can still be configured with a non-zero
      // theoretical rate; its sizes then come from the limit-arrival table.
      const Cell fallback{cell.side, OrderType::Limit, EventKind::Arrival};
      if (!empirical_->has(fallback))
        throw Error(Errc::MissingEmpirical, "no empirical sizes for cell " + label(cell));
      return std::make_shared<SizeLaw>(SizeLaw::empirical(empirical_->size_marginal(fallback)));
    }
    if (cfg_.price_law == PriceLaw::Empirical && cell.type == OrderType::Limit)
      return std::make_shared<SizeLaw>(SizeLaw::joint(*empirical_, cell));
    return std::make_shared<SizeLaw>(SizeLaw::empirical(empirical_->size_marginal(cell)));
  }

  ScenarioConfig cfg_;
  std::optional<EmpiricalTables> empirical_;
  std::array<std::shared_ptr<const DiscreteDistribution>, 2> arrival_where_{};
  std::array<std::shared_ptr<const Dgx>, 2> cancel_dgx_{};
  std::array<std::optional<std::map<std::int64_t, double>>, 2> cancel_freq_{};
  std::array<std::shared_ptr<const SizeLaw>, 2> limit_arrival_size_{}, market_size_{}, cancel_size_{};
  std::map<Price, std::pair<std::shared_ptr<const DiscreteDistribution>, std::shared_ptr<const Dgx>>> dyn_cache_;
  std::array<std::optional<Price>, 2> last_best_{};
};

inline RateTable build_rate_table(const ScenarioConfig& cfg, const BookState& book,
                                  const std::optional<EmpiricalTables>& empirical = std::nullopt) {
  RateModel model(cfg, empirical);
  return model.build(book);
}

}  // namespace lobsim
