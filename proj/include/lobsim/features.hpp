#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lobsim/csv.hpp"
#include "lobsim/ingest.hpp"
#include "lobsim/observables.hpp"

namespace lobsim {

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  double get(int order) const {
    switch (order) {
      case 1: return mean;
      case 2: return m2;
      case 3: return m3;
      default: return m4;
    }
  }
};

// Mean and population central moments of orders 2..4.
inline std::optional<Moments> moments(std::span<const double> x) {
  if (x.empty()) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) {
    const double d = v - m.mean, d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

// One replayed event with the book state right after it.
struct MarketObservation {
  Seconds time = 0.0;
  std::optional<Cell> cell;  // none for event types that feed no cell
  std::int64_t distance = 0;
  Qty qty = 0;
  std::optional<Price> best_bid;
  std::optional<Price> best_ask;
  std::optional<double> xlm_bp;
};

// Replays a single-instrument log and records an observation after every
// event. `xlm_notional` <= 0 skips the liquidity measure.
inline std::vector<MarketObservation> observe(std::span<const RawEvent> events, const BookState& initial_book,
                                              double xlm_notional = 0.0, double tick_value = 1.0) {
  std::vector<MarketObservation> out;
  replay(events, initial_book, [&](const ReplayEvent& rec, const BookState& book) {
    const RawEvent& ev = *rec.raw;
    MarketObservation o;
    o.time = ev.ts;
    if (ev.event == RawEventKind::Arrival || ev.event == RawEventKind::Cancel) {
      const bool market = ev.event == RawEventKind::Arrival && !ev.px;
      o.cell = Cell{ev.side, market ? OrderType::Market : OrderType::Limit,
                    ev.event == RawEventKind::Arrival ? EventKind::Arrival : EventKind::Cancellation};
    }
    o.distance = rec.distance;
    o.qty = ev.qty;
    o.best_bid = book.best_bid();
    o.best_ask = book.best_ask();
    if (xlm_notional > 0.0) {
      try {
        o.xlm_bp = xlm(book, xlm_notional, tick_value).xlm;
      } catch (const Error&) {
      }
    }
    out.push_back(o);
  });
  return out;
}

struct CellFeatures {
  std::size_t count = 0;
  double rate = 0.0;  // events per second
  std::optional<Moments> dl;
  std::optional<Moments> q;
};

struct IntervalRecord {
  std::size_t t = 0;
  Seconds start = 0.0;
  Seconds end = 0.0;
  bool short_interval = false;
  std::optional<double> dpb;  // log ask_t - log bid_{t-1}
  std::optional<double> dps;  // log bid_t - log ask_{t-1}
  std::optional<double> xlm;  // basis points, last observation in the interval
  std::optional<Moments> spread;
  std::map<Cell, CellFeatures> cells;
};

inline std::vector<Cell> default_cells() {
  std::vector<Cell> cells;
  for (Side s : {Side::Ask, Side::Bid}) {
    cells.push_back({s, OrderType::Limit, EventKind::Arrival});
    cells.push_back({s, OrderType::Limit, EventKind::Cancellation});
    cells.push_back({s, OrderType::Market, EventKind::Arrival});
  }
  return cells;
}

inline constexpr std::array<int, 11> kIntervalMinutes{1, 2, 5, 10, 15, 20, 30, 45, 60, 120, 240};

// Splits observations into consecutive intervals of `dt_minutes` starting at
// `origin`. The last interval ends at `end_time` (default: last observation)
// and is flagged when shorter than dt.
inline std::vector<IntervalRecord> sample_intervals(std::span<const MarketObservation> obs, double dt_minutes,
                                                    const std::vector<Cell>& cells = default_cells(),
                                                    Seconds origin = 0.0,
                                                    std::optional<Seconds> end_time = std::nullopt) {
  if (!(dt_minutes > 0.0)) throw Error(Errc::InvalidParameter, "interval length must be positive");
  std::vector<IntervalRecord> out;
  if (obs.empty()) return out;
  const double dt = dt_minutes * 60.0;
  const Seconds end = end_time.value_or(obs.back().time);
  const auto count = static_cast<std::size_t>(std::max(1.0, std::ceil((end - origin) / dt - 1e-12)));

  std::optional<Price> bid, ask;
  std::optional<Price> prev_bid, prev_ask;
  std::size_t i = 0;
  while (i < obs.size() && obs[i].time < origin) {
    bid = obs[i].best_bid;
    ask = obs[i].best_ask;
    ++i;
  }
  for (std::size_t t = 0; t < count; ++t) {
    IntervalRecord r;
    r.t = t;
    r.start = origin + static_cast<double>(t) * dt;
    r.end = std::min(r.start + dt, std::max(end, r.start));
    r.short_interval = r.end - r.start < dt - 1e-9;
    const bool last = t + 1 == count;
    std::vector<double> spreads;
    std::map<Cell, std::pair<std::vector<double>, std::vector<double>>> per_cell;
    for (const Cell& c : cells) per_cell[c];
    while (i < obs.size() && (obs[i].time < r.start + dt || last)) {
      const auto& o = obs[i];
      bid = o.best_bid;
      ask = o.best_ask;
      if (bid && ask) spreads.push_back(static_cast<double>(*ask - *bid));
      if (o.xlm_bp) r.xlm = o.xlm_bp;
      if (o.cell) {
        auto it = per_cell.find(*o.cell);
        if (it != per_cell.end()) {
          it->second.first.push_back(rel_distance(o.distance));
          it->second.second.push_back(static_cast<double>(o.qty));
        }
      }
      ++i;
    }
    if (spreads.empty() && bid && ask) spreads.push_back(static_cast<double>(*ask - *bid));
    r.spread = moments(spreads);
    const double len = r.end - r.start;
    for (const Cell& c : cells) {
      const auto& [dls, qs] = per_cell[c];
      CellFeatures f;
      f.count = dls.size();
      f.rate = len > 0.0 ? static_cast<double>(f.count) / len : 0.0;
      f.dl = moments(dls);
      f.q = moments(qs);
      r.cells[c] = f;
    }
    if (ask && prev_bid) r.dpb = std::log(static_cast<double>(*ask)) - std::log(static_cast<double>(*prev_bid));
    if (bid && prev_ask) r.dps = std::log(static_cast<double>(*bid)) - std::log(static_cast<double>(*prev_ask));
    prev_bid = bid;
    prev_ask = ask;
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {
inline const char* moment_name(int order) {
  static constexpr const char* names[] = {"", "mean", "m2", "m3", "m4"};
  return names[order];
}
}  // namespace detail

inline std::vector<Cell> record_cells(std::span<const IntervalRecord> records) {
  std::vector<Cell> cells;
  if (!records.empty())
    for (const auto& [c, f] : records.front().cells) cells.push_back(c);
  return cells;
}

inline void write_intervals_csv(std::ostream& out, std::span<const IntervalRecord> records) {
  const auto cells = record_cells(records);
  out << "target_dpb,target_dps,target_xlm,t,start,end,short";
  for (int v = 1; v <= 4; ++v) out << ",spread_" << detail::moment_name(v);
  for (const Cell& c : cells) {
    out << ",n_" << label(c) << ",r_" << label(c);
    for (int v = 1; v <= 4; ++v) out << ",dl_" << detail::moment_name(v) << '_' << label(c);
    for (int v = 1; v <= 4; ++v) out << ",q_" << detail::moment_name(v) << '_' << label(c);
  }
  out << '\n';
  auto moments_csv = [&](const std::optional<Moments>& m) {
    for (int v = 1; v <= 4; ++v) out << ',' << (m ? csv::format(m->get(v)) : std::string());
  };
  for (const auto& r : records) {
    out << csv::format(r.dpb) << ',' << csv::format(r.dps) << ',' << csv::format(r.xlm) << ',' << r.t << ','
        << csv::format(r.start) << ',' << csv::format(r.end) << ',' << (r.short_interval ? 1 : 0);
    moments_csv(r.spread);
    for (const Cell& c : cells) {
      const auto it = r.cells.find(c);
      const CellFeatures f = it == r.cells.end() ? CellFeatures{} : it->second;
      out << ',' << f.count << ',' << csv::format(f.rate);
      moments_csv(f.dl);
      moments_csv(f.q);
    }
    out << '\n';
  }
}

inline Cell parse_cell_label(const std::string& s) {
  // "A_L_a"
  if (s.size() != 5 || s[1] != '_' || s[3] != '_') throw Error(Errc::ParseError, "bad cell label '" + s + "'");
  Cell c;
  c.side = s[0] == 'A' ? Side::Ask : s[0] == 'B' ? Side::Bid : throw Error(Errc::ParseError, "bad side in " + s);
  c.type = s[2] == 'L' ? OrderType::Limit : s[2] == 'M' ? OrderType::Market : throw Error(Errc::ParseError, "bad type in " + s);
  c.event = s[4] == 'a' ? EventKind::Arrival : s[4] == 'c' ? EventKind::Cancellation : throw Error(Errc::ParseError, "bad event in " + s);
  return c;
}

inline std::vector<IntervalRecord> read_intervals_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error(Errc::ParseError, "empty intervals file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto cols = csv::split(header);
  const std::vector<std::string> fixed{"target_dpb", "target_dps", "target_xlm", "t", "start", "end", "short",
                                       "spread_mean", "spread_m2", "spread_m3", "spread_m4"};
  if (cols.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), cols.begin()) ||
      (cols.size() - fixed.size()) % 10 != 0)
    throw Error(Errc::ParseError, "line 1: unexpected intervals header");
  std::vector<Cell> cells;
  for (std::size_t k = fixed.size(); k < cols.size(); k += 10) {
    if (cols[k].rfind("n_", 0) != 0) throw Error(Errc::ParseError, "line 1: expected n_<cell> column");
    cells.push_back(parse_cell_label(cols[k].substr(2)));
  }

  std::vector<IntervalRecord> records;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != cols.size())
      throw Error(Errc::ParseError, csv::where(lineno) + "expected " + std::to_string(cols.size()) + " fields");
    IntervalRecord r;
    r.dpb = csv::to_optional(f[0], lineno);
    r.dps = csv::to_optional(f[1], lineno);
    r.xlm = csv::to_optional(f[2], lineno);
    r.t = static_cast<std::size_t>(csv::to_int(f[3], lineno));
    r.start = csv::to_double(f[4], lineno);
    r.end = csv::to_double(f[5], lineno);
    r.short_interval = f[6] == "1";
    auto read_moments = [&](std::size_t at) -> std::optional<Moments> {
      if (f[at].empty()) return std::nullopt;
      return Moments{csv::to_double(f[at], lineno), csv::to_double(f[at + 1], lineno),
                     csv::to_double(f[at + 2], lineno), csv::to_double(f[at + 3], lineno)};
    };
    r.spread = read_moments(7);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::size_t at = fixed.size() + 10 * c;
      CellFeatures cf;
      cf.count = static_cast<std::size_t>(csv::to_int(f[at], lineno));
      cf.rate = csv::to_double(f[at + 1], lineno);
      cf.dl = read_moments(at + 2);
      cf.q = read_moments(at + 6);
      r.cells[cells[c]] = cf;
    }
    records.push_back(std::move(r));
  }
  return records;
}

enum class Variant { A1, A2, A3, A4 };
enum class Timing { Contemporaneous, Lagged };
enum class Target { Dpb, Dps, Xlm };

inline Variant parse_variant(std::string_view s) {
  if (s == "A1") return Variant::A1;
  if (s == "A2") return Variant::A2;
  if (s == "A3") return Variant::A3;
  if (s == "A4") return Variant::A4;
  throw Error(Errc::InvalidParameter, "unknown model '" + std::string(s) + "' (expected A1..A4)");
}
inline Timing parse_timing(std::string_view s) {
  if (s == "contemp" || s == "contemporaneous") return Timing::Contemporaneous;
  if (s == "lagged") return Timing::Lagged;
  throw Error(Errc::InvalidParameter, "unknown timing '" + std::string(s) + "' (expected contemp or lagged)");
}
inline Target parse_target(std::string_view s) {
  if (s == "dpb") return Target::Dpb;
  if (s == "dps") return Target::Dps;
  if (s == "xlm") return Target::Xlm;
  throw Error(Errc::InvalidParameter, "unknown target '" + std::string(s) + "' (expected dpb, dps or xlm)");
}
constexpr std::string_view to_string(Variant v) noexcept {
  constexpr std::string_view n[] = {"A1", "A2", "A3", "A4"};
  return n[static_cast<int>(v)];
}

struct ModelSpec {
  Variant variant = Variant::A4;
  Timing timing = Timing::Lagged;
  Target target = Target::Dpb;
  std::vector<Cell> cells = default_cells();

  // Cells that carry d_l and q moment blocks: the limit-order cells.
  std::vector<Cell> moment_cells() const {
    std::vector<Cell> out;
    for (const Cell& c : cells)
      if (c.type == OrderType::Limit) out.push_back(c);
    return out;
  }
};

// A single regressor factor read from one interval record.
struct Factor {
  enum class Kind { Spread, Rate, Dl, Q } kind = Kind::Spread;
  Cell cell;
  int order = 1;

  std::string name() const {
    switch (kind) {
      case Kind::Spread: return std::string("spread_") + detail::moment_name(order);
      case Kind::Rate: return "r_" + label(cell);
      case Kind::Dl: return std::string("dl_") + detail::moment_name(order) + "_" + label(cell);
      case Kind::Q: return std::string("q_") + detail::moment_name(order) + "_" + label(cell);
    }
    return "?";
  }

  std::optional<double> value(const IntervalRecord& r) const {
    if (kind == Kind::Spread) return r.spread ? std::optional(r.spread->get(order)) : std::nullopt;
    const auto it = r.cells.find(cell);
    if (it == r.cells.end()) return std::nullopt;
    switch (kind) {
      case Kind::Rate: return it->second.rate;
      case Kind::Dl: return it->second.dl ? std::optional(it->second.dl->get(order)) : std::nullopt;
      case Kind::Q: return it->second.q ? std::optional(it->second.q->get(order)) : std::nullopt;
      default: return std::nullopt;
    }
  }
};

using Term = std::vector<Factor>;  // product of factors; empty = intercept

inline std::string term_label(const Term& t) {
  if (t.empty()) return "1";
  std::string s;
  for (const auto& f : t) s += (s.empty() ? "" : "*") + f.name();
  return s;
}

// Regressor terms of each model. Every smaller model's terms are a subset of
// the larger one's:
//   A4: 1, spread moments, rates, d_l moments, q moments (all additive)
//   A3: A4 + rate x d_l moments
//   A2: A3 + rate x q moments + rate x d_l x q moments
//   A1: A2 + spread moments x every rate x (1, d_l) x (1, q) term
inline std::vector<Term> model_terms(const ModelSpec& spec) {
  std::vector<Term> terms{{}};
  auto spread = [](int v) { return Factor{Factor::Kind::Spread, {}, v}; };
  auto rate = [](const Cell& c) { return Factor{Factor::Kind::Rate, c, 1}; };
  auto dl = [](const Cell& c, int v) { return Factor{Factor::Kind::Dl, c, v}; };
  auto q = [](const Cell& c, int v) { return Factor{Factor::Kind::Q, c, v}; };
  const auto mcells = spec.moment_cells();

  for (int v = 1; v <= 4; ++v) terms.push_back({spread(v)});
  for (const Cell& c : spec.cells) terms.push_back({rate(c)});
  for (const Cell& c : mcells)
    for (int v = 1; v <= 4; ++v) terms.push_back({dl(c, v)});
  for (const Cell& c : mcells)
    for (int v = 1; v <= 4; ++v) terms.push_back({q(c, v)});
  if (spec.variant == Variant::A4) return terms;

  for (const Cell& c : mcells)
    for (int v = 1; v <= 4; ++v) terms.push_back({rate(c), dl(c, v)});
  if (spec.variant == Variant::A3) return terms;

  for (const Cell& c : mcells) {
    for (int w = 1; w <= 4; ++w) terms.push_back({rate(c), q(c, w)});
    for (int v = 1; v <= 4; ++v)
      for (int w = 1; w <= 4; ++w) terms.push_back({rate(c), dl(c, v), q(c, w)});
  }
  if (spec.variant == Variant::A2) return terms;

  std::vector<Term> products;
  for (const Cell& c : spec.cells) {
    products.push_back({rate(c)});
    if (c.type != OrderType::Limit) continue;
    for (int v = 1; v <= 4; ++v) products.push_back({rate(c), dl(c, v)});
    for (int w = 1; w <= 4; ++w) products.push_back({rate(c), q(c, w)});
    for (int v = 1; v <= 4; ++v)
      for (int w = 1; w <= 4; ++w) products.push_back({rate(c), dl(c, v), q(c, w)});
  }
  for (int s = 1; s <= 4; ++s)
    for (const Term& p : products) {
      Term t{spread(s)};
      t.insert(t.end(), p.begin(), p.end());
      terms.push_back(std::move(t));
    }
  return terms;
}

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> labels;
  std::vector<std::size_t> rows;  // record index of each row's target
  std::size_t dropped = 0;        // rows lost to missing features or targets
};

inline std::optional<double> target_value(const IntervalRecord& r, Target t) {
  switch (t) {
    case Target::Dpb: return r.dpb;
    case Target::Dps: return r.dps;
    case Target::Xlm: return r.xlm;
  }
  return std::nullopt;
}

inline Design build_design(std::span<const IntervalRecord> records, const ModelSpec& spec) {
  if (records.size() < 2)
    throw Error(Errc::InsufficientRows, "need at least two interval records, got " + std::to_string(records.size()));
  const auto terms = model_terms(spec);
  Design d;
  for (const auto& t : terms) d.labels.push_back(term_label(t));

  const std::size_t lag = spec.timing == Timing::Lagged ? 1 : 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<double> row(terms.size());
  for (std::size_t t = lag; t < records.size(); ++t) {
    const auto y = target_value(records[t], spec.target);
    const IntervalRecord& x = records[t - lag];
    bool ok = y.has_value() && std::isfinite(*y);
    for (std::size_t j = 0; ok && j < terms.size(); ++j) {
      double v = 1.0;
      for (const auto& f : terms[j]) {
        const auto fv = f.value(x);
        if (!fv || !std::isfinite(*fv)) {
          ok = false;
          break;
        }
        v *= *fv;
      }
      row[j] = v;
    }
    if (!ok) {
      ++d.dropped;
      continue;
    }
    rows.push_back(row);
    ys.push_back(*y);
    d.rows.push_back(t);
  }
  if (rows.empty()) throw Error(Errc::InsufficientRows, "no interval has every feature the model needs");
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(terms.size()));
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < terms.size(); ++j)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    d.y(static_cast<Eigen::Index>(i)) = ys[i];
  }
  return d;
}

struct FitResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  std::size_t k = 0;  // estimated parameters (columns)
  std::size_t n = 0;
  std::size_t rank = 0;
  bool rank_deficient = false;
  std::string warning;
};

namespace detail {
inline Eigen::VectorXd column_scale(const Eigen::MatrixXd& X) {
  Eigen::VectorXd s = X.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < s.size(); ++j)
    if (!(s(j) > 0.0) || !std::isfinite(s(j))) s(j) = 1.0;
  return s;
}
}  // namespace detail

// Least squares via complete orthogonal decomposition on unit-norm columns.
// Rank-deficient designs get the minimum-norm solution and a warning.
inline FitResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw Error(Errc::InvalidParameter, "design and target lengths differ");
  if (X.rows() == 0) throw Error(Errc::InsufficientRows, "empty design");
  const Eigen::VectorXd scale = detail::column_scale(X);
  const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xs);
  FitResult fit;
  fit.coef = cod.solve(y).cwiseQuotient(scale);
  fit.fitted = X * fit.coef;
  fit.residuals = y - fit.fitted;
  fit.k = static_cast<std::size_t>(X.cols());
  fit.n = static_cast<std::size_t>(X.rows());
  fit.rank = static_cast<std::size_t>(cod.rank());
  fit.rank_deficient = fit.rank < fit.k;
  if (fit.rank_deficient)
    fit.warning = "design has rank " + std::to_string(fit.rank) + " < " + std::to_string(fit.k) +
                  " columns; minimum-norm solution used";
  return fit;
}

// Percentage of periods whose forecast has the realised sign; zero products
// count as misses.
inline double dpa(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.empty()) throw Error(Errc::InvalidParameter, "DPA needs equal non-empty series");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += y[i] * yhat[i] > 0.0 ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(y.size());
}

struct Metrics {
  double r2 = 0.0;
  std::optional<double> adj_r2;
  double rmse = 0.0;
  std::optional<double> dpa;
};

// `k` counts regressors besides the intercept.
inline Metrics evaluate(std::span<const double> y, std::span<const double> yhat, std::size_t k,
                        bool direction = true) {
  if (y.size() != yhat.size() || y.empty()) throw Error(Errc::InvalidParameter, "evaluate needs equal non-empty series");
  const auto n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  double ssr = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ssr += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  Metrics m;
  m.r2 = sst > 0.0 ? 1.0 - ssr / sst : (ssr == 0.0 ? 1.0 : 0.0);
  const double dof = n - static_cast<double>(k) - 1.0;
  if (dof > 0.0) m.adj_r2 = 1.0 - (1.0 - m.r2) * (n - 1.0) / dof;
  m.rmse = std::sqrt(ssr / n);
  if (direction) m.dpa = dpa(y, yhat);
  return m;
}

// R^2 of regressing realised values on [1, forecast].
inline double mincer_zarnowitz_r2(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size() || y.size() < 2) throw Error(Errc::InvalidParameter, "MZ regression needs two or more pairs");
  const auto n = static_cast<double>(y.size());
  double my = 0, mf = 0;
  for (std::size_t i = 0; i < y.size(); ++i) my += y[i], mf += yhat[i];
  my /= n;
  mf /= n;
  double syy = 0, sff = 0, syf = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    syy += (y[i] - my) * (y[i] - my);
    sff += (yhat[i] - mf) * (yhat[i] - mf);
    syf += (y[i] - my) * (yhat[i] - mf);
  }
  if (!(sff > 0.0)) return 0.0;
  if (!(syy > 0.0)) return 1.0;
  return std::min(1.0, syf * syf / (syy * sff));
}

inline std::size_t default_window(int dt_minutes) {
  switch (dt_minutes) {
    case 1: return 10'000;
    case 2: return 5'000;
    case 5: return 4'000;
    case 10: return 2'500;
    case 15: return 1'500;
    case 20: return 750;
    case 30: return 500;
    case 45: return 500;
    case 60: return 300;
    case 120: return 150;
    case 240: return 100;
  }
  throw Error(Errc::InvalidParameter, "no default window for " + std::to_string(dt_minutes) + "-minute intervals");
}

struct RollingResult {
  std::vector<double> predicted;
  std::vector<double> realized;
  std::vector<std::size_t> rows;  // record index of each forecast target
  double rmspe = 0.0;
  double dpa = 0.0;
  double r2_mz = 0.0;
  std::size_t rank_deficient_fits = 0;
};

// One-step-ahead forecasts: each design row i >= window is predicted from a
// fit on rows [i - window, i). The normal equations of the trailing window are
// updated row by row and solved by a rank-revealing decomposition, which gives
// the same minimum-norm solution as fitting the window directly.
inline RollingResult rolling_forecast(const Design& d, std::size_t window) {
  const auto n = static_cast<std::size_t>(d.X.rows());
  if (window == 0 || window >= n)
    throw Error(Errc::WindowTooLarge, "window of " + std::to_string(window) + " needs more than " +
                                          std::to_string(n) + " usable rows");
  const Eigen::VectorXd scale = detail::column_scale(d.X);
  const Eigen::MatrixXd Xs = d.X * scale.cwiseInverse().asDiagonal();
  const auto k = Xs.cols();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  auto rebuild = [&](std::size_t lo, std::size_t hi) {
    const auto rows = Xs.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo));
    G.noalias() = rows.transpose() * rows;
    b.noalias() = rows.transpose() * d.y.segment(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo));
  };
  RollingResult out;
  rebuild(0, window);
  for (std::size_t i = window; i < n; ++i) {
    if ((i - window) % 512 == 0) rebuild(i - window, i);  // bound drift from the running updates
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G);
    if (cod.rank() < k) ++out.rank_deficient_fits;
    const Eigen::VectorXd beta = cod.solve(b);
    const auto ri = static_cast<Eigen::Index>(i);
    out.predicted.push_back(Xs.row(ri).dot(beta));
    out.realized.push_back(d.y(ri));
    out.rows.push_back(d.rows[i]);
    const auto old = static_cast<Eigen::Index>(i - window);
    G.noalias() += Xs.row(ri).transpose() * Xs.row(ri) - Xs.row(old).transpose() * Xs.row(old);
    b += Xs.row(ri).transpose() * d.y(ri) - Xs.row(old).transpose() * d.y(old);
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < out.predicted.size(); ++i)
    sq += (out.realized[i] - out.predicted[i]) * (out.realized[i] - out.predicted[i]);
  out.rmspe = std::sqrt(sq / static_cast<double>(out.predicted.size()));
  out.dpa = dpa(out.realized, out.predicted);
  out.r2_mz = mincer_zarnowitz_r2(out.realized, out.predicted);
  return out;
}

inline RollingResult rolling_forecast(std::span<const IntervalRecord> records, const ModelSpec& spec,
                                      std::size_t window) {
  return rolling_forecast(build_design(records, spec), window);
}

}  // namespace lobsim
