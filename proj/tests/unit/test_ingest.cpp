#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lobsim/ingest.hpp"
#include "lobsim/snapshot_io.hpp"

using namespace lobsim;

namespace {

std::vector<RawEvent> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_event_log(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

ScenarioConfig short_run(const char* name, double horizon, std::uint64_t seed = 5) {
  ScenarioConfig cfg = scenario(name);
  cfg.horizon = horizon;
  cfg.runs = 1;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(RelDistance, Examples) {
  EXPECT_EQ(rel_distance(0), 0.0);
  EXPECT_DOUBLE_EQ(rel_distance(99), std::log(100.0));
  EXPECT_EQ(rel_distance(-5), 0.0);
  EXPECT_DOUBLE_EQ(rel_distance(1), std::log(2.0));
}

TEST(Parse, ThreeLines) {
  const auto evs = parse(
      R"({"ts":1.0,"instr":"X","side":"ask","otype":"limit","event":"arrival","px":101,"qty":5,"ref":"a"})"
      "\n"
      R"({"ts":1.5,"instr":"X","side":"bid","otype":"market","event":"arrival","qty":2,"ref":"b"})"
      "\n\n"
      R"({"ts":1.5,"instr":"X","side":"ask","otype":"limit","event":"fill","px":101,"qty":2,"ref":"a"})"
      "\n");
  ASSERT_EQ(evs.size(), 3u);
  EXPECT_EQ(evs[0].px, 101);
  EXPECT_EQ(evs[0].side, Side::Ask);
  EXPECT_FALSE(evs[1].px);
  EXPECT_TRUE(evs[1].replays_as_market());
  EXPECT_EQ(evs[2].event, RawEventKind::Fill);
  EXPECT_EQ(evs[2].line, 4u);
}

TEST(Parse, RejectsZeroQtyWithLine) {
  const std::string msg = error_of(
      R"({"ts":1,"instr":"X","side":"ask","otype":"limit","event":"arrival","px":101,"qty":1,"ref":"a"})"
      "\n"
      R"({"ts":2,"instr":"X","side":"ask","otype":"limit","event":"arrival","px":101,"qty":0,"ref":"b"})");
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("qty"), std::string::npos) << msg;
}

TEST(Parse, OutOfOrderNamesBothLines) {
  const std::string msg = error_of(
      R"({"ts":5,"instr":"X","side":"ask","otype":"limit","event":"arrival","px":101,"qty":1,"ref":"a"})"
      "\n"
      R"({"ts":1,"instr":"Y","side":"ask","otype":"limit","event":"arrival","px":101,"qty":1,"ref":"b"})"
      "\n"
      R"({"ts":4,"instr":"X","side":"ask","otype":"limit","event":"arrival","px":101,"qty":1,"ref":"c"})");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 1"), std::string::npos) << msg;
}

TEST(Parse, RejectsMalformed) {
  const std::string base = R"("ts":1,"instr":"X","side":"ask","otype":"limit","event":"arrival","qty":1,"ref":"a")";
  EXPECT_NE(error_of("{" + base + R"(,"px":1,"venue":"z"})").find("unknown field 'venue'"), std::string::npos);
  EXPECT_NE(error_of("{" + base + "}").find("needs px"), std::string::npos);
  EXPECT_NE(error_of("{" + base + R"(,"px":1.5})").find("px"), std::string::npos);
  EXPECT_NE(error_of("not json").find("line 1"), std::string::npos);
  EXPECT_NE(error_of(R"({"ts":1})").find("missing field"), std::string::npos);
}

TEST(Parse, JsonlRoundTrip) {
  const auto evs = parse(
      R"({"ts":0.25,"instr":"X","side":"bid","otype":"limit","event":"cancel","px":99,"qty":3,"ref":"7"})");
  std::ostringstream out;
  write_event_log(out, evs);
  EXPECT_EQ(parse(out.str()), evs);
}

TEST(Replay, SimpleFillMatches) {
  const auto evs = parse(
      R"({"ts":1,"instr":"X","side":"ask","otype":"limit","event":"arrival","px":101,"qty":5,"ref":"a"})"
      "\n"
      R"({"ts":2,"instr":"X","side":"bid","otype":"limit","event":"arrival","px":101,"qty":2,"ref":"b"})"
      "\n"
      R"({"ts":2,"instr":"X","side":"ask","otype":"limit","event":"fill","px":101,"qty":2,"ref":"a"})");
  const auto r = replay(evs, BookState{});
  EXPECT_TRUE(r.divergences.empty());
  ASSERT_EQ(r.transactions.size(), 1u);
  EXPECT_EQ(r.transactions[0], (TransactionRecord{101, 2, 2.0}));
  EXPECT_EQ(r.final_book.level_qty(Side::Ask, 101), 3);
}

TEST(Replay, ReportsMismatchedFill) {
  const auto evs = parse(
      R"({"ts":1,"instr":"X","side":"ask","otype":"limit","event":"arrival","px":101,"qty":5,"ref":"a"})"
      "\n"
      R"({"ts":2,"instr":"X","side":"bid","otype":"limit","event":"arrival","px":101,"qty":2,"ref":"b"})"
      "\n"
      R"({"ts":2,"instr":"X","side":"ask","otype":"limit","event":"fill","px":101,"qty":3,"ref":"a"})");
  const auto r = replay(evs, BookState{});
  ASSERT_EQ(r.divergences.size(), 1u);
  EXPECT_EQ(r.divergences[0].line, 3u);
}

TEST(Replay, UnknownRef) {
  const auto evs = parse(
      R"({"ts":1,"instr":"X","side":"ask","otype":"limit","event":"cancel","px":101,"qty":5,"ref":"ghost"})");
  try {
    replay(evs, BookState{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownOrder);
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(Replay, ModifyKeepsPriorityOnlyWhenShrinking) {
  BookState book;
  book.submit(Order::limit(1, Side::Ask, 101, 5));
  book.submit(Order::limit(2, Side::Ask, 101, 5));
  auto evs = parse(R"({"ts":1,"instr":"X","side":"ask","otype":"limit","event":"modify","qty":2,"ref":"1"})");
  auto r = replay(evs, book);
  EXPECT_EQ(r.final_book.asks().at(101).front().id, 1u);
  EXPECT_EQ(r.final_book.level_qty(Side::Ask, 101), 7);
  evs = parse(R"({"ts":1,"instr":"X","side":"ask","otype":"limit","event":"modify","qty":9,"ref":"1"})");
  r = replay(evs, book);
  EXPECT_EQ(r.final_book.asks().at(101).front().id, 2u);
  EXPECT_EQ(r.final_book.asks().at(101).back().qty, 9);
}

TEST(Replay, SimulationRoundTrip) {
  for (const char* name : {"fix,pow", "uni,pow", "dyn,pow"}) {
    const BookState initial = make_seed_book({});
    const auto run = run_simulation(short_run(name, 3600.0), initial);
    ASSERT_FALSE(run.transactions.empty()) << name;

    std::stringstream log, snap;
    write_event_log(log, export_run(run, "sim-0"));
    write_snapshot_csv(snap, initial);
    const auto evs = parse_event_log(log);
    const BookState book = read_snapshot_csv(snap);
    EXPECT_EQ(book, initial);

    const auto r = replay(evs, book);
    EXPECT_TRUE(r.divergences.empty()) << name << ": " << r.divergences.front().message;
    EXPECT_EQ(r.transactions, run.transactions) << name;
    EXPECT_EQ(r.final_book, run.final_book) << name;
  }
}

TEST(Replay, VisitorSeesEveryNonFillEventInOrder) {
  const auto run = run_simulation(short_run("fix,pow", 600.0), make_seed_book({}));
  const auto evs = export_run(run, "sim-0");
  std::vector<std::size_t> seen;
  std::vector<Snapshot> a, b;
  replay(evs, make_seed_book({}), [&](const ReplayEvent& e, const BookState& book) {
    seen.push_back(e.index);
    a.push_back(snapshot(book));
  });
  replay(evs, make_seed_book({}), [&](const ReplayEvent&, const BookState& book) { b.push_back(snapshot(book)); });
  EXPECT_EQ(seen.size(), run.events.size());
  EXPECT_TRUE(std::is_sorted(seen.begin(), seen.end()));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].best_ask, b[i].best_ask);
    EXPECT_EQ(a[i].bid_volume, b[i].bid_volume);
  }
}

TEST(Correlation, Perfect) {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 10};
  const auto c = correlation(x, y);
  EXPECT_DOUBLE_EQ(c.r, 1.0);
  EXPECT_EQ(c.se, 0.0);
  EXPECT_EQ(c.p, 0.0);
  const std::vector<double> neg{5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(correlation(x, neg).r, -1.0);
}

TEST(Correlation, Independent) {
  std::mt19937_64 gen(12);
  std::normal_distribution<double> n01;
  const std::size_t n = 20'000;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = n01(gen), y[i] = n01(gen);
  const auto c = correlation(x, y);
  EXPECT_LT(std::abs(c.r), 4.0 / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(c.se, std::sqrt((1 - c.r * c.r) / (n - 2.0)), 1e-15);
  EXPECT_NEAR(c.p, std::erfc(std::abs(c.r / c.se) / std::sqrt(2.0)), 1e-15);
}

TEST(Correlation, Degenerate) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_FALSE(correlation(x, y).valid());
  const std::vector<double> two{1, 2};
  EXPECT_FALSE(correlation(two, two).valid());
}

TEST(Stats, MarketableShare) {
  // Ten bid arrivals against a deep ask at 101; one of them crosses.
  BookState book;
  book.submit(Order::limit(1, Side::Ask, 101, 1000));
  std::string text;
  for (int i = 0; i < 10; ++i) {
    const int px = i == 0 ? 101 : 100 - i;
    text += R"({"ts":)" + std::to_string(i + 1) + R"(,"instr":"X","side":"bid","otype":"limit","event":"arrival","px":)" +
            std::to_string(px) + R"(,"qty":1,"ref":"b)" + std::to_string(i) + "\"}\n";
    if (i == 0) text += R"({"ts":1,"instr":"X","side":"ask","otype":"limit","event":"fill","px":101,"qty":1,"ref":"1"})" "\n";
  }
  const auto stats = empirical_stats(parse(text), book);
  EXPECT_DOUBLE_EQ(stats.marketable_share(Side::Bid, RawOrderType::Limit), 0.1);
  const auto& cell = stats.cells.at({Side::Bid, RawOrderType::Limit, RawEventKind::Arrival});
  EXPECT_EQ(cell.distances.at(0), 1u);
  EXPECT_EQ(cell.distances.at(2), 1u);
}

TEST(Stats, HistogramsConserveMass) {
  const auto run = run_simulation(short_run("fix,pow", 3600.0), make_seed_book({}));
  const auto evs = export_run(run, "sim-0");
  const auto stats = empirical_stats(evs, make_seed_book({}), 0.5);
  std::size_t total = 0;
  for (const auto& [key, c] : stats.cells) {
    std::size_t dl = 0, lq = 0, d = 0;
    for (auto [bin, n] : c.dl_hist) dl += n;
    for (auto [bin, n] : c.logq_hist) lq += n;
    for (auto [bin, n] : c.distances) d += n;
    EXPECT_EQ(dl, c.count);
    EXPECT_EQ(lq, c.count);
    EXPECT_EQ(d, c.count);
    EXPECT_LE(c.marketable, c.count);
    total += c.count;
  }
  EXPECT_EQ(total, run.events.size());
}

TEST(Stats, RecoversFixArrivalLaw) {
  ScenarioConfig cfg = short_run("fix,pow", 14'400.0 * 4, 77);
  const auto run = run_simulation(cfg, make_seed_book({}));
  const auto stats = empirical_stats(export_run(run, "sim-0"), make_seed_book({}));
  for (Side s : {Side::Ask, Side::Bid}) {
    const auto& c = stats.cells.at({s, RawOrderType::Limit, RawEventKind::Arrival});
    ASSERT_TRUE(c.dgx) << c.dgx_error;
    const DgxParams truth = cfg.dgx_arrival[static_cast<std::size_t>(s)];
    EXPECT_NEAR(c.dgx->params.mu, truth.mu, 0.05);
    EXPECT_NEAR(c.dgx->params.sigma, truth.sigma, 0.05);
  }
}

TEST(Stats, FrequenciesFeedEmpiricalScenario) {
  const auto run = run_simulation(short_run("fix,pow", 3600.0), make_seed_book({}));
  const auto stats = empirical_stats(export_run(run, "sim-0"), make_seed_book({}));
  std::stringstream csv;
  stats.frequencies.write_csv(csv);
  const auto tables = EmpiricalTables::read_csv(csv);
  ScenarioConfig cfg = short_run("emp,emp", 600.0);
  cfg.empirical_duration = run.end_time;
  const auto sim = run_simulation(cfg, make_seed_book({}), 0, tables);
  EXPECT_FALSE(sim.events.empty());
}

TEST(Snapshot, CsvRejectsBadRows) {
  std::istringstream bad("level,side,px,qty,entry_seq\n1,ask,100,0,1\n");
  EXPECT_THROW(read_snapshot_csv(bad), Error);
  std::istringstream crossed("level,side,px,qty,entry_seq\n1,ask,100,1,1\n1,bid,101,1,2\n");
  EXPECT_THROW(read_snapshot_csv(crossed), Error);
}
