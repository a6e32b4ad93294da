#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lobsim/lobsim.hpp"

namespace fs = std::filesystem;
using namespace lobsim;
using json = nlohmann::ordered_json;

#ifndef LOBSIM_VERSION
#define LOBSIM_VERSION "dev"
#endif
#ifndef LOBSIM_DEFAULT_CONFIG
#define LOBSIM_DEFAULT_CONFIG ""
#endif

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingInput, "cannot read '" + path + "'");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::MissingInput, "cannot write '" + path.string() + "'");
  return out;
}

std::string default_out_dir() {
  if (const char* env = std::getenv("LOBSIM_OUT_DIR"); env && *env) return env;
  return "lobsim-out";
}

class Manifest {
 public:
  explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    j_["tool"] = "lobsim";
    j_["version"] = LOBSIM_VERSION;
    j_["command"] = std::move(command);
  }
  json& operator[](const char* key) { return j_[key]; }
  void input(const std::string& path) { j_["inputs"].push_back(path); }
  void output(const fs::path& path) { j_["outputs"].push_back(path.string()); }
  void write(const fs::path& path) {
    j_["config_hash"] = hex64(fnv1a(hash_basis_));
    j_["timings"]["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    auto out = open_out(path);
    out << j_.dump(2) << '\n';
  }
  void hash(const std::string& text) { hash_basis_ += text; }

 private:
  json j_;
  std::string hash_basis_;
  std::chrono::steady_clock::time_point start_;
};

BookState load_book(const std::string& path, const SeedBookSpec& fallback) {
  if (path.empty()) return make_seed_book(fallback);
  auto in = open_in(path);
  return read_snapshot_csv(in);
}

std::vector<RawEvent> load_events(const std::string& path) {
  auto in = open_in(path);
  return parse_event_log(in);
}

// Picks the single instrument of a log, or the requested one.
std::vector<RawEvent> instrument_events(const std::vector<RawEvent>& events, const std::string& instr) {
  auto groups = split_by_instrument(events);
  if (groups.empty()) throw Error(Errc::InsufficientRows, "event log is empty");
  if (instr.empty()) {
    if (groups.size() > 1)
      throw Error(Errc::InvalidParameter, "log holds " + std::to_string(groups.size()) +
                                              " instruments; pick one with --instr");
    return std::move(groups.begin()->second);
  }
  auto it = groups.find(instr);
  if (it == groups.end()) throw Error(Errc::InvalidParameter, "instrument '" + instr + "' not in log");
  return std::move(it->second);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string scenario = "fix,pow";
  std::optional<int> runs;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config = LOBSIM_DEFAULT_CONFIG;
  std::vector<std::string> overrides;
  std::string book;
  std::string empirical;
  unsigned threads = 0;
  bool keep_going = false;
};

int simulate(const SimulateArgs& a) {
  Manifest manifest("simulate");
  KeyValueConfig kv;
  if (!a.config.empty()) {
    auto in = open_in(a.config);
    kv = KeyValueConfig::parse(in);
    manifest.input(a.config);
  }
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(Errc::ParseError, "--set expects key=value, got '" + o + "'");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  kv.set("scenario", a.scenario);
  if (a.runs) kv.set("runs", std::to_string(*a.runs));
  if (a.horizon) kv.set("horizon", csv::format(*a.horizon));
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  if (a.keep_going) kv.set("empty_book", "continue");

  ScenarioConfig cfg;
  SeedBookSpec spec;
  apply_config(kv, cfg, spec);
  const BookState book = load_book(a.book, spec);
  if (!a.book.empty()) manifest.input(a.book);
  std::optional<EmpiricalTables> tables;
  if (!a.empirical.empty()) {
    auto in = open_in(a.empirical);
    tables = EmpiricalTables::read_csv(in);
    manifest.input(a.empirical);
  }
  manifest.hash(kv.canonical());

  const auto results = run_scenario(cfg, book, tables, a.threads);
  const fs::path dir = a.out.empty() ? default_out_dir() : a.out;

  {
    auto out = open_out(dir / "initial_book.csv");
    write_snapshot_csv(out, book);
  }
  {
    auto events = open_out(dir / "events.jsonl");
    auto tx = open_out(dir / "transactions.csv");
    const std::string quoted = "\"" + cfg.name() + "\"";
    auto runs = open_out(dir / "runs.csv");
    tx << "scenario,run,time,price,qty\n";
    runs << "scenario,run,termination,end_time,events,transactions\n";
    for (const auto& r : results) {
      const std::string instr = "sim-" + std::to_string(r.run_index);
      write_event_log(events, export_run(r, instr));
      for (const auto& t : r.transactions)
        tx << quoted << ',' << r.run_index << ',' << csv::format(t.time) << ',' << t.price << ',' << t.qty << '\n';
      runs << quoted << ',' << r.run_index << ',' << to_string(r.termination) << ',' << csv::format(r.end_time)
           << ',' << r.events.size() << ',' << r.transactions.size() << '\n';
    }
  }
  {
    auto out = open_out(dir / "summary.csv");
    out << "scenario,mu_bar_e3,sigma_bar_e3,runs,terminations\n";
    try {
      const auto s = scenario_summary(results);
      out << '"' << cfg.name() << "\"," << csv::format(s.mu_bar_e3) << ',' << csv::format(s.sigma_bar_e3) << ','
          << s.runs << ',' << s.terminations << '\n';
    } catch (const Error& e) {
      std::cerr << "warning: " << e.what() << '\n';
    }
  }
  for (const char* f : {"initial_book.csv", "events.jsonl", "transactions.csv", "runs.csv", "summary.csv"})
    manifest.output(dir / f);
  manifest["seed"] = cfg.seed;
  manifest["scenario"] = cfg.name();
  manifest["runs"] = cfg.runs;
  manifest["horizon"] = cfg.horizon;
  json config;
  for (const auto& [k, v] : kv.values()) config[k] = v.first;
  manifest["config"] = config;
  manifest.write(dir / "manifest.json");
  return 0;
}

// ------------------------------------------------------------------ replay

int replay_cmd(const std::string& events_path, const std::string& book_path, const std::string& out_dir) {
  Manifest manifest("replay");
  const auto events = load_events(events_path);
  manifest.input(events_path);
  const BookState book = load_book(book_path, SeedBookSpec{});
  if (!book_path.empty()) manifest.input(book_path);
  manifest.hash(events_path + "\n" + book_path);
  const fs::path dir = out_dir.empty() ? default_out_dir() : out_dir;

  auto tx = open_out(dir / "transactions.csv");
  auto snaps = open_out(dir / "snapshots.csv");
  auto div = open_out(dir / "divergences.csv");
  auto finals = open_out(dir / "final_books.csv");
  tx << "instr,time,price,qty\n";
  snaps << "instr,event,time,best_bid,best_ask,spread,ask_qty,bid_qty\n";
  div << "instr,line,message\n";
  finals << "instr," << kSnapshotHeader << '\n';
  std::size_t divergences = 0;
  for (const auto& [instr, evs] : split_by_instrument(events)) {
    const auto res = replay(evs, book, [&](const ReplayEvent& rec, const BookState& b) {
      const Snapshot s = snapshot(b);
      snaps << instr << ',' << rec.index << ',' << csv::format(rec.raw->ts) << ','
            << (s.best_bid ? std::to_string(*s.best_bid) : "") << ',' << (s.best_ask ? std::to_string(*s.best_ask) : "")
            << ',' << (s.spread ? std::to_string(*s.spread) : "") << ',' << s.ask_quantity << ',' << s.bid_quantity
            << '\n';
    });
    for (const auto& t : res.transactions)
      tx << instr << ',' << csv::format(t.time) << ',' << t.price << ',' << t.qty << '\n';
    for (const auto& d : res.divergences) div << instr << ',' << d.line << ",\"" << d.message << "\"\n";
    divergences += res.divergences.size();
    std::ostringstream fb;
    write_snapshot_csv(fb, res.final_book);
    std::string line;
    std::istringstream lines(fb.str());
    std::getline(lines, line);
    while (std::getline(lines, line)) finals << instr << ',' << line << '\n';
  }
  if (divergences) std::cerr << "warning: " << divergences << " fill divergences, see divergences.csv\n";
  for (const char* f : {"transactions.csv", "snapshots.csv", "divergences.csv", "final_books.csv"})
    manifest.output(dir / f);
  manifest["divergences"] = divergences;
  manifest.write(dir / "manifest.json");
  return 0;
}

// ------------------------------------------------------------------- stats

int stats_cmd(const std::string& events_path, const std::string& book_path, const std::string& out_dir,
              double bin_width) {
  Manifest manifest("stats");
  const auto events = load_events(events_path);
  manifest.input(events_path);
  const BookState book = load_book(book_path, SeedBookSpec{});
  if (!book_path.empty()) manifest.input(book_path);
  manifest.hash(events_path + "\n" + book_path + "\n" + csv::format(bin_width));
  const EmpStats st = empirical_stats(events, book, bin_width);
  const fs::path dir = out_dir.empty() ? default_out_dir() : out_dir;

  auto counts = open_out(dir / "counts.csv");
  counts << "side,otype,event,count,marketable\n";
  auto corr = open_out(dir / "correlations.csv");
  corr << "side,otype,event,n,r,se,z,p\n";
  auto dl = open_out(dir / "dl_hist.csv");
  dl << "side,otype,event,bin_lo,bin_hi,count\n";
  auto lq = open_out(dir / "logq_hist.csv");
  lq << "side,otype,event,bin_lo,bin_hi,count\n";
  auto fits = open_out(dir / "dgx_fits.csv");
  fits << "side,otype,event,n,mu,sigma,log_likelihood,warning\n";
  for (const auto& [key, c] : st.cells) {
    const std::string k = std::string(to_string(key.side)) + "," + std::string(to_string(key.otype)) + "," +
                          std::string(to_string(key.event));
    counts << k << ',' << c.count << ',' << c.marketable << '\n';
    const auto& r = c.correlation;
    corr << k << ',' << r.n << ',' << csv::format(r.r) << ',' << csv::format(r.se) << ',' << csv::format(r.z) << ','
         << csv::format(r.p) << '\n';
    for (const auto& [b, n] : c.dl_hist)
      dl << k << ',' << csv::format(b * st.bin_width) << ',' << csv::format((b + 1) * st.bin_width) << ',' << n << '\n';
    for (const auto& [b, n] : c.logq_hist)
      lq << k << ',' << csv::format(b * st.bin_width) << ',' << csv::format((b + 1) * st.bin_width) << ',' << n << '\n';
    if (c.dgx)
      fits << k << ',' << c.dgx->n << ',' << csv::format(c.dgx->params.mu) << ',' << csv::format(c.dgx->params.sigma)
           << ',' << csv::format(c.dgx->log_likelihood) << ",\"" << c.dgx->warning << "\"\n";
  }
  auto share = open_out(dir / "marketable.csv");
  share << "side,otype,arrivals,marketable,share\n";
  for (const auto& [key, c] : st.cells) {
    if (key.event != RawEventKind::Arrival) continue;
    share << to_string(key.side) << ',' << to_string(key.otype) << ',' << c.count << ',' << c.marketable << ','
          << csv::format(st.marketable_share(key.side, key.otype)) << '\n';
  }
  auto freq = open_out(dir / "frequencies.csv");
  st.frequencies.write_csv(freq);
  for (const char* f : {"counts.csv", "correlations.csv", "dl_hist.csv", "logq_hist.csv", "dgx_fits.csv",
                        "marketable.csv", "frequencies.csv"})
    manifest.output(dir / f);
  manifest["events"] = st.events;
  manifest.write(dir / "manifest.json");
  return 0;
}

// ------------------------------------------------------------------ sample

int sample_cmd(const std::string& events_path, const std::string& book_path, const std::string& out,
               double dt, const std::string& instr, double notional, double tick_value, std::optional<double> end) {
  Manifest manifest("sample");
  const auto all = load_events(events_path);
  manifest.input(events_path);
  const BookState book = load_book(book_path, SeedBookSpec{});
  if (!book_path.empty()) manifest.input(book_path);
  const auto events = instrument_events(all, instr);
  const auto obs = observe(events, book, notional, tick_value);
  const auto records = sample_intervals(obs, dt, default_cells(), 0.0, end);
  if (records.size() < 2) throw Error(Errc::InsufficientRows, "log spans fewer than two intervals");
  const fs::path path = out.empty() ? fs::path(default_out_dir()) / "intervals.csv" : fs::path(out);
  auto o = open_out(path);
  write_intervals_csv(o, records);
  manifest.hash(events_path + "\n" + book_path + "\n" + csv::format(dt) + "\n" + instr);
  manifest.output(path);
  manifest["intervals"] = records.size();
  manifest["dt_minutes"] = dt;
  manifest.write(path.string() + ".manifest.json");
  return 0;
}

// ------------------------------------------------------------ fit/forecast

json param_counts(const ModelSpec& base) {
  json counts;
  for (Variant v : {Variant::A1, Variant::A2, Variant::A3, Variant::A4}) {
    ModelSpec s = base;
    s.variant = v;
    counts[std::string(to_string(v))] = model_terms(s).size();
  }
  return counts;
}

std::vector<IntervalRecord> load_intervals(const std::string& path) {
  auto in = open_in(path);
  return read_intervals_csv(in);
}

int fit_cmd(const std::string& in, const std::string& out, const ModelSpec& spec, int dt) {
  Manifest manifest("fit");
  manifest.input(in);
  const auto records = load_intervals(in);
  const Design d = build_design(records, spec);
  const FitResult fit = ols_fit(d.X, d.y);
  std::vector<double> y(d.y.data(), d.y.data() + d.y.size());
  std::vector<double> yhat(fit.fitted.data(), fit.fitted.data() + fit.fitted.size());
  const Metrics m = evaluate(y, yhat, fit.k - 1, spec.target != Target::Xlm);

  json j;
  j["model"] = to_string(spec.variant);
  j["timing"] = spec.timing == Timing::Lagged ? "lagged" : "contemp";
  j["dt_minutes"] = dt;
  j["n"] = fit.n;
  j["k"] = fit.k;
  j["rank"] = fit.rank;
  j["dropped_rows"] = d.dropped;
  if (!fit.warning.empty()) j["warning"] = fit.warning;
  j["r2"] = m.r2;
  j["adj_r2"] = m.adj_r2 ? json(*m.adj_r2) : json(nullptr);
  j["rmse"] = m.rmse;
  j["dpa"] = m.dpa ? json(*m.dpa) : json(nullptr);
  j["param_counts"] = param_counts(spec);
  for (std::size_t i = 0; i < d.labels.size(); ++i) j["coefficients"][d.labels[i]] = fit.coef(static_cast<Eigen::Index>(i));
  const fs::path path = out.empty() ? fs::path(default_out_dir()) / "fit.json" : fs::path(out);
  auto o = open_out(path);
  o << j.dump(2) << '\n';
  if (!fit.warning.empty()) std::cerr << "warning: " << fit.warning << '\n';
  manifest.hash(in + "\n" + std::string(to_string(spec.variant)) + j["timing"].get<std::string>());
  manifest.output(path);
  manifest["param_counts"] = param_counts(spec);
  manifest.write(path.string() + ".manifest.json");
  return 0;
}

int forecast_cmd(const std::string& in, const std::string& out, const ModelSpec& spec, int dt,
                 std::optional<std::size_t> window) {
  Manifest manifest("forecast");
  manifest.input(in);
  const auto records = load_intervals(in);
  const std::size_t w = window ? *window : default_window(dt);
  const Design d = build_design(records, spec);
  const RollingResult r = rolling_forecast(d, w);
  const fs::path path = out.empty() ? fs::path(default_out_dir()) / "forecast.csv" : fs::path(out);
  {
    auto o = open_out(path);
    o << "t,realized,predicted\n";
    for (std::size_t i = 0; i < r.predicted.size(); ++i)
      o << r.rows[i] << ',' << csv::format(r.realized[i]) << ',' << csv::format(r.predicted[i]) << '\n';
  }
  json j;
  j["model"] = to_string(spec.variant);
  j["timing"] = spec.timing == Timing::Lagged ? "lagged" : "contemp";
  j["window"] = w;
  j["forecasts"] = r.predicted.size();
  j["rmspe"] = r.rmspe;
  j["dpa"] = r.dpa;
  j["r2_mz"] = r.r2_mz;
  j["rank_deficient_fits"] = r.rank_deficient_fits;
  j["param_counts"] = param_counts(spec);
  const fs::path metrics = path.string() + ".json";
  {
    auto o = open_out(metrics);
    o << j.dump(2) << '\n';
  }
  std::cout << "RMSPE " << r.rmspe << "  DPA " << r.dpa << "  R2_MZ " << r.r2_mz << '\n';
  manifest.hash(in + "\n" + std::to_string(w) + std::string(to_string(spec.variant)));
  manifest.output(path);
  manifest.output(metrics);
  manifest.write(path.string() + ".manifest.json");
  return 0;
}

// ----------------------------------------------------------------- summary

int summary_cmd(const std::string& in, const std::string& out) {
  const fs::path root = in.empty() ? fs::path(default_out_dir()) : fs::path(in);
  if (!fs::exists(root)) throw Error(Errc::MissingInput, "no such directory '" + root.string() + "'");
  std::vector<fs::path> files;
  if (fs::is_regular_file(root)) {
    files.push_back(root);
  } else {
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file() && e.path().filename() == "summary.csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(Errc::MissingInput, "no summary.csv under '" + root.string() + "'");
  std::ostringstream table;
  table << "scenario,mu_bar_e3,sigma_bar_e3,runs,terminations\n";
  for (const auto& f : files) {
    std::ifstream s(f);
    std::string line;
    std::getline(s, line);
    while (std::getline(s, line))
      if (!line.empty()) table << line << '\n';
  }
  if (out.empty()) {
    std::cout << table.str();
  } else {
    auto o = open_out(out);
    o << table.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limit order book simulation, replay and forecasting toolkit"};
  app.set_version_flag("--version", LOBSIM_VERSION);
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run Monte Carlo realisations of a scenario");
  s->add_option("--scenario", sim.scenario, "Price and size laws, e.g. fix,pow or emp,emp")->capture_default_str();
  s->add_option("--runs", sim.runs, "Number of realisations");
  s->add_option("--horizon", sim.horizon, "Seconds per realisation");
  s->add_option("--seed", sim.seed, "Master seed");
  s->add_option("--out", sim.out, "Output directory");
  s->add_option("--config", sim.config, "key = value configuration file")->capture_default_str();
  s->add_option("--set", sim.overrides, "Override a configuration key (key=value)");
  s->add_option("--book", sim.book, "Initial book snapshot CSV (default: synthetic seed book)");
  s->add_option("--empirical", sim.empirical, "Empirical frequency table CSV");
  s->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
  s->add_flag("--continue-on-empty", sim.keep_going, "Keep running when one side of the book empties");

  std::string events, book, out, instr, target = "dpb", model = "A4", timing = "lagged";
  double bin_width = 0.25, tick_value = 0.01, notional = 25'000.0;
  double dt_sample = 5.0;
  int dt = 5;
  std::optional<std::size_t> window;
  std::optional<double> end;

  auto* r = app.add_subcommand("replay", "Rebuild books from an event log");
  r->add_option("--events", events, "JSONL event log")->required();
  r->add_option("--book", book, "Initial book snapshot CSV (default: synthetic seed book)");
  r->add_option("--out", out, "Output directory");

  auto* st = app.add_subcommand("stats", "Empirical order-flow statistics of an event log");
  st->add_option("--events", events, "JSONL event log")->required();
  st->add_option("--book", book, "Initial book snapshot CSV (default: synthetic seed book)");
  st->add_option("--out", out, "Output directory");
  st->add_option("--bin-width", bin_width, "Histogram bin width in log units")->capture_default_str();

  auto* sa = app.add_subcommand("sample", "Cut an event log into fixed intervals of moment features");
  sa->add_option("--events", events, "JSONL event log")->required();
  sa->add_option("--book", book, "Initial book snapshot CSV (default: synthetic seed book)");
  sa->add_option("--dt", dt_sample, "Interval length in minutes")->capture_default_str();
  sa->add_option("--out", out, "Output intervals CSV");
  sa->add_option("--instr", instr, "Instrument to sample when the log holds several");
  sa->add_option("--xlm-notional", notional, "Round-trip notional of the liquidity measure")->capture_default_str();
  sa->add_option("--tick-value", tick_value, "Currency value of one tick")->capture_default_str();
  sa->add_option("--end", end, "End of the sampled period in seconds (default: last event)");

  auto add_model = [&](CLI::App* c) {
    c->add_option("--spec", model, "Model A1..A4")->capture_default_str();
    c->add_option("--timing", timing, "contemp or lagged")->capture_default_str();
    c->add_option("--target", target, "dpb, dps or xlm")->capture_default_str();
    c->add_option("--dt", dt, "Interval length in minutes")->capture_default_str();
    c->add_option("--in", events, "Intervals CSV")->required();
    c->add_option("--out", out, "Output file");
  };
  auto* f = app.add_subcommand("fit", "In-sample OLS fit of a model");
  add_model(f);
  auto* fc = app.add_subcommand("forecast", "Rolling-window out-of-sample forecasts");
  add_model(fc);
  fc->add_option("--window", window, "Rolling window length (default by --dt)");

  auto* su = app.add_subcommand("summary", "Collect summary.csv files into one table");
  su->add_option("--in", events, "Directory holding simulation outputs");
  su->add_option("--out", out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*s) return simulate(sim);
    if (*r) return replay_cmd(events, book, out);
    if (*st) return stats_cmd(events, book, out, bin_width);
    if (*sa) return sample_cmd(events, book, out, dt_sample, instr, notional, tick_value, end);
    if (*f || *fc) {
      ModelSpec spec;
      spec.variant = parse_variant(model);
      spec.timing = parse_timing(timing);
      spec.target = parse_target(target);
      return *f ? fit_cmd(events, out, spec, dt) : forecast_cmd(events, out, spec, dt, window);
    }
    if (*su) return summary_cmd(events, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_input_error() ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
