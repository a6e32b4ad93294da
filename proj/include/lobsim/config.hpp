#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "lobsim/csv.hpp"
#include "lobsim/rates.hpp"
#include "lobsim/ssa.hpp"

namespace lobsim {

// Flat "key = value" text; '#' starts a comment. Later keys override earlier.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw Error(Errc::ParseError, csv::where(lineno) + "expected key = value");
      const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
      if (key.empty()) throw Error(Errc::ParseError, csv::where(lineno) + "empty key");
      cfg.values_[key] = {value, lineno};
    }
    return cfg;
  }

  static KeyValueConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = {value, 0}; }
  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::pair<std::string, std::size_t>>& values() const noexcept { return values_; }

  // Canonical "key=value\n" text in key order; the basis of the config hash.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v.first + "\n";
    return s;
  }

 private:
  std::map<std::string, std::pair<std::string, std::size_t>> values_;
};

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

// Applies known keys to a scenario and seed-book spec. Unknown keys are
// rejected so that typos do not silently fall back to defaults.
inline void apply_config(const KeyValueConfig& kv, ScenarioConfig& cfg, SeedBookSpec& book) {
  for (const auto& [key, entry] : kv.values()) {
    const auto& [value, line] = entry;
    const auto num = [&] { return csv::to_double(value, line); };
    const auto integer = [&] { return csv::to_int(value, line); };
    const auto side_rate = [&](const std::string& prefix, double BaseRates::*field) {
      if (key == prefix + ".ask") return cfg.rates[0].*field = num(), true;
      if (key == prefix + ".bid") return cfg.rates[1].*field = num(), true;
      if (key == prefix) return cfg.rates[0].*field = cfg.rates[1].*field = num(), true;
      return false;
    };
    const auto dgx = [&](const std::string& prefix, std::array<DgxParams, 2>& arr) {
      for (int s = 0; s < 2; ++s) {
        const std::string side = s == 0 ? ".ask" : ".bid";
        if (key == prefix + side + ".mu") return arr[static_cast<std::size_t>(s)].mu = num(), true;
        if (key == prefix + side + ".sigma") return arr[static_cast<std::size_t>(s)].sigma = num(), true;
      }
      return false;
    };
    try {
      if (side_rate("rate.limit_arrival", &BaseRates::limit_arrival) ||
          side_rate("rate.limit_cancellation", &BaseRates::limit_cancellation) ||
          side_rate("rate.marketable_limit", &BaseRates::marketable_limit_arrival) ||
          side_rate("rate.market", &BaseRates::market_arrival) || dgx("dgx.arrival", cfg.dgx_arrival) ||
          dgx("dgx.cancellation", cfg.dgx_cancellation))
        continue;
      if (key == "scenario") set_scenario(cfg, value);
      else if (key == "fold_marketable_into_market") cfg.fold_marketable_into_market = value == "true" || value == "1";
      else if (key == "powerlaw.lambda") cfg.power_law_lambda = num();
      else if (key == "uni.levels_behind") cfg.uni_levels_behind = static_cast<int>(integer());
      else if (key == "uni.levels_crossing") cfg.uni_levels_crossing = static_cast<int>(integer());
      else if (key == "max_distance") cfg.max_distance = integer();
      else if (key == "max_size") cfg.max_size = integer();
      else if (key == "empirical.duration") cfg.empirical_duration = num();
      else if (key == "horizon") cfg.horizon = num();
      else if (key == "runs") cfg.runs = static_cast<int>(integer());
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(integer());
      else if (key == "empty_book") {
        if (value == "terminate") cfg.empty_book = EmptyBookPolicy::Terminate;
        else if (value == "continue") cfg.empty_book = EmptyBookPolicy::Continue;
        else throw Error(Errc::ParseError, "empty_book must be terminate or continue");
      }
      else if (key == "book.mid") book.mid = integer();
      else if (key == "book.spread") book.spread = integer();
      else if (key == "book.levels") book.levels = static_cast<int>(integer());
      else if (key == "book.orders_per_level") book.orders_per_level = static_cast<int>(integer());
      else if (key == "book.touch_qty") book.touch_qty = num();
      else if (key == "book.depth_growth") book.depth_growth = num();
      else throw Error(Errc::ParseError, "unknown key '" + key + "'");
    } catch (const Error& e) {
      if (e.code() == Errc::ParseError && std::string(e.what()).find("line ") != std::string::npos) throw;
      throw Error(Errc::ParseError, csv::where(line) + e.what());
    }
  }
}

}  // namespace lobsim
