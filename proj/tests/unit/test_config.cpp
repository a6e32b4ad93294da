#include <gtest/gtest.h>

#include <fstream>

#include "lobsim/config.hpp"

using namespace lobsim;

TEST(Config, ParsesAndApplies) {
  const auto kv = KeyValueConfig::parse(
      "# comment\n"
      "scenario = uni,pow\n"
      "rate.market.bid = 0.004   # trailing\n"
      "rate.limit_arrival = 0.2\n"
      "dgx.arrival.ask.mu = 1.5\n"
      "book.levels = 7\n"
      "empty_book = continue\n"
      "seed = 12\n");
  ScenarioConfig cfg;
  SeedBookSpec book;
  apply_config(kv, cfg, book);
  EXPECT_EQ(cfg.price_law, PriceLaw::Uni);
  EXPECT_EQ(cfg.rates[1].market_arrival, 0.004);
  EXPECT_EQ(cfg.rates[0].market_arrival, 0.0025);
  EXPECT_EQ(cfg.rates[0].limit_arrival, 0.2);
  EXPECT_EQ(cfg.rates[1].limit_arrival, 0.2);
  EXPECT_EQ(cfg.dgx_arrival[0].mu, 1.5);
  EXPECT_EQ(book.levels, 7);
  EXPECT_EQ(cfg.empty_book, EmptyBookPolicy::Continue);
  EXPECT_EQ(cfg.seed, 12u);
}

TEST(Config, RejectsUnknownKeyWithLine) {
  const auto kv = KeyValueConfig::parse("seed = 1\nrate.limt_arrival = 0.1\n");
  ScenarioConfig cfg;
  SeedBookSpec book;
  try {
    apply_config(kv, cfg, book);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("rate.limt_arrival"), std::string::npos) << e.what();
  }
}

TEST(Config, RejectsBadValues) {
  ScenarioConfig cfg;
  SeedBookSpec book;
  EXPECT_THROW(apply_config(KeyValueConfig::parse("horizon = soon\n"), cfg, book), Error);
  EXPECT_THROW(apply_config(KeyValueConfig::parse("scenario = foo,pow\n"), cfg, book), Error);
  EXPECT_THROW(KeyValueConfig::parse("just words\n"), Error);
}

TEST(Config, CanonicalFormAndHash) {
  const auto a = KeyValueConfig::parse("b = 2\na = 1\n");
  const auto b = KeyValueConfig::parse("a=1\n\n# x\nb=2\n");
  EXPECT_EQ(a.canonical(), "a=1\nb=2\n");
  EXPECT_EQ(fnv1a(a.canonical()), fnv1a(b.canonical()));
  // Published FNV-1a 64 test vectors.
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Config, ShippedDefaultParses) {
  std::ifstream in(LOBSIM_DEFAULT_CONFIG);
  ASSERT_TRUE(in) << LOBSIM_DEFAULT_CONFIG;
  ScenarioConfig cfg;
  SeedBookSpec book;
  apply_config(KeyValueConfig::parse(in), cfg, book);
  EXPECT_GT(cfg.rates[0].limit_arrival, 0.0);
}
