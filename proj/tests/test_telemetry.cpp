#include <gtest/gtest.h>

#include <cmath>

#include "evci/errors.hpp"
#include "evci/simulator.hpp"
#include "evci/telemetry.hpp"
#include "test_support.hpp"

using namespace evci;
using evci::test::port_series;

TEST(PortLabels, RoundTripAndBoards) {
  for (PortId p : kAllPorts) {
    ASSERT_EQ(port_from_label(label(p)), p);
  }
  EXPECT_EQ(label(PortId::Ev0Terra53), "EV0_Terra53");
  EXPECT_FALSE(port_from_label("EV9").has_value());
  EXPECT_EQ(charging_board(PortId::Ev0Terra53), 0);
  EXPECT_EQ(charging_board(PortId::Ev1TerraHpCordA), charging_board(PortId::Ev1TerraHpCordB));
  EXPECT_EQ(charging_board(PortId::Ev3TerraHp), 3);
  EXPECT_EQ(channel_of(Quantity::Soc), Channel::Ocpp);
  EXPECT_EQ(channel_of(Quantity::ChargeStatus), Channel::Ocpp);
  EXPECT_EQ(channel_of(Quantity::IPcc), Channel::Goose);
}

TEST(DeltaSoc, ConstantSeries) {
  const auto d = compute_delta_soc(port_series(PortId::Ev0Terra53, {50, 50, 50}, {1, 1, 1}),
                                   PortId::Ev0Terra53);
  EXPECT_EQ(d.values, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(d.transition_mask, (std::vector<std::uint8_t>{0, 0}));
}

TEST(DeltaSoc, ElementwiseDifference) {
  const auto d = compute_delta_soc(port_series(PortId::Ev0Terra53, {20.0, 20.1, 20.3}, {1, 1, 1}),
                                   PortId::Ev0Terra53);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(d.values[0], 0.1, 1e-12);
  EXPECT_NEAR(d.values[1], 0.2, 1e-12);
  EXPECT_EQ(d.transition_mask, (std::vector<std::uint8_t>{0, 0}));
}

TEST(DeltaSoc, ArrivalSpikeIsMasked) {
  const auto d = compute_delta_soc(port_series(PortId::Ev2TerraHpCordB, {0, 45, 45.1}, {0, 1, 1}),
                                   PortId::Ev2TerraHpCordB);
  EXPECT_EQ(d.port, PortId::Ev2TerraHpCordB);
  EXPECT_DOUBLE_EQ(d.values[0], 45.0);
  EXPECT_NEAR(d.values[1], 0.1, 1e-12);
  EXPECT_EQ(d.transition_mask, (std::vector<std::uint8_t>{1, 0}));
}

TEST(DeltaSoc, TooShortIsEmptyInput) {
  EXPECT_THROW(compute_delta_soc(port_series(PortId::Ev0Terra53, {50}, {1}), PortId::Ev0Terra53),
               EmptyInputError);
  EXPECT_THROW(compute_delta_soc(TelemetrySeries{}, PortId::Ev0Terra53), EmptyInputError);
}

TEST(DeltaSoc, PropertyReconstructionAndMask) {
  SimConfig cfg;
  cfg.duration = kSecondsPerDay / 4;
  cfg.seed = 3;
  const TelemetrySeries s = simulate(cfg, schedule_sessions(cfg));
  for (PortId p : kAllPorts) {
    const DeltaSocSeries d = compute_delta_soc(s, p);
    ASSERT_EQ(d.size(), s.size() - 1);
    double soc = s.records[0].port(p).soc;
    for (std::size_t t = 0; t < d.size(); ++t) {
      soc += d.values[t];
      ASSERT_NEAR(soc, s.records[t + 1].port(p).soc, 1e-9) << label(p) << " t=" << t;
      const bool flip = s.records[t].port(p).cs != s.records[t + 1].port(p).cs;
      ASSERT_EQ(d.transition_mask[t] == 1, flip);
    }
  }
}

TEST(Standardizer, PopulationScale) {
  FeatureMatrix x(3, 1);
  x << 1, 2, 3;
  const auto [st, xs] = standardize(x, x);
  EXPECT_DOUBLE_EQ(st.mean()(0), 2.0);
  EXPECT_NEAR(st.scale()(0), 0.81650, 1e-5);
  EXPECT_NEAR(xs(0, 0), -1.22474, 1e-5);
  EXPECT_NEAR(xs(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(xs(2, 0), 1.22474, 1e-5);
}

TEST(Standardizer, ZeroVarianceColumn) {
  FeatureMatrix x(3, 2);
  x << 5, 1, 5, 2, 5, 4;
  const Standardizer st = Standardizer::fit(x);
  EXPECT_EQ(st.scale()(0), 1.0);
  const FeatureMatrix xs = st.transform(x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(xs(i, 0), 0.0);
}

TEST(Standardizer, ApplyToTrainMatchesTransform) {
  Rng rng(5);
  FeatureMatrix x(20, 3);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-10, 10);
  const auto [st, xs] = standardize(x, x);
  EXPECT_TRUE(xs.isApprox(st.transform(x), 0.0));
}

TEST(Standardizer, PropertyIdempotentOnTrainStatistics) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(40)), p = 1 + static_cast<int>(rng.below(6));
    FeatureMatrix x(n, p);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < p; ++j) x(i, j) = rng.uniform(-1e3, 1e3);
    const FeatureMatrix xs = Standardizer::fit(x).transform(x);
    const Standardizer again = Standardizer::fit(xs);
    for (int j = 0; j < p; ++j) {
      EXPECT_NEAR(again.mean()(j), 0.0, 1e-9);
      EXPECT_NEAR(again.scale()(j), 1.0, 1e-9);
    }
  }
}

TEST(Standardizer, ShapeMismatch) {
  FeatureMatrix a(3, 2), b(3, 3);
  a.setRandom();
  b.setRandom();
  EXPECT_THROW(standardize(a, b), ShapeError);
}

TEST(Split, DefaultFourPlusOneDays) {
  TelemetrySeries s;
  s.records.resize(5 * kSecondsPerDay);
  for (std::size_t t = 0; t < s.records.size(); ++t) s.records[t].t = static_cast<std::int64_t>(t);
  const auto [train, test] = split_dataset(s);
  EXPECT_EQ(train.size(), 345600u);
  EXPECT_EQ(test.size(), 86400u);
  EXPECT_EQ(test.records.front().t, 345600);

  const auto [none, rest] = split_dataset(s, 0, 100);
  EXPECT_TRUE(none.empty());
  EXPECT_EQ(rest.size(), 100u);
  EXPECT_EQ(rest.records.front().t, 0);

  EXPECT_THROW(split_dataset(s, 10 * kSecondsPerDay, kSecondsPerDay), RangeError);
  EXPECT_THROW(split_dataset(s, -1, 10), RangeError);
}

TEST(Csv, RoundTripIsIdentity) {
  SimConfig cfg;
  cfg.duration = 7200;
  cfg.seed = 9;
  cfg.arrival_rate_per_hour.fill(3.0);
  const TelemetrySeries s = simulate(cfg, schedule_sessions(cfg));
  test::TempDir dir("csv");
  write_series_csv(s, dir / "t.csv");
  const TelemetrySeries back = read_series_csv(dir / "t.csv");
  EXPECT_EQ(back.meta, s.meta);
  ASSERT_EQ(back.size(), s.size());
  EXPECT_TRUE(back == s);
}

TEST(Csv, FormatDoubleRoundTrips) {
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(-1.0, 1.0) * std::pow(10.0, rng.uniform(-20, 20));
    ASSERT_EQ(parse_double(format_double(v), 0), v);
  }
  EXPECT_THROW(parse_double("1.5x", 3), ParseError);
  EXPECT_THROW(parse_int("", 3), ParseError);
}

TEST(Csv, MissingColumnIsParseError) {
  test::TempDir dir("csvbad");
  SimConfig cfg;
  cfg.duration = 5;
  write_series_csv(simulate(cfg, {}), dir / "t.csv");
  std::string text = test::slurp(dir / "t.csv");
  // Drop the i_bess column name from the header.
  const auto pos = text.find(",i_bess");
  text.erase(pos, 7);
  test::spit(dir / "bad.csv", text);
  try {
    read_series_csv(dir / "bad.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Csv, BrokenCadenceAndFieldCount) {
  test::TempDir dir("csvcad");
  SimConfig cfg;
  cfg.duration = 5;
  write_series_csv(simulate(cfg, {}), dir / "t.csv");
  const std::string text = test::slurp(dir / "t.csv");

  std::string skipped = text;
  const auto row = skipped.find("\n2,");
  skipped.replace(row, 3, "\n7,");
  test::spit(dir / "cad.csv", skipped);
  EXPECT_THROW(read_series_csv(dir / "cad.csv"), ParseError);

  std::string shortrow = text;
  shortrow += "5,0\n";
  test::spit(dir / "short.csv", shortrow);
  EXPECT_THROW(read_series_csv(dir / "short.csv"), ParseError);
}

TEST(Csv, EmptyFileIsEmptyInput) {
  test::TempDir dir("csvempty");
  test::spit(dir / "e.csv", "");
  EXPECT_THROW(read_series_csv(dir / "e.csv"), EmptyInputError);
  EXPECT_THROW(read_series_csv(dir / "missing.csv"), Error);
}

TEST(Series, ValidateNamesBrokenTimestamp) {
  TelemetrySeries s = port_series(PortId::Ev0Terra53, {1, 2, 3}, {0, 0, 0});
  EXPECT_NO_THROW(s.validate());
  s.records[2].t = 5;
  try {
    s.validate();
    FAIL();
  } catch (const RangeError& e) {
    EXPECT_NE(std::string(e.what()).find('5'), std::string::npos);
  }
}
