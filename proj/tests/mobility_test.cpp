#include <gtest/gtest.h>

#include <sstream>

#include <vanetq/mobility.hpp>

using namespace vanetq;

TEST(SpawnSchedule, FixedEntryGrid) {
  KinematicsConfig kin;
  RngStream rng(1, "category-assignment");
  auto a = spawn_schedule(kin, 2.0, rng);
  ASSERT_EQ(a.size(), 4u);
  const double expect[] = {0.0, 0.66, 1.32, 1.98};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(a[i].entry_time, expect[i], 1e-12);
}

TEST(SpawnSchedule, MaxVehiclesCaps) {
  KinematicsConfig kin;
  RngStream rng(1, "category-assignment");
  EXPECT_EQ(spawn_schedule(kin, 100.0, rng, 20).size(), 20u);
}

TEST(SpawnSchedule, CategoriesAreUniform) {
  KinematicsConfig kin;
  kin.entry_interval = 1.0;
  RngStream rng(5, "category-assignment");
  auto a = spawn_schedule(kin, 10000.0, rng);
  ASSERT_EQ(a.size(), 10000u);
  PerCategory<int> n{};
  for (const auto& x : a) ++n[index_of(x.category)];
  for (int k : n) EXPECT_NEAR(k / 10000.0, 0.25, 0.02);
}

TEST(SpawnSchedule, SameSeedSameSchedule) {
  KinematicsConfig kin;
  RngStream a(9, "category-assignment"), b(9, "category-assignment");
  EXPECT_EQ(spawn_schedule(kin, 50.0, a), spawn_schedule(kin, 50.0, b));
}

TEST(Advance, AcceleratesFromRest) {
  KinematicsConfig kin;
  Vehicle v;
  v = advance(v, 1.0, kin);
  EXPECT_NEAR(v.speed, 2.6, 1e-12);
  EXPECT_NEAR(v.position, 1.3, 1e-12);
}

TEST(Advance, CruisesAtVmax) {
  KinematicsConfig kin;
  Vehicle v;
  v.speed = 17.0;
  v = advance(v, 1.0, kin);
  EXPECT_DOUBLE_EQ(v.position, 17.0);
  EXPECT_DOUBLE_EQ(v.speed, 17.0);
}

TEST(Advance, SplitsAccelerationAndCruise) {
  KinematicsConfig kin;
  Vehicle v;
  v.speed = 16.0;
  v = advance(v, 1.0, kin);
  const double t_acc = 1.0 / 2.6;
  EXPECT_NEAR(v.position, 16.0 * t_acc + 0.5 * 2.6 * t_acc * t_acc + 17.0 * (1.0 - t_acc), 1e-12);
  EXPECT_DOUBLE_EQ(v.speed, 17.0);
}

TEST(Advance, RejectsNonPositiveStep) {
  KinematicsConfig kin;
  EXPECT_THROW(advance(Vehicle{}, 0.0, kin), std::invalid_argument);
  EXPECT_THROW(advance(Vehicle{}, -1.0, kin), std::invalid_argument);
}

TEST(Advance, ManySmallStepsMatchOneLargeStep) {
  KinematicsConfig kin;
  Vehicle a, b;
  for (int i = 0; i < 100; ++i) a = advance(a, 0.1, kin);
  b = advance(b, 10.0, kin);
  EXPECT_NEAR(a.position, b.position, 1e-9);
  EXPECT_NEAR(a.speed, b.speed, 1e-12);
}

TEST(Advance, SpeedNeverExceedsVmaxAndPositionNeverDecreases) {
  KinematicsConfig kin;
  RngStream rng(2, "steps");
  Vehicle v;
  for (int i = 0; i < 1000; ++i) {
    const double before = v.position;
    v = advance(v, 0.001 + rng.uniform(), kin);
    ASSERT_LE(v.speed, kin.v_max);
    ASSERT_GE(v.position, before);
  }
}

TEST(TimeToPosition, InvertsAdvance) {
  KinematicsConfig kin;
  Vehicle v;
  for (double target : {1.3, 50.0, 150.0, 300.0}) {
    const double t = time_to_position(v, target, kin);
    EXPECT_NEAR(advance(v, t, kin).position, target, 1e-9);
  }
  EXPECT_EQ(time_to_position(v, -5.0, kin), 0.0);
}

TEST(Sojourn, AtRsuAtFullSpeed) {
  KinematicsConfig kin;
  Vehicle v;
  v.position = kin.rsu_position();
  v.speed = 17.0;
  EXPECT_NEAR(sojourn_time(v, kin), 100.0 / 17.0, 1e-12);
}

TEST(Sojourn, AtCoverageEdgeIsZero) {
  KinematicsConfig kin;
  Vehicle v;
  v.position = kin.coverage_end();
  v.speed = 10.0;
  EXPECT_DOUBLE_EQ(sojourn_time(v, kin), 0.0);
  EXPECT_TRUE(in_coverage(v, kin));
}

TEST(Sojourn, StationaryReportsCap) {
  KinematicsConfig kin;
  Vehicle v;
  v.position = kin.rsu_position();
  EXPECT_DOUBLE_EQ(sojourn_time(v, kin), kin.sojourn_cap);
}

TEST(DiscretizeSojourn, Examples) {
  EXPECT_EQ(discretize_sojourn(5.0, 10.0).level, 2);
  EXPECT_EQ(discretize_sojourn(0.0, 10.0).level, 0);
  EXPECT_EQ(discretize_sojourn(10.0, 10.0).level, 4);
  EXPECT_EQ(discretize_sojourn(1e6, 10.0).level, 4);
  EXPECT_THROW(discretize_sojourn(-1.0, 10.0), std::invalid_argument);
}

TEST(DiscretizeSojourn, MonotoneAndBounded) {
  int last = 0;
  for (int i = 0; i <= 3000; ++i) {
    const int l = discretize_sojourn(i * 0.01, 20.0).level;
    ASSERT_GE(l, last);
    ASSERT_GE(l, 0);
    ASSERT_LT(l, kSojournLevels);
    last = l;
  }
}

TEST(ArrivalTrace, ParsesCommentsAndBlankLines) {
  std::istringstream in("# header\n0.0,VO\n\n1.5, HDMAP  # inline\n2,BE\n");
  auto a = parse_arrival_trace(in);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[1], (Arrival{1.5, ServiceCategory::HDMAP}));
}

TEST(ArrivalTrace, ReportsTheOffendingLine) {
  std::istringstream in("0,VO\n1,XX\n");
  try {
    parse_arrival_trace(in, "t.csv");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("t.csv:2"), std::string::npos);
  }
  std::istringstream back("2,VO\n1,VO\n");
  EXPECT_THROW(parse_arrival_trace(back), std::runtime_error);
}
