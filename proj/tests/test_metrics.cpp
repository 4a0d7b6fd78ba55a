#include <gtest/gtest.h>

#include <sstream>

#include "crowdnav/controllers.hpp"
#include "crowdnav/metrics.hpp"
#include "support.hpp"

namespace crowdnav::metrics {
namespace {

SimConfig empty_arena() {
  SimConfig c;
  c.max_humans = 0;
  return c;
}

TEST(Metrics, StationaryRobotNeverSucceeds) {
  const auto eval = evaluate([] { return std::make_unique<StationaryController>(); }, empty_arena(),
                             10, 0, 2);
  EXPECT_EQ(eval.report.sr, 0.0);
  EXPECT_FALSE(eval.report.nt);
  EXPECT_FALSE(eval.report.pl);
  EXPECT_FALSE(eval.report.sd);
  for (const auto& ep : eval.episodes) EXPECT_EQ(ep.outcome(), OutcomeKind::Timeout);
}

TEST(Metrics, StraightLineEpisode) {
  // ORCA without neighbors heads straight for the goal at full speed.
  Environment env(empty_arena());
  OrcaController ctrl;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ep = run_episode(env, ctrl, seed);
    ASSERT_EQ(ep.outcome(), OutcomeKind::ReachedGoal);
    const auto& start = ep.frames.front().robot;
    const double straight = distance(start.position, start.goal);
    const double pl = path_length(ep);
    EXPECT_GE(pl, straight - start.radius - 1e-9);
    EXPECT_LE(pl, straight + 1e-9);
    EXPECT_NEAR(navigation_time(ep), ep.step_count() * 0.25, 1e-12);
    EXPECT_LE(ep.step_count(), static_cast<int>(std::ceil(straight / 0.25)));
  }
}

TEST(Metrics, IntrusionRatioCountsSteps) {
  EpisodeRecord ep;
  ep.frames.resize(101);
  for (std::size_t t = 0; t < ep.frames.size(); ++t) {
    auto& f = ep.frames[t];
    f.robot.position = {0, 0};
    HumanFrame h;
    h.position = {3, 0};
    f.humans = {h};
    const bool hit = t == 10 || t == 20 || t == 30 || t == 40 || t == 50;
    f.gt_futures = {{hit ? Vec2{0.5, 0} : Vec2{3, 0}}};
  }
  EXPECT_DOUBLE_EQ(intrusion_ratio(ep), 0.05);
  // The reset frame is not a step.
  ep.frames[0].gt_futures = {{{0.1, 0}}};
  EXPECT_DOUBLE_EQ(intrusion_ratio(ep), 0.05);
}

TEST(Metrics, ScriptedEpisode) {
  const auto ep = testing::scripted_episode();
  const auto flags = intrusion_steps(ep);
  EXPECT_EQ(flags, (std::vector<bool>{true, false, false}));
  EXPECT_DOUBLE_EQ(intrusion_ratio(ep), 1.0 / 3.0);
  const auto r = summarize({ep});
  EXPECT_EQ(r.sr, 100.0);
  EXPECT_NEAR(*r.pl, 0.25 + 0.25 + 0.25, 1e-9);
  EXPECT_NEAR(*r.nt, 0.75, 1e-9);
  EXPECT_EQ(*r.sd, 1.0);
  EXPECT_DOUBLE_EQ(r.itr, 100.0 / 3.0);
}

TEST(SocialDistance, Examples) {
  EpisodeRecord ep;
  ep.frames.resize(2);
  HumanFrame h;
  h.position = {0.44, 0};
  ep.frames[1].humans = {h};
  ep.frames[1].gt_futures = {{{0.44, 0}}};
  EXPECT_DOUBLE_EQ(*social_distance({ep}), 0.44);

  ep.frames[1].humans[0].position = {3, 0};
  ep.frames[1].gt_futures = {{{3, 0}}};
  EXPECT_FALSE(social_distance({ep}));

  // Two intrusion steps at 0.3 and 0.5 average to 0.4.
  ep.frames.resize(3);
  ep.frames[1].humans[0].position = {0.3, 0};
  ep.frames[1].gt_futures = {{{0.3, 0}}};
  ep.frames[2].humans = {h};
  ep.frames[2].humans[0].position = {0, 0.5};
  ep.frames[2].gt_futures = {{{0, 0.5}}};
  EXPECT_NEAR(*social_distance({ep}), 0.4, 1e-15);
}

TEST(Report, CsvAndTable) {
  MetricsReport r;
  r.episodes = 4;
  r.sr = 75;
  r.nt = 12.5;
  r.pl = 10.25;
  r.itr = 4;
  std::ostringstream csv;
  write_report_csv(csv, "orca", r);
  EXPECT_EQ(csv.str(), "method,episodes,SR,NT,PL,ITR,SD\norca,4,75,12.5,10.25,4,\n");
  std::ostringstream table;
  write_report_table(table, "orca", r);
  EXPECT_NE(table.str().find("orca"), std::string::npos);
  EXPECT_NE(table.str().find("75.0"), std::string::npos);
}

TEST(Report, Invariants) {
  SimConfig c;
  c.max_humans = 6;
  const auto eval =
      evaluate(baseline_factory("orca", {}, {}), c, 30, 0, 4);
  const auto& r = eval.report;
  EXPECT_GE(r.sr, 0.0);
  EXPECT_LE(r.sr, 100.0);
  if (r.sd) EXPECT_GE(*r.sd, 0.0);
  for (const auto& ep : eval.episodes) {
    if (ep.outcome() != OutcomeKind::ReachedGoal) continue;
    const auto& start = ep.frames.front().robot;
    EXPECT_GE(path_length(ep), distance(start.position, start.goal) - start.radius);
  }
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  SimConfig c;
  c.max_humans = 10;
  const auto a = evaluate(baseline_factory("sf", {}, {}), c, 12, 7, 1);
  const auto b = evaluate(baseline_factory("sf", {}, {}), c, 12, 7, 4);
  ASSERT_EQ(a.episodes.size(), b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    EXPECT_EQ(a.episodes[i].seed, 7 + i);
    EXPECT_EQ(a.episodes[i].frames.size(), b.episodes[i].frames.size());
    EXPECT_EQ(a.episodes[i].frames.back().robot.position, b.episodes[i].frames.back().robot.position);
  }
}

TEST(Baselines, OrcaBeatsSocialForceInACrowd) {
  SimConfig c;
  c.max_humans = 10;
  const auto orca = evaluate(baseline_factory("orca", {}, {}), c, 200, 0, 4);
  const auto sf = evaluate(baseline_factory("sf", {}, {}), c, 200, 0, 4);
  EXPECT_GT(orca.report.sr, sf.report.sr);
}

}  // namespace
}  // namespace crowdnav::metrics
