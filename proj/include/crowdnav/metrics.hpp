#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "crowdnav/controllers.hpp"
#include "crowdnav/episode_io.hpp"
#include "crowdnav/sim.hpp"

namespace crowdnav::metrics {

/// Navigation and social metrics over a set of episodes. Averages over
/// successful episodes (NT, PL) or over intrusion steps (SD) are absent when
/// their population is empty.
struct MetricsReport {
  int episodes = 0;
  double sr = 0.0;               // percent
  std::optional<double> nt;      // s
  std::optional<double> pl;      // m
  double itr = 0.0;              // percent
  std::optional<double> sd;      // m
};

/// Per-step intrusion flags for frames 1..C: the robot disc overlaps some
/// human's true future disc at t+1..t+horizon.
std::vector<bool> intrusion_steps(const EpisodeRecord& episode, int horizon = kIntrusionHorizon);

/// c / C with C the episode length; 0 for an empty episode.
double intrusion_ratio(const EpisodeRecord& episode, int horizon = kIntrusionHorizon);

/// Mean, over all intrusion steps of all episodes, of the center distance
/// from the robot to its closest human.
std::optional<double> social_distance(const std::vector<EpisodeRecord>& episodes,
                                      int horizon = kIntrusionHorizon);

/// Sum of robot displacement lengths.
double path_length(const EpisodeRecord& episode);
double navigation_time(const EpisodeRecord& episode);

MetricsReport summarize(const std::vector<EpisodeRecord>& episodes);

/// Runs one episode with `controller`, logging every frame.
EpisodeRecord run_episode(Environment& env, Controller& controller, std::uint64_t seed);

struct Evaluation {
  std::vector<EpisodeRecord> episodes;
  MetricsReport report;
};

/// Runs seeds seed_base .. seed_base + num_episodes - 1, in parallel across
/// `threads`, and aggregates in seed order.
Evaluation evaluate(const ControllerFactory& factory, const SimConfig& config, int num_episodes,
                    std::uint64_t seed_base, int threads);

void write_report_table(std::ostream& out, const std::string& method, const MetricsReport& r);
void write_report_csv(std::ostream& out, const std::string& method, const MetricsReport& r,
                      bool header = true);

}  // namespace crowdnav::metrics
