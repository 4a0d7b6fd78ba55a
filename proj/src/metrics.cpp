#include "crowdnav/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

#include "crowdnav/parallel.hpp"
#include "crowdnav/reward.hpp"

namespace crowdnav::metrics {
namespace {

bool frame_intrudes(const StepFrame& f, int horizon) {
  const Disc robot{f.robot.position, f.robot.radius};
  for (std::size_t i = 0; i < f.humans.size() && i < f.gt_futures.size(); ++i) {
    const auto& track = f.gt_futures[i];
    const std::size_t steps = std::min(track.size(), static_cast<std::size_t>(horizon));
    for (std::size_t k = 0; k < steps; ++k) {
      if (reward::intrusion_indicator(robot, {track[k], f.humans[i].radius})) return true;
    }
  }
  return false;
}

double closest_human(const StepFrame& f) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : f.humans) best = std::min(best, distance(f.robot.position, h.position));
  return best;
}

std::string fmt_opt(const std::optional<double>& v, const char* spec) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, *v);
  return buf;
}

std::string fmt(double v, const char* spec) { return fmt_opt(std::optional<double>(v), spec); }

std::string csv_opt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace

std::vector<bool> intrusion_steps(const EpisodeRecord& episode, int horizon) {
  std::vector<bool> flags;
  for (std::size_t t = 1; t < episode.frames.size(); ++t) {
    flags.push_back(frame_intrudes(episode.frames[t], horizon));
  }
  return flags;
}

double intrusion_ratio(const EpisodeRecord& episode, int horizon) {
  const auto flags = intrusion_steps(episode, horizon);
  if (flags.empty()) return 0.0;
  const auto c = std::count(flags.begin(), flags.end(), true);
  return static_cast<double>(c) / static_cast<double>(flags.size());
}

std::optional<double> social_distance(const std::vector<EpisodeRecord>& episodes, int horizon) {
  double total = 0.0;
  long count = 0;
  for (const auto& ep : episodes) {
    for (std::size_t t = 1; t < ep.frames.size(); ++t) {
      if (!frame_intrudes(ep.frames[t], horizon)) continue;
      total += closest_human(ep.frames[t]);
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

double path_length(const EpisodeRecord& episode) {
  double total = 0.0;
  for (std::size_t t = 1; t < episode.frames.size(); ++t) {
    total += distance(episode.frames[t].robot.position, episode.frames[t - 1].robot.position);
  }
  return total;
}

double navigation_time(const EpisodeRecord& episode) {
  return static_cast<double>(episode.step_count()) * episode.dt;
}

MetricsReport summarize(const std::vector<EpisodeRecord>& episodes) {
  MetricsReport r;
  r.episodes = static_cast<int>(episodes.size());
  if (episodes.empty()) return r;

  int successes = 0;
  double nt = 0.0;
  double pl = 0.0;
  double itr = 0.0;
  for (const auto& ep : episodes) {
    itr += intrusion_ratio(ep);
    if (ep.outcome() != OutcomeKind::ReachedGoal) continue;
    ++successes;
    nt += navigation_time(ep);
    pl += path_length(ep);
  }
  const auto n = static_cast<double>(episodes.size());
  r.sr = 100.0 * successes / n;
  r.itr = 100.0 * itr / n;
  if (successes > 0) {
    r.nt = nt / successes;
    r.pl = pl / successes;
  }
  r.sd = social_distance(episodes);
  return r;
}

EpisodeRecord run_episode(Environment& env, Controller& controller, std::uint64_t seed) {
  EpisodeRecord record;
  record.seed = seed;
  record.dt = env.config().dt;
  record.sensor_range = env.config().sensor_range;
  record.arena_half_width = env.config().arena_half_width;

  auto capture = [&](const Observation& obs) {
    StepFrame f;
    f.t = env.step_count();
    f.robot = env.robot();
    const auto& humans = env.humans();
    for (std::size_t i = 0; i < humans.size(); ++i) {
      HumanFrame h;
      h.id = static_cast<int>(i);
      h.position = humans[i].position;
      h.velocity = humans[i].velocity;
      h.radius = humans[i].radius;
      h.visible = env.visibility()[i];
      if (h.visible && i < obs.humans.size()) h.predicted = obs.humans[i].predicted;
      f.humans.push_back(std::move(h));
    }
    for (const auto& track : env.cached_futures()) {
      f.gt_futures.emplace_back(track.begin(),
                                track.begin() + std::min<std::ptrdiff_t>(
                                                    kIntrusionHorizon,
                                                    static_cast<std::ptrdiff_t>(track.size())));
    }
    return f;
  };

  controller.reset(seed);
  Observation obs = env.reset(seed);
  record.frames.push_back(capture(obs));
  while (!env.done()) {
    const Vec2 command = controller.act(env, obs);
    StepResult result = env.step(command);
    obs = std::move(result.observation);
    StepFrame f = capture(obs);
    f.action = env.robot().velocity;
    f.reward = result.reward;
    f.done = result.done;
    if (result.outcome) f.outcome = result.outcome->kind;
    record.frames.push_back(std::move(f));
  }
  return record;
}

Evaluation evaluate(const ControllerFactory& factory, const SimConfig& config, int num_episodes,
                    std::uint64_t seed_base, int threads) {
  Evaluation eval;
  const auto n = static_cast<std::size_t>(std::max(num_episodes, 0));
  eval.episodes.resize(n);
  const int workers = std::max(1, std::min(threads, static_cast<int>(n)));
  // Each worker owns one environment and controller and takes a strided share of seeds.
  parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
    Environment env(config);
    auto controller = factory();
    for (std::size_t i = w; i < n; i += static_cast<std::size_t>(workers)) {
      eval.episodes[i] = run_episode(env, *controller, seed_base + i);
    }
  });
  eval.report = summarize(eval.episodes);
  return eval;
}

void write_report_table(std::ostream& out, const std::string& method, const MetricsReport& r) {
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %8s %8s %8s %8s %8s\n", "Method", "Episodes", "SR",
                "NT", "PL", "ITR", "SD");
  out << line;
  std::snprintf(line, sizeof line, "%-24s %8d %8s %8s %8s %8s %8s\n", method.c_str(), r.episodes,
                fmt(r.sr, "%.1f").c_str(), fmt_opt(r.nt, "%.2f").c_str(),
                fmt_opt(r.pl, "%.2f").c_str(), fmt(r.itr, "%.2f").c_str(),
                fmt_opt(r.sd, "%.2f").c_str());
  out << line;
}

void write_report_csv(std::ostream& out, const std::string& method, const MetricsReport& r,
                      bool header) {
  if (header) out << "method,episodes,SR,NT,PL,ITR,SD\n";
  out << method << ',' << r.episodes << ',' << csv_opt(r.sr) << ',' << csv_opt(r.nt) << ','
      << csv_opt(r.pl) << ',' << csv_opt(r.itr) << ',' << csv_opt(r.sd) << '\n';
}

}  // namespace crowdnav::metrics
