#include "crowdnav/cli.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "crowdnav/controllers.hpp"
#include "crowdnav/episode_io.hpp"
#include "crowdnav/metrics.hpp"
#include "crowdnav/parallel.hpp"
#include "crowdnav/ppo.hpp"
#include "crowdnav/render.hpp"
#include "json.hpp"

namespace crowdnav::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string predictor;
};

/// Loads the config named by --config (defaults when absent) and applies
/// command-line overrides. Returns nullopt after reporting an error.
std::optional<RunConfig> resolve_config(const Common& c, std::ostream& err, int& code) {
  RunConfig config;
  try {
    if (!c.config_path.empty()) {
      if (!fs::exists(c.config_path)) {
        err << "error: config file not found: " << c.config_path << '\n';
        code = kConfigError;
        return std::nullopt;
      }
      config = load_config(c.config_path);
    }
    if (!c.predictor.empty()) config.sim.predictor = predict::parse_predictor_kind(c.predictor);
    config.sync();
    config.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kConfigError;
    return std::nullopt;
  }
  return config;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_train(const Common& c, std::ostream& out, std::ostream& err) {
  int code = kOk;
  auto config = resolve_config(c, err, code);
  if (!config) return code;
  if (c.seed) config->train.seed = *c.seed;
  if (c.out_dir.empty()) {
    err << "error: train needs --out\n";
    return kConfigError;
  }
  const fs::path out_dir = c.out_dir;
  fs::create_directories(out_dir);
  write_text(out_dir / "config.txt", to_text(*config));
  write_text(out_dir / "manifest.json",
             manifest_json("train", *config, config->train.seed, "policy",
                           {{"config", "config.txt"},
                            {"log", "train_log.csv"},
                            {"checkpoints", "checkpoints/update_NNNNNN.params"},
                            {"final", "policy.params"}}));

  policy::PolicyNet net(config->policy);
  const int threads = worker_threads();
  const long long updates = config->train.num_updates();
  out << "training " << updates << " updates of " << config->train.steps_per_collect()
      << " steps on " << threads << " thread(s)\n";
  ppo::train(net, config->sim, config->train, out_dir, threads, [&](const ppo::TrainLogRow& row) {
    out << "update " << row.update << '/' << updates << "  steps " << row.steps << "  reward "
        << row.mean_reward << "  sr " << row.sr_recent << "  policy " << row.policy_loss
        << "  value " << row.value_loss << "  entropy " << row.entropy << '\n';
    out.flush();
  });
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& baseline,
             int episodes, std::ostream& out, std::ostream& err) {
  int code = kOk;
  auto config = resolve_config(c, err, code);
  if (!config) return code;
  if (checkpoint.empty() == baseline.empty()) {
    err << "error: eval needs exactly one of --checkpoint or --baseline\n";
    return kConfigError;
  }
  const int n = episodes >= 0 ? episodes : config->eval_episodes;
  const std::uint64_t seed = c.seed.value_or(config->eval_seed);

  ControllerFactory factory;
  std::string method;
  if (!checkpoint.empty()) {
    auto net = std::make_shared<policy::PolicyNet>(config->policy);
    try {
      net->parameters().load(checkpoint);
    } catch (const std::exception& e) {
      err << "error: cannot load checkpoint " << checkpoint << ": " << e.what() << '\n';
      return kFailure;
    }
    std::shared_ptr<const policy::PolicyNet> shared = net;
    factory = [shared] { return std::make_unique<PolicyController>(shared, true); };
    method = "policy";
  } else {
    try {
      factory = baseline_factory(baseline, config->robot_orca, config->robot_sf);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kConfigError;
    }
    method = baseline;
  }

  const auto eval = metrics::evaluate(factory, config->sim, n, seed, worker_threads());

  std::ostringstream table;
  metrics::write_report_table(table, method, eval.report);
  out << table.str();
  if (!c.out_dir.empty()) {
    const fs::path out_dir = c.out_dir;
    fs::create_directories(out_dir / "episodes");
    for (std::size_t i = 0; i < eval.episodes.size(); ++i) {
      char name[48];
      std::snprintf(name, sizeof name, "episode_%04zu.jsonl", i);
      write_episode_jsonl(out_dir / "episodes" / name, eval.episodes[i]);
    }
    write_text(out_dir / "report.txt", table.str());
    std::ostringstream csv;
    metrics::write_report_csv(csv, method, eval.report);
    write_text(out_dir / "report.csv", csv.str());
    write_text(out_dir / "config.txt", to_text(*config));
    write_text(out_dir / "manifest.json",
               manifest_json("eval", *config, seed,
                             checkpoint.empty() ? "baseline:" + baseline
                                                : "checkpoint:" + checkpoint,
                             {{"config", "config.txt"},
                              {"episodes", "episodes/episode_NNNN.jsonl"},
                              {"report", "report.txt"},
                              {"report_csv", "report.csv"}}));
  }
  return kOk;
}

std::vector<fs::path> episode_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::recursive_directory_iterator(input)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(input);
    }
  }
  return files;
}

int cmd_replay(const std::vector<std::string>& inputs, const std::string& out_dir,
               const std::string& method, std::ostream& out, std::ostream& err) {
  const auto files = episode_files(inputs);
  if (files.empty()) {
    err << "error: no episode files given\n";
    return kFailure;
  }
  std::vector<EpisodeRecord> episodes;
  for (const auto& f : files) {
    try {
      episodes.push_back(read_episode_jsonl(f));
    } catch (const std::exception& e) {
      err << "error: " << f.string() << ": " << e.what() << '\n';
      return kFailure;
    }
  }
  const auto report = metrics::summarize(episodes);
  std::ostringstream table;
  metrics::write_report_table(table, method, report);
  out << table.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "report.txt", table.str());
    std::ostringstream csv;
    metrics::write_report_csv(csv, method, report);
    write_text(fs::path(out_dir) / "report.csv", csv.str());
  }
  return kOk;
}

int cmd_render(const std::string& input, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  EpisodeRecord episode;
  try {
    episode = read_episode_jsonl(fs::path(input));
  } catch (const std::exception& e) {
    err << "error: " << input << ": " << e.what() << '\n';
    return kFailure;
  }
  const fs::path dir = out_dir.empty() ? fs::path(input).replace_extension("") : fs::path(out_dir);
  const auto paths = render::render_episode(episode, dir);
  out << "wrote " << paths.size() << " frames to " << dir.string() << '\n';
  return kOk;
}

}  // namespace

const char* version() { return CROWDNAV_VERSION; }

std::string manifest_json(const std::string& command, const RunConfig& config,
                          std::uint64_t seed, const std::string& source,
                          const std::map<std::string, std::string>& layout) {
  json snapshot = json::object();
  std::istringstream lines(to_text(config));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) snapshot[line.substr(0, eq)] = line.substr(eq + 3);
  }
  json j;
  j["command"] = command;
  j["version"] = version();
  j["seed"] = seed;
  j["source"] = source;
  j["config"] = snapshot;
  j["layout"] = layout;
  return j.dump(2) + "\n";
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crowd navigation simulator, trainer and evaluator", "crowdsim"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value config file");
    sub->add_option("--out", common.out_dir, "output directory");
    sub->add_option("--seed", common.seed, "seed (training seed or first evaluation seed)");
    sub->add_option("--predictor", common.predictor, "trajectory predictor")
        ->check(CLI::IsMember({"constvel", "oracle", "none"}));
  };

  auto* train = app.add_subcommand("train", "train a policy with PPO");
  add_common(train);

  std::string checkpoint;
  std::string baseline;
  int episodes = -1;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a baseline");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "policy parameters file");
  eval->add_option("--baseline", baseline, "orca, sf, random or stationary");
  eval->add_option("--episodes", episodes, "number of episodes");

  std::vector<std::string> replay_inputs;
  std::string replay_out;
  std::string replay_method = "replay";
  auto* replay = app.add_subcommand("replay", "recompute metrics from episode logs");
  replay->add_option("episodes", replay_inputs, "JSONL files or directories")->required();
  replay->add_option("--out", replay_out, "directory for report.txt / report.csv");
  replay->add_option("--method", replay_method, "label in the report");

  std::string render_input;
  std::string render_out;
  auto* render = app.add_subcommand("render", "write one SVG per logged frame");
  render->add_option("episode", render_input, "episode JSONL file")->required();
  render->add_option("--out", render_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(common, out, err);
    if (*eval) return cmd_eval(common, checkpoint, baseline, episodes, out, err);
    if (*replay) return cmd_replay(replay_inputs, replay_out, replay_method, out, err);
    if (*render) return cmd_render(render_input, render_out, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace crowdnav::cli
