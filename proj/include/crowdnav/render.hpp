#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crowdnav/episode_io.hpp"

namespace crowdnav::render {

inline constexpr const char* kRobotFill = "#f5c518";
inline constexpr const char* kVisibleFill = "#1f77b4";
inline constexpr const char* kInvisibleFill = "#d62728";
inline constexpr const char* kPredictionStroke = "#ff7f0e";

/// One standalone SVG document for frame `index`: yellow robot disk with its
/// path so far, goal star, dashed sensor circle, blue visible and red
/// invisible humans, orange predicted trajectories.
std::string frame_svg(const EpisodeRecord& episode, std::size_t index);

/// Writes step_0001.svg ... step_C.svg, one per step of the episode, into
/// out_dir and returns their paths. A log holding only the reset frame gives
/// a single step_0000.svg.
std::vector<std::filesystem::path> render_episode(const EpisodeRecord& episode,
                                                  const std::filesystem::path& out_dir);

}  // namespace crowdnav::render
