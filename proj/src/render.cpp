#include "crowdnav/render.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace crowdnav::render {
namespace {

constexpr double kScale = 40.0;  // px per metre
constexpr double kMargin = 1.0;  // m around the arena

struct View {
  double half;
  double px(double x) const { return (x + half) * kScale; }
  double py(double y) const { return (half - y) * kScale; }
  double len(double d) const { return d * kScale; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void star(std::ostringstream& out, const View& view, const Vec2& c, double outer) {
  out << "<polygon class=\"goal\" fill=\"#e41a1c\" stroke=\"#000\" stroke-width=\"1\" points=\"";
  for (int i = 0; i < 10; ++i) {
    const double r = (i % 2 == 0) ? outer : outer * 0.4;
    const double a = std::numbers::pi / 2.0 + i * std::numbers::pi / 5.0;
    if (i > 0) out << ' ';
    out << num(view.px(c.x + r * std::cos(a))) << ',' << num(view.py(c.y + r * std::sin(a)));
  }
  out << "\"/>\n";
}

}  // namespace

std::string frame_svg(const EpisodeRecord& episode, std::size_t index) {
  const StepFrame& frame = episode.frames.at(index);
  const View view{episode.arena_half_width + kMargin};
  const double size = view.len(2.0 * view.half);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(size) << "\" height=\""
      << num(size) << "\" viewBox=\"0 0 " << num(size) << ' ' << num(size) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  const double a = episode.arena_half_width;
  out << "<rect class=\"arena\" x=\"" << num(view.px(-a)) << "\" y=\"" << num(view.py(a))
      << "\" width=\"" << num(view.len(2 * a)) << "\" height=\"" << num(view.len(2 * a))
      << "\" fill=\"none\" stroke=\"#999\" stroke-width=\"1\"/>\n";
  out << "<text x=\"8\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">t = " << frame.t
      << "</text>\n";

  const auto& robot = frame.robot;
  out << "<circle class=\"sensor\" cx=\"" << num(view.px(robot.position.x)) << "\" cy=\""
      << num(view.py(robot.position.y)) << "\" r=\"" << num(view.len(episode.sensor_range))
      << "\" fill=\"none\" stroke=\"#000\" stroke-width=\"1.5\" stroke-dasharray=\"8,6\"/>\n";

  for (const auto& h : frame.humans) {
    if (h.visible && !h.predicted.empty()) {
      out << "<polyline class=\"prediction\" fill=\"none\" stroke=\"" << kPredictionStroke
          << "\" stroke-width=\"2\" points=\"" << num(view.px(h.position.x)) << ','
          << num(view.py(h.position.y));
      for (const auto& p : h.predicted) out << ' ' << num(view.px(p.x)) << ',' << num(view.py(p.y));
      out << "\"/>\n";
      for (const auto& p : h.predicted) {
        out << "<circle class=\"prediction\" cx=\"" << num(view.px(p.x)) << "\" cy=\""
            << num(view.py(p.y)) << "\" r=\"" << num(view.len(h.radius)) << "\" fill=\""
            << kPredictionStroke << "\" fill-opacity=\"0.15\" stroke=\"" << kPredictionStroke
            << "\" stroke-width=\"1\"/>\n";
      }
    }
  }
  for (const auto& h : frame.humans) {
    out << "<circle class=\"" << (h.visible ? "human-visible" : "human-invisible") << "\" cx=\""
        << num(view.px(h.position.x)) << "\" cy=\"" << num(view.py(h.position.y)) << "\" r=\""
        << num(view.len(h.radius)) << "\" fill=\"" << (h.visible ? kVisibleFill : kInvisibleFill)
        << "\" stroke=\"#000\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << num(view.px(h.position.x)) << "\" y=\""
        << num(view.py(h.position.y) + 4) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"11\" fill=\"#fff\">" << h.id << "</text>\n";
  }

  if (index > 0) {
    out << "<polyline class=\"robot-path\" fill=\"none\" stroke=\"#8c6d00\" stroke-width=\"1.5\" "
        << "points=\"";
    for (std::size_t i = 0; i <= index; ++i) {
      const Vec2& p = episode.frames[i].robot.position;
      if (i > 0) out << ' ';
      out << num(view.px(p.x)) << ',' << num(view.py(p.y));
    }
    out << "\"/>\n";
  }
  star(out, view, robot.goal, 0.35);
  out << "<circle class=\"robot\" cx=\"" << num(view.px(robot.position.x)) << "\" cy=\""
      << num(view.py(robot.position.y)) << "\" r=\"" << num(view.len(robot.radius))
      << "\" fill=\"" << kRobotFill << "\" stroke=\"#000\" stroke-width=\"1.5\"/>\n";
  out << "</svg>\n";
  return out.str();
}

std::vector<std::filesystem::path> render_episode(const EpisodeRecord& episode,
                                                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> paths;
  const std::size_t first = episode.frames.size() > 1 ? 1 : 0;
  for (std::size_t i = first; i < episode.frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%04zu.svg", i);
    const auto path = out_dir / name;
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot write " + path.string());
    file << frame_svg(episode, i);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace crowdnav::render
