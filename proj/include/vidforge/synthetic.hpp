#pragma once

// Synthetic media for offline runs: solid-color and block-pattern frame
// writers plus a tiny JSON "video" description that the bundled
// vidforge-synth decoder renders to frame files.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vidforge/media_ingest.hpp"

namespace vidforge::synthetic {

inline Image solid_frame(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Image img(width, height);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    img.rgb[3 * i] = r;
    img.rgb[3 * i + 1] = g;
    img.rgb[3 * i + 2] = b;
  }
  return img;
}

/// Random colored blocks of block x block pixels, fully determined by seed.
inline Image block_frame(int width, int height, std::uint64_t seed, int block = 8) {
  Image img(width, height);
  util::SplitMix64 rng(seed);
  int bw = (width + block - 1) / block;
  int bh = (height + block - 1) / block;
  std::vector<std::array<std::uint8_t, 3>> colors(static_cast<std::size_t>(bw) * bh);
  for (auto& c : colors) {
    std::uint64_t v = rng.next();
    c = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v >> 16)};
  }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto& c = colors[static_cast<std::size_t>(y / block) * bw + x / block];
      std::copy(c.begin(), c.end(), img.at(x, y));
    }
  return img;
}

/// One constant-content stretch of a synthetic video, ending at `until` seconds.
struct Segment {
  double until = 0.0;
  std::string pattern = "solid";  // "solid" | "blocks"
  std::array<std::uint8_t, 3> color{0, 0, 0};
  std::uint64_t seed = 0;
};

struct Video {
  int width = 64;
  int height = 36;
  double duration = 0.0;
  std::vector<Segment> segments;
};

inline Video parse_video(const json& j) {
  Video v;
  v.width = j.value("width", 64);
  v.height = j.value("height", 36);
  v.duration = j.at("duration").get<double>();
  for (const auto& s : j.at("segments")) {
    Segment seg;
    seg.until = s.at("until").get<double>();
    seg.pattern = s.value("pattern", std::string("solid"));
    if (s.contains("color")) {
      auto c = s.at("color").get<std::vector<int>>();
      if (c.size() != 3) throw Error("synthetic segment color must have 3 channels");
      for (int i = 0; i < 3; ++i) seg.color[i] = static_cast<std::uint8_t>(c[i]);
    }
    seg.seed = s.value("seed", std::uint64_t{0});
    v.segments.push_back(seg);
  }
  if (v.segments.empty()) throw Error("synthetic video needs at least one segment");
  return v;
}

inline json to_json(const Video& v) {
  json segs = json::array();
  for (const auto& s : v.segments)
    segs.push_back({{"until", s.until},
                    {"pattern", s.pattern},
                    {"color", {s.color[0], s.color[1], s.color[2]}},
                    {"seed", s.seed}});
  return {{"width", v.width}, {"height", v.height}, {"duration", v.duration}, {"segments", segs}};
}

inline Image render_at(const Video& v, double t) {
  const Segment* seg = &v.segments.back();
  for (const auto& s : v.segments)
    if (t < s.until) {
      seg = &s;
      break;
    }
  if (seg->pattern == "blocks") return block_frame(v.width, v.height, seg->seed);
  return solid_frame(v.width, v.height, seg->color[0], seg->color[1], seg->color[2]);
}

/// ceil(duration * fps) frames (at least one) at timestamps k / fps.
inline std::vector<Image> render(const Video& v, double fps) {
  auto n = static_cast<std::size_t>(std::ceil(v.duration * fps - 1e-9));
  if (n == 0) n = 1;
  std::vector<Image> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(render_at(v, static_cast<double>(k) / fps));
  return out;
}

/// Writes frame_000001.ppm, frame_000002.ppm, ... the way ffmpeg numbers output.
inline std::size_t write_frames(const Video& v, double fps, const fs::path& outdir) {
  fs::create_directories(outdir);
  auto frames = render(v, fps);
  char name[32];
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::snprintf(name, sizeof name, "frame_%06zu.ppm", k + 1);
    write_ppm(outdir / name, frames[k]);
  }
  return frames.size();
}

/// A video that alternates solid colors with hard cuts at the given times.
inline Video with_cuts(double duration, const std::vector<double>& cut_times, int width = 64, int height = 36) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 2> palette{{{0, 0, 0}, {255, 255, 255}}};
  Video v;
  v.width = width;
  v.height = height;
  v.duration = duration;
  std::size_t i = 0;
  for (double t : cut_times) {
    v.segments.push_back({t, "solid", palette[i % 2], 0});
    ++i;
  }
  v.segments.push_back({duration + 1.0, "solid", palette[i % 2], 0});
  return v;
}

}  // namespace vidforge::synthetic
