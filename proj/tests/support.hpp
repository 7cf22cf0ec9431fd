#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <string>
#include <vector>

#include "vidforge/vidforge.hpp"

#ifndef VIDFORGE_SYNTH_BIN
#error "VIDFORGE_SYNTH_BIN must point at the vidforge-synth executable"
#endif

namespace vftest {

using namespace vidforge;

inline std::string synth_decoder_cmd() { return std::string(VIDFORGE_SYNTH_BIN) + " {input} {outdir} {fps}"; }

struct SyntheticAsset {
  std::string id;
  double duration;
  std::vector<double> cuts;
  Source source = Source::HdVila;
  int width = 1280;
  int height = 720;
  std::optional<std::int64_t> views;
  std::optional<std::string> category;
};

/// Writes one synthetic-video JSON per asset plus manifest.jsonl under `dir`.
inline fs::path write_corpus(const fs::path& dir, const std::vector<SyntheticAsset>& specs) {
  fs::create_directories(dir / "videos");
  std::vector<VideoAsset> assets;
  for (const auto& s : specs) {
    fs::path video = dir / "videos" / (s.id + ".json");
    util::write_file_atomic(video, synthetic::to_json(synthetic::with_cuts(s.duration, s.cuts)).dump());
    assets.push_back({s.id, s.source, video.string(), s.duration, s.width, s.height, s.views, s.category});
  }
  write_manifest(dir / "manifest.jsonl", assets);
  return dir / "manifest.jsonl";
}

/// The three videos used by the end-to-end checks: 10 s, 35 s and 95 s, each
/// with three scenes so the default chain accepts them.
inline std::vector<SyntheticAsset> e2e_corpus() {
  auto make = [](std::string id, double d, std::vector<double> cuts) {
    SyntheticAsset a;
    a.id = std::move(id);
    a.duration = d;
    a.cuts = std::move(cuts);
    return a;
  };
  return {make("vid-10s", 10, {3, 6}), make("vid-35s", 35, {12, 24}), make("vid-95s", 95, {30, 60})};
}

inline fs::path write_config(const fs::path& dir, const fs::path& manifest, const fs::path& out,
                             const std::vector<std::string>& extra = {}) {
  std::string text = "manifest = " + manifest.string() + "\n" + "output_dir = " + out.string() + "\n" +
                     "decoder.cmd = " + synth_decoder_cmd() + "\n" + "backend.kind = mock\n" + "backend.seed = 7\n" +
                     "seed = 11\n" + "workers = 3\n" + "qa.mc_fraction = 0.5\n";
  for (const auto& e : extra) text += e + "\n";
  fs::create_directories(dir);
  util::write_file_atomic(dir / "vidforge.conf", text);
  return dir / "vidforge.conf";
}

}  // namespace vftest
