// Decoder stand-in for synthetic videos: vidforge-synth INPUT OUTDIR FPS
// INPUT is a JSON synthetic-video description; frames are written as
// OUTDIR/frame_000001.ppm, frame_000002.ppm, ... at FPS frames per second.

#include <cstdio>
#include <exception>
#include <string>

#include "vidforge/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: %s INPUT OUTDIR FPS\n", argv[0]);
    return 64;
  }
  try {
    auto video = vidforge::synthetic::parse_video(vidforge::json::parse(vidforge::util::read_file(argv[1])));
    double fps = std::stod(argv[3]);
    if (!(fps > 0)) throw vidforge::Error("fps must be > 0");
    vidforge::fs::create_directories(argv[2]);
    vidforge::synthetic::write_frames(video, fps, argv[2]);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "vidforge-synth: %s\n", e.what());
    return 1;
  }
  return 0;
}
