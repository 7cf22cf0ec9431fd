#pragma once

// Video manifests, frame extraction through an external decoder, and the
// frame containers the rest of the pipeline reads from.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vidforge/util.hpp"

namespace vidforge {

enum class Source {
  HdVila,
  InternVid,
  VidOR,
  Vidal,
  YouCook2,
  Charades,
  ActivityNet,
  Kinetics700,
  SthSthV2,
  Ego4D,
};

inline constexpr std::array<Source, 10> kAllSources = {
    Source::HdVila,   Source::InternVid,   Source::VidOR,       Source::Vidal,    Source::YouCook2,
    Source::Charades, Source::ActivityNet, Source::Kinetics700, Source::SthSthV2, Source::Ego4D,
};

inline std::string_view source_name(Source s) {
  switch (s) {
    case Source::HdVila: return "HD-VILA";
    case Source::InternVid: return "InternVid";
    case Source::VidOR: return "VidOR";
    case Source::Vidal: return "VIDAL";
    case Source::YouCook2: return "YouCook2";
    case Source::Charades: return "Charades";
    case Source::ActivityNet: return "ActivityNet";
    case Source::Kinetics700: return "Kinetics-700";
    case Source::SthSthV2: return "SthSth-v2";
    case Source::Ego4D: return "Ego4D";
  }
  return "?";
}

inline std::optional<Source> parse_source(std::string_view name) {
  for (Source s : kAllSources)
    if (source_name(s) == name) return s;
  return std::nullopt;
}

struct VideoAsset {
  std::string id;
  Source source = Source::HdVila;
  std::string uri;
  double duration = 0.0;
  int width = 0;
  int height = 0;
  std::optional<std::int64_t> view_count;
  std::optional<std::string> category;

  bool operator==(const VideoAsset&) const = default;
};

/// Empty string when the asset satisfies its invariants, otherwise the reason.
inline std::string validate(const VideoAsset& a) {
  if (a.id.empty()) return "id: must be non-empty";
  if (!std::isfinite(a.duration) || a.duration < 0) return "duration: must be >= 0";
  if (a.width <= 0) return "width: must be > 0";
  if (a.height <= 0) return "height: must be > 0";
  if (a.view_count && *a.view_count < 0) return "view_count: must be >= 0";
  return {};
}

inline json to_json(const VideoAsset& a) {
  json j{{"id", a.id},
         {"source", source_name(a.source)},
         {"uri", a.uri},
         {"duration", a.duration},
         {"width", a.width},
         {"height", a.height}};
  j["view_count"] = a.view_count ? json(*a.view_count) : json(nullptr);
  j["category"] = a.category ? json(*a.category) : json(nullptr);
  return j;
}

class ManifestError : public Error {
public:
  ManifestError(std::size_t line, const std::string& what)
      : Error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct ManifestRejection {
  std::size_t line = 0;
  std::string id;
  std::string reason;
};

struct Manifest {
  std::vector<VideoAsset> assets;
  std::vector<ManifestRejection> rejections;
};

namespace detail {

template <class T>
T required(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw ManifestError(line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ManifestError(line, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Parses a JSONL manifest. Malformed lines throw ManifestError; well-formed
/// assets that break an invariant are collected as rejections.
inline Manifest parse_manifest(std::string_view text) {
  Manifest m;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ManifestError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ManifestError(line_no, "expected a JSON object");

    VideoAsset a;
    a.id = detail::required<std::string>(j, "id", line_no);
    auto source = detail::required<std::string>(j, "source", line_no);
    a.uri = detail::required<std::string>(j, "uri", line_no);
    a.duration = detail::required<double>(j, "duration", line_no);
    a.width = detail::required<int>(j, "width", line_no);
    a.height = detail::required<int>(j, "height", line_no);
    if (auto it = j.find("view_count"); it != j.end() && !it->is_null()) {
      if (!it->is_number_integer()) throw ManifestError(line_no, "field 'view_count' has the wrong type");
      a.view_count = it->get<std::int64_t>();
    }
    if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
      if (!it->is_string()) throw ManifestError(line_no, "field 'category' has the wrong type");
      a.category = it->get<std::string>();
    }

    auto parsed = parse_source(source);
    std::string reason = parsed ? validate(a) : "source: unknown '" + source + "'";
    if (parsed) a.source = *parsed;
    if (!reason.empty()) {
      m.rejections.push_back({line_no, a.id, reason});
      continue;
    }
    m.assets.push_back(std::move(a));
  }
  return m;
}

inline Manifest load_manifest(const fs::path& path) {
  std::ifstream probe(path);
  if (!probe) throw Error("cannot read manifest " + path.string());
  return parse_manifest(util::read_file(path));
}

inline void write_manifest(const fs::path& path, const std::vector<VideoAsset>& assets) {
  std::vector<json> rows;
  rows.reserve(assets.size());
  for (const auto& a : assets) rows.push_back(to_json(a));
  util::write_jsonl_atomic(path, rows);
}

struct SamplingSpec {
  double fps = 1.0;
};

/// Row-major interleaved RGB, 8 bits per channel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t* at(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool operator==(const Image&) const = default;
};

inline std::string image_digest(const Image& img) {
  util::Sha256 h;
  h.field(std::to_string(img.width) + "x" + std::to_string(img.height));
  h.update(img.rgb);
  return h.hex();
}

inline void write_ppm(const fs::path& p, const Image& img) {
  std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::string buf = header;
  buf.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  util::write_file_atomic(p, buf);
}

/// Binary PPM (P6, maxval 255).
inline Image read_ppm(const fs::path& p) {
  std::string data = util::read_file(p);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P6") throw Error(p.string() + ": not a binary PPM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(p.string() + ": bad PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw Error(p.string() + ": unsupported PPM geometry");
  ++pos;  // single whitespace after maxval
  Image img(w, h);
  if (data.size() - pos < img.rgb.size()) throw Error(p.string() + ": truncated PPM");
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(pos), img.rgb.size(), img.rgb.begin());
  return img;
}

/// Owns a scratch directory and removes it on destruction.
class ScratchDir {
public:
  explicit ScratchDir(const std::string& prefix) {
    fs::path base;
    if (const char* env = std::getenv("VIDFORGE_TMPDIR"); env && *env)
      base = env;
    else
      base = fs::temp_directory_path();
    fs::create_directories(base);
    std::string tmpl = (base / (prefix + "-XXXXXX")).string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!::mkdtemp(buf.data())) throw Error("cannot create scratch directory under " + base.string());
    path_ = buf.data();
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

/// A frame either held in memory or backed by a file in a scratch directory;
/// file-backed pixels are loaded on demand.
struct Frame {
  double timestamp = 0.0;
  std::shared_ptr<const Image> image;
  fs::path file;

  Image pixels() const { return image ? *image : read_ppm(file); }
};

struct FrameSequence {
  std::string asset_id;
  double fps = 1.0;
  std::vector<Frame> frames;
  std::shared_ptr<const ScratchDir> scratch;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

/// Builds an in-memory sequence with timestamps k/fps.
inline FrameSequence make_sequence(std::string asset_id, double fps, std::vector<Image> images) {
  FrameSequence seq;
  seq.asset_id = std::move(asset_id);
  seq.fps = fps;
  seq.frames.reserve(images.size());
  for (std::size_t k = 0; k < images.size(); ++k) {
    Frame f;
    f.timestamp = static_cast<double>(k) / fps;
    f.image = std::make_shared<const Image>(std::move(images[k]));
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

class DecoderError : public Error {
public:
  DecoderError(const std::string& what, int exit_code, std::string stderr_text)
      : Error(what), exit_code_(exit_code), stderr_(std::move(stderr_text)) {}
  int exit_code() const { return exit_code_; }
  const std::string& stderr_text() const { return stderr_; }

private:
  int exit_code_;
  std::string stderr_;
};

inline std::string format_fps(double fps) {
  std::ostringstream ss;
  ss.precision(10);
  ss << fps;
  return ss.str();
}

/// Substitutes {input}, {outdir} and {fps}; path values are shell-quoted.
inline std::string render_decoder_cmd(const std::string& tmpl, const std::string& input, const fs::path& outdir,
                                      double fps) {
  for (const char* slot : {"{input}", "{outdir}", "{fps}"})
    if (tmpl.find(slot) == std::string::npos)
      throw Error(std::string("decoder command template lacks placeholder ") + slot);
  std::string cmd = util::replace_all(tmpl, "{input}", util::shell_quote(input));
  cmd = util::replace_all(cmd, "{outdir}", util::shell_quote(outdir.string()));
  return util::replace_all(cmd, "{fps}", format_fps(fps));
}

/// Runs the decoder and collects the frame_NNNNNN.* files it wrote, ordered by
/// their numeric index; frame k gets timestamp k/fps.
inline FrameSequence extract_frames(const VideoAsset& asset, const SamplingSpec& spec,
                                    const std::string& decoder_cmd) {
  if (!(spec.fps > 0)) throw Error("sampling fps must be > 0");
  auto scratch = std::make_shared<ScratchDir>("vidforge-frames");
  fs::path outdir = scratch->path() / "frames";
  fs::create_directories(outdir);
  fs::path errfile = scratch->path() / "decoder.stderr";

  std::string cmd = render_decoder_cmd(decoder_cmd, asset.uri, outdir, spec.fps);
  cmd += " 2> " + util::shell_quote(errfile.string());
  int status = std::system(cmd.c_str());
  int code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  if (code != 0) {
    std::string err = fs::exists(errfile) ? util::read_file(errfile) : std::string();
    throw DecoderError("decoder failed for " + asset.id + " (exit " + std::to_string(code) + ")", code, err);
  }

  std::vector<std::pair<long, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(outdir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("frame_", 0) != 0) continue;
    std::string digits = entry.path().stem().string().substr(6);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    files.emplace_back(std::stol(digits), entry.path());
  }
  if (files.empty()) throw DecoderError("decoder produced zero frames for " + asset.id, 0, "");
  std::sort(files.begin(), files.end());

  FrameSequence seq;
  seq.asset_id = asset.id;
  seq.fps = spec.fps;
  seq.scratch = scratch;
  seq.frames.reserve(files.size());
  for (std::size_t k = 0; k < files.size(); ++k)
    seq.frames.push_back(Frame{static_cast<double>(k) / spec.fps, nullptr, files[k].second});
  return seq;
}

/// Frames whose timestamp lies in [start, end).
inline std::vector<const Frame*> frames_in(const FrameSequence& seq, double start, double end) {
  std::vector<const Frame*> out;
  for (const auto& f : seq.frames)
    if (f.timestamp >= start - 1e-9 && f.timestamp < end - 1e-9) out.push_back(&f);
  return out;
}

}  // namespace vidforge
