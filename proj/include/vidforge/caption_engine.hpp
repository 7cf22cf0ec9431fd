#pragma once

// Recurrent three-level video description.
//
// Level-1 captions cover fixed-length clips and see the clip's frames, the
// level-1 captions not yet summarized, and the latest level-2 summary.
// Every `summary_period` complete clips a level-2 summary folds the pending
// level-1 captions into a running plot summary. One level-3 caption closes
// the video from whatever is still pending plus the latest level-2.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vidforge/annotator.hpp"
#include "vidforge/media_ingest.hpp"

namespace vidforge::caption {

enum class Level { L1 = 1, L2 = 2, L3 = 3 };

struct Interval {
  double start = 0.0;
  double end = 0.0;
  bool operator==(const Interval&) const = default;
};

struct ScheduleEvent {
  Level level = Level::L1;
  int index = 1;  // 1-based within its level
  Interval interval;
  bool complete = true;  // level-1 only: spans at least one full clip length

  std::string id() const {
    return level == Level::L3 ? std::string("L3") : "L" + std::to_string(static_cast<int>(level)) + "#" + std::to_string(index);
  }
};

struct ClipSchedule {
  double duration = 0.0;
  std::vector<ScheduleEvent> events;

  std::size_t count(Level l) const {
    std::size_t n = 0;
    for (const auto& e : events) n += e.level == l;
    return n;
  }
};

struct ScheduleParams {
  double clip_len = 10.0;
  int summary_period = 3;
  double min_tail = 1.0;
};

inline void validate(const ScheduleParams& p) {
  if (!(p.clip_len > 0)) throw Error("caption.clip_len: must be > 0");
  if (p.summary_period < 1) throw Error("caption.summary_period: must be >= 1");
  if (!(p.min_tail >= 0) || p.min_tail > p.clip_len) throw Error("caption.min_tail: must be in [0, clip_len]");
}

/// Level-1 clips [k*L, (k+1)*L); a tail shorter than min_tail joins the last
/// full clip, a longer one becomes a short final clip. Only complete clips
/// count toward a level-2 summary.
inline ClipSchedule build_schedule(double duration, const ScheduleParams& params = {}) {
  validate(params);
  if (!(duration > 0) || !std::isfinite(duration)) throw Error("build_schedule: duration must be > 0");
  constexpr double eps = 1e-9;
  const double L = params.clip_len;

  auto full = static_cast<long>(std::floor(duration / L + eps));
  double tail = duration - static_cast<double>(full) * L;
  if (tail < eps) tail = 0.0;

  std::vector<std::pair<Interval, bool>> clips;
  for (long k = 0; k < full; ++k) clips.push_back({{k * L, (k + 1) * L}, true});
  if (tail > 0) {
    if (tail >= params.min_tail - eps || clips.empty())
      clips.push_back({{static_cast<double>(full) * L, duration}, false});
    else
      clips.back().first.end = duration;
  }

  ClipSchedule s;
  s.duration = duration;
  int l1 = 0, l2 = 0, since_summary = 0;
  for (const auto& [iv, complete] : clips) {
    s.events.push_back({Level::L1, ++l1, iv, complete});
    if (complete && ++since_summary == params.summary_period) {
      s.events.push_back({Level::L2, ++l2, {0.0, iv.end}, true});
      since_summary = 0;
    }
  }
  s.events.push_back({Level::L3, 1, {0.0, duration}, true});
  return s;
}

/// Audit trail of what a caption was conditioned on.
struct ContextDigest {
  std::vector<std::string> level1_ids;
  std::optional<std::string> level2_id;
  std::vector<double> frame_timestamps;

  bool operator==(const ContextDigest&) const = default;
};

struct Caption {
  std::string asset_id;
  Level level = Level::L1;
  int index = 1;
  Interval interval;
  std::string text;
  ContextDigest context;

  std::string id() const { return ScheduleEvent{level, index, interval, true}.id(); }
  bool operator==(const Caption&) const = default;
};

inline json to_json(const ContextDigest& d) {
  return {{"level1", d.level1_ids},
          {"level2", d.level2_id ? json(*d.level2_id) : json(nullptr)},
          {"frames", d.frame_timestamps}};
}

inline json to_json(const Caption& c) {
  return {{"asset_id", c.asset_id},
          {"level", static_cast<int>(c.level)},
          {"index", c.index},
          {"interval", {c.interval.start, c.interval.end}},
          {"text", c.text},
          {"context_digest", to_json(c.context)}};
}

inline Caption caption_from_json(const json& j) {
  Caption c;
  c.asset_id = j.at("asset_id").get<std::string>();
  int level = j.at("level").get<int>();
  if (level < 1 || level > 3) throw Error("caption row has invalid level " + std::to_string(level));
  c.level = static_cast<Level>(level);
  c.index = j.at("index").get<int>();
  c.interval = {j.at("interval").at(0).get<double>(), j.at("interval").at(1).get<double>()};
  c.text = j.at("text").get<std::string>();
  const auto& d = j.at("context_digest");
  c.context.level1_ids = d.at("level1").get<std::vector<std::string>>();
  if (!d.at("level2").is_null()) c.context.level2_id = d.at("level2").get<std::string>();
  c.context.frame_timestamps = d.at("frames").get<std::vector<double>>();
  return c;
}

/// Recurrence state for one video. Confined to a single worker.
struct CaptionState {
  std::string asset_id;
  ClipSchedule schedule;
  std::size_t cursor = 0;  // next schedule event
  int clip_index = 0;      // t: the current level-1 clip, 0-based
  std::vector<Caption> pending_level1;
  std::optional<Caption> latest_level2;
  bool completed = false;

  CaptionState(std::string id, ClipSchedule s) : asset_id(std::move(id)), schedule(std::move(s)) {}

  const ScheduleEvent& next_event() const {
    if (completed || cursor >= schedule.events.size()) throw Error("caption state for " + asset_id + " is complete");
    return schedule.events[cursor];
  }
};

struct Level1Context {
  Interval clip;
  std::vector<const Frame*> frames;
  std::vector<const Caption*> pending_level1;
  const Caption* latest_level2 = nullptr;
};

struct Level2Context {
  std::vector<const Caption*> recent_level1;
  const Caption* previous_level2 = nullptr;
};

struct Level3Context {
  std::vector<const Caption*> pending_level1;
  const Caption* latest_level2 = nullptr;
};

inline std::vector<const Caption*> pointers(const std::vector<Caption>& v) {
  std::vector<const Caption*> out;
  for (const auto& c : v) out.push_back(&c);
  return out;
}

/// Frames of the current clip, the pending level-1 captions and the latest level-2.
inline Level1Context level1_context(const CaptionState& st, const FrameSequence& seq) {
  const auto& ev = st.next_event();
  if (ev.level != Level::L1) throw Error("level1_context: next event for " + st.asset_id + " is " + ev.id());
  return {ev.interval, frames_in(seq, ev.interval.start, ev.interval.end), pointers(st.pending_level1),
          st.latest_level2 ? &*st.latest_level2 : nullptr};
}

/// The pending level-1 captions (exactly one summary period of them, in
/// order) and the previous level-2.
inline Level2Context level2_context(const CaptionState& st, int summary_period = 3) {
  if (static_cast<int>(st.pending_level1.size()) != summary_period)
    throw Error("level2_context: expected " + std::to_string(summary_period) + " pending level-1 captions, have " +
                std::to_string(st.pending_level1.size()));
  return {pointers(st.pending_level1), st.latest_level2 ? &*st.latest_level2 : nullptr};
}

inline Level3Context level3_context(const CaptionState& st) {
  if (st.completed || st.cursor + 1 != st.schedule.events.size())
    throw Error("level3_context: level-1/level-2 events for " + st.asset_id + " are not exhausted");
  return {pointers(st.pending_level1), st.latest_level2 ? &*st.latest_level2 : nullptr};
}

/// Advances the recurrence with the caption produced for the next event.
inline void apply(CaptionState& st, Caption cap) {
  const auto& ev = st.next_event();
  if (cap.level != ev.level || cap.index != ev.index)
    throw Error("caption " + cap.id() + " does not match next scheduled event " + ev.id() + " for " + st.asset_id);
  ++st.cursor;
  switch (cap.level) {
    case Level::L1:
      st.pending_level1.push_back(std::move(cap));
      ++st.clip_index;
      break;
    case Level::L2:
      st.pending_level1.clear();
      st.latest_level2 = std::move(cap);
      break;
    case Level::L3:
      st.completed = true;
      break;
  }
}

struct PromptTemplates {
  std::string system;
  std::string level1;
  std::string level2;
  std::string level3;

  /// Reads system.txt, level1.txt, level2.txt and level3.txt from `dir`.
  static PromptTemplates load(const fs::path& dir) {
    PromptTemplates t;
    t.system = util::read_file(dir / "system.txt");
    t.level1 = util::read_file(dir / "level1.txt");
    t.level2 = util::read_file(dir / "level2.txt");
    t.level3 = util::read_file(dir / "level3.txt");
    return t;
  }
};

inline std::string format_seconds(double s) {
  std::ostringstream ss;
  ss << s << "s";
  return ss.str();
}

inline std::string render_captions(const std::vector<const Caption*>& caps) {
  if (caps.empty()) return "(none)";
  std::string out;
  for (const auto* c : caps) {
    if (!out.empty()) out += "\n";
    out += "[" + format_seconds(c->interval.start) + " - " + format_seconds(c->interval.end) + "] " + c->text;
  }
  return out;
}

inline std::string render_latest(const Caption* c) { return c ? c->text : "(none)"; }

inline std::string fill(const std::string& tmpl, const std::string& frames, const std::string& pending,
                        const std::string& latest) {
  std::string s = util::replace_all(tmpl, "{frames}", frames);
  s = util::replace_all(s, "{pending_level1}", pending);
  return util::replace_all(s, "{latest_level2}", latest);
}

struct CaptionOptions {
  ScheduleParams schedule;
  int max_tokens = 1024;
  double temperature = 0.7;
};

inline ContextDigest digest_of(const std::vector<const Caption*>& l1, const Caption* l2,
                               const std::vector<const Frame*>& frames = {}) {
  ContextDigest d;
  for (const auto* c : l1) d.level1_ids.push_back(c->id());
  if (l2) d.level2_id = l2->id();
  for (const auto* f : frames) d.frame_timestamps.push_back(f->timestamp);
  return d;
}

/// Builds the annotation request for the state's next event and the digest
/// of its conditioning.
inline std::pair<AnnotationRequest, ContextDigest> next_request(const CaptionState& st, const FrameSequence& seq,
                                                               const PromptTemplates& prompts,
                                                               const CaptionOptions& opt) {
  const auto& ev = st.next_event();
  AnnotationRequest req;
  req.system = prompts.system;
  req.max_tokens = opt.max_tokens;
  req.temperature = opt.temperature;
  ContextDigest digest;
  switch (ev.level) {
    case Level::L1: {
      auto ctx = level1_context(st, seq);
      std::string frames = std::to_string(ctx.frames.size()) + " frames attached, sampled at";
      for (const auto* f : ctx.frames) frames += " " + format_seconds(f->timestamp);
      req.user = fill(prompts.level1, frames, render_captions(ctx.pending_level1), render_latest(ctx.latest_level2));
      for (const auto* f : ctx.frames) req.images.push_back(f->pixels());
      req.tag = "caption-l1:" + st.asset_id + ":" + ev.id();
      digest = digest_of(ctx.pending_level1, ctx.latest_level2, ctx.frames);
      break;
    }
    case Level::L2: {
      auto ctx = level2_context(st, opt.schedule.summary_period);
      req.user = fill(prompts.level2, "", render_captions(ctx.recent_level1), render_latest(ctx.previous_level2));
      req.tag = "caption-l2:" + st.asset_id + ":" + ev.id();
      digest = digest_of(ctx.recent_level1, ctx.previous_level2);
      break;
    }
    case Level::L3: {
      auto ctx = level3_context(st);
      req.user = fill(prompts.level3, "", render_captions(ctx.pending_level1), render_latest(ctx.latest_level2));
      req.tag = "caption-l3:" + st.asset_id + ":" + ev.id();
      digest = digest_of(ctx.pending_level1, ctx.latest_level2);
      break;
    }
  }
  return {std::move(req), std::move(digest)};
}

class CaptionFailure : public Error {
public:
  CaptionFailure(const std::string& what, std::size_t completed) : Error(what), completed_(completed) {}
  /// Captions persisted before the failure.
  std::size_t completed() const { return completed_; }

private:
  std::size_t completed_;
};

/// Runs the whole schedule for one video. When `persist` is given, captions
/// already in that file are replayed through the recurrence first and new
/// ones are appended as they are produced, so a failed run resumes where it
/// stopped.
inline std::vector<Caption> run_captioning(const VideoAsset& asset, const FrameSequence& seq, AnnotationClient& client,
                                           const PromptTemplates& prompts, const CaptionOptions& opt = {},
                                           const std::optional<fs::path>& persist = std::nullopt) {
  CaptionState st(asset.id, build_schedule(asset.duration, opt.schedule));
  std::vector<Caption> out;

  std::unique_ptr<util::JsonlAppender> sink;
  if (persist) {
    for (const auto& row : util::read_jsonl_tolerant(*persist)) {
      if (st.completed) break;
      Caption c = caption_from_json(row);
      const auto& ev = st.next_event();
      if (c.asset_id != asset.id || c.level != ev.level || c.index != ev.index || !(c.interval == ev.interval))
        throw Error("persisted captions in " + persist->string() + " do not match the schedule at " + ev.id());
      out.push_back(c);
      apply(st, std::move(c));
    }
    sink = std::make_unique<util::JsonlAppender>(*persist);
  }

  while (!st.completed) {
    const auto& ev = st.next_event();
    auto [req, digest] = next_request(st, seq, prompts, opt);
    std::string text;
    try {
      text = client.complete(req);
    } catch (const Error& e) {
      throw CaptionFailure("captioning " + asset.id + " failed at " + ev.id() + ": " + e.what(), out.size());
    }
    Caption c{asset.id, ev.level, ev.index, ev.interval, std::move(text), std::move(digest)};
    if (sink) sink->append(to_json(c));
    out.push_back(c);
    apply(st, std::move(c));
  }
  return out;
}

inline const Caption* find_level3(const std::vector<Caption>& caps) {
  for (const auto& c : caps)
    if (c.level == Level::L3) return &c;
  return nullptr;
}

}  // namespace vidforge::caption
