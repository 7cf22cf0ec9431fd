#pragma once

// Content-cut detection over sampled frames and the corpus filter chain that
// selects dynamic, untrimmed videos.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vidforge/media_ingest.hpp"

namespace vidforge {

inline constexpr double kDefaultCutThreshold = 27.0;

/// 8-bit HSV with the usual OpenCV ranges: H in [0,180), S and V in [0,255].
struct Hsv {
  std::uint8_t h, s, v;
};

inline Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  int mx = std::max({r, g, b});
  int mn = std::min({r, g, b});
  double delta = mx - mn;
  double s = mx == 0 ? 0.0 : 255.0 * delta / mx;
  double h = 0.0;
  if (delta > 0) {
    if (mx == r)
      h = 60.0 * (g - b) / delta;
    else if (mx == g)
      h = 120.0 + 60.0 * (b - r) / delta;
    else
      h = 240.0 + 60.0 * (r - g) / delta;
    if (h < 0) h += 360.0;
  }
  auto h8 = static_cast<int>(std::lround(h / 2.0));
  if (h8 >= 180) h8 -= 180;
  return {static_cast<std::uint8_t>(h8), static_cast<std::uint8_t>(std::lround(s)), static_cast<std::uint8_t>(mx)};
}

/// Mean absolute per-pixel HSV delta, averaged over the three channels.
inline double content_score(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw Error("content_score: frame dimensions differ");
  if (a.pixel_count() == 0) return 0.0;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < a.pixel_count(); ++i) {
    const auto* pa = a.rgb.data() + 3 * i;
    const auto* pb = b.rgb.data() + 3 * i;
    Hsv x = rgb_to_hsv(pa[0], pa[1], pa[2]);
    Hsv y = rgb_to_hsv(pb[0], pb[1], pb[2]);
    sum += static_cast<std::uint64_t>(std::abs(x.h - y.h) + std::abs(x.s - y.s) + std::abs(x.v - y.v));
  }
  return static_cast<double>(sum) / (3.0 * static_cast<double>(a.pixel_count()));
}

struct SceneAnalysis {
  std::string asset_id;
  std::vector<double> cut_timestamps;
  int scene_count = 1;
  double dynamism_ratio = 0.0;
  std::vector<std::size_t> cut_frames;
};

inline json to_json(const SceneAnalysis& s) {
  return {{"asset_id", s.asset_id},
          {"cut_timestamps", s.cut_timestamps},
          {"scene_count", s.scene_count},
          {"dynamism_ratio", s.dynamism_ratio},
          {"cut_frames", s.cut_frames}};
}

inline SceneAnalysis scene_analysis_from_json(const json& j) {
  SceneAnalysis s;
  s.asset_id = j.at("asset_id").get<std::string>();
  s.cut_timestamps = j.at("cut_timestamps").get<std::vector<double>>();
  s.scene_count = j.at("scene_count").get<int>();
  s.dynamism_ratio = j.at("dynamism_ratio").get<double>();
  s.cut_frames = j.value("cut_frames", std::vector<std::size_t>{});
  return s;
}

/// A cut is declared at frame k when the score against frame k-1 exceeds
/// `threshold` and at least `min_scene_len` frames separate k from the
/// previous cut. The first cut has no predecessor and is never suppressed.
/// `duration` <= 0 falls back to the sampled span |frames| / fps.
inline SceneAnalysis detect_cuts(const FrameSequence& seq, double threshold = kDefaultCutThreshold,
                                 std::size_t min_scene_len = 1, double duration = 0.0) {
  if (seq.empty()) throw Error("detect_cuts: empty frame sequence for " + seq.asset_id);
  if (!(threshold > 0)) throw Error("detect_cuts: threshold must be > 0");
  if (min_scene_len < 1) throw Error("detect_cuts: min_scene_len must be >= 1");

  SceneAnalysis out;
  out.asset_id = seq.asset_id;
  std::optional<std::size_t> last_cut;
  Image prev = seq.frames.front().pixels();
  for (std::size_t k = 1; k < seq.size(); ++k) {
    Image cur = seq.frames[k].pixels();
    double score = content_score(prev, cur);
    if (score > threshold && (!last_cut || k - *last_cut >= min_scene_len)) {
      out.cut_frames.push_back(k);
      out.cut_timestamps.push_back(seq.frames[k].timestamp);
      last_cut = k;
    }
    prev = std::move(cur);
  }
  out.scene_count = static_cast<int>(out.cut_frames.size()) + 1;
  double span = duration > 0 ? duration : static_cast<double>(seq.size()) / seq.fps;
  out.dynamism_ratio = out.scene_count / span;
  return out;
}

enum class FilterKind { SortByViews, MinScenes, DurationRange, MaxSceneRatio, MinResolution, PerCategoryCap };

inline std::string_view filter_kind_name(FilterKind k) {
  switch (k) {
    case FilterKind::SortByViews: return "sort_by_views";
    case FilterKind::MinScenes: return "min_scenes";
    case FilterKind::DurationRange: return "duration_range";
    case FilterKind::MaxSceneRatio: return "max_scene_ratio";
    case FilterKind::MinResolution: return "min_resolution";
    case FilterKind::PerCategoryCap: return "category_cap";
  }
  return "?";
}

/// params by kind:
///   MinScenes {n}          scene_count > n
///   DurationRange {lo, hi} lo <= duration <= hi
///   MaxSceneRatio {r}      scene_count / duration <= r
///   MinResolution {px}     min(width, height) > px
///   PerCategoryCap {cap}   first `cap` survivors per category
struct FilterRule {
  FilterKind kind;
  std::vector<double> params;

  static FilterRule sort_by_views() { return {FilterKind::SortByViews, {}}; }
  static FilterRule min_scenes(int n) { return {FilterKind::MinScenes, {double(n)}}; }
  static FilterRule duration_range(double lo, double hi) { return {FilterKind::DurationRange, {lo, hi}}; }
  static FilterRule max_scene_ratio(double r) { return {FilterKind::MaxSceneRatio, {r}}; }
  static FilterRule min_resolution(int px) { return {FilterKind::MinResolution, {double(px)}}; }
  static FilterRule category_cap(int cap) { return {FilterKind::PerCategoryCap, {double(cap)}}; }

  bool scene_based() const { return kind == FilterKind::MinScenes || kind == FilterKind::MaxSceneRatio; }
  bool pure_predicate() const { return kind != FilterKind::SortByViews && kind != FilterKind::PerCategoryCap; }
};

inline void validate(const FilterRule& r) {
  auto fail = [&](const std::string& why) {
    throw Error("filter rule " + std::string(filter_kind_name(r.kind)) + ": " + why);
  };
  std::size_t expected = r.kind == FilterKind::SortByViews ? 0 : r.kind == FilterKind::DurationRange ? 2 : 1;
  if (r.params.size() != expected) fail("expects " + std::to_string(expected) + " parameter(s)");
  switch (r.kind) {
    case FilterKind::SortByViews: break;
    case FilterKind::MinScenes:
      if (r.params[0] < 0) fail("scene count must be >= 0");
      break;
    case FilterKind::DurationRange:
      if (!(r.params[0] < r.params[1])) fail("requires lo < hi");
      break;
    case FilterKind::MaxSceneRatio:
      if (!(r.params[0] > 0)) fail("ratio must be > 0");
      break;
    case FilterKind::MinResolution:
      if (!(r.params[0] > 0)) fail("resolution must be > 0");
      break;
    case FilterKind::PerCategoryCap:
      if (!(r.params[0] >= 1) || r.params[0] != std::floor(r.params[0])) fail("cap must be a positive integer");
      break;
  }
}

/// Parses "min_scenes:2", "duration_range:5:180", "sort_by_views", ...
inline FilterRule parse_rule(std::string_view text) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    auto c = text.find(':', pos);
    parts.emplace_back(text.substr(pos, c == std::string_view::npos ? text.size() - pos : c - pos));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  for (auto& p : parts) {
    auto b = p.find_first_not_of(" \t");
    auto e = p.find_last_not_of(" \t");
    p = b == std::string::npos ? "" : p.substr(b, e - b + 1);
  }
  static const std::map<std::string, FilterKind, std::less<>> kinds{
      {"sort_by_views", FilterKind::SortByViews},   {"min_scenes", FilterKind::MinScenes},
      {"duration_range", FilterKind::DurationRange}, {"max_scene_ratio", FilterKind::MaxSceneRatio},
      {"min_resolution", FilterKind::MinResolution}, {"category_cap", FilterKind::PerCategoryCap}};
  auto it = kinds.find(parts[0]);
  if (it == kinds.end()) throw Error("unknown filter rule '" + parts[0] + "'");
  FilterRule r{it->second, {}};
  for (std::size_t i = 1; i < parts.size(); ++i) {
    try {
      std::size_t used = 0;
      r.params.push_back(std::stod(parts[i], &used));
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
    } catch (const std::exception&) {
      throw Error("filter rule '" + std::string(text) + "': bad number '" + parts[i] + "'");
    }
  }
  validate(r);
  return r;
}

inline std::vector<FilterRule> parse_chain(std::string_view text) {
  std::vector<FilterRule> chain;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto c = text.find(',', pos);
    auto item = text.substr(pos, c == std::string_view::npos ? text.size() - pos : c - pos);
    if (item.find_first_not_of(" \t") != std::string_view::npos) chain.push_back(parse_rule(item));
    if (c == std::string_view::npos) break;
    pos = c + 1;
  }
  return chain;
}

inline std::string format_rule(const FilterRule& r) {
  std::string s(filter_kind_name(r.kind));
  for (double p : r.params) {
    std::ostringstream ss;
    ss << p;
    s += ":" + ss.str();
  }
  return s;
}

struct FilterVerdict {
  std::string asset_id;
  bool accepted = true;
  std::optional<FilterKind> failed_rule;
  std::map<std::string, double> measurements;
};

inline json to_json(const FilterVerdict& v) {
  return {{"asset_id", v.asset_id},
          {"accepted", v.accepted},
          {"failed_rule", v.failed_rule ? json(filter_kind_name(*v.failed_rule)) : json(nullptr)},
          {"measurements", v.measurements}};
}

/// Evaluates `chain` in order over the corpus. Pure predicates reject
/// individually; SortByViews reorders the current survivors by descending
/// view count (stable); PerCategoryCap keeps the first `cap` survivors of each
/// category in the current order. Verdicts come back in input order.
inline std::vector<FilterVerdict> apply_filters(const std::vector<VideoAsset>& assets,
                                                const std::vector<SceneAnalysis>& analyses,
                                                const std::vector<FilterRule>& chain) {
  for (const auto& r : chain) validate(r);

  std::unordered_map<std::string, const SceneAnalysis*> by_id;
  for (const auto& a : analyses) by_id[a.asset_id] = &a;
  bool needs_scenes = std::any_of(chain.begin(), chain.end(), [](const auto& r) { return r.scene_based(); });
  bool needs_views = std::any_of(chain.begin(), chain.end(),
                                 [](const auto& r) { return r.kind == FilterKind::SortByViews; });
  for (const auto& a : assets) {
    if (needs_scenes && !by_id.count(a.id)) throw Error("apply_filters: no scene analysis for " + a.id);
    if (needs_views && !a.view_count) throw Error("apply_filters: sort_by_views needs view_count for " + a.id);
  }

  std::vector<FilterVerdict> verdicts(assets.size());
  std::vector<std::size_t> survivors(assets.size());
  for (std::size_t i = 0; i < assets.size(); ++i) {
    verdicts[i].asset_id = assets[i].id;
    survivors[i] = i;
  }

  auto reject = [&](std::size_t i, FilterKind k) {
    verdicts[i].accepted = false;
    verdicts[i].failed_rule = k;
  };

  for (const auto& rule : chain) {
    std::vector<std::size_t> next;
    next.reserve(survivors.size());
    switch (rule.kind) {
      case FilterKind::SortByViews: {
        next = survivors;
        std::stable_sort(next.begin(), next.end(),
                         [&](std::size_t a, std::size_t b) { return *assets[a].view_count > *assets[b].view_count; });
        for (std::size_t i : next) verdicts[i].measurements["view_count"] = double(*assets[i].view_count);
        break;
      }
      case FilterKind::PerCategoryCap: {
        std::map<std::string, int> taken;
        for (std::size_t i : survivors) {
          int rank = ++taken[assets[i].category.value_or("")];
          verdicts[i].measurements["category_rank"] = rank;
          if (rank > rule.params[0])
            reject(i, rule.kind);
          else
            next.push_back(i);
        }
        break;
      }
      default: {
        for (std::size_t i : survivors) {
          const auto& a = assets[i];
          bool ok = true;
          switch (rule.kind) {
            case FilterKind::MinScenes: {
              int scenes = by_id.at(a.id)->scene_count;
              verdicts[i].measurements["scene_count"] = scenes;
              ok = scenes > rule.params[0];
              break;
            }
            case FilterKind::DurationRange:
              verdicts[i].measurements["duration"] = a.duration;
              ok = a.duration >= rule.params[0] && a.duration <= rule.params[1];
              break;
            case FilterKind::MaxSceneRatio: {
              double ratio = a.duration > 0 ? by_id.at(a.id)->scene_count / a.duration
                                            : by_id.at(a.id)->dynamism_ratio;
              verdicts[i].measurements["scene_ratio"] = ratio;
              ok = ratio <= rule.params[0];
              break;
            }
            case FilterKind::MinResolution: {
              int dim = std::min(a.width, a.height);
              verdicts[i].measurements["min_dimension"] = dim;
              ok = dim > rule.params[0];
              break;
            }
            default: break;
          }
          if (ok)
            next.push_back(i);
          else
            reject(i, rule.kind);
        }
      }
    }
    survivors = std::move(next);
  }
  return verdicts;
}

/// Named chains plus the per-source selection.
struct FilterChains {
  std::map<std::string, std::vector<FilterRule>> chains;
  std::map<Source, std::string> per_source;
  std::string default_chain = "default";

  static FilterChains defaults() {
    FilterChains c;
    c.chains["default"] = {FilterRule::min_scenes(2), FilterRule::duration_range(5, 180),
                           FilterRule::max_scene_ratio(0.5), FilterRule::min_resolution(480)};
    c.chains["shorts"] = {FilterRule::sort_by_views(),       FilterRule::min_scenes(2),
                          FilterRule::duration_range(5, 180), FilterRule::max_scene_ratio(0.5),
                          FilterRule::min_resolution(480),    FilterRule::category_cap(50)};
    c.per_source[Source::Vidal] = "shorts";
    return c;
  }

  const std::vector<FilterRule>& chain_for(Source s) const {
    auto it = per_source.find(s);
    const std::string& name = it == per_source.end() ? default_chain : it->second;
    auto ch = chains.find(name);
    if (ch == chains.end()) throw Error("filter chain '" + name + "' is not defined");
    return ch->second;
  }
};

/// Groups assets by source and applies each source's chain; verdicts in input order.
inline std::vector<FilterVerdict> apply_filter_chains(const std::vector<VideoAsset>& assets,
                                                      const std::vector<SceneAnalysis>& analyses,
                                                      const FilterChains& chains) {
  std::map<Source, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < assets.size(); ++i) groups[assets[i].source].push_back(i);
  std::vector<FilterVerdict> out(assets.size());
  for (const auto& [source, idx] : groups) {
    std::vector<VideoAsset> subset;
    for (std::size_t i : idx) subset.push_back(assets[i]);
    auto verdicts = apply_filters(subset, analyses, chains.chain_for(source));
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = std::move(verdicts[k]);
  }
  return out;
}

}  // namespace vidforge
