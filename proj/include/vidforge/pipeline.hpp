#pragma once

// Configuration loading and stage orchestration:
// filter -> caption -> qa -> assemble -> stats, each persisted under
// output_dir and resumable per asset.

#include <charconv>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vidforge/annotator.hpp"
#include "vidforge/caption_engine.hpp"
#include "vidforge/dataset_assembly.hpp"
#include "vidforge/media_ingest.hpp"
#include "vidforge/qa_engine.hpp"
#include "vidforge/scene_dynamics.hpp"

#ifndef VIDFORGE_DEFAULT_PROMPTS_DIR
#define VIDFORGE_DEFAULT_PROMPTS_DIR "prompts"
#endif

namespace vidforge {

class ConfigError : public Error {
public:
  ConfigError(const std::string& field, const std::string& msg) : Error(field + ": " + msg), field_(field) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

struct PipelineConfig {
  fs::path manifest;
  fs::path output_dir;
  fs::path prompts_dir = VIDFORGE_DEFAULT_PROMPTS_DIR;

  double fps = 1.0;
  std::string decoder_cmd;
  double scene_threshold = kDefaultCutThreshold;
  int min_scene_len = 1;
  FilterChains filters = FilterChains::defaults();

  caption::ScheduleParams schedule;
  int caption_max_tokens = 1024;
  double temperature = 0.7;

  std::string backend_kind = "mock";
  std::string endpoint;
  std::string model;
  std::string credential_env;
  std::uint64_t backend_seed = 0;
  BackendPolicy policy{3, 1.0, 30.0, 4, 0.0};

  qa::QAOptions qa;
  std::string embed_kind = "fallback";
  std::string embed_endpoint;
  std::string embed_model;
  std::string embed_credential_env;

  int workers = 4;
  std::uint64_t seed = 0;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

inline fs::path to_path(const std::string& v, const fs::path& base) {
  fs::path p(v);
  return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace config_detail

/// Applies one key=value setting; relative paths resolve against `base`.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value,
                          const fs::path& base = {}) {
  using namespace config_detail;
  auto i32 = [&](const std::string& k, const std::string& v) {
    auto n = to_int(k, v);
    if (n < INT32_MIN || n > INT32_MAX) throw ConfigError(k, "out of range");
    return static_cast<int>(n);
  };
  if (key == "manifest") c.manifest = to_path(value, base);
  else if (key == "output_dir") c.output_dir = to_path(value, base);
  else if (key == "caption.prompts_dir") c.prompts_dir = to_path(value, base);
  else if (key == "sampling.fps") c.fps = to_double(key, value);
  else if (key == "decoder.cmd") c.decoder_cmd = value;
  else if (key == "scene.threshold") c.scene_threshold = to_double(key, value);
  else if (key == "scene.min_scene_len") c.min_scene_len = i32(key, value);
  else if (key.rfind("filter.chain.", 0) == 0) {
    std::string name = key.substr(13);
    if (name.empty()) throw ConfigError(key, "missing chain name");
    try {
      c.filters.chains[name] = parse_chain(value);
    } catch (const Error& e) {
      throw ConfigError(key, e.what());
    }
  } else if (key.rfind("filter.source.", 0) == 0) {
    auto src = parse_source(key.substr(14));
    if (!src) throw ConfigError(key, "unknown source '" + key.substr(14) + "'");
    c.filters.per_source[*src] = value;
  } else if (key == "filter.default_chain") c.filters.default_chain = value;
  else if (key == "caption.clip_len") c.schedule.clip_len = to_double(key, value);
  else if (key == "caption.summary_period") c.schedule.summary_period = i32(key, value);
  else if (key == "caption.min_tail") c.schedule.min_tail = to_double(key, value);
  else if (key == "caption.max_tokens") c.caption_max_tokens = i32(key, value);
  else if (key == "backend.kind") c.backend_kind = value;
  else if (key == "backend.endpoint") c.endpoint = value;
  else if (key == "backend.model") c.model = value;
  else if (key == "backend.credential_env") c.credential_env = value;
  else if (key == "backend.seed") c.backend_seed = to_u64(key, value);
  else if (key == "backend.max_retries") c.policy.max_retries = i32(key, value);
  else if (key == "backend.backoff_base") c.policy.backoff_base = to_double(key, value);
  else if (key == "backend.backoff_ceiling") c.policy.backoff_ceiling = to_double(key, value);
  else if (key == "backend.max_in_flight") c.policy.max_in_flight = i32(key, value);
  else if (key == "backend.requests_per_minute") c.policy.requests_per_minute = to_double(key, value);
  else if (key == "backend.temperature") c.temperature = c.qa.temperature = to_double(key, value);
  else if (key == "qa.max_tokens") c.qa.max_tokens = i32(key, value);
  else if (key == "qa.dedup_threshold") c.qa.dedup_threshold = to_double(key, value);
  else if (key == "qa.mc_fraction") c.qa.mc_fraction = to_double(key, value);
  else if (key == "qa.mc_options") c.qa.mc_options = i32(key, value);
  else if (key == "embed.kind") c.embed_kind = value;
  else if (key == "embed.endpoint") c.embed_endpoint = value;
  else if (key == "embed.model") c.embed_model = value;
  else if (key == "embed.credential_env") c.embed_credential_env = value;
  else if (key == "workers") c.workers = i32(key, value);
  else if (key == "seed") c.seed = c.qa.seed = to_u64(key, value);
  else throw ConfigError(key, "unknown key");
}

inline void validate(const PipelineConfig& c) {
  if (c.manifest.empty()) throw ConfigError("manifest", "must be set");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must be set");
  if (!(c.fps > 0)) throw ConfigError("sampling.fps", "must be > 0");
  if (c.decoder_cmd.empty()) throw ConfigError("decoder.cmd", "must be set");
  for (const char* slot : {"{input}", "{outdir}", "{fps}"})
    if (c.decoder_cmd.find(slot) == std::string::npos)
      throw ConfigError("decoder.cmd", std::string("missing placeholder ") + slot);
  if (!(c.scene_threshold > 0)) throw ConfigError("scene.threshold", "must be > 0");
  if (c.min_scene_len < 1) throw ConfigError("scene.min_scene_len", "must be >= 1");
  for (const auto& [name, chain] : c.filters.chains) {
    try {
      for (const auto& r : chain) validate(r);
    } catch (const Error& e) {
      throw ConfigError("filter.chain." + name, e.what());
    }
  }
  if (!c.filters.chains.count(c.filters.default_chain))
    throw ConfigError("filter.default_chain", "chain '" + c.filters.default_chain + "' is not defined");
  for (const auto& [src, name] : c.filters.per_source)
    if (!c.filters.chains.count(name))
      throw ConfigError("filter.source." + std::string(source_name(src)), "chain '" + name + "' is not defined");
  auto rethrow_as_config = [](auto&& check) {
    try {
      check();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {  // message is "field: reason"
      std::string m = e.what();
      auto colon = m.find(": ");
      if (colon == std::string::npos) throw ConfigError("config", m);
      throw ConfigError(m.substr(0, colon), m.substr(colon + 2));
    }
  };
  rethrow_as_config([&] { caption::validate(c.schedule); });
  if (c.caption_max_tokens < 1) throw ConfigError("caption.max_tokens", "must be > 0");
  if (!(c.temperature >= 0)) throw ConfigError("backend.temperature", "must be >= 0");
  if (c.backend_kind != "mock" && c.backend_kind != "remote")
    throw ConfigError("backend.kind", "must be mock or remote");
  if (c.backend_kind == "remote") {
    if (c.endpoint.empty()) throw ConfigError("backend.endpoint", "must be set for a remote backend");
    if (c.model.empty()) throw ConfigError("backend.model", "must be set for a remote backend");
  }
  rethrow_as_config([&] { validate(c.policy); });
  if (!(c.qa.dedup_threshold > 0 && c.qa.dedup_threshold <= 1))
    throw ConfigError("qa.dedup_threshold", "must be in (0, 1]");
  if (!(c.qa.mc_fraction >= 0 && c.qa.mc_fraction <= 1)) throw ConfigError("qa.mc_fraction", "must be in [0, 1]");
  if (c.qa.mc_options < 2 || c.qa.mc_options > 26) throw ConfigError("qa.mc_options", "must be in [2, 26]");
  if (c.qa.max_tokens < 1) throw ConfigError("qa.max_tokens", "must be > 0");
  if (c.embed_kind != "fallback" && c.embed_kind != "remote")
    throw ConfigError("embed.kind", "must be fallback or remote");
  if (c.embed_kind == "remote" && (c.embed_endpoint.empty() || c.embed_model.empty()))
    throw ConfigError("embed.endpoint", "endpoint and model must be set for a remote embedder");
  if (c.workers < 1) throw ConfigError("workers", "must be >= 1");
}

/// Parses `key = value` lines ('#' starts a comment line) and applies them
/// over the defaults; `overrides` ("key=value") are applied last.
inline PipelineConfig parse_config(std::string_view text, const fs::path& base = {},
                                   const std::vector<std::string>& overrides = {}) {
  PipelineConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto apply_line = [&](const std::string& raw, const std::string& where) {
    std::string l = config_detail::trim(raw);
    if (l.empty() || l[0] == '#') return;
    auto eq = l.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
    std::string key = config_detail::trim(l.substr(0, eq));
    if (key.empty()) throw ConfigError(where, "empty key");
    apply_setting(c, key, config_detail::trim(l.substr(eq + 1)), base);
  };
  while (std::getline(in, line)) apply_line(line, "line " + std::to_string(++lineno));
  for (const auto& o : overrides) apply_line(o, "override '" + o + "'");
  validate(c);
  return c;
}

inline PipelineConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {}) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const Error& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config(text, fs::absolute(path).parent_path(), overrides);
}

// ---------------------------------------------------------------------------
// Stages

struct StageSummary {
  std::string stage;
  json counts = json::object();
  std::vector<std::pair<std::string, std::string>> failures;  // (asset, error)

  json to_json() const {
    json f = json::array();
    for (const auto& [a, e] : failures) f.push_back({{"asset_id", a}, {"error", e}});
    return {{"stage", stage}, {"counts", counts}, {"failures", f}};
  }
};

class StageError : public Error {
public:
  using Error::Error;
};

/// File stem for per-asset outputs: the id itself when it is filesystem-safe,
/// otherwise a sanitized form with a hash suffix.
inline std::string asset_stem(const std::string& id) {
  std::string s;
  bool changed = id.empty() || id[0] == '.';
  for (char c : id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') {
      s.push_back(c);
    } else {
      s.push_back('_');
      changed = true;
    }
  }
  if (changed) s += "-" + util::sha256_hex(id).substr(0, 12);
  return s;
}

class Pipeline {
public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    fs::create_directories(cfg_.output_dir);
  }

  const PipelineConfig& config() const { return cfg_; }

  fs::path out(const std::string& name) const { return cfg_.output_dir / name; }
  fs::path caption_file(const std::string& id) const { return out("captions") / (asset_stem(id) + ".jsonl"); }
  fs::path qa_file(const std::string& id) const { return out("qa") / (asset_stem(id) + ".jsonl"); }
  fs::path qa_done_file(const std::string& id) const { return out("qa") / (asset_stem(id) + ".report.json"); }

  // -- filter ---------------------------------------------------------------

  StageSummary stage_filter() {
    StageSummary sum{"filter", json::object(), {}};
    Manifest m = load_manifest_checked();
    sum.counts["manifest_assets"] = m.assets.size();
    sum.counts["manifest_rejections"] = m.rejections.size();
    for (const auto& r : m.rejections)
      sum.failures.emplace_back(r.id.empty() ? "line " + std::to_string(r.line) : r.id, r.reason);

    std::string params = scene_params_digest();
    std::map<std::string, SceneAnalysis> cached;
    for (const auto& row : util::read_jsonl_tolerant(out("scenes.jsonl")))
      if (row.value("params", "") == params) cached.emplace(row.at("asset_id").get<std::string>(),
                                                            scene_analysis_from_json(row));

    std::vector<std::optional<SceneAnalysis>> results(m.assets.size());
    std::vector<std::string> errors(m.assets.size());
    std::size_t resumed = 0;
    for (std::size_t i = 0; i < m.assets.size(); ++i)
      if (auto it = cached.find(m.assets[i].id); it != cached.end()) {
        results[i] = it->second;
        ++resumed;
      }
    util::JsonlAppender sink(out("scenes.jsonl"));
    util::parallel_for(m.assets.size(), workers(), [&](std::size_t i) {
      if (results[i]) return;
      try {
        auto seq = extract_frames(m.assets[i], SamplingSpec{cfg_.fps}, cfg_.decoder_cmd);
        auto a = detect_cuts(seq, cfg_.scene_threshold, static_cast<std::size_t>(cfg_.min_scene_len),
                             m.assets[i].duration);
        json row = to_json(a);
        row["params"] = params;
        sink.append(row);
        results[i] = std::move(a);
      } catch (const DecoderError& e) {
        errors[i] = std::string(e.what()) + (e.stderr_text().empty() ? "" : ": " + e.stderr_text());
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });

    std::vector<VideoAsset> analyzed;
    std::vector<SceneAnalysis> analyses;
    std::vector<json> scene_rows;
    for (std::size_t i = 0; i < m.assets.size(); ++i) {
      if (!results[i]) {
        sum.failures.emplace_back(m.assets[i].id, errors[i]);
        continue;
      }
      analyzed.push_back(m.assets[i]);
      analyses.push_back(*results[i]);
      json row = to_json(*results[i]);
      row["params"] = params;
      scene_rows.push_back(row);
    }
    util::write_jsonl_atomic(out("scenes.jsonl"), scene_rows);

    auto verdicts = apply_filter_chains(analyzed, analyses, cfg_.filters);
    std::vector<json> rows;
    std::size_t accepted = 0;
    for (const auto& v : verdicts) {
      rows.push_back(to_json(v));
      accepted += v.accepted ? 1 : 0;
    }
    util::write_jsonl_atomic(out("verdicts.jsonl"), rows);
    sum.counts["analyzed"] = analyzed.size();
    sum.counts["resumed"] = resumed;
    sum.counts["accepted"] = accepted;
    sum.counts["rejected"] = verdicts.size() - accepted;
    return sum;
  }

  // -- caption --------------------------------------------------------------

  StageSummary stage_caption() {
    StageSummary sum{"caption", json::object(), {}};
    auto assets = accepted_assets();
    auto prompts = caption::PromptTemplates::load(cfg_.prompts_dir);
    auto client = make_client();
    fs::create_directories(out("captions"));
    caption::CaptionOptions opt{cfg_.schedule, cfg_.caption_max_tokens, cfg_.temperature};

    std::vector<std::string> errors(assets.size());
    std::vector<int> status(assets.size(), 0);  // 1 resumed, 2 captioned
    std::vector<std::size_t> produced(assets.size(), 0);
    util::parallel_for(assets.size(), workers(), [&](std::size_t i) {
      const auto& a = assets[i];
      try {
        if (load_level3(a.id)) {
          status[i] = 1;
          return;
        }
        auto seq = extract_frames(a, SamplingSpec{cfg_.fps}, cfg_.decoder_cmd);
        auto caps = caption::run_captioning(a, seq, *client, prompts, opt, caption_file(a.id));
        produced[i] = caps.size();
        status[i] = 2;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    std::size_t resumed = 0, captioned = 0, captions = 0;
    for (std::size_t i = 0; i < assets.size(); ++i) {
      if (status[i] == 0) sum.failures.emplace_back(assets[i].id, errors[i]);
      resumed += status[i] == 1;
      captioned += status[i] == 2;
      captions += produced[i];
    }
    sum.counts["accepted"] = assets.size();
    sum.counts["captioned"] = captioned;
    sum.counts["resumed"] = resumed;
    sum.counts["captions_generated"] = captions;
    return sum;
  }

  // -- qa -------------------------------------------------------------------

  StageSummary stage_qa() {
    StageSummary sum{"qa", json::object(), {}};
    auto assets = accepted_assets();
    auto client = make_client();
    fs::create_directories(out("qa"));

    std::vector<std::string> errors(assets.size());
    std::vector<int> status(assets.size(), 0);  // 1 resumed, 2 generated, 3 no caption
    util::parallel_for(assets.size(), workers(), [&](std::size_t i) {
      const auto& a = assets[i];
      try {
        if (fs::exists(qa_done_file(a.id))) {
          status[i] = 1;
          return;
        }
        auto l3 = load_level3(a.id);
        if (!l3) {
          status[i] = 3;
          return;
        }
        auto embedder = make_embedder();
        auto res = qa::run_qa(a.id, l3->text, *client, *embedder, cfg_.qa);
        std::vector<json> rows;
        for (const auto& p : res.open_ended) rows.push_back(qa::to_json(p));
        for (const auto& p : res.multi_choice) rows.push_back(qa::to_json(p));
        util::write_jsonl_atomic(qa_file(a.id), rows);
        json done{{"asset_id", a.id}, {"report", qa::to_json(res.report)}, {"diagnostics", res.diagnostics}};
        util::write_file_atomic(qa_done_file(a.id), done.dump(2) + "\n");
        status[i] = 2;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });

    std::size_t resumed = 0, generated = 0, skipped = 0, oe = 0, mc = 0;
    qa::FilterReport total;
    json per_video = json::array();
    for (std::size_t i = 0; i < assets.size(); ++i) {
      if (status[i] == 0) {
        sum.failures.emplace_back(assets[i].id, errors[i]);
        continue;
      }
      if (status[i] == 3) {
        ++skipped;
        continue;
      }
      resumed += status[i] == 1;
      generated += status[i] == 2;
      json done = json::parse(util::read_file(qa_done_file(assets[i].id)));
      const auto& r = done.at("report");
      total.kept += r.at("kept").get<std::size_t>();
      total.dropped_duplicate += r.at("dropped_duplicate").get<std::size_t>();
      total.dropped_blacklist += r.at("dropped_blacklist").get<std::size_t>();
      for (const auto& p : load_qa(assets[i].id)) (p.multi_choice() ? mc : oe) += 1;
      per_video.push_back(done);
    }
    json report = qa::to_json(total);
    report.erase("dropped");
    report["open_ended"] = oe;
    report["multi_choice"] = mc;
    report["videos"] = per_video;
    util::write_file_atomic(out("qa_report.json"), report.dump(2) + "\n");
    sum.counts["generated"] = generated;
    sum.counts["resumed"] = resumed;
    sum.counts["skipped_uncaptioned"] = skipped;
    sum.counts["open_ended"] = oe;
    sum.counts["multi_choice"] = mc;
    sum.counts["dropped_duplicate"] = total.dropped_duplicate;
    sum.counts["dropped_blacklist"] = total.dropped_blacklist;
    return sum;
  }

  // -- assemble -------------------------------------------------------------

  StageSummary stage_assemble() {
    StageSummary sum{"assemble", json::object(), {}};
    auto assets = accepted_assets();
    std::vector<dataset::CaptionInput> caps;
    std::vector<qa::QAPair> pairs;
    for (const auto& a : assets) {
      auto l3 = load_level3(a.id);
      if (!l3) continue;
      caps.push_back({a.id, l3->text});
      if (!fs::exists(qa_done_file(a.id))) continue;
      for (auto& p : load_qa(a.id)) pairs.push_back(std::move(p));
    }
    auto records = dataset::assemble(assets, caps, pairs);
    std::vector<json> rows;
    for (const auto& r : records) rows.push_back(dataset::to_json(r));
    util::write_jsonl_atomic(out("dataset.jsonl"), rows);
    sum.counts["records"] = records.size();
    sum.counts["videos"] = caps.size();
    return sum;
  }

  // -- stats ----------------------------------------------------------------

  StageSummary stage_stats() {
    StageSummary sum{"stats", json::object(), {}};
    if (!fs::exists(out("dataset.jsonl"))) throw StageError("stats: " + out("dataset.jsonl").string() + " not found");
    std::vector<dataset::InstructionRecord> records;
    for (const auto& row : util::read_jsonl_tolerant(out("dataset.jsonl")))
      records.push_back(dataset::record_from_json(row));
    auto stats = dataset::compute_stats(records);
    util::write_file_atomic(out("stats.json"), dataset::to_json(stats).dump(2) + "\n");
    util::write_file_atomic(out("stats.txt"), dataset::format_table(stats));
    sum.counts["records"] = records.size();
    for (auto t : dataset::kAllTasks) sum.counts[std::string(dataset::task_name(t))] = stats.total(t);
    return sum;
  }

  std::optional<caption::Caption> load_level3(const std::string& id) const {
    auto rows = util::read_jsonl_tolerant(caption_file(id));
    for (const auto& r : rows) {
      auto c = caption::caption_from_json(r);
      if (c.level == caption::Level::L3) return c;
    }
    return std::nullopt;
  }

  std::vector<qa::QAPair> load_qa(const std::string& id) const {
    std::vector<qa::QAPair> out;
    for (const auto& r : util::read_jsonl_tolerant(qa_file(id))) out.push_back(qa::qa_from_json(r));
    return out;
  }

  std::vector<VideoAsset> accepted_assets() const {
    if (!fs::exists(out("verdicts.jsonl")))
      throw StageError("no verdicts at " + out("verdicts.jsonl").string() + "; run the filter stage first");
    std::map<std::string, bool> accepted;
    for (const auto& row : util::read_jsonl_tolerant(out("verdicts.jsonl")))
      accepted[row.at("asset_id").get<std::string>()] = row.at("accepted").get<bool>();
    std::vector<VideoAsset> outv;
    for (const auto& a : load_manifest_checked().assets)
      if (auto it = accepted.find(a.id); it != accepted.end() && it->second) outv.push_back(a);
    return outv;
  }

private:
  std::size_t workers() const { return static_cast<std::size_t>(cfg_.workers); }

  Manifest load_manifest_checked() const {
    try {
      return load_manifest(cfg_.manifest);
    } catch (const Error& e) {
      throw StageError(std::string("manifest: ") + e.what());
    }
  }

  std::string scene_params_digest() const {
    return util::Sha256{}
        .field(format_fps(cfg_.fps))
        .field(cfg_.decoder_cmd)
        .field(std::to_string(cfg_.scene_threshold))
        .field(std::to_string(cfg_.min_scene_len))
        .hex()
        .substr(0, 16);
  }

  std::shared_ptr<AnnotationClient> make_client() {
    std::lock_guard lock(mu_);
    if (client_) return client_;
    std::shared_ptr<Backend> backend;
    if (cfg_.backend_kind == "mock")
      backend = std::make_shared<MockBackend>(cfg_.backend_seed);
    else
      backend = std::make_shared<RemoteBackend>(cfg_.endpoint, cfg_.model, cfg_.credential_env);
    audit_ = std::make_shared<util::JsonlAppender>(out("audit.jsonl"));
    client_ = std::make_shared<AnnotationClient>(backend, cfg_.policy, audit_);
    return client_;
  }

  std::unique_ptr<qa::Embedder> make_embedder() const {
    if (cfg_.embed_kind == "remote")
      return std::make_unique<qa::RemoteEmbedder>(cfg_.embed_endpoint, cfg_.embed_model, cfg_.embed_credential_env);
    return std::make_unique<qa::FallbackEmbedder>();
  }

  PipelineConfig cfg_;
  std::mutex mu_;
  std::shared_ptr<util::JsonlAppender> audit_;
  std::shared_ptr<AnnotationClient> client_;
};

inline constexpr std::array<std::string_view, 5> kStages{"filter", "caption", "qa", "assemble", "stats"};

struct RunSummary {
  std::vector<StageSummary> stages;
  std::optional<std::string> fatal;  // stage error that halted the run

  bool ok() const {
    if (fatal) return false;
    return std::all_of(stages.begin(), stages.end(), [](const auto& s) { return s.failures.empty(); });
  }

  json to_json() const {
    json st = json::array();
    for (const auto& s : stages) st.push_back(s.to_json());
    json j{{"ok", ok()}, {"stages", st}};
    if (fatal) j["fatal"] = *fatal;
    return j;
  }
};

inline StageSummary run_stage(Pipeline& p, std::string_view stage) {
  if (stage == "filter") return p.stage_filter();
  if (stage == "caption") return p.stage_caption();
  if (stage == "qa") return p.stage_qa();
  if (stage == "assemble") return p.stage_assemble();
  if (stage == "stats") return p.stage_stats();
  throw Error("unknown stage '" + std::string(stage) + "'");
}

/// Runs the stages in order up to and including `stop_after`, writing
/// summary.json. Per-asset failures do not halt the run; a stage error does.
inline RunSummary run_pipeline(const PipelineConfig& cfg, std::string_view stop_after = "stats") {
  if (std::find(kStages.begin(), kStages.end(), stop_after) == kStages.end())
    throw Error("unknown stage '" + std::string(stop_after) + "'");
  Pipeline p(cfg);
  RunSummary sum;
  for (auto stage : kStages) {
    try {
      sum.stages.push_back(run_stage(p, stage));
    } catch (const std::exception& e) {
      sum.fatal = std::string(stage) + ": " + e.what();
      break;
    }
    if (stage == stop_after) break;
  }
  util::write_file_atomic(p.out("summary.json"), sum.to_json().dump(2) + "\n");
  return sum;
}

}  // namespace vidforge
