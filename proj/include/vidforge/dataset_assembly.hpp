#pragma once

// Instruction-record assembly and corpus statistics.

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "vidforge/media_ingest.hpp"
#include "vidforge/qa_engine.hpp"

namespace vidforge::dataset {

enum class Task { Caption, OpenEnded, MultiChoice };

inline constexpr std::array<Task, 3> kAllTasks{Task::Caption, Task::OpenEnded, Task::MultiChoice};

inline std::string_view task_name(Task t) {
  switch (t) {
    case Task::Caption: return "caption";
    case Task::OpenEnded: return "open_ended";
    case Task::MultiChoice: return "multi_choice";
  }
  return "?";
}

inline Task parse_task(std::string_view s) {
  for (Task t : kAllTasks)
    if (task_name(t) == s) return t;
  throw Error("unknown task '" + std::string(s) + "'");
}

inline constexpr std::string_view kVideoToken = "<video>";

struct Turn {
  std::string from;  // "human" | "gpt"
  std::string value;
  bool operator==(const Turn&) const = default;
};

struct InstructionRecord {
  std::string id;
  std::string asset_id;
  std::string video;  // asset uri
  std::string source;
  Task task = Task::Caption;
  std::vector<Turn> conversations;
  double duration = 0;
  std::optional<std::string> qtype;

  bool operator==(const InstructionRecord&) const = default;
};

inline void validate(const InstructionRecord& r) {
  if (r.conversations.empty()) throw Error("record " + r.id + ": empty conversation");
  for (std::size_t i = 0; i < r.conversations.size(); ++i) {
    const char* want = i % 2 == 0 ? "human" : "gpt";
    if (r.conversations[i].from != want) throw Error("record " + r.id + ": turns must alternate human/gpt");
  }
  if (r.conversations.size() % 2 != 0) throw Error("record " + r.id + ": last turn must be gpt");
  if (r.conversations[0].value.rfind(std::string(kVideoToken), 0) != 0)
    throw Error("record " + r.id + ": first human turn lacks the video token");
  if (r.task == Task::Caption && r.conversations.size() != 2)
    throw Error("record " + r.id + ": caption records have exactly one exchange");
  if ((r.task == Task::Caption) == r.qtype.has_value())
    throw Error("record " + r.id + ": qtype is set exactly for QA records");
}

inline json to_json(const InstructionRecord& r) {
  json conv = json::array();
  for (const auto& t : r.conversations) conv.push_back({{"from", t.from}, {"value", t.value}});
  json meta{{"asset_id", r.asset_id}, {"duration", r.duration}};
  if (r.qtype) meta["qtype"] = *r.qtype;
  return {{"id", r.id},           {"video", r.video},          {"source", r.source},
          {"task", task_name(r.task)}, {"conversations", conv}, {"metadata", meta}};
}

inline InstructionRecord record_from_json(const json& j) {
  InstructionRecord r;
  r.id = j.at("id").get<std::string>();
  r.video = j.at("video").get<std::string>();
  r.source = j.at("source").get<std::string>();
  r.task = parse_task(j.at("task").get<std::string>());
  for (const auto& t : j.at("conversations"))
    r.conversations.push_back({t.at("from").get<std::string>(), t.at("value").get<std::string>()});
  const auto& m = j.at("metadata");
  r.asset_id = m.at("asset_id").get<std::string>();
  r.duration = m.at("duration").get<double>();
  if (m.contains("qtype")) r.qtype = m.at("qtype").get<std::string>();
  validate(r);
  return r;
}

inline const std::vector<std::string>& default_caption_instructions() {
  static const std::vector<std::string> pool{
      "Please describe this video.",
      "Describe what happens in this video in detail.",
      "Give a detailed account of the events in this video.",
      "What is happening in this video? Describe it thoroughly.",
      "Summarize the content of this video.",
  };
  return pool;
}

struct InstructionTemplates {
  std::vector<std::string> caption = default_caption_instructions();
  std::string mc_suffix = "Answer with the option's letter from the given choices.";
};

inline std::string option_letter(std::size_t i) {
  if (i >= 26) throw Error("too many options to letter");
  return std::string(1, static_cast<char>('A' + i));
}

inline std::string record_id(const std::string& asset_id, Task task, const std::string& qtype,
                             const std::string& question) {
  return util::Sha256{}.field(asset_id).field(task_name(task)).field(qtype).field(question).hex().substr(0, 24);
}

struct CaptionInput {
  std::string asset_id;
  std::string text;  // level-3
};

/// One caption record per captioned asset, then its open-ended and
/// multi-choice records in input order. Assets without a caption are skipped.
inline std::vector<InstructionRecord> assemble(const std::vector<VideoAsset>& assets,
                                               const std::vector<CaptionInput>& captions,
                                               const std::vector<qa::QAPair>& pairs,
                                               const InstructionTemplates& templates = {}) {
  if (templates.caption.empty()) throw Error("assemble: empty caption instruction pool");
  std::unordered_map<std::string, const VideoAsset*> by_id;
  for (const auto& a : assets) by_id[a.id] = &a;
  std::unordered_map<std::string, const CaptionInput*> caption_of;
  for (const auto& c : captions) {
    if (!by_id.count(c.asset_id)) throw Error("assemble: caption references unknown asset " + c.asset_id);
    if (!caption_of.emplace(c.asset_id, &c).second) throw Error("assemble: two captions for asset " + c.asset_id);
  }
  std::unordered_map<std::string, std::vector<const qa::QAPair*>> pairs_of;
  for (const auto& p : pairs) {
    if (!caption_of.count(p.asset_id)) throw Error("assemble: QA pair references uncaptioned asset " + p.asset_id);
    qa::validate(p);
    pairs_of[p.asset_id].push_back(&p);
  }

  std::vector<InstructionRecord> out;
  auto video_turn = [](const std::string& instruction) { return std::string(kVideoToken) + "\n" + instruction; };
  for (const auto& a : assets) {
    auto cit = caption_of.find(a.id);
    if (cit == caption_of.end()) continue;
    InstructionRecord cap;
    cap.asset_id = a.id;
    cap.video = a.uri;
    cap.source = std::string(source_name(a.source));
    cap.task = Task::Caption;
    cap.duration = a.duration;
    const auto& instr = templates.caption[util::seed_from(a.id) % templates.caption.size()];
    cap.conversations = {{"human", video_turn(instr)}, {"gpt", cit->second->text}};
    cap.id = record_id(a.id, Task::Caption, "", "");
    out.push_back(std::move(cap));

    auto emit = [&](bool mc) {
      for (const auto* p : pairs_of[a.id]) {
        if (p->multi_choice() != mc) continue;
        InstructionRecord r;
        r.asset_id = a.id;
        r.video = a.uri;
        r.source = std::string(source_name(a.source));
        r.task = mc ? Task::MultiChoice : Task::OpenEnded;
        r.duration = a.duration;
        r.qtype = p->qtype;
        if (mc) {
          std::string human = p->question + "\n";
          for (std::size_t i = 0; i < p->options->size(); ++i)
            human += option_letter(i) + ". " + (*p->options)[i] + "\n";
          human += templates.mc_suffix;
          r.conversations = {{"human", video_turn(human)},
                             {"gpt", option_letter(*p->correct) + ". " + p->answer}};
        } else {
          r.conversations = {{"human", video_turn(p->question)}, {"gpt", p->answer}};
        }
        r.id = record_id(a.id, r.task, p->qtype, p->question);
        out.push_back(std::move(r));
      }
    };
    emit(false);
    emit(true);
  }

  std::unordered_map<std::string, bool> ids;
  for (const auto& r : out) {
    validate(r);
    if (!ids.emplace(r.id, true).second) throw Error("assemble: duplicate record id " + r.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

inline constexpr double kDurationBin = 10.0;
inline constexpr std::size_t kWordBin = 20;

/// Per (source, task) counts plus two histograms keyed by bin start:
/// video durations (one entry per caption record) and caption word counts.
struct CorpusStats {
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  std::map<std::int64_t, std::uint64_t> duration_hist;
  std::map<std::int64_t, std::uint64_t> caption_words_hist;

  void add(const std::string& source, Task task, std::uint64_t n = 1) {
    counts[source][std::string(task_name(task))] += n;
  }

  std::uint64_t total(Task task) const {
    std::uint64_t s = 0;
    for (const auto& [src, row] : counts)
      if (auto it = row.find(std::string(task_name(task))); it != row.end()) s += it->second;
    return s;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (Task t : kAllTasks) s += total(t);
    return s;
  }

  std::uint64_t source_total(const std::string& source) const {
    std::uint64_t s = 0;
    if (auto it = counts.find(source); it != counts.end())
      for (const auto& [task, n] : it->second) s += n;
    return s;
  }

  /// Associative and commutative; the empty stats object is the identity.
  CorpusStats& merge(const CorpusStats& o) {
    for (const auto& [src, row] : o.counts)
      for (const auto& [task, n] : row) counts[src][task] += n;
    for (const auto& [b, n] : o.duration_hist) duration_hist[b] += n;
    for (const auto& [b, n] : o.caption_words_hist) caption_words_hist[b] += n;
    return *this;
  }

  bool operator==(const CorpusStats&) const = default;
};

inline std::int64_t duration_bin(double seconds) {
  return static_cast<std::int64_t>(std::floor(seconds / kDurationBin)) * static_cast<std::int64_t>(kDurationBin);
}

inline std::int64_t word_bin(std::size_t words) {
  return static_cast<std::int64_t>(words / kWordBin * kWordBin);
}

inline CorpusStats compute_stats(const std::vector<InstructionRecord>& records) {
  CorpusStats s;
  for (const auto& r : records) {
    s.add(r.source, r.task);
    if (r.task == Task::Caption) {
      ++s.duration_hist[duration_bin(r.duration)];
      ++s.caption_words_hist[word_bin(util::split_whitespace(r.conversations.back().value).size())];
    }
  }
  return s;
}

inline json to_json(const CorpusStats& s) {
  json sources = json::object();
  for (const auto& [src, row] : s.counts) {
    json r = json::object();
    for (Task t : kAllTasks) {
      auto it = row.find(std::string(task_name(t)));
      r[std::string(task_name(t))] = it == row.end() ? 0 : it->second;
    }
    sources[src] = r;
  }
  json totals{{"all", s.total()}};
  for (Task t : kAllTasks) totals[std::string(task_name(t))] = s.total(t);
  json dh = json::object(), wh = json::object();
  for (const auto& [b, n] : s.duration_hist) dh[std::to_string(b)] = n;
  for (const auto& [b, n] : s.caption_words_hist) wh[std::to_string(b)] = n;
  return {{"per_source", sources},
          {"totals", totals},
          {"duration_hist", {{"bin_seconds", kDurationBin}, {"bins", dh}}},
          {"caption_words_hist", {{"bin_words", kWordBin}, {"bins", wh}}}};
}

inline std::string format_table(const CorpusStats& s) {
  std::ostringstream out;
  auto row = [&](const std::string& name, std::uint64_t c, std::uint64_t oe, std::uint64_t mc) {
    out << std::left << std::setw(14) << name << std::right << std::setw(10) << c << std::setw(12) << oe
        << std::setw(14) << mc << std::setw(10) << (c + oe + mc) << "\n";
  };
  out << std::left << std::setw(14) << "source" << std::right << std::setw(10) << "caption" << std::setw(12)
      << "open_ended" << std::setw(14) << "multi_choice" << std::setw(10) << "total" << "\n";
  auto cell = [](const std::map<std::string, std::uint64_t>& r, Task t) -> std::uint64_t {
    auto it = r.find(std::string(task_name(t)));
    return it == r.end() ? 0 : it->second;
  };
  for (const auto& [src, r] : s.counts)
    row(src, cell(r, Task::Caption), cell(r, Task::OpenEnded), cell(r, Task::MultiChoice));
  row("TOTAL", s.total(Task::Caption), s.total(Task::OpenEnded), s.total(Task::MultiChoice));
  return out.str();
}

}  // namespace vidforge::dataset
