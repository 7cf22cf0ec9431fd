#pragma once

// Question-answer generation from whole-video descriptions, plus the two
// post-filters: question deduplication by embedding similarity and the
// hedging-answer blacklist.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vidforge/annotator.hpp"
#include "vidforge/question_types.hpp"

namespace vidforge::qa {

inline const QuestionType* find_type(std::string_view name) {
  auto norm = [](std::string_view s) {
    std::string out;
    for (char c : s)
      if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
    return out;
  };
  static const std::map<std::string, std::string_view> aliases{
      {"finegrainedactionunderstanding", "Fine-Grained-Action"},
      {"plotunderstanding", "Plot-Understanding"},
      {"nonexistentactionswithexistentscenedepictions", "Non-Existent-Actions"},
      {"timeorderunderstanding", "Time-Order"},
  };
  std::string key = norm(name);
  if (auto it = aliases.find(key); it != aliases.end()) key = norm(it->second);
  for (const auto& t : kQuestionTypes)
    if (norm(t.name) == key) return &t;
  return nullptr;
}

inline std::vector<const QuestionType*> all_types() {
  std::vector<const QuestionType*> out;
  for (const auto& t : kQuestionTypes) out.push_back(&t);
  return out;
}

struct QAPair {
  std::string asset_id;
  std::string qtype;
  std::string question;
  std::string answer;
  std::optional<std::vector<std::string>> options;  // multi-choice only
  std::optional<std::size_t> correct;               // index into options

  bool multi_choice() const { return options.has_value(); }
  bool operator==(const QAPair&) const = default;
};

inline void validate(const QAPair& p) {
  if (!p.options) {
    if (p.correct) throw Error("open-ended QA pair carries a correct option index");
    return;
  }
  if (p.options->size() < 2) throw Error("multi-choice QA pair needs at least 2 options");
  if (!p.correct || *p.correct >= p.options->size()) throw Error("multi-choice QA pair lacks a valid correct index");
  if ((*p.options)[*p.correct] != p.answer) throw Error("multi-choice answer differs from the marked option");
}

inline json to_json(const QAPair& p) {
  json j{{"asset_id", p.asset_id}, {"qtype", p.qtype}, {"question", p.question}, {"answer", p.answer}};
  if (p.options) {
    j["options"] = *p.options;
    j["correct"] = *p.correct;
  }
  return j;
}

inline QAPair qa_from_json(const json& j) {
  QAPair p;
  p.asset_id = j.at("asset_id").get<std::string>();
  p.qtype = j.at("qtype").get<std::string>();
  p.question = j.at("question").get<std::string>();
  p.answer = j.at("answer").get<std::string>();
  if (j.contains("options")) {
    p.options = j.at("options").get<std::vector<std::string>>();
    p.correct = j.at("correct").get<std::size_t>();
  }
  validate(p);
  return p;
}

// ---------------------------------------------------------------------------
// Prompt assembly

inline constexpr std::string_view kGuidelineOnePerDimension = "Generate 1 question-answer pair for each dimension.";

inline std::string render_task_definitions(const std::vector<const QuestionType*>& types) {
  std::string out;
  for (const auto* t : types) {
    out += "# ";
    out += t->name;
    out += ": ";
    out += t->definition;
    out += "\n";
    for (std::size_t i = 0; i < t->exemplars.size(); ++i) {
      auto n = std::to_string(i + 1);
      out += "## caption-" + n + ": " + std::string(t->exemplars[i].caption) + "\n";
      out += "## question-" + n + ": " + std::string(t->exemplars[i].question) + "\n";
      out += "## answer-" + n + ": " + std::string(t->exemplars[i].answer) + "\n";
    }
  }
  return out;
}

struct QAPrompt {
  std::string system;
  std::string user;
};

inline QAPrompt assemble_qa_prompt(std::string_view level3_caption, const std::vector<const QuestionType*>& types) {
  if (types.empty()) throw Error("assemble_qa_prompt: no question types");
  QAPrompt p;
  p.system =
      "### Task:\n"
      "Given a detailed description that summarizes the content of a video, generate question-answer pairs based on "
      "the description to help humans better understand the video. The question-answer pairs should be faithful to "
      "the content of the video description and developed from different dimensions to promote comprehensive "
      "understanding of the video.\n"
      "Here are some question dimensions and their explanations and exampled question-answer pairs for reference:\n" +
      render_task_definitions(types) +
      "#### Guidelines For Question-Answer Pairs Generation:\n"
      "- Read the video description provided carefully, paying attention to the content, such as the scene where the "
      "video takes place, the main characters and their behaviors, and the development of the events.\n"
      "- Generate appropriate question-answer pairs based on the description. The question-answer pairs should cover "
      "as many question dimensions and not deviate from the content of the video description.\n"
      "- " + std::string(kGuidelineOnePerDimension) + "\n"
      "- If the description does not support a question for a dimension, return None as its Question and Answer.\n"
      "### Output Format:\n"
      "1. Your output should be formed in a JSON file.\n"
      "2. Only provide the Python dictionary string.\n"
      "Your response should look like:\n"
      "[{\"Dimension\": <dimension-1>, \"Question\": <question-1>, \"Answer\": <answer-1>},\n"
      "{\"Dimension\": <dimension-2>, \"Question\": <question-2>, \"Answer\": <answer-2>}...]\n";
  p.user = "Please generate question-answer pairs for the following video description:\nDescription: " +
           std::string(level3_caption) + "\n";
  return p;
}

// ---------------------------------------------------------------------------
// Response parsing

/// Finds the first parseable JSON array in free text (code fences and
/// surrounding prose are tolerated).
inline std::optional<json> extract_json_array(std::string_view raw) {
  auto last = raw.rfind(']');
  if (last == std::string_view::npos) return std::nullopt;
  for (auto open = raw.find('['); open != std::string_view::npos && open < last; open = raw.find('[', open + 1)) {
    for (auto close = last; close != std::string_view::npos && close > open; close = raw.rfind(']', close - 1)) {
      auto j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
      if (!j.is_discarded() && j.is_array()) return j;
      if (close == 0) break;
    }
  }
  return std::nullopt;
}

inline bool is_none_text(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return true;
  auto e = s.find_last_not_of(" \t\r\n.");
  std::string core = util::to_lower(s.substr(b, e == std::string::npos ? 0 : e - b + 1));
  return core == "none" || core == "null" || core == "n/a";
}

struct ParseResult {
  std::vector<QAPair> pairs;
  std::vector<std::string> diagnostics;
  bool parsed = false;  // false: response needs a retry
};

/// Keeps at most one pair per known dimension (first wins); entries with an
/// unknown dimension, a None/empty question or a None/empty answer are dropped.
inline ParseResult parse_qa_response(std::string_view raw, const std::vector<const QuestionType*>& types,
                                     const std::string& asset_id = "") {
  ParseResult r;
  auto arr = extract_json_array(raw);
  if (!arr) {
    r.diagnostics.push_back("no JSON list found in response");
    return r;
  }
  r.parsed = true;
  std::map<std::string_view, bool> seen;
  auto field = [](const json& e, const char* a, const char* b) -> std::optional<std::string> {
    for (const char* k : {a, b}) {
      auto it = e.find(k);
      if (it == e.end() || it->is_null()) continue;
      if (it->is_string()) return it->get<std::string>();
      return it->dump();
    }
    return std::nullopt;
  };
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& e = (*arr)[i];
    if (!e.is_object()) {
      r.diagnostics.push_back("entry " + std::to_string(i) + ": not an object");
      continue;
    }
    auto dim = field(e, "Dimension", "dimension");
    const QuestionType* t = dim ? find_type(*dim) : nullptr;
    if (!t || std::none_of(types.begin(), types.end(), [&](const auto* x) { return x == t; })) {
      r.diagnostics.push_back("entry " + std::to_string(i) + ": unknown dimension '" + dim.value_or("") + "'");
      continue;
    }
    auto q = field(e, "Question", "question");
    auto a = field(e, "Answer", "answer");
    if (!q || !a || is_none_text(*q) || is_none_text(*a)) {
      r.diagnostics.push_back("entry " + std::to_string(i) + ": " + std::string(t->name) + " returned None");
      continue;
    }
    if (seen[t->name]) {
      r.diagnostics.push_back("entry " + std::to_string(i) + ": duplicate " + std::string(t->name) + " ignored");
      continue;
    }
    seen[t->name] = true;
    r.pairs.push_back({asset_id, std::string(t->name), *q, *a, std::nullopt, std::nullopt});
  }
  return r;
}

// ---------------------------------------------------------------------------
// Filters

struct DroppedPair {
  std::string asset_id;
  std::string qtype;
  std::string question;
  std::string reason;  // "duplicate" | "blacklist"
};

struct FilterReport {
  std::size_t kept = 0;
  std::size_t dropped_duplicate = 0;
  std::size_t dropped_blacklist = 0;
  std::vector<DroppedPair> dropped;

  std::size_t input() const { return kept + dropped_duplicate + dropped_blacklist; }

  /// Combines reports of two consecutive filters over the same input.
  FilterReport then(const FilterReport& next) const {
    FilterReport r = *this;
    r.kept = next.kept;
    r.dropped_duplicate += next.dropped_duplicate;
    r.dropped_blacklist += next.dropped_blacklist;
    r.dropped.insert(r.dropped.end(), next.dropped.begin(), next.dropped.end());
    return r;
  }
};

inline json to_json(const FilterReport& r) {
  json dropped = json::array();
  for (const auto& d : r.dropped)
    dropped.push_back({{"asset_id", d.asset_id}, {"qtype", d.qtype}, {"question", d.question}, {"reason", d.reason}});
  return {{"kept", r.kept},
          {"dropped_duplicate", r.dropped_duplicate},
          {"dropped_blacklist", r.dropped_blacklist},
          {"dropped", dropped}};
}

inline constexpr std::array<std::string_view, 5> kBlacklistPrefixes{
    "does not specify", "does not mention", "does not specifically", "does not depict", "does not show"};

inline bool blacklisted(std::string_view answer) {
  auto b = answer.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return false;
  std::string lower = util::to_lower(answer.substr(b));
  return std::any_of(kBlacklistPrefixes.begin(), kBlacklistPrefixes.end(),
                     [&](std::string_view p) { return lower.rfind(p, 0) == 0; });
}

inline std::pair<std::vector<QAPair>, FilterReport> blacklist_filter(const std::vector<QAPair>& pairs) {
  std::pair<std::vector<QAPair>, FilterReport> out;
  for (const auto& p : pairs) {
    if (blacklisted(p.answer)) {
      ++out.second.dropped_blacklist;
      out.second.dropped.push_back({p.asset_id, p.qtype, p.question, "blacklist"});
    } else {
      out.first.push_back(p);
    }
  }
  out.second.kept = out.first.size();
  return out;
}

class EmbeddingError : public Error {
public:
  using Error::Error;
};

class Embedder {
public:
  virtual ~Embedder() = default;
  /// One L2-normalized vector per text; all vectors of one call share a space.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

inline std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline void l2_normalize(std::vector<double>& v) {
  double n = 0;
  for (double x : v) n += x * x;
  if (n == 0) return;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
}

/// Bag-of-words counts over lowercased alphanumeric words, L2-normalized;
/// the vocabulary is built per call.
class FallbackEmbedder : public Embedder {
public:
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::map<std::string, std::size_t> vocab;
    std::vector<std::vector<std::string>> toks;
    for (const auto& t : texts) {
      toks.push_back(word_tokens(t));
      for (const auto& w : toks.back()) vocab.emplace(w, 0);
    }
    std::size_t i = 0;
    for (auto& [w, idx] : vocab) idx = i++;
    std::vector<std::vector<double>> out;
    for (const auto& ts : toks) {
      std::vector<double> v(vocab.size(), 0.0);
      for (const auto& w : ts) v[vocab[w]] += 1.0;
      l2_normalize(v);
      out.push_back(std::move(v));
    }
    return out;
  }
};

/// OpenAI-style embeddings endpoint: {model, input:[...]} -> data[i].embedding.
class RemoteEmbedder : public Embedder {
public:
  RemoteEmbedder(std::string endpoint, std::string model, std::string credential_env = "")
      : endpoint_(std::move(endpoint)), model_(std::move(model)) {
    split_url(endpoint_);
    if (!credential_env.empty()) {
      const char* v = std::getenv(credential_env.c_str());
      if (!v) throw Error("embed.credential_env: environment variable " + credential_env + " is not set");
      key_ = v;
    }
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) return {};
    try {
      json resp = post_json(endpoint_, {{"model", model_}, {"input", texts}}, key_, 120);
      const auto& data = resp.at("data");
      if (data.size() != texts.size()) throw EmbeddingError("embedding count mismatch");
      std::vector<std::vector<double>> out(texts.size());
      for (const auto& d : data) {
        std::size_t idx = d.value("index", static_cast<std::size_t>(&d - &data[0]));
        if (idx >= out.size()) throw EmbeddingError("embedding index out of range");
        out[idx] = d.at("embedding").get<std::vector<double>>();
        l2_normalize(out[idx]);
      }
      return out;
    } catch (const EmbeddingError&) {
      throw;
    } catch (const std::exception& e) {
      throw EmbeddingError(std::string("embedding backend failed: ") + e.what());
    }
  }

private:
  std::string endpoint_;
  std::string model_;
  std::string key_;
};

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw EmbeddingError("embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

inline constexpr double kDefaultDedupThreshold = 0.95;

/// Within each video, drops a pair whose question embedding has cosine >=
/// threshold with any earlier kept question. Order-stable.
inline std::pair<std::vector<QAPair>, FilterReport> dedup(const std::vector<QAPair>& pairs, Embedder& embedder,
                                                          double threshold = kDefaultDedupThreshold) {
  if (!(threshold > 0 && threshold <= 1)) throw Error("dedup threshold must be in (0, 1]");
  constexpr double tol = 1e-9;

  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> by_asset;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto [it, fresh] = by_asset.try_emplace(pairs[i].asset_id);
    if (fresh) order.push_back(pairs[i].asset_id);
    it->second.push_back(i);
  }

  std::vector<bool> keep(pairs.size(), false);
  for (const auto& asset : order) {
    const auto& idx = by_asset[asset];
    std::vector<std::string> questions;
    for (std::size_t i : idx) questions.push_back(pairs[i].question);
    auto vecs = embedder.embed(questions);
    if (vecs.size() != idx.size()) throw EmbeddingError("embedder returned the wrong number of vectors");
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      bool dup = std::any_of(kept.begin(), kept.end(),
                             [&](std::size_t j) { return cosine(vecs[k], vecs[j]) >= threshold - tol; });
      if (!dup) {
        kept.push_back(k);
        keep[idx[k]] = true;
      }
    }
  }

  std::pair<std::vector<QAPair>, FilterReport> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (keep[i]) {
      out.first.push_back(pairs[i]);
    } else {
      ++out.second.dropped_duplicate;
      out.second.dropped.push_back({pairs[i].asset_id, pairs[i].qtype, pairs[i].question, "duplicate"});
    }
  }
  out.second.kept = out.first.size();
  return out;
}

// ---------------------------------------------------------------------------
// Multiple choice

struct McOutcome {
  std::optional<QAPair> pair;
  std::string skipped_reason;
};

inline AnnotationRequest mc_request(const QAPair& pair, int n_options) {
  AnnotationRequest req;
  req.system =
      "You write answer options for multiple-choice questions about videos. Incorrect options must be plausible "
      "for the video, clearly wrong given the correct answer, similar in length and style to it, and distinct from "
      "each other.";
  req.user = "Question: " + pair.question + "\nCorrect answer: " + pair.answer + "\n\nWrite exactly " +
             std::to_string(n_options - 1) +
             " incorrect options. Respond with a JSON list of strings and nothing else.";
  req.tag = "mc:" + pair.asset_id + ":" + pair.qtype;
  return req;
}

/// Asks the backend for n_options - 1 distractors and inserts the correct
/// answer at a position derived from (seed, asset, question).
inline McOutcome generate_mc(const QAPair& pair, AnnotationClient& client, int n_options = 5, std::uint64_t seed = 0,
                             int max_tokens = 512, double temperature = 0.7) {
  if (pair.multi_choice()) throw Error("generate_mc: pair is already multi-choice");
  if (n_options < 2) throw Error("generate_mc: n_options must be >= 2");
  auto req = mc_request(pair, n_options);
  req.max_tokens = max_tokens;
  req.temperature = temperature;
  std::string raw = client.complete(req);

  auto arr = extract_json_array(raw);
  if (!arr) return {std::nullopt, "no JSON list in distractor response"};
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string answer_key = util::to_lower(trim(pair.answer));
  std::vector<std::string> distractors;
  std::vector<std::string> keys{answer_key};
  for (const auto& e : *arr) {
    if (!e.is_string()) continue;
    std::string d = trim(e.get<std::string>());
    std::string key = util::to_lower(d);
    if (d.empty() || std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
    keys.push_back(key);
    distractors.push_back(d);
  }
  auto need = static_cast<std::size_t>(n_options - 1);
  if (distractors.size() < need)
    return {std::nullopt, "backend produced " + std::to_string(distractors.size()) + " distinct distractors, need " +
                              std::to_string(need)};
  distractors.resize(need);

  util::SplitMix64 rng(util::seed_from(std::to_string(seed) + "\x1f" + pair.asset_id + "\x1f" + pair.question));
  auto pos = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n_options)));
  QAPair mc = pair;
  mc.options = distractors;
  mc.options->insert(mc.options->begin() + static_cast<std::ptrdiff_t>(pos), pair.answer);
  mc.correct = pos;
  validate(mc);
  return {std::move(mc), {}};
}

// ---------------------------------------------------------------------------
// Per-video stage

struct QAOptions {
  double dedup_threshold = kDefaultDedupThreshold;
  double mc_fraction = 0.2;
  int mc_options = 5;
  std::uint64_t seed = 0;
  int max_tokens = 2048;
  double temperature = 0.7;
};

struct VideoQA {
  std::vector<QAPair> open_ended;
  std::vector<QAPair> multi_choice;
  FilterReport report;
  std::vector<std::string> diagnostics;
};

/// Whether an open-ended pair is also turned into a multiple-choice one.
inline bool selected_for_mc(const QAPair& p, const QAOptions& opt) {
  if (opt.mc_fraction <= 0) return false;
  if (opt.mc_fraction >= 1) return true;
  auto h = util::seed_from("mc\x1f" + std::to_string(opt.seed) + "\x1f" + p.asset_id + "\x1f" + p.qtype);
  return static_cast<double>(h >> 11) / 9007199254740992.0 < opt.mc_fraction;
}

/// One generation call over all types, parse, blacklist, dedup, then
/// multiple-choice conversion for the selected survivors.
inline VideoQA run_qa(const std::string& asset_id, std::string_view level3_caption, AnnotationClient& client,
                      Embedder& embedder, const QAOptions& opt = {},
                      const std::vector<const QuestionType*>& types = all_types()) {
  auto prompt = assemble_qa_prompt(level3_caption, types);
  AnnotationRequest req{prompt.system, prompt.user, {}, opt.max_tokens, opt.temperature, "qa:" + asset_id};
  std::string raw = client.complete(req);
  auto parsed = parse_qa_response(raw, types, asset_id);
  if (!parsed.parsed) throw Error("QA response for " + asset_id + " could not be parsed");

  VideoQA out;
  out.diagnostics = parsed.diagnostics;
  auto [clean, r1] = blacklist_filter(parsed.pairs);
  auto [unique, r2] = dedup(clean, embedder, opt.dedup_threshold);
  out.report = r1.then(r2);
  out.open_ended = std::move(unique);
  for (const auto& p : out.open_ended) {
    if (!selected_for_mc(p, opt)) continue;
    auto mc = generate_mc(p, client, opt.mc_options, opt.seed, 512, opt.temperature);
    if (mc.pair)
      out.multi_choice.push_back(std::move(*mc.pair));
    else
      out.diagnostics.push_back("mc skipped for " + p.qtype + ": " + mc.skipped_reason);
  }
  return out;
}

}  // namespace vidforge::qa
