#pragma once

// Annotation backends behind one interface: a chat-completion HTTP client and
// a deterministic offline mock. AnnotationClient adds retries, a shared rate
// limit, bounded batch concurrency and the audit log.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <zlib.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "vidforge/media_ingest.hpp"

namespace vidforge {

struct AnnotationRequest {
  std::string system;
  std::string user;
  std::vector<Image> images;
  int max_tokens = 1024;
  double temperature = 0.7;
  /// "<kind>:<asset>:<detail>"; kind is one of caption-l1, caption-l2,
  /// caption-l3, qa, mc. The mock backend keys its output shape on it.
  std::string tag;
};

inline void validate(const AnnotationRequest& r) {
  if (r.max_tokens <= 0) throw Error("annotation request " + r.tag + ": max_tokens must be > 0");
  if (!(r.temperature >= 0)) throw Error("annotation request " + r.tag + ": temperature must be >= 0");
}

inline std::string_view request_kind(const AnnotationRequest& r) {
  std::string_view t = r.tag;
  return t.substr(0, t.find(':'));
}

struct BackendPolicy {
  int max_retries = 3;
  double backoff_base = 1.0;     // seconds
  double backoff_ceiling = 30.0; // seconds
  int max_in_flight = 4;
  double requests_per_minute = 60.0;

  /// Delay before retry number `attempt` (0-based): base * 2^attempt, capped.
  double backoff(int attempt) const {
    double d = backoff_base;
    for (int i = 0; i < attempt && d < backoff_ceiling; ++i) d *= 2.0;
    return std::min(d, backoff_ceiling);
  }
};

inline void validate(const BackendPolicy& p) {
  if (p.max_retries < 0) throw Error("backend.max_retries: must be >= 0");
  if (!(p.backoff_base > 0)) throw Error("backend.backoff_base: must be > 0");
  if (!(p.backoff_ceiling > 0)) throw Error("backend.backoff_ceiling: must be > 0");
  if (p.max_in_flight < 1) throw Error("backend.max_in_flight: must be > 0");
  if (!(p.requests_per_minute >= 0)) throw Error("backend.requests_per_minute: must be >= 0 (0 = unlimited)");
}

class BackendError : public Error {
public:
  BackendError(const std::string& what, bool retryable, int status = 0)
      : Error(what), retryable_(retryable), status_(status) {}
  bool retryable() const { return retryable_; }
  int status() const { return status_; }

private:
  bool retryable_;
  int status_;
};

class RetryExhausted : public Error {
public:
  RetryExhausted(const std::string& what, int attempts) : Error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

private:
  int attempts_;
};

/// One attempt, no retries. Implementations must be safe for concurrent calls.
class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string complete_once(const AnnotationRequest& req) = 0;
};

// ---------------------------------------------------------------------------
// Mock backend

namespace mock_detail {

inline constexpr std::array<std::string_view, 12> kSubjects{
    "a man in a blue jacket", "a woman with a red scarf", "a young child", "a brown dog",
    "two cyclists",           "a chef in a white apron", "an elderly man", "a group of friends",
    "a girl in a yellow dress", "a delivery driver",      "a street musician", "a cat"};
inline constexpr std::array<std::string_view, 12> kActions{
    "walks slowly toward",  "picks up",         "points at",        "runs past",
    "carefully arranges",   "looks closely at", "waves toward",     "sets down",
    "pushes",               "examines",         "circles around",   "opens"};
inline constexpr std::array<std::string_view, 12> kObjects{
    "a wooden table", "a bicycle",    "a stack of books", "a cardboard box",
    "a coffee cup",   "a red ball",   "a laptop",         "a shopping cart",
    "a guitar",       "a small boat", "a kitchen knife",  "a door"};
inline constexpr std::array<std::string_view, 10> kPlaces{
    "in a sunlit kitchen",       "on a busy street",     "in a quiet park", "inside a small shop",
    "near a river bank",         "in a crowded hallway", "on a rooftop",    "in a classroom",
    "at the edge of a parking lot", "in a cozy living room"};
inline constexpr std::array<std::string_view, 6> kCamera{
    "stays steady", "pans slowly to the left", "pans to the right", "zooms in gradually",
    "follows the movement", "tilts upward"};

inline std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

inline std::string clause(util::SplitMix64& rng) {
  std::string s(kSubjects[rng.below(kSubjects.size())]);
  s += " ";
  s += kActions[rng.below(kActions.size())];
  s += " ";
  s += kObjects[rng.below(kObjects.size())];
  s += " ";
  s += kPlaces[rng.below(kPlaces.size())];
  return s;
}

/// Dimension names announced by "# <Name>:" lines of a QA system message.
inline std::vector<std::string> dimensions_in(const std::string& system) {
  std::vector<std::string> out;
  std::istringstream in(system);
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 3 || line[0] != '#' || line[1] != ' ') continue;
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    out.push_back(line.substr(2, colon - 2));
  }
  return out;
}

}  // namespace mock_detail

/// Output is a pure function of (system, user, image digests, seed, tag kind).
class MockBackend : public Backend {
public:
  explicit MockBackend(std::uint64_t seed = 0) : seed_(seed) {}

  std::string request_hash(const AnnotationRequest& req) const {
    util::Sha256 h;
    h.field(req.system).field(req.user);
    for (const auto& img : req.images) h.field(image_digest(img));
    h.field(std::to_string(seed_));
    return h.hex();
  }

  std::string complete_once(const AnnotationRequest& req) override {
    std::string hash = request_hash(req);
    util::SplitMix64 rng(util::seed_from(hash));
    std::string_view kind = request_kind(req);
    if (kind == "qa") return render_qa(req, rng);
    if (kind == "mc") return render_distractors(req, rng);
    return render_caption(kind, rng);
  }

private:
  static std::string render_caption(std::string_view kind, util::SplitMix64& rng) {
    using namespace mock_detail;
    std::string text;
    if (kind == "caption-l2") {
      text = "So far in the video, " + clause(rng) + ". Then " + clause(rng) + ", while " + clause(rng) + ".";
    } else if (kind == "caption-l3") {
      text = "Overall, the video follows " + std::string(kSubjects[rng.below(kSubjects.size())]) +
             ". It begins as " + clause(rng) + ". Later, " + clause(rng) + ". Finally, " + clause(rng) +
             ", and the camera " + std::string(kCamera[rng.below(kCamera.size())]) + ".";
    } else {
      text = "In this segment, " + clause(rng) + ". The camera " + std::string(kCamera[rng.below(kCamera.size())]) +
             " as " + clause(rng) + ".";
    }
    return text;
  }

  static std::string render_qa(const AnnotationRequest& req, util::SplitMix64& rng) {
    using namespace mock_detail;
    json out = json::array();
    std::string last_question;
    for (const auto& dim : dimensions_in(req.system)) {
      if (rng.below(4) == 0) continue;  // seeded subset of the dimensions
      std::string subject(kSubjects[rng.below(kSubjects.size())]);
      std::string question;
      if (!last_question.empty() && rng.below(10) == 0)
        question = last_question;
      else
        question = "In terms of " + to_lower_copy(dim) + ", what does " + subject + " do " +
                   std::string(kPlaces[rng.below(kPlaces.size())]) + "?";
      std::string answer;
      switch (rng.below(16)) {
        case 0: answer = "None"; break;
        case 1: answer = "Does not mention what happens next."; break;
        default: answer = capitalize(subject) + " " + std::string(kActions[rng.below(kActions.size())]) + " " +
                          std::string(kObjects[rng.below(kObjects.size())]) + ".";
      }
      out.push_back({{"Dimension", dim}, {"Question", question}, {"Answer", answer}});
      last_question = question;
      if (rng.below(16) == 0)
        out.push_back({{"Dimension", dim}, {"Question", "Another " + question}, {"Answer", answer}});
    }
    std::string body = out.dump();
    if (rng.below(2) == 0) return "```json\n" + body + "\n```";
    return body;
  }

  static std::string render_distractors(const AnnotationRequest& req, util::SplitMix64& rng) {
    using namespace mock_detail;
    std::size_t n = 4;
    std::smatch m;
    static const std::regex count_re("exactly ([0-9]+) incorrect");
    if (std::regex_search(req.user, m, count_re)) n = std::stoul(m[1].str());
    // Draw (subject, action, object) combinations without replacement.
    std::vector<std::size_t> combos(kSubjects.size() * kActions.size());
    for (std::size_t i = 0; i < combos.size(); ++i) combos[i] = i;
    json out = json::array();
    for (std::size_t k = 0; k < n && k < combos.size(); ++k) {
      std::size_t j = k + rng.below(combos.size() - k);
      std::swap(combos[k], combos[j]);
      std::size_t c = combos[k];
      out.push_back(capitalize(std::string(kSubjects[c / kActions.size()])) + " " +
                    std::string(kActions[c % kActions.size()]) + " " +
                    std::string(kObjects[rng.below(kObjects.size())]) + ".");
    }
    return out.dump();
  }

  static std::string to_lower_copy(const std::string& s) { return util::to_lower(s); }

  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Remote backend

/// PNG (8-bit RGB, no filtering) with zlib doing the deflate and CRC work.
inline std::string encode_png(const Image& img) {
  auto be32 = [](std::string& s, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto chunk = [&](std::string& out, const char* type, const std::string& data) {
    be32(out, static_cast<std::uint32_t>(data.size()));
    std::string body = std::string(type, 4) + data;
    out += body;
    be32(out, static_cast<std::uint32_t>(
                  crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
  };
  std::string raw;
  raw.reserve(img.rgb.size() + static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(img.at(0, y)), static_cast<std::size_t>(img.width) * 3);
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::string z(zlen, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &zlen, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK)
    throw Error("png: deflate failed");
  z.resize(zlen);

  std::string ihdr;
  be32(ihdr, static_cast<std::uint32_t>(img.width));
  be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit, truecolor, deflate, no filter, no interlace

  std::string png("\x89PNG\r\n\x1a\n", 8);
  chunk(png, "IHDR", ihdr);
  chunk(png, "IDAT", z);
  chunk(png, "IEND", "");
  return png;
}

/// Chat-completion request body; frames become base64 PNG data URLs in order.
inline json chat_request_body(const AnnotationRequest& req, const std::string& model) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", req.user}});
  for (const auto& img : req.images) {
    std::string png = encode_png(img);
    std::string b64 = util::base64({reinterpret_cast<const unsigned char*>(png.data()), png.size()});
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + b64}}}});
  }
  json messages = json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  messages.push_back({{"role", "user"}, {"content", content}});
  return {{"model", model}, {"messages", messages}, {"max_tokens", req.max_tokens}, {"temperature", req.temperature}};
}

struct HttpEndpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

inline HttpEndpoint split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error("backend.endpoint: not an http(s) URL: " + url);
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

/// POSTs JSON and classifies failures: transport errors, 429 and 5xx are
/// retryable, every other non-2xx is not.
inline json post_json(const std::string& url, const json& body, const std::string& api_key, double timeout_s) {
  auto ep = split_url(url);
  httplib::Client cli(ep.base);
  auto secs = static_cast<time_t>(timeout_s);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto res = cli.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) throw BackendError("transport error: " + httplib::to_string(res.error()), true);
  if (res->status == 429 || res->status >= 500)
    throw BackendError("HTTP " + std::to_string(res->status), true, res->status);
  if (res->status < 200 || res->status >= 300)
    throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body, false, res->status);
  try {
    return json::parse(res->body);
  } catch (const json::parse_error&) {
    throw BackendError("response is not JSON", false, res->status);
  }
}

class RemoteBackend : public Backend {
public:
  /// `credential_env` names the environment variable holding the API key.
  RemoteBackend(std::string endpoint, std::string model, std::string credential_env = "", double timeout_s = 120)
      : endpoint_(std::move(endpoint)), model_(std::move(model)), timeout_s_(timeout_s) {
    split_url(endpoint_);
    if (!credential_env.empty()) {
      const char* v = std::getenv(credential_env.c_str());
      if (!v) throw Error("backend.credential_env: environment variable " + credential_env + " is not set");
      api_key_ = v;
    }
  }

  std::string complete_once(const AnnotationRequest& req) override {
    json resp = post_json(endpoint_, chat_request_body(req, model_), api_key_, timeout_s_);
    try {
      return resp.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
      throw BackendError("response lacks choices[0].message.content", false);
    }
  }

private:
  std::string endpoint_;
  std::string model_;
  std::string api_key_;
  double timeout_s_;
};

// ---------------------------------------------------------------------------
// Client: retries, rate limit, batches, audit

/// Spaces request starts at least 60/rpm seconds apart across all callers;
/// rpm = 0 disables limiting.
class RateLimiter {
public:
  explicit RateLimiter(double requests_per_minute)
      : interval_(requests_per_minute > 0 ? std::chrono::duration_cast<Clock::duration>(
                                                std::chrono::duration<double>(60.0 / requests_per_minute))
                                          : Clock::duration::zero()) {}

  void acquire() {
    if (interval_ == Clock::duration::zero()) return;
    Clock::time_point slot;
    {
      std::lock_guard lock(mu_);
      auto now = Clock::now();
      slot = std::max(now, next_);
      next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
  }

private:
  using Clock = std::chrono::steady_clock;
  std::mutex mu_;
  Clock::duration interval_;
  Clock::time_point next_{};
};

struct AnnotationResult {
  std::optional<std::string> text;
  std::string error;
  int attempts = 0;
  bool exhausted = false;  // failed only because retries ran out

  bool ok() const { return text.has_value(); }
};

class AnnotationClient {
public:
  using Sleeper = std::function<void(double seconds)>;

  AnnotationClient(std::shared_ptr<Backend> backend, BackendPolicy policy,
                   std::shared_ptr<util::JsonlAppender> audit = nullptr)
      : backend_(std::move(backend)),
        policy_((validate(policy), policy)),
        limiter_(policy.requests_per_minute),
        audit_(std::move(audit)) {
    sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }

  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }
  const BackendPolicy& policy() const { return policy_; }

  /// Retries retryable failures up to max_retries times with capped
  /// exponential backoff; non-retryable errors surface immediately.
  std::string complete(const AnnotationRequest& req) {
    auto r = attempt(req);
    if (r.ok()) return *r.text;
    if (r.exhausted) throw RetryExhausted(req.tag + ": " + r.error, r.attempts);
    throw BackendError(req.tag + ": " + r.error, false);
  }

  /// Results in input order; a failed item never aborts the batch.
  std::vector<AnnotationResult> complete_batch(const std::vector<AnnotationRequest>& reqs) {
    std::vector<AnnotationResult> out(reqs.size());
    util::parallel_for(reqs.size(), static_cast<std::size_t>(policy_.max_in_flight),
                       [&](std::size_t i) { out[i] = attempt(reqs[i]); });
    return out;
  }

private:
  AnnotationResult attempt(const AnnotationRequest& req) {
    AnnotationResult r;
    try {
      validate(req);
    } catch (const Error& e) {
      r.error = e.what();
      log(req, r);
      return r;
    }
    for (int i = 0;; ++i) {
      limiter_.acquire();
      ++r.attempts;
      try {
        r.text = backend_->complete_once(req);
        break;
      } catch (const BackendError& e) {
        r.error = e.what();
        if (!e.retryable()) break;
        if (i >= policy_.max_retries) {
          r.exhausted = true;
          break;
        }
      } catch (const std::exception& e) {
        r.error = e.what();
        break;
      }
      sleep_(policy_.backoff(i));
    }
    if (r.ok()) r.error.clear();
    log(req, r);
    return r;
  }

  void log(const AnnotationRequest& req, const AnnotationResult& r) {
    if (!audit_) return;
    json digests = json::array();
    for (const auto& img : req.images) digests.push_back(image_digest(img));
    json row{{"tag", req.tag},
             {"system", req.system},
             {"user", req.user},
             {"image_digests", digests},
             {"max_tokens", req.max_tokens},
             {"temperature", req.temperature},
             {"attempts", r.attempts}};
    if (r.ok())
      row["response"] = *r.text;
    else
      row["error"] = r.error;
    audit_->append(row);
  }

  std::shared_ptr<Backend> backend_;
  BackendPolicy policy_;
  RateLimiter limiter_;
  std::shared_ptr<util::JsonlAppender> audit_;
  Sleeper sleep_;
};

}  // namespace vidforge
