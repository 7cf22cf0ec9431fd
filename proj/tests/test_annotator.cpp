#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "support.hpp"

using namespace vidforge;

namespace {

AnnotationRequest req(std::string user, std::string tag = "caption-l1:v:L1#1") {
  AnnotationRequest r;
  r.system = "sys";
  r.user = std::move(user);
  r.tag = std::move(tag);
  return r;
}

BackendPolicy fast_policy(int retries = 3, int in_flight = 1) { return {retries, 1.0, 30.0, in_flight, 0}; }

/// Scripted outcomes: each call pops the next one; "!r" is a retryable
/// error, "!f" a fatal one, anything else is returned as text.
class ScriptedBackend : public Backend {
public:
  explicit ScriptedBackend(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string complete_once(const AnnotationRequest&) override {
    std::string s = script_.at(calls_++);
    if (s == "!r") throw BackendError("transient", true, 503);
    if (s == "!f") throw BackendError("bad request", false, 400);
    return s;
  }
  int calls() const { return calls_; }

private:
  std::vector<std::string> script_;
  int calls_ = 0;
};

/// Tracks the peak number of concurrent calls.
class SlowBackend : public Backend {
public:
  std::string complete_once(const AnnotationRequest& r) override {
    int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --active_;
    if (r.user == "poison") throw BackendError("poisoned item", false, 400);
    return "ok:" + r.user;
  }
  int peak() const { return peak_; }

private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

}  // namespace

TEST(MockBackend, DeterministicForEqualRequests) {
  MockBackend m(42);
  EXPECT_EQ(m.complete_once(req("hello")), m.complete_once(req("hello")));
  EXPECT_EQ(MockBackend(42).complete_once(req("hello")), m.complete_once(req("hello")));
}

TEST(MockBackend, HashDependsOnEveryInput) {
  MockBackend m(42);
  auto base = req("hello");
  auto h = m.request_hash(base);
  auto other_user = req("hello!");
  auto other_sys = base;
  other_sys.system = "sys2";
  auto with_image = base;
  with_image.images.push_back(synthetic::solid_frame(2, 2, 1, 2, 3));
  auto other_image = base;
  other_image.images.push_back(synthetic::solid_frame(2, 2, 1, 2, 4));
  EXPECT_NE(h, m.request_hash(other_user));
  EXPECT_NE(h, m.request_hash(other_sys));
  EXPECT_NE(h, m.request_hash(with_image));
  EXPECT_NE(m.request_hash(with_image), m.request_hash(other_image));
  EXPECT_NE(h, MockBackend(43).request_hash(base));
}

TEST(MockBackend, DistractorCountFollowsTheRequest) {
  MockBackend m(1);
  auto r = req("Question: q\nCorrect answer: a\n\nWrite exactly 6 incorrect options.", "mc:v:Temporal");
  auto j = json::parse(m.complete_once(r));
  ASSERT_EQ(j.size(), 6u);
  std::set<std::string> distinct(j.begin(), j.end());
  EXPECT_EQ(distinct.size(), 6u);
}

TEST(Policy, BackoffDoublesUpToCeiling) {
  BackendPolicy p{5, 1.0, 30.0, 1, 0};
  std::vector<double> got;
  for (int i = 0; i < 7; ++i) got.push_back(p.backoff(i));
  EXPECT_EQ(got, (std::vector<double>{1, 2, 4, 8, 16, 30, 30}));
}

TEST(Policy, ValidationNamesTheField) {
  try {
    validate(BackendPolicy{3, 1, 30, 0, 60});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("backend.max_in_flight"), std::string::npos);
  }
  EXPECT_THROW(validate(BackendPolicy{-1, 1, 30, 1, 60}), Error);
  EXPECT_THROW(validate(BackendPolicy{1, 0, 30, 1, 60}), Error);
}

TEST(Client, RetriesRetryableFailuresWithBackoff) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>{"!r", "!r", "done"});
  AnnotationClient c(backend, fast_policy());
  std::vector<double> slept;
  c.set_sleeper([&](double s) { slept.push_back(s); });
  EXPECT_EQ(c.complete(req("x")), "done");
  EXPECT_EQ(backend->calls(), 3);
  EXPECT_EQ(slept, (std::vector<double>{1, 2}));
}

TEST(Client, NonRetryableFailsImmediately) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>{"!f", "never"});
  AnnotationClient c(backend, fast_policy());
  c.set_sleeper([](double) {});
  EXPECT_THROW(c.complete(req("x")), BackendError);
  EXPECT_EQ(backend->calls(), 1);
}

TEST(Client, ExhaustionReportsAttempts) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>(10, "!r"));
  AnnotationClient c(backend, fast_policy(2));
  c.set_sleeper([](double) {});
  try {
    c.complete(req("x"));
    FAIL();
  } catch (const RetryExhausted& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
  EXPECT_EQ(backend->calls(), 3);
}

TEST(Client, InvalidRequestNeverReachesBackend) {
  auto backend = std::make_shared<ScriptedBackend>(std::vector<std::string>{"x"});
  AnnotationClient c(backend, fast_policy());
  auto r = req("x");
  r.max_tokens = 0;
  EXPECT_THROW(c.complete(r), Error);
  EXPECT_EQ(backend->calls(), 0);
}

TEST(Client, BatchRespectsMaxInFlightAndIsolatesFailures) {
  auto backend = std::make_shared<SlowBackend>();
  AnnotationClient c(backend, fast_policy(0, 3));
  std::vector<AnnotationRequest> reqs;
  for (int i = 0; i < 12; ++i) reqs.push_back(req(i == 5 ? "poison" : "item" + std::to_string(i)));
  auto res = c.complete_batch(reqs);
  ASSERT_EQ(res.size(), 12u);
  EXPECT_LE(backend->peak(), 3);
  EXPECT_GE(backend->peak(), 2);
  for (int i = 0; i < 12; ++i) {
    if (i == 5) {
      EXPECT_FALSE(res[i].ok());
      EXPECT_NE(res[i].error.find("poisoned"), std::string::npos);
    } else {
      ASSERT_TRUE(res[i].ok());
      EXPECT_EQ(*res[i].text, "ok:item" + std::to_string(i));
    }
  }
}

TEST(Client, AuditLogRecordsEveryRequest) {
  ScratchDir dir("vf-test");
  auto audit = std::make_shared<util::JsonlAppender>(dir.path() / "audit.jsonl");
  AnnotationClient c(std::make_shared<MockBackend>(0), fast_policy(), audit);
  auto r = req("hello");
  r.images.push_back(synthetic::solid_frame(2, 2, 0, 0, 0));
  c.complete(r);
  c.complete(req("again", "caption-l3:v:L3"));
  auto rows = util::read_jsonl_tolerant(dir.path() / "audit.jsonl");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0]["tag"], "caption-l1:v:L1#1");
  EXPECT_EQ(rows[0]["image_digests"].size(), 1u);
  EXPECT_EQ(rows[0]["attempts"], 1);
  EXPECT_TRUE(rows[1].contains("response"));
}

TEST(RateLimiter, SpacesRequestStarts) {
  RateLimiter lim(1200);  // one start per 50 ms
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) lim.acquire();
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GE(elapsed, 0.19);
}

TEST(Png, EncodesSignatureAndHeader) {
  auto png = encode_png(synthetic::solid_frame(5, 3, 9, 9, 9));
  ASSERT_GT(png.size(), 33u);
  EXPECT_EQ(png.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  EXPECT_EQ(png.substr(12, 4), "IHDR");
  auto be32 = [&](std::size_t off) {
    return (std::uint32_t(std::uint8_t(png[off])) << 24) | (std::uint32_t(std::uint8_t(png[off + 1])) << 16) |
           (std::uint32_t(std::uint8_t(png[off + 2])) << 8) | std::uint32_t(std::uint8_t(png[off + 3]));
  };
  EXPECT_EQ(be32(16), 5u);
  EXPECT_EQ(be32(20), 3u);
}

TEST(RemoteBackend, RetriesA429ThenSucceeds) {
  StubServer stub;
  std::atomic<int> hits{0};
  std::string last_body, last_auth;
  std::mutex mu;
  stub.server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
    {
      std::lock_guard lock(mu);
      last_body = rq.body;
      last_auth = rq.get_header_value("Authorization");
    }
    if (hits++ == 0) {
      rs.status = 429;
      rs.set_content("slow down", "text/plain");
      return;
    }
    json out{{"choices", {{{"message", {{"role", "assistant"}, {"content", "a caption"}}}}}}};
    rs.set_content(out.dump(), "application/json");
  });
  stub.start();

  ::setenv("VIDFORGE_TEST_KEY", "sekrit", 1);
  auto backend = std::make_shared<RemoteBackend>(stub.url("/v1/chat/completions"), "some-model", "VIDFORGE_TEST_KEY", 5);
  AnnotationClient c(backend, fast_policy());
  std::vector<double> slept;
  c.set_sleeper([&](double s) { slept.push_back(s); });
  auto r = req("describe");
  r.images.push_back(synthetic::solid_frame(4, 4, 200, 10, 10));
  EXPECT_EQ(c.complete(r), "a caption");
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(slept, (std::vector<double>{1}));

  auto body = json::parse(last_body);
  EXPECT_EQ(body["model"], "some-model");
  EXPECT_EQ(last_auth, "Bearer sekrit");
  const auto& content = body["messages"][1]["content"];
  bool has_image = false;
  for (const auto& part : content)
    if (part["type"] == "image_url")
      has_image = part["image_url"]["url"].get<std::string>().rfind("data:image/png;base64,", 0) == 0;
  EXPECT_TRUE(has_image);
}

TEST(RemoteBackend, ClientErrorsAreNotRetried) {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server.Post("/c", [&](const httplib::Request&, httplib::Response& rs) {
    ++hits;
    rs.status = 401;
    rs.set_content("no", "text/plain");
  });
  stub.start();
  AnnotationClient c(std::make_shared<RemoteBackend>(stub.url("/c"), "m", "", 5), fast_policy());
  c.set_sleeper([](double) {});
  EXPECT_THROW(c.complete(req("x")), BackendError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(RemoteBackend, MissingCredentialVariableIsReported) {
  ::unsetenv("VIDFORGE_DEFINITELY_UNSET");
  EXPECT_THROW(RemoteBackend("http://127.0.0.1:9/x", "m", "VIDFORGE_DEFINITELY_UNSET"), Error);
  EXPECT_THROW(RemoteBackend("ftp://x", "m"), Error);
}
