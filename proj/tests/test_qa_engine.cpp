#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "oracles.hpp"
#include "support.hpp"

using namespace vidforge;
using namespace vidforge::qa;

namespace {

QAPair oe(std::string asset, std::string qtype, std::string q, std::string a) {
  return {std::move(asset), std::move(qtype), std::move(q), std::move(a), std::nullopt, std::nullopt};
}

AnnotationClient mock_client(std::uint64_t seed = 3) {
  return AnnotationClient(std::make_shared<MockBackend>(seed), BackendPolicy{0, 1, 30, 2, 0});
}

/// Returns a fixed text for every request.
class FixedBackend : public Backend {
public:
  explicit FixedBackend(std::string text) : text_(std::move(text)) {}
  std::string complete_once(const AnnotationRequest&) override { return text_; }

private:
  std::string text_;
};

class FailingEmbedder : public Embedder {
public:
  std::vector<std::vector<double>> embed(const std::vector<std::string>&) override {
    throw EmbeddingError("embedding service unavailable");
  }
};

std::vector<oracle::Item> items(const std::vector<QAPair>& ps) {
  std::vector<oracle::Item> out;
  for (const auto& p : ps) out.push_back({p.asset_id, p.question, p.answer});
  return out;
}

}  // namespace

TEST(Registry, SixteenDistinctTypesWithThreeExemplars) {
  auto types = all_types();
  ASSERT_EQ(types.size(), 16u);
  std::set<std::string_view> names;
  for (const auto* t : types) {
    names.insert(t->name);
    EXPECT_FALSE(t->definition.empty());
    for (const auto& ex : t->exemplars) {
      EXPECT_FALSE(ex.question.empty());
      EXPECT_FALSE(blacklisted(ex.answer)) << t->name;
    }
  }
  EXPECT_EQ(names.size(), 16u);
}

TEST(Registry, LookupIgnoresCaseAndPunctuation) {
  ASSERT_NE(find_type("camera direction"), nullptr);
  EXPECT_EQ(find_type("CAMERA-DIRECTION")->name, "Camera-Direction");
  EXPECT_EQ(find_type("Time Order Understanding")->name, "Time-Order");
  EXPECT_EQ(find_type("Fine-Grained Action Understanding")->name, "Fine-Grained-Action");
  EXPECT_EQ(find_type("Weather"), nullptr);
}

TEST(Prompt, ContainsEveryTypeBlockAndTheGuideline) {
  auto p = assemble_qa_prompt("A cook slices onions.", all_types());
  for (const auto* t : all_types()) {
    EXPECT_NE(p.system.find("# " + std::string(t->name) + ": "), std::string::npos) << t->name;
    EXPECT_NE(p.system.find(std::string(t->exemplars[2].question)), std::string::npos);
  }
  EXPECT_NE(p.system.find("\n- Generate 1 question-answer pair for each dimension.\n"), std::string::npos);
  EXPECT_NE(p.user.find("Description: A cook slices onions."), std::string::npos);
  EXPECT_EQ(p.system, assemble_qa_prompt("something else", all_types()).system);
}

TEST(Prompt, SubsetOnlyListsChosenTypes) {
  auto p = assemble_qa_prompt("x", {find_type("Count"), find_type("Speed")});
  EXPECT_NE(p.system.find("# Count: "), std::string::npos);
  EXPECT_EQ(p.system.find("# Temporal: "), std::string::npos);
  EXPECT_THROW(assemble_qa_prompt("x", {}), Error);
}

TEST(Parse, ToleratesFencesAndProse) {
  auto r = parse_qa_response(
      "Sure! Here you go:\n```json\n[{\"Dimension\": \"Count\", \"Question\": \"How many?\", \"Answer\": \"Two.\"}]\n```",
      all_types(), "v");
  ASSERT_TRUE(r.parsed);
  ASSERT_EQ(r.pairs.size(), 1u);
  EXPECT_EQ(r.pairs[0].qtype, "Count");
  EXPECT_EQ(r.pairs[0].asset_id, "v");
}

TEST(Parse, DropsNoneUnknownAndRepeatedDimensions) {
  std::string raw = R"([
    {"Dimension": "Count", "Question": "How many?", "Answer": "Two."},
    {"Dimension": "Count", "Question": "How many again?", "Answer": "Three."},
    {"Dimension": "Speed", "Question": "None", "Answer": "None"},
    {"Dimension": "Spatial", "Question": "Where?", "Answer": null},
    {"Dimension": "Weather", "Question": "Rain?", "Answer": "No."},
    "junk",
    {"Dimension": "binary", "Question": "Is it day?", "Answer": "Yes."}
  ])";
  auto r = parse_qa_response(raw, all_types());
  ASSERT_EQ(r.pairs.size(), 2u);
  EXPECT_EQ(r.pairs[0].answer, "Two.");
  EXPECT_EQ(r.pairs[1].qtype, "Binary");
  EXPECT_EQ(r.diagnostics.size(), 5u);
}

TEST(Parse, GarbageIsNotParsed) {
  EXPECT_FALSE(parse_qa_response("I cannot help with that.", all_types()).parsed);
  EXPECT_FALSE(parse_qa_response("[not json]", all_types()).parsed);
  EXPECT_TRUE(parse_qa_response("[]", all_types()).parsed);
}

TEST(Blacklist, PrefixesAreCaseInsensitiveAndAnchored) {
  EXPECT_TRUE(blacklisted("Does not specify the colour."));
  EXPECT_TRUE(blacklisted("  DOES NOT SHOW anything"));
  EXPECT_TRUE(blacklisted("does not depict a dog"));
  EXPECT_TRUE(blacklisted("Does not specifically say"));
  EXPECT_TRUE(blacklisted("Does not mention it"));
  EXPECT_FALSE(blacklisted("The video does not mention it"));
  EXPECT_FALSE(blacklisted("Does not say"));
  EXPECT_FALSE(blacklisted(""));
}

TEST(Blacklist, ReportCountsMatch) {
  std::vector<QAPair> ps{oe("v", "Count", "q1", "Two."), oe("v", "Speed", "q2", "Does not show speed."),
                         oe("v", "Binary", "q3", "Yes.")};
  auto [kept, rep] = blacklist_filter(ps);
  EXPECT_EQ(kept.size(), 2u);
  EXPECT_EQ(rep.dropped_blacklist, 1u);
  EXPECT_EQ(rep.input(), 3u);
  EXPECT_EQ(rep.dropped[0].reason, "blacklist");
}

TEST(Embedding, FallbackIsNormalisedBagOfWords) {
  FallbackEmbedder e;
  auto v = e.embed({"the cat the", "The CAT, the!", "dog"});
  EXPECT_NEAR(cosine(v[0], v[1]), 1.0, 1e-12);
  EXPECT_NEAR(cosine(v[0], v[2]), 0.0, 1e-12);
  double n = 0;
  for (double x : v[0]) n += x * x;
  EXPECT_NEAR(n, 1.0, 1e-12);
}

TEST(Dedup, ExactDuplicatesAreDroppedPerVideo) {
  FallbackEmbedder e;
  std::vector<QAPair> ps{oe("a", "Count", "How many cups?", "Two."), oe("a", "Binary", "How many cups?", "Three."),
                         oe("b", "Count", "How many cups?", "Four."), oe("a", "Speed", "How fast?", "Slowly.")};
  auto [kept, rep] = dedup(ps, e);
  ASSERT_EQ(kept.size(), 3u);
  EXPECT_EQ(kept[0].answer, "Two.");
  EXPECT_EQ(kept[1].asset_id, "b");
  EXPECT_EQ(rep.dropped_duplicate, 1u);
  EXPECT_EQ(rep.dropped[0].qtype, "Binary");
}

TEST(Dedup, ThresholdBoundaryIsInclusive) {
  FallbackEmbedder e;
  // bags {a,b,c,d} and {a,b,c,e}: cosine exactly 0.75
  std::vector<QAPair> ps{oe("v", "Count", "a b c d", "x"), oe("v", "Speed", "a b c e", "y")};
  EXPECT_EQ(dedup(ps, e, 0.75).first.size(), 1u);
  EXPECT_EQ(dedup(ps, e, 0.76).first.size(), 2u);
  EXPECT_THROW(dedup(ps, e, 0.0), Error);
  EXPECT_THROW(dedup(ps, e, 1.5), Error);
}

TEST(Dedup, EmbeddingFailureSurfaces) {
  FailingEmbedder e;
  EXPECT_THROW(dedup({oe("v", "Count", "q", "a")}, e), EmbeddingError);
}

// Random questions drawn from a tiny vocabulary produce many near-duplicates;
// the filter pipeline must agree with the brute-force all-pairs oracle, and
// running it again on its own output changes nothing.
TEST(FilterProperty, MatchesAllPairsOracleAndIsIdempotent) {
  std::mt19937 rng(21);
  const std::vector<std::string> words{"what", "does", "the", "man", "cook", "hold", "where", "dog", "run"};
  const std::vector<std::string> answers{"A pan.", "Does not mention it.", "The park.", "does not show that",
                                         "Slowly."};
  FallbackEmbedder e;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<QAPair> ps;
    int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      std::string q;
      int len = 1 + static_cast<int>(rng() % 4);
      for (int k = 0; k < len; ++k) q += words[rng() % words.size()] + " ";
      ps.push_back(oe(rng() % 2 ? "a" : "b", "Count", q, answers[rng() % answers.size()]));
    }
    double thr = std::vector<double>{0.5, 0.8, 0.95, 1.0}[rng() % 4];
    auto [clean, r1] = blacklist_filter(ps);
    auto [unique, r2] = dedup(clean, e, thr);
    auto want = oracle::filter_all_pairs(items(ps), thr);
    EXPECT_EQ(r1.dropped_blacklist, want.blacklisted);
    EXPECT_EQ(r2.dropped_duplicate, want.duplicates);
    std::vector<QAPair> want_kept;
    for (std::size_t i = 0; i < ps.size(); ++i)
      if (want.kept[i]) want_kept.push_back(ps[i]);
    EXPECT_EQ(unique, want_kept);

    auto again = dedup(blacklist_filter(unique).first, e, thr).first;
    EXPECT_EQ(again, unique);
  }
}

// When each paraphrase cluster shares one answer, the two filters commute.
TEST(FilterProperty, CommuteOnAnswerHomogeneousClusters) {
  FallbackEmbedder e;
  std::vector<QAPair> ps{oe("v", "Count", "how many cups", "Two."), oe("v", "Speed", "how many cups", "Two."),
                         oe("v", "Binary", "is it raining", "Does not show rain."),
                         oe("v", "Spatial", "is it raining", "Does not show rain."), oe("v", "Temporal", "when", "Noon.")};
  auto bd = dedup(blacklist_filter(ps).first, e).first;
  auto db = blacklist_filter(dedup(ps, e).first).first;
  EXPECT_EQ(bd, db);
}

TEST(FilterProperty, DoNotCommuteInGeneral) {
  FallbackEmbedder e;
  std::vector<QAPair> ps{oe("v", "Count", "how many cups", "Does not mention cups."),
                         oe("v", "Speed", "how many cups", "Two.")};
  auto bd = dedup(blacklist_filter(ps).first, e).first;
  auto db = blacklist_filter(dedup(ps, e).first).first;
  EXPECT_EQ(bd.size(), 1u);
  EXPECT_TRUE(db.empty());
}

TEST(MultiChoice, CorrectAnswerAppearsOnceAmongDistinctOptions) {
  auto client = mock_client();
  for (int i = 0; i < 30; ++i) {
    auto p = oe("v" + std::to_string(i), "Count", "How many cups are there?", "Two cups.");
    auto mc = generate_mc(p, client, 5, 9);
    ASSERT_TRUE(mc.pair) << mc.skipped_reason;
    const auto& opts = *mc.pair->options;
    ASSERT_EQ(opts.size(), 5u);
    EXPECT_EQ(opts[*mc.pair->correct], "Two cups.");
    EXPECT_EQ(std::count(opts.begin(), opts.end(), "Two cups."), 1);
    std::set<std::string> distinct(opts.begin(), opts.end());
    EXPECT_EQ(distinct.size(), 5u);
    EXPECT_EQ(generate_mc(p, client, 5, 9).pair, mc.pair);
  }
}

TEST(MultiChoice, PositionIsSpreadAcrossSlots) {
  auto client = mock_client();
  std::set<std::size_t> seen;
  for (int i = 0; i < 40; ++i)
    seen.insert(*generate_mc(oe("v", "Count", "Q" + std::to_string(i), "A."), client).pair->correct);
  EXPECT_EQ(seen.size(), 5u);
}

TEST(MultiChoice, DuplicateDistractorsLeadToSkip) {
  AnnotationClient c(std::make_shared<FixedBackend>(R"(["Three.", "three.", " Two. ", "Four.", "Four."])"),
                     BackendPolicy{0, 1, 30, 1, 0});
  auto mc = generate_mc(oe("v", "Count", "How many?", "Two."), c, 5);
  EXPECT_FALSE(mc.pair);
  EXPECT_NE(mc.skipped_reason.find("2 distinct"), std::string::npos);
  auto ok = generate_mc(oe("v", "Count", "How many?", "Two."), c, 3);
  ASSERT_TRUE(ok.pair);
  EXPECT_EQ(ok.pair->options->size(), 3u);
}

TEST(MultiChoice, ValidateCatchesInconsistentPairs) {
  QAPair p = oe("v", "Count", "q", "a");
  p.options = std::vector<std::string>{"a", "b"};
  p.correct = 1;
  EXPECT_THROW(validate(p), Error);
  p.correct = 0;
  EXPECT_NO_THROW(validate(p));
  EXPECT_EQ(qa_from_json(to_json(p)), p);
}

TEST(RunQa, MockPipelineStaysWithinTheSixteenTypes) {
  auto client = mock_client(5);
  FallbackEmbedder e;
  QAOptions opt;
  opt.mc_fraction = 0.5;
  opt.seed = 4;
  for (int i = 0; i < 20; ++i) {
    std::string id = "asset-" + std::to_string(i);
    auto r = run_qa(id, "Overall, a cook prepares dinner in a kitchen.", client, e, opt);
    EXPECT_LE(r.open_ended.size(), 16u);
    std::set<std::string> qtypes;
    for (const auto& p : r.open_ended) {
      EXPECT_TRUE(qtypes.insert(p.qtype).second);
      EXPECT_FALSE(blacklisted(p.answer));
      EXPECT_EQ(p.asset_id, id);
    }
    EXPECT_EQ(r.report.kept, r.open_ended.size());
    EXPECT_LE(r.multi_choice.size(), r.open_ended.size());
    for (const auto& m : r.multi_choice) {
      EXPECT_TRUE(selected_for_mc(oe(m.asset_id, m.qtype, "", ""), opt));
      EXPECT_NO_THROW(validate(m));
    }
    auto again = run_qa(id, "Overall, a cook prepares dinner in a kitchen.", client, e, opt);
    EXPECT_EQ(again.open_ended, r.open_ended);
    EXPECT_EQ(again.multi_choice, r.multi_choice);
  }
}

TEST(RunQa, UnparseableResponseThrows) {
  AnnotationClient c(std::make_shared<FixedBackend>("no list here"), BackendPolicy{0, 1, 30, 1, 0});
  FallbackEmbedder e;
  EXPECT_THROW(run_qa("v", "caption", c, e), Error);
}

TEST(RemoteEmbedder, ReadsIndexedVectorsFromStub) {
  httplib::Server server;
  server.Post("/emb", [](const httplib::Request& rq, httplib::Response& rs) {
    auto in = json::parse(rq.body);
    json data = json::array();
    // reversed order with explicit indices
    for (std::size_t i = in["input"].size(); i-- > 0;)
      data.push_back({{"index", i}, {"embedding", {double(i + 1), 0.0}}});
    rs.set_content(json{{"data", data}}.dump(), "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& rs) {
    rs.status = 500;
    rs.set_content("down", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  std::string base = "http://127.0.0.1:" + std::to_string(port);

  RemoteEmbedder e(base + "/emb", "m");
  auto v = e.embed({"a", "b"});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[1][0], 1.0, 1e-12);  // normalised

  RemoteEmbedder broken(base + "/broken", "m");
  EXPECT_THROW(broken.embed({"a"}), EmbeddingError);

  server.stop();
  t.join();
}
