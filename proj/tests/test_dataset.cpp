#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace vidforge;
using namespace vidforge::dataset;

namespace {

VideoAsset asset(std::string id, Source s = Source::YouCook2, double duration = 42) {
  return {id, s, "videos/" + id + ".mp4", duration, 1280, 720, std::nullopt, std::nullopt};
}

qa::QAPair oe(std::string asset, std::string qtype, std::string q, std::string a) {
  return {std::move(asset), std::move(qtype), std::move(q), std::move(a), std::nullopt, std::nullopt};
}

qa::QAPair mc(std::string asset, std::string qtype, std::string q, std::vector<std::string> opts, std::size_t c) {
  std::string a = opts[c];
  return {std::move(asset), std::move(qtype), std::move(q), a, std::move(opts), c};
}

}  // namespace

TEST(Assemble, OneCaptionTwoOpenEndedOneMultiChoice) {
  std::vector<VideoAsset> as{asset("v1")};
  std::vector<CaptionInput> caps{{"v1", "A cook chops onions and fries them."}};
  std::vector<qa::QAPair> ps{oe("v1", "Count", "How many onions?", "Two."),
                             oe("v1", "Speed", "How fast does the cook chop?", "Quickly."),
                             mc("v1", "Count", "How many onions?", {"One.", "Three.", "Two.", "Four."}, 2)};
  auto recs = assemble(as, caps, ps);
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_EQ(recs[0].task, Task::Caption);
  EXPECT_EQ(recs[1].task, Task::OpenEnded);
  EXPECT_EQ(recs[2].task, Task::OpenEnded);
  EXPECT_EQ(recs[3].task, Task::MultiChoice);
  for (const auto& r : recs) {
    EXPECT_EQ(r.conversations.front().value.rfind("<video>\n", 0), 0u);
    EXPECT_EQ(r.source, "YouCook2");
    EXPECT_EQ(r.video, "videos/v1.mp4");
  }
  EXPECT_EQ(recs[0].conversations[1].value, "A cook chops onions and fries them.");
  const auto& human = recs[3].conversations[0].value;
  EXPECT_NE(human.find("\nA. One.\nB. Three.\nC. Two.\nD. Four.\n"), std::string::npos);
  EXPECT_EQ(recs[3].conversations[1].value, "C. Two.");
  EXPECT_EQ(recs[1].qtype, "Count");
  EXPECT_FALSE(recs[0].qtype.has_value());
}

TEST(Assemble, IdsAreStableAndDistinct) {
  std::vector<VideoAsset> as{asset("v1"), asset("v2")};
  std::vector<CaptionInput> caps{{"v1", "x"}, {"v2", "y"}};
  std::vector<qa::QAPair> ps{oe("v1", "Count", "q", "a"), oe("v2", "Count", "q", "a")};
  auto a = assemble(as, caps, ps);
  auto b = assemble(as, caps, ps);
  ASSERT_EQ(a, b);
  std::set<std::string> ids;
  for (const auto& r : a) {
    EXPECT_EQ(r.id.size(), 24u);
    ids.insert(r.id);
  }
  EXPECT_EQ(ids.size(), a.size());
}

TEST(Assemble, CaptionInstructionComesFromThePool) {
  std::vector<VideoAsset> as;
  std::vector<CaptionInput> caps;
  for (int i = 0; i < 40; ++i) {
    as.push_back(asset("v" + std::to_string(i)));
    caps.push_back({as.back().id, "caption"});
  }
  std::set<std::string> used;
  const auto& pool = default_caption_instructions();
  for (const auto& r : assemble(as, caps, {})) {
    std::string instr = r.conversations[0].value.substr(8);
    EXPECT_NE(std::find(pool.begin(), pool.end(), instr), pool.end());
    used.insert(instr);
  }
  EXPECT_GT(used.size(), 1u);
}

TEST(Assemble, DanglingReferencesAreErrors) {
  std::vector<VideoAsset> as{asset("v1")};
  EXPECT_THROW(assemble(as, {{"ghost", "x"}}, {}), Error);
  EXPECT_THROW(assemble(as, {{"v1", "x"}}, {oe("v2", "Count", "q", "a")}), Error);
  EXPECT_THROW(assemble(as, {}, {oe("v1", "Count", "q", "a")}), Error);
  EXPECT_THROW(assemble(as, {{"v1", "x"}, {"v1", "y"}}, {}), Error);
  EXPECT_THROW(assemble(as, {{"v1", "x"}}, {oe("v1", "Count", "q", "a"), oe("v1", "Count", "q", "b")}), Error);
}

TEST(Assemble, UncaptionedAssetsAreSkipped) {
  auto recs = assemble({asset("v1"), asset("v2")}, {{"v2", "x"}}, {});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].asset_id, "v2");
}

TEST(Records, JsonRoundTripAndValidation) {
  auto recs = assemble({asset("v1")}, {{"v1", "cap"}},
                       {oe("v1", "Count", "q", "a"), mc("v1", "Speed", "fast?", {"yes", "no"}, 0)});
  for (const auto& r : recs) EXPECT_EQ(record_from_json(json::parse(to_json(r).dump())), r);
  auto bad = recs[1];
  bad.conversations[0].value = "no token";
  EXPECT_THROW(validate(bad), Error);
  bad = recs[1];
  bad.conversations.pop_back();
  EXPECT_THROW(validate(bad), Error);
  bad = recs[0];
  bad.qtype = "Count";
  EXPECT_THROW(validate(bad), Error);
}

TEST(Stats, MatchesDirectCount) {
  std::mt19937 rng(8);
  std::vector<InstructionRecord> recs;
  std::map<std::pair<std::string, std::string>, std::uint64_t> want;
  std::uint64_t want_dur_bucket_20 = 0;
  for (int i = 0; i < 500; ++i) {
    InstructionRecord r;
    r.id = std::to_string(i);
    r.source = std::string(source_name(kAllSources[rng() % kAllSources.size()]));
    r.task = kAllTasks[rng() % 3];
    r.duration = (rng() % 2000) / 10.0;
    r.conversations = {{"human", "<video>\nq"}, {"gpt", "w w w"}};
    recs.push_back(r);
    ++want[{r.source, std::string(task_name(r.task))}];
    if (r.task == Task::Caption && r.duration >= 20 && r.duration < 30) ++want_dur_bucket_20;
  }
  auto s = compute_stats(recs);
  std::uint64_t total = 0;
  for (const auto& [k, n] : want) {
    EXPECT_EQ(s.counts.at(k.first).at(k.second), n);
    total += n;
  }
  EXPECT_EQ(s.total(), total);
  EXPECT_EQ(s.duration_hist[20], want_dur_bucket_20);
  EXPECT_EQ(s.caption_words_hist.size(), 1u);
  EXPECT_EQ(s.caption_words_hist.begin()->first, 0);
}

TEST(Stats, EmptyAndMergeLaws) {
  EXPECT_EQ(compute_stats({}).total(), 0u);
  auto recs = assemble({asset("a", Source::Ego4D, 12), asset("b", Source::Vidal, 61)}, {{"a", "x y"}, {"b", "z"}},
                       {oe("a", "Count", "q", "a"), oe("b", "Count", "q", "a")});
  std::vector<InstructionRecord> p1(recs.begin(), recs.begin() + 1), p2(recs.begin() + 1, recs.begin() + 3),
      p3(recs.begin() + 3, recs.end());
  auto s1 = compute_stats(p1), s2 = compute_stats(p2), s3 = compute_stats(p3);
  auto left = s1;
  left.merge(s2).merge(s3);
  auto right_inner = s2;
  right_inner.merge(s3);
  auto right = s1;
  right.merge(right_inner);
  EXPECT_EQ(left, right);
  EXPECT_EQ(left, compute_stats(recs));
  auto with_empty = left;
  with_empty.merge(CorpusStats{});
  EXPECT_EQ(with_empty, left);
  auto swapped = s3;
  swapped.merge(s2).merge(s1);
  EXPECT_EQ(swapped, left);
}

TEST(Stats, BinsAndTable) {
  EXPECT_EQ(duration_bin(0), 0);
  EXPECT_EQ(duration_bin(9.99), 0);
  EXPECT_EQ(duration_bin(10), 10);
  EXPECT_EQ(word_bin(19), 0);
  EXPECT_EQ(word_bin(20), 20);
  CorpusStats s;
  s.add("VidOR", Task::OpenEnded, 7);
  s.add("VidOR", Task::MultiChoice, 2);
  auto t = format_table(s);
  EXPECT_NE(t.find("VidOR"), std::string::npos);
  EXPECT_NE(t.find("TOTAL"), std::string::npos);
  EXPECT_EQ(to_json(s)["totals"]["all"], 9);
}
