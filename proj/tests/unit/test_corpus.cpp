#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "nluaug/corpus.hpp"
#include "nluaug/error.hpp"

using namespace nluaug;
namespace fs = std::filesystem;

namespace {

fs::path writeTemp(const std::string& name, const std::string& content) {
  auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

std::set<std::string> keysOf(const std::vector<AnnotatedUtterance>& us) {
  std::set<std::string> s;
  for (const auto& u : us) s.insert(annotatedString(u));
  return s;
}

}  // namespace

TEST(Parse, JsonlRecordWithoutSlots) {
  auto u = parseJsonlRecord(R"({"text":"set an alarm","domain":"alarm","intent":"set","slots":[]})");
  EXPECT_EQ(u.tokens, (std::vector<std::string>{"set", "an", "alarm"}));
  EXPECT_EQ(u.domain, "alarm");
  EXPECT_EQ(u.intent, "set");
  EXPECT_TRUE(u.slots.empty());
}

TEST(Parse, SlotEndBeforeStartReportsLineNumber) {
  auto p = writeTemp("nluaug_bad.jsonl",
                     "{\"text\":\"set an alarm\",\"domain\":\"alarm\",\"intent\":\"set\",\"slots\":[]}\n"
                     "{\"text\":\"wake me at 7\",\"domain\":\"alarm\",\"intent\":\"set\","
                     "\"slots\":[{\"start\":3,\"end\":2,\"label\":\"time\"}]}\n");
  try {
    parseSourceDataset(p, SourceFormat::Jsonl);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  fs::remove(p);
}

TEST(Parse, TsvFixtureMixingThreeDomains) {
  auto p = writeTemp("nluaug_three.tsv",
                     "alarm/set_alarm\t17:21:datetime\tset an alarm for 7 am\ten\n"
                     "reminder/set_reminder\t12:20:todo\tremind me to buy milk\ten\n"
                     "weather/find\t\twhat is the weather\ten\n");
  auto r = parseSourceDataset(p, SourceFormat::TsvFb);
  ASSERT_EQ(r.utterances.size(), 3u);
  EXPECT_EQ(r.utterances[0].domain, "alarm");
  EXPECT_EQ(r.utterances[1].domain, "reminder");
  EXPECT_EQ(r.utterances[2].domain, "weather");
  EXPECT_EQ(r.utterances[0].slots, (std::vector<SlotSpan>{{4, 5, "datetime"}}));
  EXPECT_EQ(r.utterances[1].slots, (std::vector<SlotSpan>{{3, 4, "todo"}}));
  fs::remove(p);
}

TEST(Parse, UnknownFormatTagAndMissingFile) {
  EXPECT_THROW(parseSourceFormat("csv"), ConfigError);
  EXPECT_THROW(parseSourceDataset("/nonexistent/data.tsv", SourceFormat::TsvFb), DataError);
}

TEST(Encode, PlayBohemianRhapsodyByQueen) {
  AnnotatedUtterance u;
  u.tokens = {"play", "bohemian", "rhapsody", "by", "queen"};
  u.domain = "music";
  u.intent = "play_song";
  u.slots = {{1, 2, "song_name"}, {4, 4, "artist_name"}};
  EXPECT_EQ(annotatedString(u),
            "music/play_song play:none bohemian:song_name rhapsody:song_name by:none queen:artist_name");
  const std::vector<AnnotatedUtterance> corpus{u};
  auto vocab = Vocabulary::build(corpus);
  auto seq = encodeSequence(u, vocab);
  EXPECT_EQ(vocab.symbol(seq.header), "music/play_song");
  ASSERT_EQ(seq.body.size(), 5u);
  EXPECT_EQ(vocab.symbol(seq.body[1]), "bohemian:song_name");
  EXPECT_EQ(decodeSequence(seq, vocab), u);
}

TEST(Encode, ZeroSlotsGiveNoneLabels) {
  auto u = parseJsonlRecord(R"({"text":"cancel my alarm","domain":"alarm","intent":"cancel","slots":[]})");
  std::vector<AnnotatedUtterance> corpus{u};
  auto vocab = Vocabulary::build(corpus);
  for (int id : encodeSequence(u, vocab).body) EXPECT_EQ(splitBody(vocab.symbol(id))->second, "none");
}

TEST(Encode, OutOfVocabularyAndTooLong) {
  auto a = parseAnnotatedString("alarm/set set:none alarm:none");
  auto b = parseAnnotatedString("alarm/set set:none timer:none");
  std::vector<AnnotatedUtterance> corpus{a};
  auto vocab = Vocabulary::build(corpus);
  EXPECT_THROW(encodeSequence(b, vocab), DataError);
  EncodeOptions unk;
  unk.allowUnk = true;
  EXPECT_EQ(encodeSequence(b, vocab, unk).body[1], Vocabulary::kUnk);
  EncodeOptions shortMax;
  shortMax.maxLen = 1;
  EXPECT_THROW(encodeSequence(a, vocab, shortMax), DataError);
}

TEST(Encode, RoundTripOnRandomFixtureUtterances) {
  Rng rng(17);
  auto corpus = testkit::syntheticNluCorpus(20, 0, rng).train;
  ASSERT_GE(corpus.size(), 50u);
  corpus.resize(50);
  auto vocab = Vocabulary::build(corpus);
  for (const auto& u : corpus) {
    EXPECT_EQ(decodeSequence(encodeSequence(u, vocab), vocab), u);
    EXPECT_EQ(parseAnnotatedString(annotatedString(u)), u);
  }
}

TEST(Encode, EscapingKeepsColonsAndSlashesRoundTripSafe) {
  AnnotatedUtterance u;
  u.tokens = {"set", "alarm", "8:30", "a/b", "back\\slash"};
  u.domain = "alarm";
  u.intent = "set";
  u.slots = {{2, 2, "date:time"}};
  const auto s = annotatedString(u);
  EXPECT_EQ(parseAnnotatedString(s), u);
  std::vector<AnnotatedUtterance> corpus{u};
  auto vocab = Vocabulary::build(corpus);
  EXPECT_EQ(decodeSequence(encodeSequence(u, vocab), vocab), u);
}

TEST(Encode, AdjacentSameLabelSpansAreCanonicalized) {
  AnnotatedUtterance u;
  u.tokens = {"a", "b", "c"};
  u.domain = "d";
  u.intent = "i";
  u.slots = {{0, 0, "x"}, {1, 1, "x"}};
  auto c = canonicalize(u);
  EXPECT_EQ(c.slots, (std::vector<SlotSpan>{{0, 1, "x"}}));
  EXPECT_EQ(parseAnnotatedString(annotatedString(u)), c);
}

TEST(Utterance, ValidateRejectsBrokenSpans) {
  auto u = parseAnnotatedString("d/i a:x b:none c:none");
  u.slots.push_back({0, 1, "y"});
  EXPECT_THROW(u.validate(), DataError);
  auto v = parseAnnotatedString("d/i a:none");
  v.slots = {{0, 3, "x"}};
  EXPECT_THROW(v.validate(), DataError);
  AnnotatedUtterance empty;
  empty.domain = "d";
  empty.intent = "i";
  EXPECT_THROW(empty.validate(), DataError);
}

TEST(Vocabulary, DuplicationDoesNotChangeIt) {
  auto u = parseAnnotatedString("alarm/set set:none alarm:none");
  std::vector<AnnotatedUtterance> one{u}, two{u, u};
  EXPECT_EQ(Vocabulary::build(one), Vocabulary::build(two));
}

TEST(Vocabulary, SevenSymbolsPlusFourSpecials) {
  auto corpus = testkit::parseAll({"alarm/set set:none alarm:none at:none 7:time",
                                   "alarm/cancel cancel:none alarm:none"});
  // headers 2 + bodies {set, alarm, at, 7:time, cancel} = 7
  auto vocab = Vocabulary::build(corpus);
  EXPECT_EQ(vocab.size(), 11u);
  for (int id = 0; id < 4; ++id) EXPECT_TRUE(vocab.isSpecial(id));
  EXPECT_EQ(vocab.symbol(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(vocab.symbol(Vocabulary::kBos), "<bos>");
  EXPECT_EQ(vocab.symbol(Vocabulary::kEos), "<eos>");
  EXPECT_EQ(vocab.symbol(Vocabulary::kUnk), "<unk>");
}

TEST(Vocabulary, DeterministicUnderShuffleAndBijective) {
  Rng rng(3);
  auto corpus = testkit::syntheticNluCorpus(40, 0, rng).train;
  auto shuffled = corpus;
  rng.shuffle(shuffled.begin(), shuffled.end());
  auto a = Vocabulary::build(corpus), b = Vocabulary::build(shuffled);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.find(a.symbol(static_cast<int>(i))), static_cast<int>(i));
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  Rng rng(3);
  auto corpus = testkit::syntheticNluCorpus(10, 0, rng).train;
  auto v = Vocabulary::build(corpus);
  auto p = fs::temp_directory_path() / "nluaug_vocab.txt";
  v.save(p);
  EXPECT_EQ(Vocabulary::load(p), v);
  fs::remove(p);
}

TEST(Goldens, SingleUtteranceRepeatedTenTimes) {
  std::vector<AnnotatedUtterance> corpus(10, parseAnnotatedString("alarm/set set:none alarm:none"));
  auto split = selectPseudoGoldens(corpus, 0.2);
  ASSERT_EQ(split.pseudoGoldens.size(), 1u);
  EXPECT_TRUE(split.rare.empty());
}

TEST(Goldens, FrequenciesFiveTwoOneOneOne) {
  std::vector<AnnotatedUtterance> corpus;
  auto add = [&](const std::string& s, int n) {
    for (int i = 0; i < n; ++i) corpus.push_back(parseAnnotatedString(s));
  };
  add("alarm/set e:none", 1);
  add("alarm/set a:none", 5);
  add("alarm/set c:none", 1);
  add("alarm/set b:none", 2);
  add("alarm/set d:none", 1);
  auto split = selectPseudoGoldens(corpus, 0.2);
  ASSERT_EQ(split.pseudoGoldens.size(), 1u);
  EXPECT_EQ(annotatedString(split.pseudoGoldens[0]), "alarm/set a:none");
  EXPECT_EQ(split.rare.size(), 4u);
}

TEST(Goldens, PartitionAndShuffleInvariance) {
  Rng rng(9);
  auto corpus = testkit::syntheticNluCorpus(300, 0, rng).train;
  auto split = selectPseudoGoldens(corpus, 0.2);
  auto g = keysOf(split.pseudoGoldens), r = keysOf(split.rare);
  EXPECT_EQ(g.size(), split.pseudoGoldens.size());
  std::set<std::string> uni = g;
  uni.insert(r.begin(), r.end());
  EXPECT_EQ(uni, keysOf(corpus));
  for (const auto& k : g) EXPECT_FALSE(r.count(k));

  auto shuffled = corpus;
  rng.shuffle(shuffled.begin(), shuffled.end());
  auto again = selectPseudoGoldens(shuffled, 0.2);
  EXPECT_EQ(again.pseudoGoldens, split.pseudoGoldens);
  EXPECT_EQ(again.rare, split.rare);
}

TEST(Goldens, RawTextKeyGroupsLabelVariants) {
  std::vector<AnnotatedUtterance> corpus;
  for (int i = 0; i < 3; ++i) corpus.push_back(parseAnnotatedString("alarm/set wake:none at:none 7:time"));
  for (int i = 0; i < 2; ++i) corpus.push_back(parseAnnotatedString("alarm/set wake:none at:none 7:none"));
  corpus.push_back(parseAnnotatedString("alarm/set alarm:none"));
  auto byAnnotation = selectPseudoGoldens(corpus, 1.0, FrequencyKey::AnnotatedString);
  auto byText = selectPseudoGoldens(corpus, 1.0, FrequencyKey::RawText);
  EXPECT_EQ(byAnnotation.pseudoGoldens.size(), 3u);
  EXPECT_EQ(byText.pseudoGoldens.size(), 2u);
}

TEST(Goldens, RejectsBadInput) {
  std::vector<AnnotatedUtterance> none;
  EXPECT_THROW(selectPseudoGoldens(none), DataError);
  auto one = testkit::parseAll({"a/b c:none"});
  EXPECT_THROW(selectPseudoGoldens(one, 0.0), ConfigError);
  EXPECT_THROW(selectPseudoGoldens(one, 1.5), ConfigError);
}

TEST(Goldens, SplitCountsCsvHasOneRowPerDomainAndGroup) {
  Rng rng(2);
  auto corpus = testkit::syntheticNluCorpus(100, 0, rng).train;
  auto rows = splitCounts(selectPseudoGoldens(corpus));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].domain, "alarm");
  EXPECT_EQ(rows[0].group, "pseudo Goldens");
  EXPECT_EQ(rows[1].group, "Rare");
}

TEST(Formats, JsonlRoundTripKeepsProvenance) {
  Rng rng(4);
  auto corpus = testkit::syntheticNluCorpus(5, 0, rng).train;
  corpus[0].provenance = "synthetic";
  auto p = fs::temp_directory_path() / "nluaug_rt.jsonl";
  writeJsonl(p, corpus);
  auto back = readJsonl(p);
  EXPECT_EQ(back, corpus);
  EXPECT_EQ(back[0].provenance, "synthetic");
  fs::remove(p);
}

TEST(Formats, DecodeGeneratedRejectsMalformedSequences) {
  auto corpus = testkit::parseAll({"alarm/set set:none alarm:none"});
  auto v = Vocabulary::build(corpus);
  const int h = v.find("alarm/set"), a = v.find("set:none");
  EXPECT_TRUE(decodeGenerated(std::vector<int>{h, a, Vocabulary::kEos}, v).has_value());
  EXPECT_FALSE(decodeGenerated(std::vector<int>{a, h}, v).has_value());
  EXPECT_FALSE(decodeGenerated(std::vector<int>{h, Vocabulary::kEos}, v).has_value());
  EXPECT_FALSE(decodeGenerated(std::vector<int>{h, a, h}, v).has_value());
}
