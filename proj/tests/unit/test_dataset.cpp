// Copyright 2026 The Contrastive Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace contrastive {
namespace {

using testing::TempDir;
using testing::write_text;

const char* kMenudo =
    R"({"qID":"menudo","sentence":"Ian volunteered to eat Dennis's menudo after already having a bowl because _ despised eating intestine.","option1":"Ian","option2":"Dennis","answer":"2"})";

Instance menudo_instance() {
  TempDir dir;
  write_text(dir / "w.jsonl", std::string(kMenudo) + "\n");
  return load_winograd_family(dir / "w.jsonl", TaskKind::winogrande).instances.at(0);
}

TEST(Winogrande, LoadsMenudo) {
  const Instance in = menudo_instance();
  EXPECT_EQ(in.id, "menudo");
  EXPECT_EQ(in.a1, "Ian");
  EXPECT_EQ(in.a2, "Dennis");
  EXPECT_EQ(in.gold, Answer::second);
  EXPECT_FALSE(in.neutral_answer.has_value());
  EXPECT_EQ(text::count_occurrences(in.context, kBlank), 1u);
  EXPECT_EQ(in.meta["option1"], "Ian");
}

TEST(Winogrande, BuildContextsWithNeutralPronoun) {
  Instance in = menudo_instance();
  EXPECT_THROW(build_contexts(in), DataError);
  in.neutral_answer = "he";
  const auto c = build_contexts(in);
  EXPECT_TRUE(c.c_a1.ends_with("because Ian despised eating intestine."));
  EXPECT_TRUE(c.c_a0.ends_with("because he despised eating intestine."));
  EXPECT_TRUE(c.c_a2.ends_with("because Dennis despised eating intestine."));
  for (const auto* s : {&c.c_a0, &c.c_a1, &c.c_a2}) EXPECT_EQ(s->find(kBlank), std::string::npos);
}

TEST(Wsc, PronounBecomesNeutralAnswer) {
  const auto loaded = load_winograd_family(testing::data_file("wsc_small.jsonl"), TaskKind::wsc);
  ASSERT_EQ(loaded.instances.size(), 3u);
  const auto& in = loaded.instances[0];
  EXPECT_EQ(in.neutral_answer, "they");
  EXPECT_EQ(in.a1, "The city councilmen");
  const auto c = build_contexts(in);
  EXPECT_EQ(c.c_a0, "The city councilmen refused the demonstrators a permit because they feared violence.");
  EXPECT_EQ(c.c_a2,
            "The city councilmen refused the demonstrators a permit because The demonstrators feared violence.");
}

TEST(Loader, EmptyFileIsHardError) {
  TempDir dir;
  write_text(dir / "empty.jsonl", "");
  EXPECT_THROW(load_winograd_family(dir / "empty.jsonl", TaskKind::winogrande), DataError);
  EXPECT_THROW(load_winograd_family(dir / "missing.jsonl", TaskKind::winogrande), DataError);
}

TEST(Loader, BadRecordsAreCollected) {
  TempDir dir;
  write_text(dir / "w.jsonl", std::string(kMenudo) + "\n" +
                                  R"({"qID":"x","sentence":"no blank","option1":"a","option2":"b"})" + "\n" +
                                  R"({"qID":"y","sentence":"_ ran","option1":"a"})" + "\n" +
                                  R"({"qID":"z","sentence":"_ ran","option1":"a","option2":"a"})" + "\n" + "not json\n");
  const auto loaded = load_winograd_family(dir / "w.jsonl", TaskKind::winogrande);
  EXPECT_EQ(loaded.instances.size(), 1u);
  EXPECT_EQ(loaded.report.records, 5u);
  ASSERT_EQ(loaded.report.errors.size(), 4u);
  EXPECT_EQ(loaded.report.errors[0].line, 2u);
  EXPECT_NE(loaded.report.errors[1].message.find("option2"), std::string::npos);
}

TEST(NeutralPronoun, StubYieldsThey) {
  const StubBackend stub;
  EXPECT_EQ(select_neutral_pronoun(menudo_instance(), stub), "they");
}

TEST(NeutralPronoun, ScoringBackendPicksMostLikely) {
  testing::FakeBackend b;
  b.logprob = [](std::string_view t) {
    const bool he = t.find("because he despised") != std::string_view::npos;
    return LogprobResponse{he ? -5.0 : -9.0, 10, false};
  };
  EXPECT_EQ(select_neutral_pronoun(menudo_instance(), b), "he");
}

TEST(NeutralPronoun, TiesGoToLexicographicallyFirst) {
  testing::FakeBackend b;
  b.logprob = [](std::string_view t) {
    const bool top = t.find("because she ") != std::string_view::npos || t.find("because her ") != std::string_view::npos;
    return LogprobResponse{top ? -1.0 : -2.0, 4, false};
  };
  EXPECT_EQ(select_neutral_pronoun(menudo_instance(), b), "her");
}

TEST(NeutralPronoun, BackendFailureFallsBack) {
  testing::FakeBackend b;
  b.logprob = [](std::string_view) -> LogprobResponse { throw TransportError("down"); };
  EXPECT_EQ(select_neutral_pronoun(menudo_instance(), b), "they");
}

TEST(AnswerDiff, DocumentedExamples) {
  auto d = extract_answer_diff("work out your upper body", "work out your legs");
  EXPECT_EQ(d.a1, "upper body");
  EXPECT_EQ(d.a2, "legs");
  EXPECT_FALSE(d.full_answer);
  d = extract_answer_diff("fill it with objects", "fill it with water");
  EXPECT_EQ(d.a1, "objects");
  EXPECT_EQ(d.a2, "water");
  d = extract_answer_diff("abc", "xyz");
  EXPECT_TRUE(d.full_answer);
  EXPECT_EQ(d.a1, "abc");
}

TEST(AnswerDiff, SharedSuffixJoinsShortDiffs) {
  const auto d = extract_answer_diff("Run them in the sink under boiling water", "Run them in the sink under cold water");
  EXPECT_EQ(d.a1, "boiling water");
  EXPECT_EQ(d.a2, "cold water");
  EXPECT_EQ(d.frame, "run them in the sink under " + std::string(kBlank));
}

TEST(AnswerDiff, SymmetricUnderSwap) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"work out your upper body", "work out your legs"},
      {"Run them in the sink under boiling water.", "Run them in the sink under cold water."},
      {"place coffee filters inside of the cup holders", "pour a thin layer of oil into the cup holders"},
      {"stuff them with newspaper.", "stuff them with wet towels."},
      {"abc", "xyz"}};
  for (const auto& [s1, s2] : cases) {
    const auto d = extract_answer_diff(s1, s2);
    const auto e = extract_answer_diff(s2, s1);
    EXPECT_EQ(d.a1, e.a2) << s1;
    EXPECT_EQ(d.a2, e.a1) << s1;
    EXPECT_EQ(d.frame, e.frame) << s1;
    EXPECT_EQ(d.full_answer, e.full_answer) << s1;
  }
}

TEST(Piqa, CarrotsAndCoffeeFilters) {
  TempDir dir;
  write_text(dir / "p.jsonl",
             R"({"id":"carrots","goal":"To prepare carrots before cooking with them, you can","sol1":"Run them in the sink under boiling water","sol2":"Run them in the sink under cold water"})"
             "\n"
             R"({"id":"cups","goal":"How to keep cup holders clean?","sol1":"place coffee filters inside of the cup holders","sol2":"pour a thin layer of oil into the cup holders"})"
             "\n");
  write_text(dir / "labels.lst", "0\n1\n");
  const auto loaded = load_piqa(dir / "p.jsonl", dir / "labels.lst");
  ASSERT_EQ(loaded.instances.size(), 2u);
  const auto& carrots = loaded.instances[0];
  EXPECT_EQ(carrots.a1, "boiling water");
  EXPECT_EQ(carrots.a2, "cold water");
  EXPECT_EQ(carrots.neutral_answer, "boiling water or cold water");
  EXPECT_EQ(carrots.gold, Answer::first);
  const auto c = build_contexts(carrots);
  EXPECT_TRUE(c.c_a2.ends_with("run them in the sink under cold water")) << c.c_a2;
  const auto& cups = loaded.instances[1];
  EXPECT_EQ(cups.a1, "place coffee filters inside of the cup holders");
  EXPECT_EQ(cups.neutral_answer, cups.a1 + " or " + cups.a2);
  EXPECT_EQ(cups.gold, Answer::second);
  EXPECT_EQ(build_contexts(cups).c_a0, "How to keep cup holders clean? " + *cups.neutral_answer);
}

TEST(Piqa, IdenticalSolutionsRejectedAndLabelsMayBeAbsent) {
  TempDir dir;
  write_text(dir / "p.jsonl", R"({"goal":"g","sol1":"same thing","sol2":"same  thing"})"
                              "\n"
                              R"({"goal":"g","sol1":"use a spoon","sol2":"use a fork"})"
                              "\n");
  const auto loaded = load_piqa(dir / "p.jsonl");
  ASSERT_EQ(loaded.instances.size(), 1u);
  EXPECT_EQ(loaded.report.errors.size(), 1u);
  EXPECT_FALSE(loaded.instances[0].gold.has_value());
}

TEST(Piqa, LabelCountMustMatch) {
  TempDir dir;
  write_text(dir / "p.jsonl", R"({"goal":"g","sol1":"use a spoon","sol2":"use a fork"})"
                              "\n");
  write_text(dir / "labels.lst", "0\n1\n");
  EXPECT_THROW(load_piqa(dir / "p.jsonl", dir / "labels.lst"), DataError);
}

TEST(Csqa, FiveChoicesGiveTenPairs) {
  const auto loaded = load_csqa(testing::data_file("csqa_small.jsonl"));
  ASSERT_EQ(loaded.instances.size(), 3u);
  const auto pairs = expand_pairwise(loaded.instances[0]);
  ASSERT_EQ(pairs.size(), 10u);
  EXPECT_EQ(pairs[0].id, "csqa-1/0-1");
  EXPECT_EQ(pairs[0].context, "Where would you find a jellyfish? The answer is " + std::string(kBlank) + ".");
  EXPECT_EQ(pairs[0].gold, Answer::first);
  EXPECT_EQ(pairs[0].meta["parent"], "csqa-1");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& p : pairs) seen.insert({p.meta["pair"][0].get<std::size_t>(), p.meta["pair"][1].get<std::size_t>()});
  EXPECT_EQ(seen.size(), 10u);
}

TEST(Csqa, GoldUnknownWhenPairLacksIt) {
  MultiChoiceInstance m{"river", "Where on a river can you hold a cup upright to catch water on a sunny day?",
                        {"waterfall", "bridge", "valley", "pebble", "mountain"}, 1};
  for (const auto& p : expand_pairwise(m)) {
    const bool has_gold = p.a1 == "bridge" || p.a2 == "bridge";
    EXPECT_EQ(p.gold.has_value(), has_gold) << p.id;
    if (p.a1 == "waterfall" && p.a2 == "valley") {
      EXPECT_FALSE(p.gold.has_value());
    }
  }
}

TEST(Csqa, ThreeChoicesAndRotationInvariance) {
  MultiChoiceInstance m{"q", "Q?", {"a", "b", "c"}, std::nullopt};
  EXPECT_EQ(expand_pairwise(m).size(), 3u);
  MultiChoiceInstance five{"q", "Q?", {"a", "b", "c", "d", "e"}, std::nullopt};
  auto unordered = [](const MultiChoiceInstance& x) {
    std::multiset<std::set<std::string>> s;
    for (const auto& p : expand_pairwise(x)) s.insert({p.a1, p.a2});
    return s;
  };
  const auto base = unordered(five);
  for (int r = 1; r < 5; ++r) {
    std::rotate(five.choices.begin(), five.choices.begin() + 1, five.choices.end());
    EXPECT_EQ(unordered(five), base);
  }
}

TEST(Csqa, DuplicateChoicesRejected) {
  TempDir dir;
  write_text(dir / "c.jsonl",
             R"({"id":"d","question":{"stem":"Q?","choices":[{"label":"A","text":"x"},{"label":"B","text":"x"},{"label":"C","text":"y"}]}})"
             "\n");
  EXPECT_THROW(load_csqa(dir / "c.jsonl"), DataError);
}

TEST(Contexts, DifferOnlyAtPlaceholder) {
  const auto loaded = load_winograd_family(testing::data_file("winogrande_synthetic.jsonl"), TaskKind::winogrande);
  for (Instance in : loaded.instances) {
    in.neutral_answer = "they";
    const auto c = build_contexts(in);
    const auto pos = in.context.find(kBlank);
    const std::string head = text::normalize_space(in.context.substr(0, pos));
    if (!head.empty()) {
      EXPECT_TRUE(c.c_a1.starts_with(head)) << in.id;
      EXPECT_TRUE(c.c_a2.starts_with(head)) << in.id;
    }
    const std::string tail = text::normalize_space(in.context.substr(pos + kBlank.size()));
    EXPECT_TRUE(c.c_a1.ends_with(tail)) << in.id;
    EXPECT_TRUE(c.c_a0.ends_with(tail)) << in.id;
  }
}

TEST(Audit, InstanceRecordCarriesDerivedFields) {
  Instance in = menudo_instance();
  in.neutral_answer = "he";
  const auto j = to_json(in);
  EXPECT_EQ(j["context"], "Ian volunteered to eat Dennis's menudo after already having a bowl because _ despised eating intestine.");
  EXPECT_EQ(j["gold"], 2);
  EXPECT_EQ(j["c_a0"], build_contexts(in).c_a0);
}

}  // namespace
}  // namespace contrastive
