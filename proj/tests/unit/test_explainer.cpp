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

#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace contrastive {
namespace {

using testing::make_template;

/// Generator that always yields 0, so slot P holds the first answer.
struct ZeroGen {
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return 0; }
};

const std::string kGeese =
    "The geese prefer to nest in the fields rather than the forests because in the _ predators are more hidden.";

Instance geese() {
  return load_winograd_family(testing::data_file("geese.jsonl"), TaskKind::winogrande).instances.at(0);
}

void expect_span_integrity(const Explanation& e) {
  for (const auto& s : e.answer_spans) {
    ASSERT_LE(s.end, e.text.size());
    const std::string got = e.text.substr(s.start, s.end - s.start);
    const std::string want(e.surface(s.answer));
    if (s.capitalized) {
      EXPECT_EQ(got, text::capitalize_first(want)) << e.text;
    } else {
      EXPECT_EQ(got, want) << e.text;
    }
  }
  EXPECT_EQ(e.text.find(kBlank), std::string::npos);
}

TEST(Generate, GeeseFillsBothBlanks) {
  Instance in = geese();
  in.neutral_answer = "they";
  const StubBackend stub;
  ZeroGen g;
  const auto out = generate_explanations(in.id, build_contexts(in).c_a0, in.a1, in.a2,
                                         testing::catalog_template("object-are-while"), stub, g);
  ASSERT_EQ(out.explanations.size(), 1u);
  const auto& e = out.explanations[0];
  EXPECT_EQ(e.text, "Fields are alpha_fields while forests are alpha_forests");
  EXPECT_EQ(e.fills, (std::vector<std::string>{"alpha_fields", "alpha_forests"}));
  EXPECT_TRUE(e.prompt.ends_with("Fields are " + std::string(kBlank) + " while forests are " + std::string(kBlank)));
  EXPECT_TRUE(e.prompt.starts_with("The geese prefer to nest in the fields"));
  expect_span_integrity(e);
}

TEST(Generate, ZeroBlankTemplateMakesNoBackendCall) {
  const StubBackend stub;
  ZeroGen g;
  const auto out =
      generate_explanations("x", "ctx", "Emily", "Patricia", testing::catalog_template("spatial-above"), stub, g);
  ASSERT_EQ(out.explanations.size(), 1u);
  EXPECT_EQ(out.explanations[0].text, "Emily is above Patricia");
  EXPECT_TRUE(out.explanations[0].prompt.empty());
  EXPECT_EQ(stub.infill_calls(), 0u);
}

TEST(Generate, DeterministicAcrossCalls) {
  Instance in = load_winograd_family(testing::data_file("winogrande_synthetic.jsonl"), TaskKind::winogrande)
                    .instances.at(0);
  in.neutral_answer = "they";
  const StubBackend stub;
  const auto t = make_template("likes-to", "{P} likes to {_} while {Q} likes to {_}", "PersonalCharacteristics");
  const auto a = generate_explanation(in, t, stub, 42);
  const auto b = generate_explanation(in, t, stub, 42);
  ASSERT_EQ(a.explanations.size(), 1u);
  EXPECT_EQ(to_json(a.explanations[0]).dump(), to_json(b.explanations[0]).dump());
}

TEST(Generate, TopKKeepsDistinctRankedExplanations) {
  const StubBackend stub;
  ZeroGen g;
  GenerationOptions opts;
  opts.top_k_return = 3;
  const auto out = generate_explanations("x", "ctx", "fields", "forests",
                                         testing::catalog_template("object-are-while"), stub, g, opts);
  ASSERT_EQ(out.explanations.size(), 3u);
  EXPECT_EQ(out.explanations[0].id(), "object-are-while");
  EXPECT_EQ(out.explanations[2].id(), "object-are-while#2");
  EXPECT_EQ(out.explanations[2].fills[0], "gamma_fields");
}

TEST(Generate, EmptyGenerationSkipsTemplate) {
  testing::FakeBackend b;
  b.fill = [](const InfillRequest&) -> InfillResponse { throw EmptyGenerationError("nothing"); };
  ZeroGen g;
  const auto out =
      generate_explanations("x", "ctx", "fields", "forests", testing::catalog_template("object-are-while"), b, g);
  EXPECT_TRUE(out.explanations.empty());
  ASSERT_TRUE(out.skipped.has_value());
}

Explanation peanuts() {
  testing::FakeBackend b;
  b.fill = [](const InfillRequest&) {
    InfillResponse r;
    r.candidates.push_back({{"salty", "sweet"}, -1.0});
    return r;
  };
  ZeroGen g;
  const auto t = make_template("tend", "{P} are {_} while {Q} tend to be {_}");
  return generate_explanations("p", "ctx", "peanuts", "raisins", t, b, g).explanations.at(0);
}

TEST(Flip, SwapsAnswersAndKeepsFills) {
  const Explanation e = peanuts();
  EXPECT_EQ(e.text, "Peanuts are salty while raisins tend to be sweet");
  const Explanation f = flip_explanation(e);
  EXPECT_EQ(f.text, "Raisins are salty while peanuts tend to be sweet");
  EXPECT_EQ(f.variant, Variant::Flipped);
  EXPECT_EQ(f.fills, e.fills);
  EXPECT_EQ(f.slot_assignment, e.slot_assignment.swapped());
  expect_span_integrity(f);
}

TEST(Flip, ZeroBlankAndInvolution) {
  const StubBackend stub;
  ZeroGen g;
  const auto e = generate_explanations("x", "ctx", "Emily", "Patricia", testing::catalog_template("spatial-above"),
                                       stub, g)
                     .explanations.at(0);
  EXPECT_EQ(flip_explanation(e).text, "Patricia is above Emily");
  EXPECT_EQ(flip_explanation(flip_explanation(e)).text, e.text);
  const auto p = peanuts();
  const auto pp = flip_explanation(flip_explanation(p));
  EXPECT_EQ(pp.text, p.text);
  EXPECT_EQ(pp.answer_spans, p.answer_spans);
  EXPECT_EQ(pp.variant, Variant::Original);
}

TEST(Flip, InvolutionOverCatalog) {
  const StubBackend stub;
  std::size_t flipped = 0;
  for (const auto& t : testing::shipped_catalog()) {
    std::mt19937_64 rng(derive_seed(3, "inv", t.id));
    const auto out = generate_explanations("inv", "The jar sat by the box.", "jar", "box", t, stub, rng);
    for (const auto& e : out.explanations) {
      const auto f = flip_explanation(e);
      expect_span_integrity(f);
      EXPECT_EQ(flip_explanation(f).text, e.text) << t.id;
      ++flipped;
    }
  }
  EXPECT_EQ(flipped, testing::shipped_catalog().size());
}

TEST(Flip, RejectsAbstracted) {
  EXPECT_THROW(flip_explanation(abstract_explanation(peanuts())), std::invalid_argument);
}

TEST(Abstraction, GeeseStringsVerbatim) {
  const auto ctx = abstract_pair(kGeese, std::nullopt, "fields", "forests");
  EXPECT_EQ(ctx.context,
            "The geese prefer to nest in the <mask1> rather than the <mask2> because in the _ predators are more "
            "hidden.");
  const auto ex =
      abstract_pair("", std::optional<std::string_view>("Forests have more predators than fields"), "fields", "forests");
  EXPECT_EQ(ex.explanation, "<mask2> have more predators than <mask1>");
  EXPECT_EQ(abstract_pair("Nothing to see.", std::nullopt, "fields", "forests").context, "Nothing to see.");
}

TEST(Abstraction, LongestMatchFirst) {
  EXPECT_EQ(mask_answers("the hot cocoa was hot", "hot", "hot cocoa"), "the <mask2> was <mask1>");
}

TEST(Abstraction, ExplanationMasksSpansAndFills) {
  testing::FakeBackend b;
  b.fill = [](const InfillRequest&) {
    InfillResponse r;
    r.candidates.push_back({{"better than Forests", "worse"}, -1.0});
    return r;
  };
  ZeroGen g;
  const auto e = generate_explanations("x", "ctx", "fields", "forests", testing::catalog_template("object-are-while"),
                                       b, g)
                     .explanations.at(0);
  const auto a = abstract_explanation(e);
  EXPECT_EQ(a.text, "<mask1> are better than <mask2> while <mask2> are worse");
  EXPECT_EQ(a.variant, Variant::Abstracted);
  EXPECT_EQ(a.text.find("fields"), std::string::npos);
  EXPECT_EQ(text::to_lower(a.text).find("forests"), std::string::npos);
  expect_span_integrity(a);
}

TEST(Serialization, RoundTrip) {
  const auto e = peanuts();
  const auto back = explanation_from_json(to_json(e));
  EXPECT_EQ(to_json(back).dump(), to_json(e).dump());
}

}  // namespace
}  // namespace contrastive
