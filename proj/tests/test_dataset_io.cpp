#include <sstream>

#include <gtest/gtest.h>

#include "gmcf/dataset_io.hpp"
#include "gmcf/errors.hpp"

namespace gmcf {
namespace {

ParsedDataset parse_text(const std::string& text, const ParseOptions& options = {}) {
  std::istringstream in(text);
  return parse_dataset(in, options);
}

TEST(ParseSampleLine, FormatDefinition) {
  Vocabulary v;
  const DataSample s = parse_sample_line("1\tgender=male age_18\tgenre=scifi", v);
  EXPECT_EQ(s.label, 1.0);
  ASSERT_EQ(s.user.size(), 2u);
  ASSERT_EQ(s.item.size(), 1u);
  EXPECT_EQ(v.name(s.user[0].att), "gender=male");
  EXPECT_EQ(s.user[0].val, 1.0);
  EXPECT_EQ(v.name(s.user[1].att), "age_18");
  EXPECT_EQ(v.name(s.item[0].att), "genre=scifi");
  EXPECT_EQ(s.item[0].att.side, Side::kItem);
}

TEST(ParseSampleLine, ExplicitValues) {
  Vocabulary v;
  const DataSample s = parse_sample_line("0\tu1 age=0.25\titem7 price=12.5 tag", v);
  EXPECT_EQ(s.label, 0.0);
  EXPECT_EQ(v.name(s.user[1].att), "age");
  EXPECT_EQ(s.user[1].val, 0.25);
  EXPECT_EQ(s.item[1].val, 12.5);
  EXPECT_EQ(s.item[2].val, 1.0);
}

TEST(ParseSampleLine, NonNumericSuffixBelongsToName) {
  Vocabulary v;
  const DataSample s = parse_sample_line("1\tu=abc x=\ti", v);
  EXPECT_EQ(v.name(s.user[0].att), "u=abc");
  EXPECT_EQ(v.name(s.user[1].att), "x=");
  EXPECT_EQ(s.user[1].val, 1.0);
}

TEST(ParseSampleLine, Threshold) {
  Vocabulary v;
  ParseOptions o;
  o.threshold = 3.0;
  EXPECT_EQ(parse_sample_line("4\tu\ti", v, o).label, 1.0);
  EXPECT_EQ(parse_sample_line("3\tu\ti", v, o).label, 0.0);
  EXPECT_EQ(parse_sample_line("3.5\tu\ti", v, o).label, 1.0);
  EXPECT_THROW(parse_sample_line("4\tu\ti", v), ParseError);
}

TEST(ParseSampleLine, Errors) {
  Vocabulary v;
  EXPECT_THROW(parse_sample_line("1\tu a a\ti", v), ParseError);
  EXPECT_THROW(parse_sample_line("1\tu\t", v), ParseError);
  EXPECT_THROW(parse_sample_line("1\tu", v), ParseError);
  EXPECT_THROW(parse_sample_line("1\tu\ti\textra", v), ParseError);
  EXPECT_THROW(parse_sample_line("yes\tu\ti", v), ParseError);
  EXPECT_THROW(parse_sample_line("1\tu=inf\ti", v), ParseError);
}

TEST(ParseDataset, LineNumbersInErrors) {
  try {
    parse_text("1\tu1\ti1\n# note\n\n1\tu2 x x\ti2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
}

TEST(ParseDataset, UniverseAndReport) {
  const auto p = parse_text("1\tu1 g=f\ti1 c\n0\tu2 g=f\ti2 c\n1\tu1 g=f\ti2 c\n");
  EXPECT_EQ(p.dataset.samples.size(), 3u);
  EXPECT_EQ(p.report.samples, 3u);
  EXPECT_EQ(p.report.positives, 2u);
  EXPECT_EQ(p.report.users, 2u);
  EXPECT_EQ(p.report.user_attributes, 3u);
  EXPECT_EQ(p.report.item_attributes, 3u);
  EXPECT_EQ(p.dataset.vocab.size(), 6u);
  EXPECT_EQ(p.dataset.samples[2].user, p.dataset.samples[0].user);
}

TEST(ParseDataset, MinPositivesDropsUsers) {
  ParseOptions o;
  o.min_positives = 2;
  const auto p = parse_text("1\tu1\ti1\n1\tu1\ti2\n1\tu2\ti1\n0\tu2\ti3\n0\tu1\ti3\n", o);
  EXPECT_EQ(p.dataset.samples.size(), 3u);
  EXPECT_EQ(p.report.dropped_users, 1u);
  EXPECT_EQ(p.report.dropped_samples, 2u);
  EXPECT_FALSE(p.dataset.vocab.find(Side::kUser, "u2").has_value());
}

TEST(ParseDataset, EmptyResult) {
  EXPECT_THROW(parse_text("# nothing\n\n"), EmptyDatasetError);
  ParseOptions o;
  o.min_positives = 5;
  EXPECT_THROW(parse_text("1\tu1\ti1\n", o), EmptyDatasetError);
}

TEST(ParseDataset, BaseVocabularyKeepsIds) {
  Vocabulary base;
  base.intern(Side::kItem, "i9");
  const auto u = base.intern(Side::kUser, "u1");
  std::istringstream in("1\tu1\ti1\n");
  const auto p = parse_dataset(in, {}, base);
  EXPECT_EQ(p.dataset.samples[0].user[0].att, u);
  EXPECT_EQ(p.dataset.samples[0].item[0].att.id, 2u);
}

TEST(WriteDataset, RoundTripIsFixedPoint) {
  const std::string text = "1\tu1 age=0.1 g\ti1 price=3.14159 c=2\n0\tu2 age=1e-07\ti2 c size=2=1\n";
  const auto first = parse_text(text);
  std::ostringstream out1;
  write_dataset(out1, first.dataset);
  const auto second = parse_text(out1.str());
  std::ostringstream out2;
  write_dataset(out2, second.dataset);
  EXPECT_EQ(out1.str(), out2.str());
  EXPECT_EQ(first.dataset.samples, second.dataset.samples);
  EXPECT_EQ(first.dataset.vocab, second.dataset.vocab);
  EXPECT_EQ(format_sample(first.dataset.samples[0], first.dataset.vocab), "1\tu1 age=0.1 g\ti1 price=3.14159 c=2");
}

TEST(StripAttributes, Regimes) {
  const auto p = parse_text("1\tu1 a b\ti1 c d\n");
  const auto& s = p.dataset.samples;
  EXPECT_EQ(strip_attributes(s, AttributeRegime::kBoth), s);
  const auto user_only = strip_attributes(s, AttributeRegime::kUserOnly);
  EXPECT_EQ(user_only[0].user.size(), 3u);
  EXPECT_EQ(user_only[0].item.size(), 1u);
  const auto item_only = strip_attributes(s, AttributeRegime::kItemOnly);
  EXPECT_EQ(item_only[0].user.size(), 1u);
  EXPECT_EQ(item_only[0].item.size(), 3u);
  const auto none = strip_attributes(s, AttributeRegime::kNone);
  EXPECT_EQ(none[0].user_key(), s[0].user_key());
  EXPECT_EQ(none[0].item.size(), 1u);
}

TEST(AttributeRegime, Names) {
  for (auto r : {AttributeRegime::kBoth, AttributeRegime::kUserOnly, AttributeRegime::kItemOnly, AttributeRegime::kNone}) {
    EXPECT_EQ(parse_regime(regime_name(r)), r);
  }
  EXPECT_THROW(parse_regime("some"), ConfigError);
}

}  // namespace
}  // namespace gmcf
