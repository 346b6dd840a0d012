#include "gmcf/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "gmcf/errors.hpp"

namespace gmcf {

namespace {

struct RawField {
  std::string_view name;
  double value = 1.0;
};

struct RawSample {
  double label = 0.0;
  std::vector<std::pair<std::string, double>> user;
  std::vector<std::pair<std::string, double>> item;
};

double parse_number(std::string_view text, std::string_view what, std::size_t line) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(fmt::format("{} '{}' is not a number", what, text), line);
  }
  if (!std::isfinite(v)) throw ParseError(fmt::format("{} '{}' is not finite", what, text), line);
  return v;
}

std::vector<std::string_view> split_fields(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// "name=value" when the text after the last '=' is a number, otherwise the
// whole token is the name (so "gender=male" is one attribute with value 1).
std::optional<double> numeric_suffix(std::string_view token, std::size_t& eq) {
  eq = token.rfind('=');
  if (eq == std::string_view::npos) return std::nullopt;
  const std::string_view text = token.substr(eq + 1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::vector<std::pair<std::string, double>> parse_side(std::string_view text, Side side, std::size_t line) {
  std::vector<std::pair<std::string, double>> out;
  std::unordered_set<std::string_view> seen;
  for (std::string_view token : split_fields(text)) {
    RawField f;
    f.name = token;
    std::size_t eq = 0;
    if (const auto v = numeric_suffix(token, eq)) {
      f.name = token.substr(0, eq);
      if (!std::isfinite(*v)) throw ParseError(fmt::format("value of {} is not finite", f.name), line);
      f.value = *v;
    }
    if (f.name.empty()) throw ParseError(fmt::format("empty attribute name in '{}'", token), line);
    if (!seen.insert(f.name).second) {
      throw ParseError(fmt::format("duplicate {} attribute '{}'", side_name(side), f.name), line);
    }
    out.emplace_back(std::string(f.name), f.value);
  }
  if (out.empty()) throw ParseError(fmt::format("no {} attributes", side_name(side)), line);
  return out;
}

RawSample parse_raw(std::string_view line, const ParseOptions& options, std::size_t line_number) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
  if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
    throw ParseError("expected three tab-separated columns: label, user fields, item fields", line_number);
  }
  RawSample raw;
  const double first = parse_number(line.substr(0, t1), options.threshold ? "rating" : "label", line_number);
  if (options.threshold) {
    raw.label = first > *options.threshold ? 1.0 : 0.0;
  } else {
    if (first != 0.0 && first != 1.0) {
      throw ParseError(fmt::format("label must be 0 or 1, got '{}'", line.substr(0, t1)), line_number);
    }
    raw.label = first;
  }
  raw.user = parse_side(line.substr(t1 + 1, t2 - t1 - 1), Side::kUser, line_number);
  raw.item = parse_side(line.substr(t2 + 1), Side::kItem, line_number);
  return raw;
}

DataSample intern_raw(const RawSample& raw, Vocabulary& vocab) {
  DataSample s;
  s.label = raw.label;
  for (const auto& [name, value] : raw.user) s.user.push_back({vocab.intern(Side::kUser, name), value});
  for (const auto& [name, value] : raw.item) s.item.push_back({vocab.intern(Side::kItem, name), value});
  return s;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string ParseReport::line() const {
  return fmt::format(
      "samples={} positives={} users={} dropped_users={} dropped_samples={} user_attributes={} item_attributes={}",
      samples, positives, users, dropped_users, dropped_samples, user_attributes, item_attributes);
}

DataSample parse_sample_line(std::string_view line, Vocabulary& vocab, const ParseOptions& options,
                             std::size_t line_number) {
  return intern_raw(parse_raw(line, options, line_number), vocab);
}

ParsedDataset parse_dataset(std::istream& in, const ParseOptions& options, Vocabulary base) {
  std::vector<RawSample> raws;
  std::string line;
  std::size_t line_number = 0;
  ParsedDataset out;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    raws.push_back(parse_raw(line, options, line_number));
  }
  out.report.lines = raws.size();

  // Users are keyed by their first field.
  std::unordered_map<std::string, std::size_t> positives;
  for (const auto& r : raws) positives[r.user.front().first] += r.label == 1.0 ? 1 : 0;
  std::unordered_set<std::string> counted;

  out.dataset.vocab = std::move(base);
  for (const auto& r : raws) {
    const std::string& user = r.user.front().first;
    const bool keep = positives[user] >= options.min_positives;
    if (counted.insert(user).second) ++(keep ? out.report.users : out.report.dropped_users);
    if (!keep) {
      ++out.report.dropped_samples;
      continue;
    }
    out.dataset.samples.push_back(intern_raw(r, out.dataset.vocab));
    out.report.positives += r.label == 1.0 ? 1 : 0;
  }
  out.report.samples = out.dataset.samples.size();
  for (const auto& att : out.dataset.vocab.universe()) {
    ++(att.side == Side::kUser ? out.report.user_attributes : out.report.item_attributes);
  }
  if (out.dataset.samples.empty()) {
    throw EmptyDatasetError(raws.empty() ? "dataset has no samples"
                                         : fmt::format("no samples left after dropping {} users with fewer than {} "
                                                       "positives",
                                                       out.report.dropped_users, options.min_positives));
  }
  return out;
}

ParsedDataset parse_dataset(const std::filesystem::path& path, const ParseOptions& options, Vocabulary base) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  return parse_dataset(in, options, std::move(base));
}

std::string format_sample(const DataSample& sample, const Vocabulary& vocab) {
  std::string out = sample.label == 1.0 ? "1" : "0";
  auto side = [&](const std::vector<AttributeValuePair>& pairs) {
    out += '\t';
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (k) out += ' ';
      out += vocab.name(pairs[k].att);
      std::size_t eq = 0;
      const std::string& name = vocab.name(pairs[k].att);
      if (pairs[k].val != 1.0 || numeric_suffix(name, eq)) out += "=" + format_number(pairs[k].val);
    }
  };
  side(sample.user);
  side(sample.item);
  return out;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& s : dataset.samples) out << format_sample(s, dataset.vocab) << '\n';
}

AttributeRegime parse_regime(std::string_view text) {
  if (text == "both") return AttributeRegime::kBoth;
  if (text == "user") return AttributeRegime::kUserOnly;
  if (text == "item") return AttributeRegime::kItemOnly;
  if (text == "none") return AttributeRegime::kNone;
  throw ConfigError(fmt::format("unknown attribute regime '{}' (expected both, user, item or none)", text));
}

const char* regime_name(AttributeRegime regime) noexcept {
  switch (regime) {
    case AttributeRegime::kBoth: return "both";
    case AttributeRegime::kUserOnly: return "user";
    case AttributeRegime::kItemOnly: return "item";
    case AttributeRegime::kNone: return "none";
  }
  return "?";
}

std::vector<DataSample> strip_attributes(std::span<const DataSample> samples, AttributeRegime regime) {
  const bool keep_user = regime == AttributeRegime::kBoth || regime == AttributeRegime::kUserOnly;
  const bool keep_item = regime == AttributeRegime::kBoth || regime == AttributeRegime::kItemOnly;
  std::vector<DataSample> out(samples.begin(), samples.end());
  for (auto& s : out) {
    if (!keep_user) s.user.resize(1);
    if (!keep_item) s.item.resize(1);
  }
  return out;
}

}  // namespace gmcf
