#pragma once

// Text dataset format, one sample per line:
//   <label>\t<user fields>\t<item fields>
// where each field list is space-separated name[=value] tokens (value 1 when
// omitted). Only a numeric suffix after the last '=' counts as a value, so
// "gender=male" is a single attribute. Blank lines and lines starting with
// '#' are skipped.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "gmcf/core.hpp"

namespace gmcf {

struct ParseOptions {
  // When set, the first column is a rating and label = rating > threshold.
  std::optional<double> threshold;
  // Users with fewer positives are dropped. 0 keeps everyone.
  std::size_t min_positives = 0;
};

struct ParseReport {
  std::size_t lines = 0;  // sample lines read
  std::size_t samples = 0;
  std::size_t positives = 0;
  std::size_t users = 0;
  std::size_t dropped_users = 0;
  std::size_t dropped_samples = 0;
  std::size_t user_attributes = 0;
  std::size_t item_attributes = 0;

  std::string line() const;
};

struct ParsedDataset {
  Dataset dataset;
  ParseReport report;
};

// Attribute ids continue from `base`, so parsing against a checkpoint's
// vocabulary keeps known names on their trained ids. Throws ParseError (with
// the line number) on malformed lines and EmptyDatasetError when no sample
// survives.
ParsedDataset parse_dataset(std::istream& in, const ParseOptions& options = {}, Vocabulary base = {});
ParsedDataset parse_dataset(const std::filesystem::path& path, const ParseOptions& options = {},
                            Vocabulary base = {});

// One line against a vocabulary, interning new names. Throws ParseError.
DataSample parse_sample_line(std::string_view line, Vocabulary& vocab, const ParseOptions& options = {},
                             std::size_t line_number = 1);

// Inverse of parsing: shortest round-trip numbers, "=1" omitted.
void write_dataset(std::ostream& out, const Dataset& dataset);
std::string format_sample(const DataSample& sample, const Vocabulary& vocab);

enum class AttributeRegime { kBoth, kUserOnly, kItemOnly, kNone };

AttributeRegime parse_regime(std::string_view text);
const char* regime_name(AttributeRegime regime) noexcept;

// Drops side information for the degenerate-attribute experiments. A side
// without attributes keeps only its first (identifying) field and so becomes
// a single-node graph. The vocabulary is left untouched.
std::vector<DataSample> strip_attributes(std::span<const DataSample> samples, AttributeRegime regime);

}  // namespace gmcf
