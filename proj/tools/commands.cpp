#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "cli.hpp"
#include "gmcf/checkpoint.hpp"
#include "gmcf/dataset_io.hpp"
#include "gmcf/diagnostics.hpp"
#include "gmcf/errors.hpp"
#include "gmcf/evaluation.hpp"
#include "gmcf/synthetic.hpp"
#include "gmcf/training.hpp"
#include "gmcf/variant_config.hpp"

namespace gmcf::cli {

namespace {

struct DataOptions {
  std::string path;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  std::size_t min_positives = 0;
  std::string attrs = "both";
  bool sample_negatives = false;
};

struct TrainOptions {
  std::string variant = "gmcf";
  std::size_t dim = 64;
  std::size_t mlp_depth = 1;
  double lr = 1e-3;
  double lambda = 1e-5;
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  std::size_t patience = 5;
};

struct LoadedData {
  Vocabulary vocab;
  ParseReport report;
  SplitDataset split;
};

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.path, "Dataset file (label<TAB>user fields<TAB>item fields)")->required();
  app->add_option("--threshold", d.threshold, "Treat the first column as a rating; label = rating > threshold");
  app->add_option("--min-positives", d.min_positives, "Drop users with fewer positive samples");
  app->add_option("--attrs", d.attrs, "Side information kept: both, user, item or none")
      ->check(CLI::IsMember({"both", "user", "item", "none"}));
  app->add_flag("--sample-negatives", d.sample_negatives,
                "Treat the positives as implicit feedback and draw one negative per positive");
}

void add_train_options(CLI::App* app, TrainOptions& t, bool single_variant) {
  if (single_variant) app->add_option("--variant", t.variant, "Variant preset or inner=..,cross=..,fuse=.. string");
  app->add_option("--dim", t.dim, "Embedding size d")->check(CLI::PositiveNumber);
  app->add_option("--mlp-depth", t.mlp_depth, "Hidden layers of the interaction MLP");
  app->add_option("--lr", t.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  app->add_option("--lambda", t.lambda, "L2 penalty weight")->check(CLI::NonNegativeNumber);
  app->add_option("--epochs", t.epochs, "Maximum epochs");
  app->add_option("--batch-size", t.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  app->add_option("--patience", t.patience, "Early-stopping patience in epochs (0 disables)");
}

TrainConfig to_config(const TrainOptions& t, std::uint64_t seed) {
  TrainConfig c;
  c.dim = t.dim;
  c.mlp_depth = t.mlp_depth;
  c.learning_rate = t.lr;
  c.lambda = t.lambda;
  c.epochs = t.epochs;
  c.batch_size = t.batch_size;
  c.patience = t.patience;
  c.seed = seed;
  c.variant = parse_variant(t.variant);
  return c;
}

LoadedData load_data(const DataOptions& d, std::uint64_t seed, Vocabulary base = {}) {
  ParseOptions po;
  if (!std::isnan(d.threshold)) po.threshold = d.threshold;
  po.min_positives = d.min_positives;
  ParsedDataset parsed = parse_dataset(std::filesystem::path(d.path), po, std::move(base));

  std::vector<DataSample> samples = std::move(parsed.dataset.samples);
  if (d.sample_negatives) {
    std::vector<DataSample> positives;
    for (auto& s : samples) {
      if (s.label == 1.0) positives.push_back(std::move(s));
    }
    if (positives.empty()) throw EmptyDatasetError("no positive samples to draw negatives for");
    auto negatives = negative_sample(positives, positives, seed ^ 0x5bd1e995ULL, &parsed.dataset.vocab);
    samples = std::move(positives);
    samples.insert(samples.end(), negatives.begin(), negatives.end());
  }
  samples = strip_attributes(samples, parse_regime(d.attrs));

  LoadedData out;
  out.vocab = std::move(parsed.dataset.vocab);
  out.report = parsed.report;
  out.split = split_per_user(samples, seed);
  return out;
}

const std::vector<DataSample>& pick_split(const SplitDataset& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "validation") return split.validation;
  return split.test;
}

std::vector<DataSample> all_samples(const SplitDataset& split) {
  std::vector<DataSample> all = split.train;
  all.insert(all.end(), split.validation.begin(), split.validation.end());
  all.insert(all.end(), split.test.begin(), split.test.end());
  return all;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path);
}

std::vector<AttributeId> select_group(const Vocabulary& vocab, const std::string& spec) {
  std::vector<AttributeId> out;
  for (const auto& part : CLI::detail::split(spec, ',')) {
    const std::string pattern = CLI::detail::trim_copy(part);
    if (pattern.empty()) continue;
    const bool prefix = pattern.back() == '*';
    const std::string stem = prefix ? pattern.substr(0, pattern.size() - 1) : pattern;
    bool found = false;
    for (const AttributeId& att : vocab.universe()) {
      const std::string& name = vocab.name(att);
      if (prefix ? name.rfind(stem, 0) == 0 : name == stem) {
        if (std::find(out.begin(), out.end(), att) == out.end()) out.push_back(att);
        found = true;
      }
    }
    if (!found) throw ConfigError("no attribute matches '" + pattern + "'");
  }
  if (out.empty()) throw ConfigError("empty attribute group");
  return out;
}

// ---- subcommands -----------------------------------------------------------

int cmd_train(const DataOptions& d, const TrainOptions& t, std::uint64_t seed, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
  const TrainConfig config = to_config(t, seed);
  LoadedData data = load_data(d, seed);
  err << data.report.line() << '\n';
  if (!data.split.undersized_users.empty()) {
    err << data.split.undersized_users.size() << " users have fewer than 5 samples; kept in train only\n";
  }
  const auto universe = data.vocab.universe();
  TrainResult result = train(universe, data.split, config, [&](const EpochLog& e) { out << e.line() << '\n'; });
  out << "best_epoch=" << result.best_epoch << '\n';
  if (!data.split.test.empty()) {
    try {
      out << "test " << evaluate(data.split.test, result.params).line() << '\n';
    } catch (const UndefinedMetricError& e) {
      err << "test metrics undefined: " << e.what() << '\n';
    }
  }
  save_checkpoint(result.params, data.vocab, out_path);
  err << "saved " << out_path << '\n';
  return kExitOk;
}

int cmd_evaluate(const DataOptions& d, const std::string& checkpoint, const std::string& split_name,
                 std::uint64_t seed, const std::string& per_user, std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  LoadedData data = load_data(d, seed, ckpt.vocab);
  const std::vector<DataSample> samples =
      split_name == "all" ? all_samples(data.split) : pick_split(data.split, split_name);
  if (samples.empty()) {
    throw UndefinedMetricError("the " + split_name + " split is empty; metrics are undefined");
  }
  const auto scored = score_samples(samples, ckpt.params);
  out << evaluate(scored).line() << '\n';
  if (!per_user.empty()) {
    std::string text = "user\titems\trelevant\tndcg@10\n";
    for (const auto& u : ndcg_per_user(scored, 10)) {
      text += fmt::format("{}\t{}\t{}\t{:.6f}\n", data.vocab.name(AttributeId{u.user, Side::kUser}), u.items,
                          u.relevant, u.ndcg);
    }
    write_text(per_user, text);
  }
  return kExitOk;
}

int cmd_predict(const std::string& checkpoint, const std::vector<std::string>& lines, std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  const std::size_t known = ckpt.vocab.size();
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string line = lines[n];
    // The label column is optional here.
    if (std::count(line.begin(), line.end(), '\t') == 1) line = "0\t" + line;
    Vocabulary vocab = ckpt.vocab;
    const DataSample s = parse_sample_line(line, vocab, {}, n + 1);
    for (const auto* side : {&s.user, &s.item}) {
      for (const auto& p : *side) {
        if (p.att.id >= known) {
          throw MissingEmbeddingError(fmt::format("line {}: unknown {} attribute '{}'", n + 1, side_name(p.att.side),
                                                  vocab.name(p.att)));
        }
      }
    }
    Tape tape;
    const double score = forward(tape, ckpt.params, s).score.scalar();
    out << fmt::format("score={:.17g} probability={:.17g}\n", score, sigmoid(score));
  }
  return kExitOk;
}

int cmd_ablate(const DataOptions& d, const TrainOptions& t, std::vector<std::string> variants, std::uint64_t seed,
               std::size_t seeds, std::ostream& out, std::ostream& err) {
  if (variants.empty()) variants = {"gmcf", "inner=mlp,cross=none,fuse=gru", "fm"};
  if (seeds == 0) throw ConfigError("--seeds must be at least 1");
  std::vector<VariantConfig> configs;
  for (const auto& v : variants) configs.push_back(parse_variant(v));

  std::vector<MetricReport> totals(configs.size());
  for (std::size_t k = 0; k < seeds; ++k) {
    const std::uint64_t s = seed + k;
    LoadedData data = load_data(d, s);
    const auto universe = data.vocab.universe();
    for (std::size_t v = 0; v < configs.size(); ++v) {
      TrainOptions opts = t;
      opts.variant = variants[v];
      const TrainResult r = train(universe, data.split, to_config(opts, s));
      const MetricReport m = evaluate(data.split.test, r.params);
      err << fmt::format("seed={} variant={} best_epoch={} {}\n", s, to_string(configs[v]), r.best_epoch, m.line());
      totals[v].auc += m.auc;
      totals[v].logloss += m.logloss;
      totals[v].ndcg5 += m.ndcg5;
      totals[v].ndcg10 += m.ndcg10;
    }
  }
  out << fmt::format("{:<24}{:>10}{:>10}{:>10}{:>10}\n", "variant", "auc", "logloss", "ndcg@5", "ndcg@10");
  const double n = static_cast<double>(seeds);
  for (std::size_t v = 0; v < configs.size(); ++v) {
    out << fmt::format("{:<24}{:>10.4f}{:>10.4f}{:>10.4f}{:>10.4f}\n", display_name(configs[v]), totals[v].auc / n,
                       totals[v].logloss / n, totals[v].ndcg5 / n, totals[v].ndcg10 / n);
  }
  return kExitOk;
}

int cmd_gradcheck(const GradcheckOptions& o, std::uint64_t seed, std::size_t instances, double tolerance,
                  std::ostream& out, std::ostream& err) {
  GradientCheckResult worst;
  std::size_t entries = 0;
  std::uint64_t worst_seed = seed;
  for (std::size_t k = 0; k < instances; ++k) {
    const GradientCheckResult r = gradcheck_instance(o, seed + k);
    entries += r.entries_checked;
    if (k == 0 || r.max_relative_error > worst.max_relative_error) {
      worst = r;
      worst_seed = seed + k;
    }
  }
  out << fmt::format("max_relative_error={:.3e} entries={} instances={}\n", worst.max_relative_error, entries,
                     instances);
  if (!(worst.max_relative_error < tolerance)) {
    err << fmt::format("gradient mismatch above {:.1e}: seed {} parameter {} entry {} analytic {:.10e} numeric {:.10e}\n",
                       tolerance, worst_seed, worst.worst_parameter, worst.worst_entry, worst.analytic, worst.numeric);
    return kExitData;
  }
  return kExitOk;
}

int cmd_fmcheck(std::size_t n, std::size_t dim, std::size_t max_attrs, std::uint64_t seed, double tolerance,
                std::ostream& out, std::ostream& err) {
  const FmcheckResult r = fmcheck(n, dim, max_attrs, seed);
  out << fmt::format("max_abs_deviation={:.3e} instances={}\n", r.max_abs_deviation, r.instances);
  if (!(r.max_abs_deviation < tolerance)) {
    err << fmt::format("reduction deviates from the FM formula by more than {:.1e}\n", tolerance);
    return kExitData;
  }
  return kExitOk;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& path, std::string rule_path, std::ostream& out) {
  const SyntheticData data = generate_synthetic(spec);
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  write_dataset(f, data.dataset);
  if (!f) throw Error("failed writing " + path);
  if (rule_path.empty()) rule_path = path + ".rule";
  write_text(rule_path, data.model.describe());
  std::size_t positives = 0;
  for (const auto& s : data.dataset.samples) positives += s.label == 1.0 ? 1 : 0;
  out << fmt::format("samples={} positives={} attributes={} rule={}\n", data.dataset.samples.size(), positives,
                     data.dataset.vocab.size(), rule_path);
  return kExitOk;
}

int cmd_export(const std::string& checkpoint, const std::string& group_a, const std::string& group_b,
               const std::string& sim_path, const std::string& match_path, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto a = select_group(ckpt.vocab, group_a);
  const auto b = select_group(ckpt.vocab, group_b);
  const MatchingMatrices m = export_matrices(ckpt.params.embeddings, ckpt.vocab, a, b);
  const std::string sim = format_grid(m.a_labels, m.a_labels, m.similarity);
  const std::string match = format_grid(m.a_labels, m.b_labels, m.matching);
  if (sim_path.empty()) {
    out << "# similarity\n" << sim;
  } else {
    write_text(sim_path, sim);
  }
  if (match_path.empty()) {
    out << "# matching\n" << match;
  } else {
    write_text(match_path, match);
  }
  return kExitOk;
}

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Command-line flags win over the config file and the file wins over
// defaults: a "key = value" line becomes "--key value" unless --key was
// given explicitly. "true" stands for a bare flag and "false" drops it.
std::vector<std::string> apply_config_file(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);

  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> out = args;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim_view(text);
    if (text.empty() || text.front() == '[') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key = value", path, number));
    }
    const std::string key(trim_view(text.substr(0, eq)));
    std::string value(trim_view(text.substr(eq + 1)));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    const std::string flag = "--" + key;
    if (key.empty() || key == "config" || given(flag)) continue;
    if (value == "false") continue;
    out.push_back(flag);
    if (value != "true") out.push_back(value);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph matching collaborative filtering: training, evaluation and diagnostics", "gmcf"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string config_path;
  DataOptions data;
  TrainOptions topts;

  auto* train_cmd = app.add_subcommand("train", "Train a model and save a checkpoint");
  std::string ckpt_out;
  add_data_options(train_cmd, data);
  add_train_options(train_cmd, topts, true);
  train_cmd->add_option("--seed", seed, "Seed for the split, initialisation and shuffling");
  train_cmd->add_option("--out", ckpt_out, "Checkpoint path")->required();
  train_cmd->add_option("--config", config_path, "Read option defaults from a key = value file");

  auto* eval_cmd = app.add_subcommand("evaluate", "Report AUC, logloss and NDCG of a checkpoint");
  std::string ckpt_in, split_name = "test", per_user;
  add_data_options(eval_cmd, data);
  eval_cmd->add_option("--checkpoint", ckpt_in, "Checkpoint path")->required();
  eval_cmd->add_option("--split", split_name, "Samples to score: train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  eval_cmd->add_option("--seed", seed, "Split seed (use the training seed)");
  eval_cmd->add_option("--per-user", per_user, "Write per-user NDCG@10 to this file");
  eval_cmd->add_option("--config", config_path, "Read option defaults from a key = value file");

  auto* predict_cmd = app.add_subcommand("predict", "Score sample lines with a checkpoint");
  std::vector<std::string> sample_lines;
  predict_cmd->add_option("--checkpoint", ckpt_in, "Checkpoint path")->required();
  predict_cmd->add_option("--sample", sample_lines, "Sample line; the label column may be omitted")->required();

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare several variants on one dataset");
  std::vector<std::string> variants;
  std::size_t seeds = 1;
  add_data_options(ablate_cmd, data);
  add_train_options(ablate_cmd, topts, false);
  ablate_cmd->add_option("--variant", variants, "Variant to include (repeatable)");
  ablate_cmd->add_option("--seed", seed, "First seed");
  ablate_cmd->add_option("--seeds", seeds, "Number of consecutive seeds to average over");
  ablate_cmd->add_option("--config", config_path, "Read option defaults from a key = value file");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare gradients with central finite differences");
  GradcheckOptions gopts;
  std::string grad_variant = "gmcf";
  std::size_t instances = 1;
  double grad_tol = 1e-4;
  grad_cmd->add_option("--d", gopts.dim, "Embedding size")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--max-attrs", gopts.max_attrs, "Maximum attributes per side")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--mlp-depth", gopts.mlp_depth, "Hidden layers of the interaction MLP");
  grad_cmd->add_option("--step", gopts.step, "Finite-difference step")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--variant", grad_variant, "Variant to check");
  grad_cmd->add_option("--seed", seed, "First instance seed");
  grad_cmd->add_option("--instances", instances, "Number of random instances")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--tolerance", grad_tol, "Largest acceptable relative error");

  auto* fm_cmd = app.add_subcommand("fmcheck", "Compare the FM reduction with the FM formula");
  std::size_t fm_n = 50, fm_dim = 8, fm_attrs = 4;
  double fm_tol = 1e-9;
  fm_cmd->add_option("--n", fm_n, "Number of random instances")->check(CLI::PositiveNumber);
  fm_cmd->add_option("--d", fm_dim, "Embedding size")->check(CLI::PositiveNumber);
  fm_cmd->add_option("--max-attrs", fm_attrs, "Maximum attributes per side")->check(CLI::PositiveNumber);
  fm_cmd->add_option("--seed", seed, "Seed");
  fm_cmd->add_option("--tolerance", fm_tol, "Largest acceptable absolute deviation");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-rule dataset");
  SyntheticSpec spec;
  std::string synth_out, rule_out, rule = "mixed";
  synth_cmd->add_option("--out", synth_out, "Dataset path")->required();
  synth_cmd->add_option("--rule-out", rule_out, "Rule sidecar path (default: <out>.rule)");
  synth_cmd->add_option("--users", spec.users, "Number of users")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--items", spec.items, "Number of items")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--per-user", spec.samples_per_user, "Samples per user")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--user-categories", spec.user_categories, "User categories")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--item-categories", spec.item_categories, "Item categories")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--user-noise-attrs", spec.user_noise_attributes, "Irrelevant user attributes");
  synth_cmd->add_option("--item-noise-attrs", spec.item_noise_attributes, "Irrelevant item attributes");
  synth_cmd->add_option("--rule", rule, "cross, inner or mixed")->check(CLI::IsMember({"cross", "inner", "mixed"}));
  synth_cmd->add_option("--inner-weight", spec.inner_weight, "Weight of the inner term");
  synth_cmd->add_option("--noise", spec.noise, "Probability of replacing a label by a coin flip")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--seed", seed, "Seed");

  auto* export_cmd = app.add_subcommand("export-matrices", "Attribute similarity and node matching grids");
  std::string group_a, group_b, sim_out, match_out;
  export_cmd->add_option("--checkpoint", ckpt_in, "Checkpoint path")->required();
  export_cmd->add_option("--group-a", group_a, "Comma-separated names; a trailing * matches a prefix")->required();
  export_cmd->add_option("--group-b", group_b, "Comma-separated names; a trailing * matches a prefix")->required();
  export_cmd->add_option("--similarity-out", sim_out, "File for the cosine grid (default: stdout)");
  export_cmd->add_option("--matching-out", match_out, "File for the matching grid (default: stdout)");

  std::vector<std::string> expanded;
  try {
    expanded = apply_config_file(args);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(data, topts, seed, ckpt_out, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(data, ckpt_in, split_name, seed, per_user, out);
    if (predict_cmd->parsed()) return cmd_predict(ckpt_in, sample_lines, out);
    if (ablate_cmd->parsed()) return cmd_ablate(data, topts, variants, seed, seeds, out, err);
    if (grad_cmd->parsed()) {
      gopts.variant = parse_variant(grad_variant);
      return cmd_gradcheck(gopts, seed, instances, grad_tol, out, err);
    }
    if (fm_cmd->parsed()) return cmd_fmcheck(fm_n, fm_dim, fm_attrs, seed, fm_tol, out, err);
    if (synth_cmd->parsed()) {
      spec.rule = parse_rule(rule);
      spec.seed = seed;
      return cmd_synth(spec, synth_out, rule_out, out);
    }
    if (export_cmd->parsed()) return cmd_export(ckpt_in, group_a, group_b, sim_out, match_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace gmcf::cli
