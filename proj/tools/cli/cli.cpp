#include "cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "stance/corpus.hpp"
#include "stance/csv.hpp"
#include "stance/error.hpp"
#include "stance/evaluation.hpp"
#include "stance/model.hpp"
#include "stance/tokenizer.hpp"
#include "stance/training.hpp"

namespace stance::cli {

namespace {

struct Options {
  // shared
  std::string bodies;
  std::string stances;
  std::string vocab;
  std::string merges;
  std::string checkpoint;
  std::string out_dir;
  std::string config_file;
  std::size_t max_len = 512;
  std::size_t threads = 1;

  // stats
  std::string split = "auto";

  // tokenize
  std::string input;
  bool with_padding = false;

  // model
  std::size_t layers = 4;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t max_positions = 512;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  std::string init_checkpoint;

  // training
  TrainConfig train;
  std::optional<std::uint64_t> shuffle_seed;

  // score / buckets / render-cm
  std::string predictions;
  std::string confusion;
  std::string output;
  std::string title = "Confusion matrix";

  // ablate
  std::vector<std::size_t> lengths{128, 256, 512};
  std::string test_bodies;
  std::string test_stances;
  double holdout = 0.1;
  std::uint64_t holdout_seed = 0;
};

struct Cli {
  std::unique_ptr<CLI::App> app;
  std::vector<CLI::App*> subcommands;
};

void add_corpus(CLI::App* sub, Options& o, bool required = true) {
  auto* b = sub->add_option("--bodies", o.bodies, "Bodies CSV (Body ID, articleBody)");
  auto* s = sub->add_option("--stances", o.stances, "Stances CSV (Headline, Body ID, Stance)");
  if (required) {
    b->required();
    s->required();
  }
}

void add_assets(CLI::App* sub, Options& o) {
  sub->add_option("--vocab", o.vocab, "BPE vocab.json")->required();
  sub->add_option("--merges", o.merges, "BPE merges.txt")->required();
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_file, "Flat key=value file; command-line flags take precedence");
  sub->add_option("--out-dir", o.out_dir, "Directory for report files and the resolved config");
  sub->add_option("--threads", o.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_model(CLI::App* sub, Options& o) {
  sub->add_option("--layers", o.layers, "Encoder layers")->capture_default_str();
  sub->add_option("--hidden", o.hidden, "Hidden width")->capture_default_str();
  sub->add_option("--heads", o.heads, "Attention heads")->capture_default_str();
  sub->add_option("--ffn", o.ffn, "Feed-forward width")->capture_default_str();
  sub->add_option("--max-positions", o.max_positions, "Position embedding rows")->capture_default_str();
  sub->add_option("--dropout", o.dropout, "Dropout rate (training only)")->capture_default_str();
  sub->add_option("--seed", o.seed, "Initialisation seed; also the default shuffle seed")->capture_default_str();
}

void add_training(CLI::App* sub, Options& o) {
  auto& t = o.train;
  sub->add_option("--lr", t.learning_rate, "Peak learning rate")->capture_default_str();
  sub->add_option("--weight-decay", t.weight_decay, "Decoupled weight decay")->capture_default_str();
  sub->add_option("--epochs", t.epochs, "Epochs")->capture_default_str();
  sub->add_option("--batch-size", t.batch_size, "Batch size")->capture_default_str();
  sub->add_option("--beta1", t.beta1, "Adam beta1")->capture_default_str();
  sub->add_option("--beta2", t.beta2, "Adam beta2")->capture_default_str();
  sub->add_option("--epsilon", t.epsilon, "Adam epsilon")->capture_default_str();
  sub->add_option("--warmup", t.warmup_fraction, "Warmup fraction of total steps")->capture_default_str();
  sub->add_option("--shuffle-seed", o.shuffle_seed, "Batch shuffle and dropout seed (default: --seed)");
  sub->add_option("--max-grad-norm", t.max_grad_norm, "Gradient clipping norm, 0 = off")->capture_default_str();
}

Cli build(Options& o) {
  Cli cli;
  cli.app = std::make_unique<CLI::App>("Claim-article stance detection: corpus statistics, BPE encoding, "
                                       "transformer fine-tuning and FNC-I scoring.",
                                       "stance");
  auto& app = *cli.app;
  app.require_subcommand(1, 1);

  auto* stats = app.add_subcommand("stats", "Dataset statistics reconciled against the published split figures");
  add_corpus(stats, o);
  add_common(stats, o);
  stats->add_option("--split", o.split, "Reference split: auto, train or test")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "train", "test"}));

  auto* tokenize = app.add_subcommand("tokenize", "Print BPE id sequences, one example per line");
  add_assets(tokenize, o);
  add_corpus(tokenize, o, false);
  add_common(tokenize, o);
  tokenize->add_option("--input", o.input, "Text file, one string per line (used without --bodies/--stances)");
  tokenize->add_option("--max-len", o.max_len, "Pair encoding length")->capture_default_str();
  tokenize->add_flag("--with-padding", o.with_padding, "Print padded pair encodings in full");

  auto* train = app.add_subcommand("train", "Fine-tune the classifier");
  add_corpus(train, o);
  add_assets(train, o);
  add_common(train, o);
  add_model(train, o);
  add_training(train, o);
  train->add_option("--max-len", o.max_len, "Pair encoding length")->capture_default_str();
  train->add_option("--checkpoint", o.checkpoint, "Output checkpoint path")->required();
  train->add_option("--init", o.init_checkpoint, "Start from this checkpoint instead of a fresh initialisation");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a labeled split");
  add_corpus(eval, o);
  add_assets(eval, o);
  add_common(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--max-len", o.max_len, "Pair encoding length")->capture_default_str();

  auto* score = app.add_subcommand("score", "Score an external predictions CSV against gold stances");
  score->add_option("--stances", o.stances, "Gold stances CSV")->required();
  score->add_option("--predictions", o.predictions, "Predictions CSV (Headline, Body ID, Stance)")->required();
  add_common(score, o);

  auto* buckets = app.add_subcommand("buckets", "Accuracy and counts by claim-article token length");
  add_corpus(buckets, o);
  add_assets(buckets, o);
  add_common(buckets, o);
  buckets->add_option("--checkpoint", o.checkpoint, "Predict with this checkpoint");
  buckets->add_option("--predictions", o.predictions, "Or take predictions from this CSV");
  buckets->add_option("--max-len", o.max_len, "Pair encoding length for --checkpoint")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate across maximum sequence lengths");
  add_corpus(ablate, o);
  add_assets(ablate, o);
  add_common(ablate, o);
  add_model(ablate, o);
  add_training(ablate, o);
  ablate->add_option("--lengths", o.lengths, "Comma-separated max_len values")->delimiter(',')->capture_default_str();
  ablate->add_option("--test-bodies", o.test_bodies, "Evaluation bodies (default: seeded holdout)");
  ablate->add_option("--test-stances", o.test_stances, "Evaluation stances (default: seeded holdout)");
  ablate->add_option("--holdout", o.holdout, "Holdout fraction when no test split is given")->capture_default_str();
  ablate->add_option("--holdout-seed", o.holdout_seed, "Holdout seed")->capture_default_str();

  auto* render = app.add_subcommand("render-cm", "Render a confusion matrix as SVG");
  render->add_option("--confusion", o.confusion, "Confusion matrix CSV as written by eval/score");
  render->add_option("--stances", o.stances, "Gold stances CSV (with --predictions)");
  render->add_option("--predictions", o.predictions, "Predictions CSV (with --stances)");
  render->add_option("--output", o.output, "SVG path")->required();
  render->add_option("--title", o.title, "Chart title")->capture_default_str();
  add_common(render, o);

  cli.subcommands = {stats, tokenize, train, eval, score, buckets, ablate, render};
  return cli;
}

std::string option_key(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

// Inserts "--key value" for config entries whose key is not already on the
// command line.
std::vector<std::string> apply_config(CLI::App& sub, const std::vector<std::string>& args, std::size_t sub_pos,
                                      const std::string& config_path) {
  const auto entries = parse_config(csv::read_file(config_path));
  std::set<std::string> given;
  for (std::size_t i = sub_pos + 1; i < args.size(); ++i) {
    if (args[i].starts_with("--")) {
      given.insert(args[i].substr(2, args[i].find('=') - 2));
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1);
  for (const auto& [key, value] : entries) {
    if (key == "config" || given.contains(key)) {
      continue;
    }
    const CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ConfigError(config_path + ": unknown key \"" + key + "\"");
    }
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1") {
        out.push_back("--" + key);
      }
      continue;
    }
    if (value.empty()) {
      continue;
    }
    out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
  return out;
}

std::string resolved_config(const CLI::App& sub) {
  std::ostringstream out;
  out << "# resolved configuration for: stance " << sub.get_name() << "\n";
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string key = option_key(opt);
    if (key.empty() || key == "help" || key == "config") {
      continue;
    }
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) {
        value += (i > 0 ? "," : "") + results[i];
      }
    } else {
      value = opt->get_default_str();
      if (value.starts_with('[') && value.ends_with(']')) {
        value = value.substr(1, value.size() - 2);
      }
      value.erase(std::remove(value.begin(), value.end(), ' '), value.end());
    }
    out << key << '=' << value << "\n";
  }
  return std::move(out).str();
}

std::string prepare_out_dir(const std::string& dir) {
  if (dir.empty()) {
    return dir;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  }
  return dir;
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

struct Assets {
  BpeAssets bpe;
  SpecialTokens specials;
};

Assets load_bpe(const Options& o) {
  BpeAssets bpe = load_assets(o.vocab, o.merges);
  const SpecialTokens specials = SpecialTokens::from_assets(bpe);
  return {std::move(bpe), specials};
}

ModelConfig model_config(const Options& o, std::size_t vocab_size) {
  ModelConfig c;
  c.num_layers = o.layers;
  c.hidden_dim = o.hidden;
  c.num_heads = o.heads;
  c.ffn_dim = o.ffn;
  c.vocab_size = vocab_size;
  c.max_positions = o.max_positions;
  c.dropout_rate = o.dropout;
  c.seed = o.seed;
  c.validate();
  return c;
}

TrainConfig train_config(const Options& o) {
  TrainConfig t = o.train;
  t.max_len = o.max_len;
  t.threads = o.threads;
  t.shuffle_seed = o.shuffle_seed.value_or(o.seed);
  t.validate();
  return t;
}

std::vector<StanceLabel> aligned_predictions(const std::vector<ClaimInstance>& gold, const std::string& path) {
  const auto predicted = load_stances(path, true);
  if (predicted.size() != gold.size()) {
    throw DataError("predictions file has " + std::to_string(predicted.size()) + " rows, gold has " +
                    std::to_string(gold.size()));
  }
  std::vector<StanceLabel> labels;
  labels.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i].headline != gold[i].headline || predicted[i].body_id != gold[i].body_id) {
      throw DataError("predictions row " + std::to_string(i + 2) + " does not match gold row (Headline/Body ID)");
    }
    labels.push_back(*predicted[i].stance);
  }
  return labels;
}

std::vector<StanceLabel> gold_labels(std::span<const ClaimInstance> gold) {
  std::vector<StanceLabel> labels;
  labels.reserve(gold.size());
  for (const auto& g : gold) {
    labels.push_back(*g.stance);
  }
  return labels;
}

void write_eval_outputs(const std::string& dir, const EvalReport& report, const ConfusionMatrix& cm) {
  write_text_file(in_dir(dir, "eval_report.json"), report_to_json(report, cm));
  write_text_file(in_dir(dir, "eval_report.csv"), report_to_csv(report));
  write_text_file(in_dir(dir, "confusion.csv"), confusion_to_csv(cm));
  render_confusion_svg(cm, in_dir(dir, "confusion.svg"));
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_stats(const Options& o, std::ostream& out, std::ostream& err) {
  const auto pairs = load_split(o.bodies, o.stances);
  const auto stats = compute_stats(pairs);
  const SplitReference& ref =
      o.split == "train" ? kTrainReference : (o.split == "test" ? kTestReference : closest_reference(stats));
  const auto rec = reconcile(stats, ref);
  out << stats_to_table(stats, &rec);
  for (const auto& w : rec.warnings) {
    err << "warning: " << w << "\n";
  }
  if (!o.out_dir.empty()) {
    write_text_file(in_dir(o.out_dir, "stats.json"), stats_to_json(stats, &rec));
    write_text_file(in_dir(o.out_dir, "stats.csv"), stats_to_csv(stats));
  }
}

void print_ids(std::ostream& out, std::span<const TokenId> ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << (i > 0 ? " " : "") << ids[i];
  }
  out << "\n";
}

void cmd_tokenize(const Options& o, std::ostream& out) {
  const Assets assets = load_bpe(o);
  if (!o.bodies.empty() || !o.stances.empty()) {
    if (o.bodies.empty() || o.stances.empty()) {
      throw ConfigError("--bodies and --stances must be given together");
    }
    const auto pairs = load_split(o.bodies, o.stances, false);
    const auto encoded = encode_corpus(pairs, assets.bpe, assets.specials, o.max_len, o.threads);
    for (const auto& seq : encoded) {
      const std::size_t shown = o.with_padding ? seq.ids.size() : seq.content_len;
      print_ids(out, std::span<const TokenId>(seq.ids.data(), shown));
    }
    return;
  }
  std::string text;
  if (o.input.empty() || o.input == "-") {
    std::ostringstream buffer;
    buffer << std::cin.rdbuf();
    text = std::move(buffer).str();
  } else {
    text = csv::read_file(o.input);
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    print_ids(out, encode_text(assets.bpe, line));
  }
}

void cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const Assets assets = load_bpe(o);
  const TrainConfig tc = train_config(o);
  const auto pairs = load_split(o.bodies, o.stances);
  ModelParameters params;
  if (!o.init_checkpoint.empty()) {
    params = load_checkpoint(o.init_checkpoint);
    if (params.config.vocab_size != assets.bpe.vocab_size()) {
      throw ConfigError("--init checkpoint vocab size does not match the BPE assets");
    }
  } else {
    params = init_params(model_config(o, assets.bpe.vocab_size()));
  }
  const auto result = train(std::move(params), pairs, assets.bpe, assets.specials, tc, o.checkpoint, &err);
  out << result.report.to_text(false);
  if (!o.out_dir.empty()) {
    write_text_file(in_dir(o.out_dir, "train_report.csv"), result.report.to_csv());
    write_text_file(in_dir(o.out_dir, "train_report.txt"), result.report.to_text(false));
  }
}

void cmd_eval(const Options& o, std::ostream& out) {
  const ModelParameters params = load_checkpoint(o.checkpoint);
  if (o.max_len > params.config.max_positions) {
    throw ConfigError("--max-len " + std::to_string(o.max_len) + " exceeds the checkpoint's max_positions " +
                      std::to_string(params.config.max_positions));
  }
  const Assets assets = load_bpe(o);
  if (params.config.vocab_size != assets.bpe.vocab_size()) {
    throw ConfigError("checkpoint vocab size " + std::to_string(params.config.vocab_size) +
                      " does not match the BPE assets (" + std::to_string(assets.bpe.vocab_size()) + ")");
  }
  const auto stances = load_stances(o.stances, true);
  const auto pairs = join_pairs(stances, load_bodies(o.bodies));
  const auto result = evaluate(params, pairs, assets.bpe, assets.specials, o.max_len, o.threads);
  out << report_to_csv(result.report);
  if (!o.out_dir.empty()) {
    write_eval_outputs(o.out_dir, result.report, result.confusion);
    std::ostringstream preds;
    csv::write_row(preds, {"Headline", "Body ID", "Stance"});
    for (std::size_t i = 0; i < stances.size(); ++i) {
      csv::write_row(preds, {stances[i].headline, std::to_string(stances[i].body_id),
                             std::string(to_string(result.predictions[i].label))});
    }
    write_text_file(in_dir(o.out_dir, "predictions.csv"), preds.str());
  }
}

void cmd_score(const Options& o, std::ostream& out) {
  const auto gold = load_stances(o.stances, true);
  const auto predicted = aligned_predictions(gold, o.predictions);
  const auto cm = confusion(gold_labels(gold), predicted);
  const auto report = make_report(cm);
  out << report_to_csv(report);
  if (!o.out_dir.empty()) {
    write_eval_outputs(o.out_dir, report, cm);
  }
}

void cmd_buckets(const Options& o, std::ostream& out) {
  if (!o.checkpoint.empty() && !o.predictions.empty()) {
    throw ConfigError("give at most one of --checkpoint and --predictions");
  }
  const Assets assets = load_bpe(o);
  const bool labeled = !o.checkpoint.empty() || !o.predictions.empty();
  const auto stances = load_stances(o.stances, labeled);
  const auto pairs = join_pairs(stances, load_bodies(o.bodies));
  const auto lengths = pair_lengths(pairs, assets.bpe, assets.specials, o.threads);
  std::vector<StanceLabel> predicted;
  if (!o.checkpoint.empty()) {
    const ModelParameters params = load_checkpoint(o.checkpoint);
    for (const auto& p : evaluate(params, pairs, assets.bpe, assets.specials, o.max_len, o.threads).predictions) {
      predicted.push_back(p.label);
    }
  } else if (!o.predictions.empty()) {
    predicted = aligned_predictions(stances, o.predictions);
  }
  const auto report = bucket_by_length(pairs, predicted, lengths);
  out << buckets_to_csv(report);
  if (!o.out_dir.empty()) {
    write_text_file(in_dir(o.out_dir, "buckets.csv"), buckets_to_csv(report));
    write_text_file(in_dir(o.out_dir, "buckets.json"), buckets_to_json(report));
  }
}

void cmd_ablate(const Options& o, std::ostream& out, std::ostream& err) {
  const Assets assets = load_bpe(o);
  const TrainConfig tc = train_config(o);
  const ModelConfig mc = model_config(o, assets.bpe.vocab_size());
  const auto pairs = load_split(o.bodies, o.stances);
  AblationReport report;
  if (!o.test_bodies.empty() || !o.test_stances.empty()) {
    if (o.test_bodies.empty() || o.test_stances.empty()) {
      throw ConfigError("--test-bodies and --test-stances must be given together");
    }
    const auto test = load_split(o.test_bodies, o.test_stances);
    report = ablate_max_length(pairs, test, o.lengths, mc, tc, assets.bpe, assets.specials, &err);
  } else {
    report = ablate_max_length(pairs, o.lengths, mc, tc, assets.bpe, assets.specials, o.holdout, o.holdout_seed, &err);
  }
  out << ablation_to_csv(report);
  if (!o.out_dir.empty()) {
    write_text_file(in_dir(o.out_dir, "ablation.csv"), ablation_to_csv(report));
    write_text_file(in_dir(o.out_dir, "ablation.json"), ablation_to_json(report));
  }
}

void cmd_render(const Options& o) {
  ConfusionMatrix cm;
  if (!o.confusion.empty()) {
    cm = confusion_from_csv(csv::read_file(o.confusion));
  } else if (!o.stances.empty() && !o.predictions.empty()) {
    const auto gold = load_stances(o.stances, true);
    cm = confusion(gold_labels(gold), aligned_predictions(gold, o.predictions));
  } else {
    throw ConfigError("render-cm needs --confusion, or --stances with --predictions");
  }
  render_confusion_svg(cm, o.output, o.title);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
      return std::string();
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#' || line.front() == ';' || line.front() == '[') {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out.emplace_back(trim(line.substr(0, eq)), std::move(value));
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  Cli cli = build(o);
  CLI::App& app = *cli.app;

  std::vector<std::string> args = raw_args;
  CLI::App* active = nullptr;
  try {
    // Locate the subcommand and expand its --config file, if any.
    for (std::size_t i = 0; i < args.size() && active == nullptr; ++i) {
      for (CLI::App* sub : cli.subcommands) {
        if (args[i] == sub->get_name()) {
          active = sub;
          std::string config_path;
          for (std::size_t j = i + 1; j < args.size(); ++j) {
            if (args[j] == "--config" && j + 1 < args.size()) {
              config_path = args[j + 1];
            } else if (args[j].starts_with("--config=")) {
              config_path = args[j].substr(9);
            }
          }
          if (!config_path.empty()) {
            args = apply_config(*sub, args, i, config_path);
          }
          break;
        }
      }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << (active != nullptr ? active->help() : app.help());
      return kSuccess;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kSuccess;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n\n" << (active != nullptr ? active->help() : app.help());
      return kUsageError;
    }

    prepare_out_dir(o.out_dir);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "stats") {
      cmd_stats(o, out, err);
    } else if (name == "tokenize") {
      cmd_tokenize(o, out);
    } else if (name == "train") {
      cmd_train(o, out, err);
    } else if (name == "eval") {
      cmd_eval(o, out);
    } else if (name == "score") {
      cmd_score(o, out);
    } else if (name == "buckets") {
      cmd_buckets(o, out);
    } else if (name == "ablate") {
      cmd_ablate(o, out, err);
    } else if (name == "render-cm") {
      cmd_render(o);
    }
    if (!o.out_dir.empty()) {
      write_text_file(in_dir(o.out_dir, name + ".config.ini"), resolved_config(*app.get_subcommands().front()));
    }
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kSuccess;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return run(args, out, err);
}

}  // namespace stance::cli
