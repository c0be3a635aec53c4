// Command-line front end. Options may also come from a TOML/INI file given
// with --config; a section named after a subcommand ([train], [eval], ...)
// holds that subcommand's options, and command-line flags override the file.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "sentprobe/cli.hpp"

namespace {

using namespace sentprobe;

void add_probe_options(CLI::App* cmd, ProbeConfig& probe) {
  cmd->add_option("--probe-folds", probe.folds, "cross-validation folds")->capture_default_str();
  cmd->add_option("--probe-batch", probe.batch_size, "probe mini-batch size")->capture_default_str();
  cmd->add_option("--probe-epochs", probe.epochs, "probe epochs per fold")->capture_default_str();
  cmd->add_option("--probe-lr", probe.learning_rate, "probe learning rate")->capture_default_str();
  cmd->add_option("--probe-seed", probe.seed, "seed for fold assignment")->capture_default_str();
}

// "LABEL=a.ckpt.json,b.ckpt.json"
std::pair<std::string, std::vector<std::string>> parse_extra(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw InvalidInput("--row expects LABEL=ckpt[,ckpt...], got \"" + spec + "\"");
  }
  std::vector<std::string> paths;
  std::string rest = spec.substr(eq + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const auto piece = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) paths.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return {spec.substr(0, eq), paths};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sentprobe: train toy sentence encoders with NLI and definition supervision, and evaluate them"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.set_config("--config", "", "read options from a TOML/INI file (flags win)");
  app.require_subcommand(1);

  // partition
  PartitionOptions popt;
  auto* partition = app.add_subcommand("partition", "split an STS file by source or by Dice quantile");
  partition->add_option("--sts", popt.sts_path, "STS file (source, score, sentence1, sentence2)")->required();
  partition->add_option("--scheme", popt.scheme, "source | dice")
      ->check(CLI::IsMember({"source", "dice"}))->capture_default_str();
  partition->add_option("-k,--k", popt.k, "number of Dice quantiles")->capture_default_str();
  partition->add_option("--out", popt.out_dir, "output directory")->required();

  // train
  TrainOptions topt;
  std::string method = "sbert", pooling = "mean";
  std::uint64_t single_seed = 0;
  std::size_t max_steps = 0;
  auto* train = app.add_subcommand("train", "train an encoder with one method, once per seed");
  train->add_option("--method", method, "none|sbert|defsent|s+d|d+s|multi|average|concat")
      ->capture_default_str();
  train->add_option("--nli", topt.nli_path, "NLI file (label, premise, hypothesis)");
  train->add_option("--definitions", topt.definitions_path, "definition file (word, definition)");
  train->add_option("--vocab-sts", topt.vocab_paths, "STS files whose words join the vocabulary");
  auto* seed_opt = train->add_option("--seed", single_seed, "single seed");
  train->add_option("--seeds", topt.seeds, "seeds, one checkpoint each")->excludes(seed_opt);
  train->add_option("--dim", topt.dim, "embedding dimension")->capture_default_str();
  train->add_option("--pooling", pooling, "mean | max | cls")->capture_default_str();
  train->add_flag("--pool-cls", topt.encoder.pool_includes_cls, "include [CLS] in mean/max pooling");
  train->add_option("--max-length", topt.encoder.max_length, "tokens kept per sentence")->capture_default_str();
  train->add_option("--min-count", topt.min_count, "minimum word count for the vocabulary")
      ->capture_default_str();
  train->add_option("--batch", topt.train.batch_size, "mini-batch size")->capture_default_str();
  train->add_option("--epochs", topt.train.epochs, "epochs")->capture_default_str();
  train->add_option("--lr", topt.train.learning_rate, "peak learning rate")->capture_default_str();
  train->add_option("--warmup", topt.train.warmup_fraction, "warmup fraction of total steps")
      ->capture_default_str();
  train->add_flag("--linear-decay", topt.train.linear_decay, "decay linearly to zero after warmup");
  train->add_flag("!--no-smart-batching", topt.train.smart_batching, "plain shuffled batches");
  train->add_flag("!--no-nli-bias", topt.train.nli_bias, "drop the NLI classifier bias");
  train->add_flag("!--untied-word-head", topt.train.tied_word_head, "separate word prediction matrix");
  train->add_flag("--freeze-word-head", topt.train.freeze_word_head, "keep the word head fixed");
  train->add_option("--max-steps", max_steps, "stop after this many steps (0 = no limit)");
  train->add_option("--multi-nli-steps", topt.schedule.nli_steps_per_cycle, "NLI steps per multi cycle")
      ->capture_default_str();
  train->add_option("--multi-def-steps", topt.schedule.def_steps_per_cycle,
                    "definition steps per multi cycle")->capture_default_str();
  train->add_option("--lr-search", topt.lr_search_sts, "validation STS file; select the LR by grid search");
  train->add_option("--lr-grid", topt.lr_grid, "learning rates to try");
  train->add_option("--out", topt.out_dir, "output directory")->required();

  // embed
  EmbedOptions eopt;
  auto* embed = app.add_subcommand("embed", "write sentence embeddings as a dump");
  embed->add_option("--provider", eopt.provider, "checkpoint or dump")->required();
  embed->add_option("--provider-b", eopt.provider_b, "second checkpoint or dump to combine with");
  embed->add_option("--combine", eopt.combine, "average | concat");
  embed->add_option("--sentences", eopt.sentences_path, "one sentence per line")->required();
  embed->add_option("--out", eopt.out_dir, "output directory")->required();
  embed->add_option("--name", eopt.dump_name, "dump file name")->capture_default_str();

  // eval
  EvalOptions vopt;
  auto* eval = app.add_subcommand("eval", "STS and probing evaluation, averaged over runs");
  eval->add_option("--provider", vopt.providers, "checkpoints or dumps, one per run")->required();
  eval->add_option("--provider-b", vopt.providers_b, "second providers (one, or one per run)");
  eval->add_option("--combine", vopt.combine, "average | concat");
  eval->add_option("--sts", vopt.sts_path, "STS file");
  eval->add_option("--partition-dir", vopt.partition_dir, "directory written by `partition`");
  eval->add_option("--scheme", vopt.scheme, "none | source | dice (with --sts)")
      ->check(CLI::IsMember({"none", "source", "dice"}))->capture_default_str();
  eval->add_option("-k,--k", vopt.k, "number of Dice quantiles")->capture_default_str();
  eval->add_option("--probe", vopt.probe_paths, "probe task files (label, sentence)");
  add_probe_options(eval, vopt.probe);
  eval->add_option("--name", vopt.name, "provider name in reports");
  eval->add_option("--seeds", vopt.seeds, "seed label for each provider");
  eval->add_option("--out", vopt.out_dir, "output directory")->required();

  // combine-eval
  CombineEvalOptions copt;
  std::vector<std::string> extra_rows;
  auto* combine = app.add_subcommand("combine-eval", "compare SBERT, DefSent and their combinations");
  combine->add_option("--sbert", copt.sbert, "SBERT checkpoints, one per seed")->required();
  combine->add_option("--defsent", copt.defsent, "DefSent checkpoints, paired with --sbert")->required();
  combine->add_option("--row", extra_rows, "extra row LABEL=ckpt[,ckpt...]");
  combine->add_option("--dataset", copt.datasets, "STS files or partition directories");
  combine->add_option("--probe", copt.probe_paths, "probe task files");
  add_probe_options(combine, copt.probe);
  combine->add_option("--out", copt.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*partition) {
      cmd_partition(popt);
    } else if (*train) {
      topt.method = parse_method(method);
      topt.encoder.pooling = parse_pooling(pooling);
      if (seed_opt->count() > 0) topt.seeds = {single_seed};
      if (max_steps > 0) topt.train.max_steps = max_steps;
      cmd_train(topt);
    } else if (*embed) {
      cmd_embed(eopt);
    } else if (*eval) {
      cmd_eval(vopt);
    } else if (*combine) {
      for (const auto& r : extra_rows) copt.extra.push_back(parse_extra(r));
      const auto out = cmd_combine_eval(copt);
      if (!copt.datasets.empty()) std::cout << to_markdown(out.sts);
    }
  } catch (const std::exception& e) {
    std::cerr << "sentprobe: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
