#pragma once

// The commands behind the `sentprobe` executable. Each cmd_* function takes
// a plain options struct, writes its outputs under `out_dir`, and throws on
// failure after removing whatever it had written. Primary outputs (partition
// files, checkpoints, dumps, reports) are byte-identical across re-runs with
// the same options; only manifest.json records wall-clock data.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentprobe/checkpoint.hpp"
#include "sentprobe/combiner.hpp"
#include "sentprobe/corpus.hpp"
#include "sentprobe/encoder.hpp"
#include "sentprobe/evalsuite.hpp"
#include "sentprobe/objectives.hpp"
#include "sentprobe/report.hpp"

namespace sentprobe {

inline constexpr std::string_view kToolVersion = "0.1.0";

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Output bookkeeping

namespace detail {

// Files written through here are removed again unless commit() is called.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    if (dir_.empty()) throw InvalidInput("an output directory is required");
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    } else if (!fs::is_directory(dir_)) {
      throw InvalidInput("output path is not a directory: " + dir_.string());
    }
  }

  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    if (created_dir_) fs::remove(dir_, ec);  // only succeeds if now empty
  }

  const fs::path& dir() const noexcept { return dir_; }

  // Writes via a temporary file and rename, so readers never see a torn file.
  fs::path write(const std::string& name, const std::string& content) {
    const fs::path target = dir_ / name;
    const fs::path tmp = dir_ / (name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
      out << content;
      out.flush();
      if (!out) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw std::runtime_error("write failed: " + tmp.string());
      }
    }
    fs::rename(tmp, target);
    if (std::find(written_.begin(), written_.end(), target) == written_.end()) written_.push_back(target);
    return target;
  }

  void commit() noexcept { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool created_dir_ = false;
  bool committed_ = false;
};

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string sanitize_filename(std::string_view label) {
  std::string out;
  for (char c : label) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.' || c == '%' || c == '+';
    out += ok ? c : '_';
  }
  return out.empty() ? "subset" : out;
}

inline std::string zero_pad(std::size_t i, std::size_t width) {
  std::string s = std::to_string(i);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError(p.string(), 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json seeds_json(const std::vector<std::uint64_t>& seeds) { return seeds; }

}  // namespace detail

// Provenance record written next to every command's outputs.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
  nlohmann::json artifacts = nlohmann::json::array();
  nlohmann::json details = nlohmann::json::object();
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  std::chrono::steady_clock::time_point started_steady = std::chrono::steady_clock::now();

  nlohmann::json to_json() const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_steady).count();
    return {{"tool", "sentprobe"},
            {"version", std::string(kToolVersion)},
            {"command", command},
            {"config", config},
            {"inputs", inputs},
            {"seeds", seeds},
            {"artifacts", artifacts},
            {"details", details},
            {"started_utc", detail::utc_timestamp(started)},
            {"wall_clock_seconds", seconds}};
  }
};

inline void write_manifest(detail::OutputSet& out, const RunManifest& m) {
  out.write("manifest.json", m.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Providers

// A provider file is either an embedding dump ("dim=" header) or a JSON
// checkpoint.
struct LoadedProvider {
  std::shared_ptr<const EmbeddingProvider> provider;
  std::string name;
  std::optional<std::uint64_t> seed;
  std::optional<Method> method;
};

inline LoadedProvider load_provider(const std::string& path) {
  if (!fs::exists(path)) throw InvalidInput("provider file not found: " + path);
  std::ifstream probe(path, std::ios::binary);
  std::string head(4, '\0');
  probe.read(head.data(), 4);
  head.resize(static_cast<std::size_t>(probe.gcount()));
  if (head == "dim=") {
    auto store = std::make_shared<EmbeddingStore>(load_dump(path));
    return {store, fs::path(path).stem().string(), std::nullopt, std::nullopt};
  }
  const auto ckpt = load_checkpoint(path);
  return {make_provider(ckpt), std::string(to_string(ckpt.method)), ckpt.seed, ckpt.method};
}

inline std::shared_ptr<const EmbeddingProvider> combine_providers(
    std::shared_ptr<const EmbeddingProvider> a, std::shared_ptr<const EmbeddingProvider> b,
    CombineMode mode) {
  return std::make_shared<CombinedProvider>(mode, std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// partition

struct PartitionOptions {
  std::string sts_path;
  std::string scheme = "source";  // source | dice
  std::size_t k = 5;
  std::string out_dir;
};

inline nlohmann::json cmd_partition(const PartitionOptions& opt, std::ostream& log = std::cerr) {
  RunManifest manifest;
  manifest.command = "partition";
  manifest.config = {{"scheme", opt.scheme}, {"k", opt.k}};
  manifest.inputs = {{"sts", opt.sts_path}};

  const auto pairs = load_sts(opt.sts_path);
  if (pairs.empty()) throw InvalidInput(opt.sts_path + ": no STS pairs");
  Partition part;
  if (opt.scheme == "source") {
    part = partition_by_source(pairs);
  } else if (opt.scheme == "dice") {
    part = partition_by_dice(pairs, opt.k);
  } else {
    throw InvalidInput("unknown partition scheme \"" + opt.scheme + "\" (source|dice)");
  }

  detail::OutputSet out(opt.out_dir);
  nlohmann::json summary = {{"scheme", opt.scheme}, {"n", pairs.size()}, {"subsets", nlohmann::json::array()}};
  if (opt.scheme == "dice") summary["k"] = opt.k;
  const std::size_t width = std::to_string(part.subsets.size()).size() < 2 ? 2 : std::to_string(part.subsets.size()).size();
  std::vector<std::vector<std::string>> md_rows;
  for (std::size_t i = 0; i < part.subsets.size(); ++i) {
    const auto& s = part.subsets[i];
    const std::string file = detail::zero_pad(i + 1, width) + "-" + detail::sanitize_filename(s.label) + ".tsv";
    std::ostringstream body;
    write_sts(body, s.pairs);
    out.write(file, body.str());
    nlohmann::json entry = {{"label", s.label}, {"file", file}, {"n", s.pairs.size()}};
    std::vector<std::string> md{s.label, std::to_string(s.pairs.size())};
    if (opt.scheme == "dice" && !s.pairs.empty()) {
      double lo = 1.0, hi = 0.0;
      for (const auto& p : s.pairs) {
        const double d = dice(p);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
      }
      entry["min_dice"] = lo;
      entry["max_dice"] = hi;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3f", lo);
      md.emplace_back(buf);
      std::snprintf(buf, sizeof buf, "%.3f", hi);
      md.emplace_back(buf);
    }
    summary["subsets"].push_back(entry);
    md_rows.push_back(std::move(md));
    manifest.artifacts.push_back(file);
    log << "partition: " << file << " (" << s.pairs.size() << " pairs)\n";
  }
  out.write("summary.json", summary.dump(2) + "\n");
  std::vector<std::string> header{"Subset", "n"};
  if (opt.scheme == "dice") {
    header.emplace_back("min Dice");
    header.emplace_back("max Dice");
  }
  out.write("summary.md", "Partition by " + opt.scheme + "\n\n" +
                              markdown_table(header, md_rows, {false, true, true, true}));
  manifest.artifacts.push_back("summary.json");
  manifest.artifacts.push_back("summary.md");
  write_manifest(out, manifest);
  out.commit();
  return summary;
}

// Reads a directory written by cmd_partition (or any directory of STS files,
// taken in file-name order with the file stem as label).
inline Partition load_partition_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InvalidInput("not a directory: " + dir);
  Partition part{fs::path(dir).filename().string(), {}};
  const fs::path summary = fs::path(dir) / "summary.json";
  if (fs::exists(summary)) {
    try {
      const auto j = nlohmann::json::parse(detail::read_file(summary));
      for (const auto& s : j.at("subsets")) {
        part.subsets.push_back({s.at("label").get<std::string>(),
                                load_sts((fs::path(dir) / s.at("file").get<std::string>()).string())});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(summary.string(), 0, e.what());
    }
  } else {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".tsv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) part.subsets.push_back({f.stem().string(), load_sts(f.string())});
  }
  if (part.subsets.empty()) throw InvalidInput("no STS subsets found in " + dir);
  return part;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  Method method = Method::kSbert;
  std::string nli_path;
  std::string definitions_path;
  std::vector<std::string> vocab_paths;  // extra STS files whose words join the vocabulary
  std::vector<std::uint64_t> seeds{0};
  std::size_t dim = 32;
  EncoderOptions encoder;
  std::size_t min_count = 1;
  TrainConfig train;
  MultiSchedule schedule;
  std::string lr_search_sts;  // validation STS file; empty disables the search
  std::vector<double> lr_grid = default_lr_grid();
  std::string out_dir;
};

namespace detail {

inline std::string step_pattern(const std::vector<StepRecord>& steps) {
  std::string out;
  std::size_t i = 0;
  while (i < steps.size()) {
    std::size_t j = i;
    while (j < steps.size() && steps[j].objective == steps[i].objective) ++j;
    if (!out.empty()) out += ' ';
    out += std::string(to_string(steps[i].objective)) + "*" + std::to_string(j - i);
    i = j;
  }
  return out;
}

inline nlohmann::json stage_json(std::string_view name, const TrainLog& log) {
  nlohmann::json j = {{"stage", std::string(name)},
                      {"steps", log.steps.size()},
                      {"pattern", step_pattern(log.steps)},
                      {"dropped_definitions", log.dropped_definitions}};
  if (!log.steps.empty()) {
    j["first_loss"] = log.steps.front().loss;
    j["last_loss"] = log.steps.back().loss;
  }
  return j;
}

struct TrainedRun {
  Checkpoint checkpoint;
  nlohmann::json stages = nlohmann::json::array();
};

inline TrainedRun train_one(const TrainOptions& opt, const Vocabulary& vocab, std::uint64_t seed,
                            double lr, const std::vector<NliExample>& nli,
                            const std::vector<DefinitionExample>& defs) {
  TrainConfig cfg = opt.train;
  cfg.seed = seed;
  cfg.learning_rate = lr;
  Rng init(seed);
  const ToyEncoder base(vocab, opt.dim, init, opt.encoder);
  TrainedRun run;
  run.checkpoint.method = opt.method;
  run.checkpoint.seed = seed;
  run.checkpoint.config = cfg;
  const PipelineDatasets data{&nli, &defs};

  auto train_bundle = [&](Method m, std::string role) {
    ToyEncoder enc = base;
    PipelineSpec spec = pipeline_for(m, cfg);
    spec.schedule = opt.schedule;
    const auto r = run_pipeline(spec, enc, data);
    for (const auto& s : r.stages) run.stages.push_back(stage_json(to_string(s.stage), s.log));
    return EncoderBundle{std::move(role), std::move(enc), r.nli_head, r.word_head};
  };

  switch (opt.method) {
    case Method::kNone:
      run.checkpoint.encoders.push_back({"none", base, std::nullopt, std::nullopt});
      break;
    case Method::kAverage:
    case Method::kConcat:
      run.checkpoint.combine = opt.method == Method::kAverage ? CombineMode::kAverage : CombineMode::kConcat;
      run.checkpoint.encoders.push_back(train_bundle(Method::kSbert, "sbert"));
      run.checkpoint.encoders.push_back(train_bundle(Method::kDefSent, "defsent"));
      break;
    default:
      run.checkpoint.encoders.push_back(train_bundle(opt.method, std::string(to_string(opt.method))));
      break;
  }
  return run;
}

}  // namespace detail

inline nlohmann::json cmd_train(const TrainOptions& opt, std::ostream& log = std::cerr) {
  RunManifest manifest;
  manifest.command = "train";
  if (opt.seeds.empty()) throw InvalidInput("train: at least one seed is required");
  opt.train.validate();
  const bool needs_nli = opt.method != Method::kDefSent && opt.method != Method::kNone;
  const bool needs_defs = opt.method != Method::kSbert && opt.method != Method::kNone;
  if (needs_nli && opt.nli_path.empty()) {
    throw InvalidInput("method " + std::string(to_string(opt.method)) + " needs --nli");
  }
  if (needs_defs && opt.definitions_path.empty()) {
    throw InvalidInput("method " + std::string(to_string(opt.method)) + " needs --definitions");
  }

  std::vector<NliExample> nli;
  std::vector<DefinitionExample> defs;
  std::vector<std::string> texts;
  if (!opt.nli_path.empty()) {
    nli = load_nli(opt.nli_path);
    for (const auto& e : nli) {
      texts.push_back(e.premise);
      texts.push_back(e.hypothesis);
    }
  }
  if (!opt.definitions_path.empty()) {
    defs = load_definitions(opt.definitions_path);
    for (const auto& d : defs) {
      texts.push_back(d.word);
      texts.push_back(d.definition);
    }
  }
  for (const auto& p : opt.vocab_paths) {
    for (const auto& pair : load_sts(p)) {
      texts.push_back(pair.sentence1);
      texts.push_back(pair.sentence2);
    }
  }
  if (texts.empty()) throw InvalidInput("train: no text to build a vocabulary from");
  const auto vocab = build_vocab(texts, opt.min_count);
  log << "train: vocabulary of " << vocab.size() << " entries\n";

  double lr = opt.train.learning_rate;
  nlohmann::json lr_search = nullptr;
  if (!opt.lr_search_sts.empty()) {
    if (opt.method == Method::kNone) throw InvalidInput("train: nothing to tune for method none");
    const auto validation = load_sts(opt.lr_search_sts);
    auto train_fn = [&](double rate, std::uint64_t seed) {
      return detail::train_one(opt, vocab, seed, rate, nli, defs).checkpoint;
    };
    auto score_fn = [&](const Checkpoint& c) { return eval_sts(*make_provider(c), validation).spearman; };
    const auto res = lr_grid_search(train_fn, score_fn, opt.seeds, opt.lr_grid);
    lr = res.best_lr;
    lr_search = {{"validation", opt.lr_search_sts}, {"grid", res.grid}, {"mean_spearman", res.mean_scores},
                 {"best_lr", res.best_lr}};
    log << "train: selected learning rate " << lr << "\n";
  }

  detail::OutputSet out(opt.out_dir);
  nlohmann::json runs = nlohmann::json::array();
  for (auto seed : opt.seeds) {
    auto run = detail::train_one(opt, vocab, seed, lr, nli, defs);
    const std::string file = "seed-" + std::to_string(seed) + ".ckpt.json";
    out.write(file, serialize_checkpoint(run.checkpoint));
    runs.push_back({{"seed", seed}, {"checkpoint", file}, {"stages", run.stages}});
    manifest.artifacts.push_back(file);
    log << "train: wrote " << file << "\n";
  }

  auto config = detail::config_to_json(opt.train);
  config["learning_rate"] = lr;
  config["method"] = std::string(to_string(opt.method));
  config["dim"] = opt.dim;
  config["pooling"] = std::string(to_string(opt.encoder.pooling));
  config["pool_includes_cls"] = opt.encoder.pool_includes_cls;
  config["max_length"] = opt.encoder.max_length;
  config["min_count"] = opt.min_count;
  config["multi_nli_steps"] = opt.schedule.nli_steps_per_cycle;
  config["multi_def_steps"] = opt.schedule.def_steps_per_cycle;
  manifest.config = config;
  manifest.inputs = {{"nli", opt.nli_path}, {"definitions", opt.definitions_path}, {"vocab", opt.vocab_paths}};
  manifest.seeds = opt.seeds;
  manifest.details = {{"runs", runs}, {"lr_search", lr_search}, {"vocab_size", vocab.size()}};
  write_manifest(out, manifest);
  out.commit();
  return manifest.details;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedOptions {
  std::string provider;
  std::string provider_b;  // optional second provider for combination
  std::string combine;     // average | concat; required with provider_b
  std::string sentences_path;
  std::string out_dir;
  std::string dump_name = "embeddings.dump";
};

inline std::shared_ptr<const EmbeddingProvider> provider_from_options(const std::string& a,
                                                                      const std::string& b,
                                                                      const std::string& combine) {
  auto pa = load_provider(a).provider;
  if (b.empty()) {
    if (!combine.empty()) throw InvalidInput("--combine needs a second provider");
    return pa;
  }
  if (combine.empty()) throw InvalidInput("a second provider needs --combine average|concat");
  return combine_providers(pa, load_provider(b).provider, parse_combine_mode(combine));
}

inline EmbeddingStore cmd_embed(const EmbedOptions& opt, std::ostream& log = std::cerr) {
  RunManifest manifest;
  manifest.command = "embed";
  manifest.config = {{"combine", opt.combine}};
  manifest.inputs = {{"provider", opt.provider}, {"provider_b", opt.provider_b}, {"sentences", opt.sentences_path}};
  const auto provider = provider_from_options(opt.provider, opt.provider_b, opt.combine);

  auto in = detail::open_input(opt.sentences_path);
  EmbeddingStore store(provider->dim());
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0, duplicates = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      log << "embed: warning: " << opt.sentences_path << ":" << lineno << ": blank line skipped\n";
      continue;
    }
    if (line.find('\t') != std::string::npos) {
      throw ParseError(opt.sentences_path, lineno, "sentence contains a tab");
    }
    if (auto it = first_line.find(line); it != first_line.end()) {
      ++duplicates;
      log << "embed: warning: " << opt.sentences_path << ":" << lineno << ": duplicate of line "
          << it->second << ", skipped\n";
      continue;
    }
    first_line.emplace(line, lineno);
    store.insert(line, provider->embed(line));
  }
  if (store.size() == 0) throw InvalidInput(opt.sentences_path + ": no sentences");

  detail::OutputSet out(opt.out_dir);
  std::ostringstream body;
  write_dump(store, body);
  out.write(opt.dump_name, body.str());
  manifest.artifacts.push_back(opt.dump_name);
  manifest.details = {{"sentences", store.size()}, {"duplicates_skipped", duplicates}, {"dim", store.dim()}};
  write_manifest(out, manifest);
  out.commit();
  return store;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::vector<std::string> providers;    // one per seed/run
  std::vector<std::string> providers_b;  // empty, one (shared), or one per provider
  std::string combine;
  std::string sts_path;
  std::string partition_dir;
  std::string scheme = "source";  // for sts_path: none | source | dice
  std::size_t k = 5;
  std::vector<std::string> probe_paths;
  ProbeConfig probe;
  std::string name;                    // provider label in reports
  std::vector<std::uint64_t> seeds;    // labels for the runs; default from checkpoints
  std::string out_dir;
};

struct EvalOutputs {
  std::optional<StsReport> sts;
  std::optional<ProbeReport> probe;
};

inline Partition partition_for_eval(const EvalOptions& opt) {
  if (opt.sts_path.empty() == opt.partition_dir.empty() && !opt.sts_path.empty()) {
    throw InvalidInput("give either an STS file or a partition directory, not both");
  }
  if (!opt.partition_dir.empty()) return load_partition_dir(opt.partition_dir);
  const auto pairs = load_sts(opt.sts_path);
  if (opt.scheme == "source") return partition_by_source(pairs);
  if (opt.scheme == "dice") return partition_by_dice(pairs, opt.k);
  if (opt.scheme == "none") return {"none", {{fs::path(opt.sts_path).stem().string(), pairs}}};
  throw InvalidInput("unknown partition scheme \"" + opt.scheme + "\" (none|source|dice)");
}

inline std::string eval_markdown(const EvalOutputs& r) {
  std::string md;
  if (r.sts) md += to_markdown(*r.sts);
  if (r.probe) md += (md.empty() ? "" : "\n") + to_markdown(*r.probe);
  return md;
}

inline nlohmann::json eval_json(const EvalOutputs& r) {
  nlohmann::json j = nlohmann::json::object();
  j["sts"] = r.sts ? to_json(*r.sts) : nlohmann::json(nullptr);
  j["probe"] = r.probe ? to_json(*r.probe) : nlohmann::json(nullptr);
  return j;
}

inline EvalOutputs cmd_eval(const EvalOptions& opt, std::ostream& log = std::cerr) {
  RunManifest manifest;
  manifest.command = "eval";
  if (opt.providers.empty()) throw InvalidInput("eval: at least one provider is required");
  if (opt.sts_path.empty() && opt.partition_dir.empty() && opt.probe_paths.empty()) {
    throw InvalidInput("eval: nothing to evaluate (give STS data or probe tasks)");
  }
  if (!opt.providers_b.empty() && opt.providers_b.size() != 1 && opt.providers_b.size() != opt.providers.size()) {
    throw InvalidInput("eval: give one second provider, or one per provider");
  }
  if (!opt.seeds.empty() && opt.seeds.size() != opt.providers.size()) {
    throw InvalidInput("eval: --seeds must list one seed per provider");
  }

  std::vector<std::shared_ptr<const EmbeddingProvider>> providers;
  std::vector<std::uint64_t> seeds;
  std::string name = opt.name;
  for (std::size_t i = 0; i < opt.providers.size(); ++i) {
    auto a = load_provider(opt.providers[i]);
    if (name.empty()) name = a.name;
    seeds.push_back(!opt.seeds.empty() ? opt.seeds[i] : a.seed.value_or(i));
    if (opt.providers_b.empty()) {
      if (!opt.combine.empty()) throw InvalidInput("--combine needs a second provider");
      providers.push_back(a.provider);
    } else {
      if (opt.combine.empty()) throw InvalidInput("a second provider needs --combine average|concat");
      const auto& pb = opt.providers_b.size() == 1 ? opt.providers_b[0] : opt.providers_b[i];
      providers.push_back(combine_providers(a.provider, load_provider(pb).provider, parse_combine_mode(opt.combine)));
    }
  }
  if (!opt.combine.empty() && opt.name.empty()) name += "+" + opt.combine;

  EvalOutputs result;
  if (!opt.sts_path.empty() || !opt.partition_dir.empty()) {
    const auto part = partition_for_eval(opt);
    std::vector<StsReport> reports;
    for (std::size_t i = 0; i < providers.size(); ++i) {
      auto r = eval_sts_partitioned(*providers[i], part, name);
      r.seeds = {seeds[i]};
      reports.push_back(std::move(r));
    }
    result.sts = aggregate_seeds(std::span<const StsReport>(reports));
    log << "eval: STS ALL spearman x100 = " << fixed2(result.sts->all.spearman) << " over "
        << result.sts->runs << " run(s)\n";
  }
  if (!opt.probe_paths.empty()) {
    std::vector<ProbeTask> tasks;
    for (const auto& p : opt.probe_paths) tasks.push_back(load_probe_task(p, fs::path(p).stem().string()));
    std::vector<ProbeReport> reports;
    for (std::size_t i = 0; i < providers.size(); ++i) {
      auto r = eval_probes(*providers[i], tasks, opt.probe, name);
      r.seeds = {seeds[i]};
      reports.push_back(std::move(r));
    }
    result.probe = aggregate_seeds(std::span<const ProbeReport>(reports));
  }

  detail::OutputSet out(opt.out_dir);
  out.write("report.json", eval_json(result).dump(2) + "\n");
  out.write("report.md", eval_markdown(result));
  manifest.artifacts = {"report.json", "report.md"};
  manifest.config = {{"combine", opt.combine}, {"scheme", opt.scheme}, {"k", opt.k},
                     {"probe_folds", opt.probe.folds}, {"probe_batch_size", opt.probe.batch_size},
                     {"probe_epochs", opt.probe.epochs}, {"probe_learning_rate", opt.probe.learning_rate},
                     {"probe_seed", opt.probe.seed}};
  manifest.inputs = {{"providers", opt.providers}, {"providers_b", opt.providers_b}, {"sts", opt.sts_path},
                     {"partition_dir", opt.partition_dir}, {"probe_tasks", opt.probe_paths}};
  manifest.seeds = seeds;
  write_manifest(out, manifest);
  out.commit();
  return result;
}

// ---------------------------------------------------------------------------
// combine-eval

struct CombineEvalOptions {
  std::vector<std::string> sbert;    // checkpoints, one per seed
  std::vector<std::string> defsent;  // paired with sbert by position
  // further rows, e.g. {"S+D", {ckpt...}}
  std::vector<std::pair<std::string, std::vector<std::string>>> extra;
  std::vector<std::string> datasets;  // STS files or partition directories (one column each)
  std::vector<std::string> probe_paths;
  ProbeConfig probe;
  std::string out_dir;
};

struct CombineEvalOutputs {
  ResultTable sts;
  std::optional<ResultTable> probe;
};

inline CombineEvalOutputs cmd_combine_eval(const CombineEvalOptions& opt, std::ostream& log = std::cerr) {
  RunManifest manifest;
  manifest.command = "combine-eval";
  if (opt.sbert.empty() || opt.defsent.empty()) {
    throw InvalidInput("combine-eval: needs --sbert and --defsent checkpoints");
  }
  if (opt.sbert.size() != opt.defsent.size()) {
    throw InvalidInput("combine-eval: --sbert and --defsent must list the same number of runs");
  }
  if (opt.datasets.empty() && opt.probe_paths.empty()) {
    throw InvalidInput("combine-eval: give STS datasets and/or probe tasks");
  }

  auto load_all = [](const std::vector<std::string>& paths) {
    std::vector<std::shared_ptr<const EmbeddingProvider>> out;
    for (const auto& p : paths) out.push_back(load_provider(p).provider);
    return out;
  };
  const auto sb = load_all(opt.sbert);
  const auto ds = load_all(opt.defsent);
  std::vector<std::pair<std::string, std::vector<std::shared_ptr<const EmbeddingProvider>>>> rows{
      {"SBERT", sb}, {"DefSent", ds}};
  for (auto mode : {CombineMode::kAverage, CombineMode::kConcat}) {
    std::vector<std::shared_ptr<const EmbeddingProvider>> combined;
    for (std::size_t i = 0; i < sb.size(); ++i) combined.push_back(combine_providers(sb[i], ds[i], mode));
    rows.emplace_back(mode == CombineMode::kAverage ? "Average" : "Concat", std::move(combined));
  }
  for (const auto& [label, paths] : opt.extra) rows.emplace_back(label, load_all(paths));

  CombineEvalOutputs result;
  result.sts.title = "STS ALL: Spearman x100 (mean over runs)";
  std::vector<Partition> columns;
  for (const auto& d : opt.datasets) {
    if (fs::is_directory(d)) {
      auto part = load_partition_dir(d);
      part.name = fs::path(d).filename().string();
      columns.push_back(std::move(part));
    } else {
      columns.push_back({fs::path(d).stem().string(), {{fs::path(d).stem().string(), load_sts(d)}}});
    }
    result.sts.columns.push_back(columns.back().name);
  }
  for (const auto& [label, providers] : rows) {
    ResultTable::Row row{label, {}};
    for (const auto& part : columns) {
      const auto pooled = Partition{part.name, {{part.name, concat_subsets(part)}}};
      std::vector<StsReport> reports;
      for (const auto& p : providers) reports.push_back(eval_sts_partitioned(*p, pooled, label));
      const auto agg = aggregate_seeds(std::span<const StsReport>(reports));
      row.cells.push_back(agg.all.valid() ? std::optional<double>(agg.all.spearman) : std::nullopt);
    }
    result.sts.rows.push_back(std::move(row));
  }

  if (!opt.probe_paths.empty()) {
    std::vector<ProbeTask> tasks;
    for (const auto& p : opt.probe_paths) tasks.push_back(load_probe_task(p, fs::path(p).stem().string()));
    ResultTable table{"Probe accuracy x100 (mean over runs)", {}, {}};
    for (const auto& t : tasks) table.columns.push_back(t.name);
    for (const auto& [label, providers] : rows) {
      std::vector<ProbeReport> reports;
      for (const auto& p : providers) reports.push_back(eval_probes(*p, tasks, opt.probe, label));
      const auto agg = aggregate_seeds(std::span<const ProbeReport>(reports));
      ResultTable::Row row{label, {}};
      for (const auto& r : agg.rows) row.cells.emplace_back(r.accuracy);
      table.rows.push_back(std::move(row));
    }
    result.probe = std::move(table);
  }

  detail::OutputSet out(opt.out_dir);
  nlohmann::json j = {{"sts", opt.datasets.empty() ? nlohmann::json(nullptr) : to_json(result.sts)},
                      {"probe", result.probe ? to_json(*result.probe) : nlohmann::json(nullptr)}};
  out.write("results.json", j.dump(2) + "\n");
  std::string md;
  if (!opt.datasets.empty()) md += to_markdown(result.sts);
  if (result.probe) md += (md.empty() ? "" : "\n") + to_markdown(*result.probe);
  out.write("results.md", md);
  manifest.artifacts = {"results.json", "results.md"};
  nlohmann::json extra = nlohmann::json::object();
  for (const auto& [label, paths] : opt.extra) extra[label] = paths;
  manifest.inputs = {{"sbert", opt.sbert}, {"defsent", opt.defsent}, {"extra", extra},
                     {"datasets", opt.datasets}, {"probe_tasks", opt.probe_paths}};
  manifest.config = {{"probe_folds", opt.probe.folds}, {"probe_seed", opt.probe.seed}};
  write_manifest(out, manifest);
  out.commit();
  log << "combine-eval: " << rows.size() << " methods x " << opt.datasets.size() << " datasets\n";
  return result;
}

}  // namespace sentprobe
