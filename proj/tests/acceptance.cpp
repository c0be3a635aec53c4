// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Each check prints the measured quantities next to the
// threshold it was held to.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "probe_fixtures.hpp"
#include "sentprobe/cli.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

namespace {

using namespace sentprobe;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// 1
Outcome dice_reproduction() {
  const std::string s1 = "A man is playing a guitar.";
  const std::vector<std::pair<std::string, std::string>> cases{
      {"The man is playing the guitar.", "0.800"},
      {"A guy is playing an instrument.", "0.545"},
      {"A man is playing a guitar and singing.", "0.833"},
      {"The girl is playing the guitar.", "0.600"},
      {"A woman is cutting vegetable.", "0.400"}};
  Outcome o{true, ""};
  for (const auto& [s2, want] : cases) {
    const auto got = fmt("%.3f", dice(s1, s2));
    o.detail += (o.detail.empty() ? "" : " ") + got;
    o.pass = o.pass && got == want;
  }
  return o;
}

// 2
Outcome spearman_oracle() {
  Rng rng(2024);
  double worst = 0.0;
  std::size_t instances = 0;
  while (instances < 1000) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform(-1, 1);
      y[i] = 0.5 * x[i] + rng.normal();
    }
    // inject ties: copy values within each vector, and sometimes coarsen
    const std::size_t ties = rng.below(n);
    for (std::size_t t = 0; t < ties; ++t) {
      x[rng.below(n)] = x[rng.below(n)];
      y[rng.below(n)] = y[rng.below(n)];
    }
    if (rng.below(3) == 0) {
      for (auto& v : x) v = std::round(v * 3);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
        std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
      continue;
    }
    worst = std::max(worst, std::abs(spearman(x, y) - oracle::spearman_brute(x, y)));
    ++instances;
  }
  return {worst <= 1e-12, "max |diff| = " + fmt("%.3g", worst) + " over 1000 instances (tol 1e-12)"};
}

// 3
Outcome gradients() {
  std::size_t components = 0, failures = 0;
  double worst = 0.0, worst_abs = 0.0;
  std::string first;
  for (auto target : {gradcheck::Target::kNli, gradcheck::Target::kDefTied, gradcheck::Target::kDefUntied}) {
    for (auto pooling : {Pooling::kCls, Pooling::kMean, Pooling::kMax}) {
      gradcheck::Stats st;
      for (std::uint64_t seed = 0; seed < 100; ++seed) gradcheck::check_instance(target, pooling, 50000 + seed, st);
      components += st.components;
      failures += st.failures;
      worst = std::max(worst, st.worst_relative);
      worst_abs = std::max(worst_abs, st.worst_absolute);
      if (first.empty()) first = st.first_failure;
    }
  }
  std::string detail = std::to_string(components) + " components in 9 x 100 instances, " +
                       std::to_string(failures) + " outside rel 1e-4, worst rel " + fmt("%.2g", worst) +
                       " (worst abs " + fmt("%.2g", worst_abs) + ")";
  if (!first.empty()) detail += "; first: " + first;
  return {failures == 0 && components > 0, detail};
}

// 4
Outcome partitions() {
  Rng rng(404);
  const std::vector<std::string> words{"a", "man", "dog", "plays", "guitar", "red", "runs", "the", "cat",
                                       "sits", "on", "mat", "bird", "sings", "tree", "blue"};
  std::vector<std::size_t> sizes{10000, 5, 6, 17};
  for (int i = 0; i < 8; ++i) sizes.push_back(5 + rng.below(10000 - 5));
  std::string problems;
  for (const auto n : sizes) {
    std::vector<StsPair> pairs;
    const std::size_t sources = 1 + rng.below(8);
    auto sentence = [&] {
      std::string s;
      const std::size_t len = 1 + rng.below(8);
      for (std::size_t w = 0; w < len; ++w) s += (w ? " " : "") + words[rng.below(words.size())];
      return s;
    };
    for (std::size_t i = 0; i < n; ++i) {
      pairs.push_back({sentence(), sentence(), std::floor(rng.uniform(0, 5)), "src" + std::to_string(rng.below(sources)),
                       Split::kNone});
    }
    // count pairs by content, so repeated pairs must come back as often as they went in
    std::map<std::tuple<std::string, std::string, double, std::string>, std::size_t> remaining;
    for (const auto& p : pairs) ++remaining[{p.sentence1, p.sentence2, p.gold, p.source}];
    const auto by_source = partition_by_source(pairs);
    std::size_t covered = 0;
    bool bad = false;
    for (const auto& s : by_source.subsets) {
      for (const auto& p : s.pairs) {
        bad |= p.source != s.label;
        auto it = remaining.find({p.sentence1, p.sentence2, p.gold, p.source});
        if (it == remaining.end() || it->second == 0) {
          bad = true;
        } else {
          --it->second;
        }
        ++covered;
      }
    }
    if (bad || covered != n) problems += " source-cover(n=" + std::to_string(n) + ")";

    const auto by_dice = partition_by_dice(pairs, 5);
    std::size_t lo = n, hi = 0, total = 0;
    double prev_min = -1.0;
    bool monotone = true;
    for (const auto& s : by_dice.subsets) {
      lo = std::min(lo, s.pairs.size());
      hi = std::max(hi, s.pairs.size());
      total += s.pairs.size();
      double mn = 2.0;
      for (const auto& p : s.pairs) mn = std::min(mn, dice(p));
      monotone = monotone && mn >= prev_min;
      prev_min = mn;
    }
    if (by_dice.subsets.size() != 5 || hi - lo > 1 || total != n || !monotone) {
      problems += " dice(n=" + std::to_string(n) + ")";
    }
  }
  return {problems.empty(), std::to_string(sizes.size()) + " random files, n from 5 to 10000" +
                                (problems.empty() ? "" : "; failed:" + problems)};
}

// 5
Outcome training_efficacy() {
  const synthetic::World world;
  Rng data_rng(100);
  const auto sts = world.sts(400, data_rng);
  const auto nli = world.nli(3000, data_rng);
  const auto defs = world.definitions(data_rng);
  const auto vocab = build_vocab(world.lexicon());
  double base_sum = 0, sbert_sum = 0, def_sum = 0;
  double worst_sbert_drop = 1.0, worst_def_drop = 1.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const ToyEncoder base(vocab, 32, rng);
    base_sum += eval_sts(base, sts).spearman;

    TrainConfig cfg;
    cfg.seed = seed;
    cfg.epochs = 5;
    ToyEncoder sb = base;
    const auto rs = train_sbert(sb, nli, cfg);
    sbert_sum += eval_sts(sb, sts).spearman;
    Rng head_rng(seed);
    const double l0 = nli_mean_loss(base, NliHead::init(32, head_rng, cfg.nli_bias), nli);
    const double l1 = nli_mean_loss(sb, rs.head, nli);
    worst_sbert_drop = std::min(worst_sbert_drop, 1.0 - l1 / l0);

    cfg.epochs = 20;
    ToyEncoder df = base;
    const auto rd = train_defsent(df, defs, cfg);
    def_sum += eval_sts(df, sts).spearman;
    const double d0 = def_mean_loss(base, WordPredictionHead::make_tied(base), defs);
    const double d1 = def_mean_loss(df, rd.head, defs);
    worst_def_drop = std::min(worst_def_drop, 1.0 - d1 / d0);
  }
  const double base = base_sum / 3, sbert = sbert_sum / 3, defsent = def_sum / 3;
  const bool pass = sbert - base >= 0.2 && defsent - base >= 0.2 && worst_sbert_drop >= 0.5 && worst_def_drop >= 0.5;
  return {pass, "Spearman random " + fmt("%.3f", base) + ", sbert " + fmt("%.3f", sbert) + " (+" +
                    fmt("%.3f", sbert - base) + "), defsent " + fmt("%.3f", defsent) + " (+" +
                    fmt("%.3f", defsent - base) + "), need +0.2; loss drop min sbert " +
                    fmt("%.0f%%", 100 * worst_sbert_drop) + ", defsent " + fmt("%.0f%%", 100 * worst_def_drop) +
                    ", need 50%"};
}

// 6
Outcome combination() {
  const auto setup = fixtures::two_features(600, 66);
  const ProbeConfig cfg;
  const CombinedProvider concat(CombineMode::kConcat, setup.a, setup.b);
  const double acc_a = eval_probe(*setup.a, setup.task, cfg).accuracy;
  const double acc_b = eval_probe(*setup.b, setup.task, cfg).accuracy;
  const double acc_c = eval_probe(concat, setup.task, cfg).accuracy;

  const synthetic::World world;
  Rng rng(6);
  const auto sts = world.sts(300, rng, {"x", "y", "z"});
  auto p = std::make_shared<ToyEncoder>(build_vocab(world.lexicon()), 16, rng);
  const CombinedProvider avg(CombineMode::kAverage, p, p);
  const auto part = partition_by_source(sts);
  const bool same = to_json(eval_sts_partitioned(avg, part, "P")).dump() ==
                    to_json(eval_sts_partitioned(*p, part, "P")).dump();
  auto q = std::make_shared<ToyEncoder>(build_vocab(world.lexicon()), 5, rng);
  const bool dims = CombinedProvider(CombineMode::kConcat, p, q).dim() == 21 &&
                    embed(CombinedProvider(CombineMode::kConcat, p, q), sts[0].sentence1).dim() == 21;
  return {acc_c >= std::max(acc_a, acc_b) && same && dims,
          "probe acc A " + fmt("%.3f", acc_a) + ", B " + fmt("%.3f", acc_b) + ", Concat " + fmt("%.3f", acc_c) +
              "; Average(P,P) report identical: " + (same ? "yes" : "no") + "; 16+5 concat dim 21: " +
              (dims ? "yes" : "no")};
}

// 7
Outcome probe_contract() {
  Rng rng(7);
  const auto folds = kfold_split(23, 10, rng);
  std::multiset<std::size_t> sizes;
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& f : folds) {
    sizes.insert(f.size());
    seen.insert(f.begin(), f.end());
    total += f.size();
  }
  const bool cover = folds.size() == 10 && total == 23 && seen.size() == 23 && *seen.rbegin() == 22 &&
                     sizes == std::multiset<std::size_t>{2, 2, 2, 2, 2, 2, 2, 3, 3, 3};
  const ProbeConfig cfg;
  const auto sep = fixtures::separable(2000, 8, 71);
  const auto shuf = fixtures::shuffled_labels(2000, 8, 72);
  const double acc_sep = eval_probe(*sep.store, sep.task, cfg).accuracy;
  const double acc_shuf = eval_probe(*shuf.store, shuf.task, cfg).accuracy;
  return {cover && acc_sep >= 0.95 && std::abs(acc_shuf - 0.5) <= 0.1,
          std::string("n=23 folds 3x3+7x2 disjoint cover: ") + (cover ? "yes" : "no") + "; separable " +
              fmt("%.3f", acc_sep) + " (need >= 0.95); shuffled " + fmt("%.3f", acc_shuf) + " (need 0.5 +- 0.1)"};
}

// 8
Outcome multi_schedule() {
  const synthetic::World world({12, 3, 4, 3, 1});
  Rng rng(8);
  const auto nli = world.nli(200, rng);
  const auto defs = world.definitions(rng);
  ToyEncoder enc(build_vocab(world.lexicon()), 8, rng);
  TrainConfig cfg;
  cfg.max_steps = 40;
  const auto r = train_multi(enc, nli, defs, cfg);
  std::string got;
  for (const auto& s : r.log.steps) got += s.objective == Objective::kNli ? 'N' : 'D';
  const std::string want = std::string(19, 'N') + "D" + std::string(19, 'N') + "D";
  return {got == want, "40 steps: " + got};
}

std::map<std::string, std::string> files_in(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().filename() != "manifest.json") out[e.path().filename().string()] = testing::read_text(e.path().string());
  }
  return out;
}

// 9
Outcome determinism() {
  testing::TempDir tmp("accept-det");
  const auto f = testing::write_toy_files(tmp);
  std::ostringstream log;
  std::size_t compared = 0;
  bool same = true;
  for (auto method : {Method::kSbert, Method::kDefSent, Method::kSbertThenDef, Method::kDefThenSbert, Method::kMulti,
                      Method::kAverage, Method::kConcat, Method::kNone}) {
    const std::string name = detail::sanitize_filename(std::string(to_string(method)));
    std::vector<std::string> ckpts;
    for (const char* run : {"a", "b"}) {
      TrainOptions opt;
      opt.method = method;
      opt.nli_path = f.nli;
      opt.definitions_path = f.definitions;
      opt.vocab_paths = {f.sts};
      opt.seeds = {5, 6};
      opt.dim = 8;
      opt.out_dir = tmp / ("train-" + name + "-" + run);
      cmd_train(opt, log);

      EvalOptions ev;
      ev.providers = {opt.out_dir + "/seed-5.ckpt.json", opt.out_dir + "/seed-6.ckpt.json"};
      ev.sts_path = f.sts;
      ev.probe_paths = {f.probe};
      ev.probe.folds = 5;
      ev.out_dir = tmp / ("eval-" + name + "-" + run);
      cmd_eval(ev, log);
    }
    for (const char* kind : {"train-", "eval-"}) {
      const auto a = files_in(tmp.path() / (kind + name + "-a"));
      const auto b = files_in(tmp.path() / (kind + name + "-b"));
      same = same && a == b && !a.empty();
      compared += a.size();
    }
  }
  return {same, std::to_string(compared) + " checkpoint/report files over 8 methods x 2 seeds, all byte-identical: " +
                    (same ? "yes" : "no")};
}

// 10
Outcome dump_pathway() {
  testing::TempDir tmp("accept-dump");
  const auto f = testing::write_toy_files(tmp);
  std::ostringstream log;
  TrainOptions opt;
  opt.method = Method::kSbertThenDef;
  opt.nli_path = f.nli;
  opt.definitions_path = f.definitions;
  opt.vocab_paths = {f.sts};
  opt.seeds = {1, 2};
  opt.dim = 8;
  opt.out_dir = tmp / "model";
  cmd_train(opt, log);

  const auto pairs = load_sts(f.sts);
  std::string sentences;
  for (const auto& p : pairs) sentences += p.sentence1 + "\n" + p.sentence2 + "\n";
  testing::write_text(tmp / "sentences.txt", sentences);

  EvalOptions via_dump, direct;
  for (std::uint64_t s : {1, 2}) {
    const std::string ckpt = tmp / ("model/seed-" + std::to_string(s) + ".ckpt.json");
    const std::string out = tmp / ("dump-" + std::to_string(s));
    cmd_embed({ckpt, "", "", tmp / "sentences.txt", out}, log);
    via_dump.providers.push_back(out + "/embeddings.dump");
    direct.providers.push_back(ckpt);
  }
  for (auto* e : {&via_dump, &direct}) {
    e->sts_path = f.sts;
    e->scheme = "dice";
    e->name = "model";
    e->seeds = {1, 2};
  }
  via_dump.out_dir = tmp / "report-dump";
  direct.out_dir = tmp / "report-direct";
  cmd_eval(via_dump, log);
  const auto in_memory = cmd_eval(direct, log);
  const bool json_same = testing::read_text(via_dump.out_dir + "/report.json") ==
                         testing::read_text(direct.out_dir + "/report.json");
  const bool md_same = testing::read_text(via_dump.out_dir + "/report.md") ==
                       testing::read_text(direct.out_dir + "/report.md");
  return {json_same && md_same, "dump-based vs in-memory report (5 Dice subsets + ALL, 2 seeds): json " +
                                    std::string(json_same ? "identical" : "DIFFERENT") + ", markdown " +
                                    (md_same ? "identical" : "DIFFERENT") + "; ALL Spearman x100 " +
                                    fixed2(in_memory.sts->all.spearman)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Dice reproduction", dice_reproduction},
      {"Spearman oracle equivalence", spearman_oracle},
      {"Gradient correctness", gradients},
      {"Partition invariants", partitions},
      {"Toy training efficacy", training_efficacy},
      {"Combination property", combination},
      {"Probe harness contract", probe_contract},
      {"Multi scheduler", multi_schedule},
      {"Determinism", determinism},
      {"End-to-end dump pathway", dump_pathway},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu. %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), sec,
                o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
