// gentoc: command-line driver for synthesis, training, inference and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gentoc/corpus/catalog.hpp"
#include "gentoc/eval/eval.hpp"
#include "gentoc/numerics/checkpoint.hpp"
#include "gentoc/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gentoc;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool verbose = false;
};

json read_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw CliError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CliError(path + ": " + e.what());
  }
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return c.out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw CliError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw CliError("no such file: " + path);
}

std::vector<models::Model> load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw CliError("at least one --checkpoint is required");
  std::vector<models::Model> out;
  for (const auto& p : paths) {
    require_file(p);
    out.push_back(models::Model::load(p));
  }
  return out;
}

json checkpoint_seeds(const std::vector<std::string>& paths) {
  json seeds = json::object();
  for (const auto& p : paths) {
    const auto m = numerics::read_checkpoint_manifest(p).at("model");
    seeds[m.at("kind").get<std::string>()] = m.at("seed");
  }
  return seeds;
}

std::vector<std::string> read_lines(const std::string& path) {
  require_file(path);
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!text::trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

json stats_json(const corpus::DatasetStats& s) {
  return {{"examples", s.examples},
          {"tagged_ratio", s.tagged_ratio},
          {"pair_count", s.pair_count},
          {"attribute_count", s.attribute_count},
          {"mean_name_length", s.mean_name_length}};
}

json pairs_json(const PairList& pairs, const std::vector<std::string>& words) {
  json out = json::array();
  for (const auto& p : pairs) {
    std::string value;
    for (const int i : p.value_indices) value += (value.empty() ? "" : " ") + words[static_cast<std::size_t>(i)];
    out.push_back({{"attribute", p.attribute}, {"value", value}, {"value_indices", p.value_indices}});
  }
  return out;
}

void print_metrics_table(const std::vector<eval::MetricsReport>& reports) {
  std::printf("%-10s | %7s %7s %7s | %7s %7s %7s | %7s\n", "System", "P", "R", "F1", "P@long", "R@long", "F1@long",
              "tagged");
  std::printf("%s\n", std::string(78, '-').c_str());
  for (const auto& r : reports) {
    const auto& a = r.overall;
    const auto& l = r.slices.at("long");
    std::printf("%-10s | %7.2f %7.2f %7.2f | %7.2f %7.2f %7.2f | %7.3f\n", r.system.c_str(), 100 * a.precision,
                100 * a.recall, 100 * a.f1, 100 * l.precision, 100 * l.recall, 100 * l.f1, a.tagged_ratio);
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::optional<std::size_t> n;
};

void cmd_synth(const Common& c, const SynthArgs& a) {
  const json cfg = read_json(c.config);
  const std::uint64_t seed = c.seed.value_or(cfg.value("seed", std::uint64_t{7}));
  const std::size_t n = a.n.value_or(cfg.value("n", std::size_t{10000}));
  const std::size_t test_n = cfg.value("test_n", std::size_t{0});
  const double coverage = cfg.value("coverage", 0.4);
  const std::string mode_name = cfg.value("dropout_mode", std::string("per_pair"));
  corpus::DropoutMode mode;
  if (mode_name == "per_pair") {
    mode = corpus::DropoutMode::kPerPair;
  } else if (mode_name == "per_attribute") {
    mode = corpus::DropoutMode::kPerAttribute;
  } else {
    throw CliError("dropout_mode must be per_pair or per_attribute, got " + mode_name);
  }
  auto grammar = corpus::default_grammar();
  grammar.synonym_noise = cfg.value("synonym_noise", grammar.synonym_noise);

  const auto dir = out_dir(c);
  const auto full = corpus::generate_catalog(grammar, n, seed);
  const auto partial = corpus::partial_labeling(full, coverage, seed + 1, mode);
  corpus::save_jsonl(partial.dataset, dir / "train.jsonl");
  const auto observed = corpus::stats(partial.dataset);
  const auto oracle = corpus::stats(partial.dataset, corpus::PairSource::kFull);
  json report{{"seed", seed},
              {"n", n},
              {"coverage_target", coverage},
              {"dropout_mode", mode_name},
              {"realized_coverage", partial.realized_coverage},
              {"train", {{"observed", stats_json(observed)}, {"full", stats_json(oracle)}}}};
  if (test_n > 0) {
    const auto test = corpus::generate_catalog(grammar, test_n, seed + 2);
    corpus::save_jsonl(test, dir / "test.jsonl");
    report["test"] = stats_json(corpus::stats(test));
  }
  write_json(dir / "synth.json", report);

  std::printf("examples          %zu\n", observed.examples);
  std::printf("tagged ratio      %.4f (target %.2f, full %.4f)\n", observed.tagged_ratio, coverage,
              oracle.tagged_ratio);
  std::printf("pairs             %zu of %zu\n", observed.pair_count, oracle.pair_count);
  std::printf("attributes        %zu\n", observed.attribute_count);
  std::printf("mean name length  %.2f\n", observed.mean_name_length);
  std::printf("wrote %s\n", (dir / "train.jsonl").c_str());
}

struct TrainArgs {
  std::string dataset;
  std::string kind;
  std::optional<int> epochs;
  bool no_marker = false;
  std::optional<double> vp_rate;
};

void cmd_train(const Common& c, const TrainArgs& a) {
  auto plan = read_json(c.config).get<pipeline::TrainPlan>();
  if (!a.kind.empty()) plan.kind = models::parse_model_kind(a.kind);
  if (!a.dataset.empty()) plan.dataset = a.dataset;
  if (c.seed) plan.seed = *c.seed;
  if (a.epochs) plan.epochs = *a.epochs;
  if (a.no_marker) plan.config.marker_enabled = false;
  if (a.vp_rate) plan.value_pruning_rate = *a.vp_rate;
  if (plan.dataset.empty()) throw CliError("no dataset: pass --dataset or set \"dataset\" in the config");
  require_file(plan.dataset.string());

  const auto kind = models::to_string(plan.kind);
  const auto result = pipeline::train(plan, [&](const pipeline::EpochLog& log) {
    if (c.verbose) std::fprintf(stderr, "%s epoch %d loss %.6f (%.1fs)\n", kind.c_str(), log.epoch, log.mean_loss,
                                log.seconds);
  });
  const auto dir = out_dir(c);
  const auto path = dir / (kind + ".ckpt");
  result.model.save(path);
  json history = json::array();
  for (const auto& h : result.history) history.push_back({{"epoch", h.epoch}, {"loss", h.mean_loss}});
  write_json(dir / (kind + ".train.json"), {{"seed", plan.seed}, {"plan", plan}, {"history", history}});
  std::printf("%s: final loss %.6f after %d epochs\nwrote %s\n", kind.c_str(), result.history.back().mean_loss,
              plan.epochs, path.c_str());
}

struct InferArgs {
  std::vector<std::string> checkpoints;
  std::string name;
  std::string input;
};

void cmd_infer(const Common& c, const InferArgs& a) {
  if (a.name.empty() == a.input.empty()) throw CliError("pass exactly one of --name or --input");
  const eval::System system(load_models(a.checkpoints));
  const auto names = a.input.empty() ? std::vector<std::string>{a.name} : read_lines(a.input);
  const auto dir = out_dir(c);
  std::ofstream out(dir / "predictions.jsonl");
  for (const auto& name : names) {
    const auto words = text::split_words(name);
    if (words.empty()) throw CliError("empty product name");
    const auto e = system.extract(words);
    out << json{{"name", name}, {"pairs", pairs_json(e.pairs, words)}, {"malformed", e.malformed}}.dump() << '\n';
    if (names.size() == 1) {
      for (const auto& p : pairs_json(e.pairs, words)) {
        std::printf("%s: %s\n", p.at("attribute").get<std::string>().c_str(), p.at("value").get<std::string>().c_str());
      }
    }
  }
  std::printf("%s: %zu names -> %s\n", system.name().c_str(), names.size(), (dir / "predictions.jsonl").c_str());
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string dataset;
  int long_threshold = 9;
};

void cmd_eval(const Common& c, const EvalArgs& a) {
  require_file(a.dataset);
  const auto dataset = corpus::load_jsonl(a.dataset);
  if (dataset.empty()) throw CliError("cannot evaluate on an empty dataset");
  const eval::System system(load_models(a.checkpoints));
  eval::EvalOptions opts;
  opts.long_threshold = a.long_threshold;
  const auto report = eval::evaluate(system, dataset, opts);
  auto j = report.to_json();
  j["seeds"] = checkpoint_seeds(a.checkpoints);
  const auto dir = out_dir(c);
  write_json(dir / ("metrics_" + system.name() + ".json"), j);
  print_metrics_table({report});
}

struct BootstrapArgs {
  std::vector<std::string> checkpoints;
  std::string dataset;
};

void cmd_bootstrap(const Common& c, const BootstrapArgs& a) {
  require_file(a.dataset);
  auto models = load_models(a.checkpoints);
  const models::Model* genae = nullptr;
  const models::Model* tocve = nullptr;
  for (const auto& m : models) {
    if (m.kind() == models::ModelKind::kGenAE) genae = &m;
    if (m.kind() == models::ModelKind::kToCVE) tocve = &m;
  }
  if (genae == nullptr || tocve == nullptr) throw CliError("bootstrap needs a genae and a tocve checkpoint");
  const auto result = pipeline::bootstrap(corpus::load_jsonl(a.dataset), *genae, *tocve);
  const auto dir = out_dir(c);
  corpus::save_jsonl(result.dataset, dir / "retagged.jsonl");
  write_json(dir / "bootstrap.json", {{"seeds", checkpoint_seeds(a.checkpoints)},
                                      {"before", stats_json(result.before)},
                                      {"after", stats_json(result.after)}});
  std::printf("%-12s %10s %10s\n", "", "before", "after");
  std::printf("%-12s %10.4f %10.4f\n", "tagged ratio", result.before.tagged_ratio, result.after.tagged_ratio);
  std::printf("%-12s %10zu %10zu\n", "pairs", result.before.pair_count, result.after.pair_count);
  std::printf("%-12s %10zu %10zu\n", "attributes", result.before.attribute_count, result.after.attribute_count);
  std::printf("wrote %s\n", (dir / "retagged.jsonl").c_str());
}

struct PrArgs {
  std::vector<std::string> checkpoints;
  std::string dataset;
  int n = 21;
};

void cmd_prcurve(const Common& c, const PrArgs& a) {
  require_file(a.dataset);
  auto models = load_models(a.checkpoints);
  std::optional<models::Model> rescorer;
  std::vector<models::Model> extractors;
  for (auto& m : models) {
    if (m.kind() == models::ModelKind::kRescorer) {
      rescorer.emplace(std::move(m));
    } else {
      extractors.push_back(std::move(m));
    }
  }
  if (!rescorer) throw CliError("prcurve needs a rescorer checkpoint");
  const eval::System system(std::move(extractors));
  const auto dataset = corpus::load_jsonl(a.dataset);
  if (dataset.empty()) throw CliError("cannot evaluate on an empty dataset");
  const auto scored = eval::score_extractions(*rescorer, dataset, eval::predict(system, dataset));
  const auto curve = eval::pr_curve(scored, dataset, a.n);
  const auto path = out_dir(c) / ("pr_" + system.name() + ".csv");
  eval::write_pr_csv(curve, path);
  std::printf("%9s %9s %9s\n", "threshold", "precision", "recall");
  for (const auto& p : curve) std::printf("%9.3f %9.4f %9.4f\n", p.threshold, p.precision, p.recall);
  std::printf("wrote %s\n", path.c_str());
}

struct BenchArgs {
  std::vector<std::string> checkpoints;
  std::string queries;
  std::string dataset;
  std::size_t warmup = 20;
};

void cmd_bench(const Common& c, const BenchArgs& a) {
  if (a.queries.empty() == a.dataset.empty()) throw CliError("pass exactly one of --queries or --dataset");
  std::vector<std::vector<std::string>> queries;
  if (!a.queries.empty()) {
    for (const auto& line : read_lines(a.queries)) queries.push_back(text::split_words(line));
  } else {
    require_file(a.dataset);
    for (const auto& ex : corpus::load_jsonl(a.dataset)) queries.push_back(ex.words);
  }
  const eval::System system(load_models(a.checkpoints));
  const auto report = eval::latency_bench(system, queries, a.warmup);
  auto j = report.to_json();
  j["seeds"] = checkpoint_seeds(a.checkpoints);
  const auto path = out_dir(c) / ("latency_" + system.name() + ".json");
  write_json(path, j);
  std::printf("%s: %.3f ms/query (sd %.3f) over %zu queries on %s\n", report.system.c_str(), report.mean_ms,
              report.stddev_ms, report.queries, report.hardware.c_str());
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_flag("-v,--verbose", c.verbose, "progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute-value extraction experiments on synthetic product catalogs"};
  app.require_subcommand(1);
  Common common;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a partially labeled catalog");
  add_common(s, common);
  s->add_option("--n", synth.n, "number of training examples");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train one model from a plan");
  add_common(t, common);
  t->add_option("--dataset", train.dataset, "training JSONL");
  t->add_option("--kind", train.kind, "genae, tocve, genave, tocave or rescorer");
  t->add_option("--epochs", train.epochs, "override the plan's epochs");
  t->add_flag("--no-marker", train.no_marker, "disable the marker embedding");
  t->add_option("--vp-rate", train.vp_rate, "value-pruning rate for tocve");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "extract pairs from product names");
  add_common(i, common);
  i->add_option("--checkpoint", infer.checkpoints, "model checkpoint (repeatable)");
  i->add_option("--name", infer.name, "a single product name");
  i->add_option("--input", infer.input, "file with one product name per line");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a system against a dataset");
  add_common(e, common);
  e->add_option("--checkpoint", ev.checkpoints, "model checkpoint (repeatable)");
  e->add_option("--dataset", ev.dataset, "evaluation JSONL")->required();
  e->add_option("--long-threshold", ev.long_threshold, "minimum words in the long-name slice")->capture_default_str();

  BootstrapArgs boot;
  auto* b = app.add_subcommand("bootstrap", "retag a dataset with a trained two-stage system");
  add_common(b, common);
  b->add_option("--checkpoint", boot.checkpoints, "genae and tocve checkpoints");
  b->add_option("--dataset", boot.dataset, "dataset JSONL to retag")->required();

  PrArgs pr;
  auto* p = app.add_subcommand("prcurve", "precision-recall curve from rescorer confidences");
  add_common(p, common);
  p->add_option("--checkpoint", pr.checkpoints, "system checkpoints plus a rescorer");
  p->add_option("--dataset", pr.dataset, "evaluation JSONL")->required();
  p->add_option("--n", pr.n, "number of thresholds")->capture_default_str();

  BenchArgs bench;
  auto* l = app.add_subcommand("bench", "per-query latency at batch size one");
  add_common(l, common);
  l->add_option("--checkpoint", bench.checkpoints, "model checkpoint (repeatable)");
  l->add_option("--queries", bench.queries, "file with one product name per line");
  l->add_option("--dataset", bench.dataset, "JSONL whose names are used as queries");
  l->add_option("--warmup", bench.warmup, "untimed warmup queries")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*s) cmd_synth(common, synth);
    if (*t) cmd_train(common, train);
    if (*i) cmd_infer(common, infer);
    if (*e) cmd_eval(common, ev);
    if (*b) cmd_bootstrap(common, boot);
    if (*p) cmd_prcurve(common, pr);
    if (*l) cmd_bench(common, bench);
  } catch (const std::exception& err) {
    std::string msg = err.what();
    for (auto& ch : msg) {
      if (ch == '\n') ch = ' ';
    }
    std::fprintf(stderr, "error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
