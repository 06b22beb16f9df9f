#include "gentoc/eval/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "gentoc/pipeline/pipeline.hpp"

namespace gentoc::eval {

using models::Model;
using models::ModelKind;

namespace {

std::string canonical(const std::string& attribute, const SynonymMap* synonyms) {
  auto a = text::normalize_attribute(attribute);
  if (synonyms != nullptr) {
    if (const auto it = synonyms->find(a); it != synonyms->end()) return text::normalize_attribute(it->second);
  }
  return a;
}

std::vector<int> sorted_indices(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct Accumulator {
  SliceMetrics m;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0, tagged_sum = 0.0;

  void add(const PairScore& s, double tagged) {
    ++m.examples;
    p_sum += s.precision;
    r_sum += s.recall;
    f_sum += s.f1;
    tagged_sum += tagged;
    m.predicted += s.predicted;
    m.gold += s.gold;
    m.correct += s.correct;
  }

  SliceMetrics finish() const {
    SliceMetrics out = m;
    if (m.examples == 0) return out;
    const auto n = static_cast<double>(m.examples);
    out.precision = p_sum / n;
    out.recall = r_sum / n;
    out.f1 = f_sum / n;
    out.tagged_ratio = tagged_sum / n;
    const double pr = out.precision + out.recall;
    out.f1_of_means = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
    return out;
  }
};

}  // namespace

PairScore pair_set_metrics(const PairList& predicted, const PairList& gold, const SynonymMap* synonyms) {
  PairScore s;
  s.predicted = predicted.size();
  s.gold = gold.size();
  std::vector<std::pair<std::string, std::vector<int>>> pool;
  pool.reserve(gold.size());
  for (const auto& g : gold) pool.emplace_back(canonical(g.attribute, synonyms), sorted_indices(g.value_indices));
  std::vector<bool> used(pool.size(), false);
  for (const auto& p : predicted) {
    const auto key = std::make_pair(canonical(p.attribute, synonyms), sorted_indices(p.value_indices));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!used[i] && pool[i] == key) {
        used[i] = true;
        ++s.correct;
        break;
      }
    }
  }
  s.precision = s.predicted == 0 ? (s.gold == 0 ? 1.0 : 0.0) : static_cast<double>(s.correct) / s.predicted;
  s.recall = s.gold == 0 ? 1.0 : static_cast<double>(s.correct) / s.gold;
  const double pr = s.precision + s.recall;
  s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
  return s;
}

void to_json(nlohmann::json& j, const SliceMetrics& m) {
  j = nlohmann::json{{"examples", m.examples},   {"precision", m.precision}, {"recall", m.recall},
                     {"f1", m.f1},               {"f1_of_means", m.f1_of_means},
                     {"predicted", m.predicted}, {"gold", m.gold},           {"correct", m.correct},
                     {"tagged_ratio", m.tagged_ratio}};
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j{{"system", system}, {"all", overall}, {"malformed", malformed}};
  j["slices"] = nlohmann::json::object();
  for (const auto& [name, m] : slices) j["slices"][name] = m;
  return j;
}

const PairList& gold_pairs(const corpus::ProductExample& example) {
  return example.full_pairs ? *example.full_pairs : example.observed_pairs;
}

MetricsReport score(const std::string& system, const corpus::Dataset& dataset,
                    const std::vector<Extraction>& predictions, const EvalOptions& options) {
  if (dataset.empty()) throw EvalError("cannot evaluate on an empty dataset");
  if (predictions.size() != dataset.size()) {
    throw EvalError(std::to_string(predictions.size()) + " predictions for " + std::to_string(dataset.size()) +
                    " examples");
  }
  const SynonymMap* synonyms = options.synonyms ? &*options.synonyms : nullptr;
  Accumulator all, long_names;
  MetricsReport report;
  report.system = system;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& ex = dataset[i];
    const auto s = pair_set_metrics(predictions[i].pairs, gold_pairs(ex), synonyms);
    const double tagged = corpus::covered_fraction(ex.words, predictions[i].pairs);
    all.add(s, tagged);
    if (static_cast<int>(ex.words.size()) >= options.long_threshold) long_names.add(s, tagged);
    report.malformed += predictions[i].malformed;
  }
  report.overall = all.finish();
  report.slices["all"] = report.overall;
  report.slices["long"] = long_names.finish();
  return report;
}

// ---------------------------------------------------------------------------

System::System(std::vector<Model> models) : models_(std::move(models)) {
  auto find = [&](ModelKind k) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < models_.size(); ++i) {
      if (models_[i].kind() == k) return i;
    }
    return std::nullopt;
  };
  const auto genae = find(ModelKind::kGenAE);
  const auto tocve = find(ModelKind::kToCVE);
  if (genae && tocve) {
    models::require_same_vocab(models_[*genae], models_[*tocve]);
    name_ = "gentoc";
    primary_ = *genae;
    secondary_ = *tocve;
  } else if (const auto g = find(ModelKind::kGenAVE)) {
    name_ = "genave";
    primary_ = *g;
  } else if (const auto t = find(ModelKind::kToCAVE)) {
    name_ = "tocave";
    primary_ = *t;
  } else {
    throw EvalError("checkpoints do not form a system: need genae+tocve, genave or tocave");
  }
}

System System::load(const std::vector<std::filesystem::path>& checkpoints) {
  std::vector<Model> models;
  for (const auto& p : checkpoints) models.push_back(Model::load(p));
  return System(std::move(models));
}

Extraction System::extract(const std::vector<std::string>& words) const {
  const auto& model = models_.at(primary_);
  const auto seq = text::encode(words, model.vocab());
  if (name_ == "gentoc") return {pipeline::gentoc_infer(seq, model, models_.at(secondary_)), 0};
  if (name_ == "genave") {
    auto g = models::genave_decode(model, seq);
    return {std::move(g.pairs), g.malformed};
  }
  return {models::tocave_predict(model, seq), 0};
}

std::vector<Extraction> predict(const System& system, const corpus::Dataset& dataset) {
  std::vector<Extraction> out(dataset.size());
  // inference only reads the models, so examples can be split across threads
  const std::size_t workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  if (workers == 1 || dataset.size() < 64) {
    for (std::size_t i = 0; i < dataset.size(); ++i) out[i] = system.extract(dataset[i].words);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < dataset.size(); i += workers) out[i] = system.extract(dataset[i].words);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

MetricsReport evaluate(const System& system, const corpus::Dataset& dataset, const EvalOptions& options) {
  if (dataset.empty()) throw EvalError("cannot evaluate on an empty dataset");
  return score(system.name(), dataset, predict(system, dataset), options);
}

// ---------------------------------------------------------------------------

Model train_rescorer(const corpus::Dataset& dataset, const nlohmann::json& config, std::uint64_t seed) {
  auto plan = config.get<pipeline::TrainPlan>();
  plan.kind = ModelKind::kRescorer;
  plan.seed = seed;
  return pipeline::train(plan, dataset).model;
}

double score_pair(const Model& rescorer, const std::vector<std::string>& words, const AVPair& pair) {
  const auto seq = text::encode(words, rescorer.vocab());
  std::vector<int> target;
  for (const auto& tok : text::target_tokens(text::build_rescorer_target(pair, words))) {
    target.push_back(rescorer.vocab().id(tok));
  }
  return models::sequence_confidence(rescorer, seq.ids, target);
}

std::vector<ScoredExtraction> score_extractions(const Model& rescorer, const corpus::Dataset& dataset,
                                                const std::vector<Extraction>& predictions) {
  if (predictions.size() != dataset.size()) throw EvalError("prediction count does not match the dataset");
  std::vector<ScoredExtraction> out(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (const auto& p : predictions[i].pairs) out[i].push_back({p, score_pair(rescorer, dataset[i].words, p)});
  }
  return out;
}

std::vector<PRPoint> pr_curve(const std::vector<ScoredExtraction>& scored, const corpus::Dataset& dataset,
                              int n_thresholds, const EvalOptions& options) {
  if (n_thresholds < 2) throw EvalError("a PR curve needs at least 2 thresholds");
  if (scored.size() != dataset.size()) throw EvalError("scored extraction count does not match the dataset");
  std::vector<PRPoint> curve;
  for (int k = 0; k < n_thresholds; ++k) {
    const double t = static_cast<double>(k) / (n_thresholds - 1);
    std::vector<Extraction> kept(dataset.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
      for (const auto& s : scored[i]) {
        if (s.confidence >= t) kept[i].pairs.push_back(s.pair);
      }
    }
    const auto report = score("", dataset, kept, options);
    curve.push_back({t, report.overall.precision, report.overall.recall});
  }
  return curve;
}

void write_pr_csv(const std::vector<PRPoint>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot write " + path.string());
  out << "threshold,precision,recall\n" << std::setprecision(17);
  for (const auto& p : curve) out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
}

double dominance_fraction(const std::vector<PRPoint>& a, const std::vector<PRPoint>& b, int levels) {
  auto precision_at = [](const std::vector<PRPoint>& c, double r) {
    double best = -1.0;
    for (const auto& p : c) {
      if (p.recall >= r) best = std::max(best, p.precision);
    }
    return best;
  };
  auto range = [](const std::vector<PRPoint>& c) {
    double lo = 1.0, hi = 0.0;
    for (const auto& p : c) {
      lo = std::min(lo, p.recall);
      hi = std::max(hi, p.recall);
    }
    return std::make_pair(lo, hi);
  };
  if (a.empty() || b.empty() || levels < 1) return 0.0;
  const auto [alo, ahi] = range(a);
  const auto [blo, bhi] = range(b);
  const double lo = std::max(alo, blo);
  const double hi = std::min(ahi, bhi);
  if (hi < lo) return 0.0;
  int wins = 0;
  for (int k = 0; k < levels; ++k) {
    const double r = levels == 1 ? lo : lo + (hi - lo) * k / (levels - 1);
    if (precision_at(a, r) >= precision_at(b, r)) ++wins;
  }
  return static_cast<double>(wins) / levels;
}

// ---------------------------------------------------------------------------

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

nlohmann::json LatencyReport::to_json() const {
  return {{"system", system},   {"queries", queries},   {"warmup", warmup},   {"mean_ms", mean_ms},
          {"stddev_ms", stddev_ms}, {"hardware", hardware}, {"started", started}, {"finished", finished},
          {"batch_size", 1}};
}

std::string hardware_descriptor() {
  std::ifstream in("/proc/cpuinfo");
  std::string line, model = "unknown cpu";
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      model = text::trim(line.substr(line.find(':') + 1));
      break;
    }
  }
  return model + " (" + std::to_string(std::thread::hardware_concurrency()) + " logical cores)";
}

LatencyReport latency_bench(const System& system, const std::vector<std::vector<std::string>>& queries,
                            std::size_t warmup) {
  if (queries.size() < 100) {
    throw EvalError("latency benchmark needs at least 100 queries, got " + std::to_string(queries.size()));
  }
  LatencyReport r;
  r.system = system.name();
  r.queries = queries.size();
  r.warmup = warmup;
  r.hardware = hardware_descriptor();
  r.started = utc_now();
  for (std::size_t i = 0; i < warmup; ++i) system.extract(queries[i % queries.size()]);
  std::vector<double> ms;
  ms.reserve(queries.size());
  for (const auto& q : queries) {
    const auto t0 = std::chrono::steady_clock::now();
    system.extract(q);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  r.finished = utc_now();
  double sum = 0.0;
  for (const double v : ms) sum += v;
  r.mean_ms = sum / static_cast<double>(ms.size());
  double var = 0.0;
  for (const double v : ms) var += (v - r.mean_ms) * (v - r.mean_ms);
  r.stddev_ms = std::sqrt(var / static_cast<double>(ms.size()));
  return r;
}

}  // namespace gentoc::eval
