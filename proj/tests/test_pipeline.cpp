#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "gentoc/corpus/catalog.hpp"
#include "gentoc/pipeline/pipeline.hpp"

using namespace gentoc;
using namespace gentoc::pipeline;

namespace {

corpus::ProductExample neckband_example() {
  return {{"boat", "rockerz", "255", "pro", "raging", "red", "bluetooth", "neckband"},
          {{"brand", {0}}, {"model name", {1, 2, 3}}, {"color", {4, 5}}},
          std::nullopt,
          "headphones"};
}

models::ModelConfig tiny_config() {
  models::ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.feedforward = 32;
  c.max_length = 24;
  c.dropout = 0.0;
  return c;
}

// Ten listings whose pairs are fully labeled.
corpus::Dataset fixture() {
  const std::vector<std::pair<std::string, PairList>> raw{
      {"boat rockerz 255 pro raging red bluetooth neckband", neckband_example().observed_pairs},
      {"boat red neckband", {{"brand", {0}}, {"color", {1}}}},
      {"acme steel chair", {{"brand", {0}}, {"material", {1}}}},
      {"red acme chair", {{"color", {0}}, {"brand", {1}}}},
      {"boat bluetooth neckband", {{"brand", {0}}, {"connectivity", {1}}}},
      {"rockerz 255 bluetooth", {{"model name", {0, 1}}, {"connectivity", {2}}}},
      {"acme raging red chair", {{"brand", {0}}, {"color", {1, 2}}}},
      {"steel chair", {{"material", {0}}}},
      {"boat pro neckband", {{"brand", {0}}, {"model name", {1}}}},
      {"acme steel red chair", {{"brand", {0}}, {"material", {1}}, {"color", {2}}}},
  };
  corpus::Dataset d;
  for (const auto& [name, pairs] : raw) {
    corpus::ProductExample ex;
    ex.words = text::split_words(name);
    ex.observed_pairs = pairs;
    ex.full_pairs = pairs;
    ex.category = "fixture";
    d.push_back(std::move(ex));
  }
  return d;
}

TrainPlan tiny_plan(models::ModelKind kind, int epochs) {
  TrainPlan plan;
  plan.kind = kind;
  plan.config = tiny_config();
  plan.epochs = epochs;
  plan.seed = 5;
  return plan;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Trained once and shared by the inference tests.
struct FittedPair {
  models::Model genae;
  models::Model tocve;
};

const FittedPair& fitted() {
  static const FittedPair f = [] {
    const auto d = fixture();
    auto ae = train(tiny_plan(models::ModelKind::kGenAE, 150), d).model;
    auto ve = train(tiny_plan(models::ModelKind::kToCVE, 150), d).model;
    return FittedPair{std::move(ae), std::move(ve)};
  }();
  return f;
}

}  // namespace

TEST_CASE("value pruning removes the pair's words") {
  const corpus::Dataset d{neckband_example()};
  const auto recs = make_value_pruning_examples(d, 1.0, 3);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].attribute == "brand");
  CHECK(recs[0].words == std::vector<std::string>{"rockerz", "255", "pro", "raging", "red", "bluetooth", "neckband"});
  CHECK(recs[2].attribute == "color");
  CHECK(recs[2].words == std::vector<std::string>{"boat", "rockerz", "255", "pro", "bluetooth", "neckband"});
  CHECK(make_value_pruning_examples(d, 0.0, 3).empty());
}

TEST_CASE("value pruning skips degenerate candidates") {
  corpus::Dataset one_word{{{"boat"}, {{"brand", {0}}}, std::nullopt, ""}};
  CHECK(make_value_pruning_examples(one_word, 1.0, 1).empty());

  corpus::Dataset repeated{{{"red", "and", "blue"}, {{"color", {0}}, {"color", {2}}}, std::nullopt, ""}};
  CHECK(make_value_pruning_examples(repeated, 1.0, 1).empty());

  corpus::Dataset leftover{{{"red", "red", "chair"}, {{"color", {0}}}, std::nullopt, ""}};
  CHECK(make_value_pruning_examples(leftover, 1.0, 1).empty());

  CHECK_THROWS_AS(make_value_pruning_examples(leftover, 1.5, 1), PipelineError);
}

TEST_CASE("value pruning rate is approximately honored") {
  const auto d = corpus::generate_catalog(corpus::default_grammar(), 2000, 4);
  std::size_t pairs = 0;
  for (const auto& ex : d) pairs += ex.observed_pairs.size();
  const auto recs = make_value_pruning_examples(d, 0.3, 9);
  const double rate = static_cast<double>(recs.size()) / static_cast<double>(pairs);
  CHECK(rate > 0.2);
  CHECK(rate <= 0.3 + 0.02);
  CHECK(make_value_pruning_examples(d, 0.3, 9).size() == recs.size());
}

TEST_CASE("vocabulary and tagger labels come from the training data") {
  const auto d = fixture();
  const auto v = build_vocab(d);
  for (const auto* w : {"boat", "chair", "model", "name", "connectivity"}) CHECK(v.contains(w));
  CHECK_FALSE(v.contains("model name"));
  CHECK(tagger_labels(d) ==
        std::vector<std::string>{"O", "brand", "color", "connectivity", "material", "model name"});
}

TEST_CASE("stage combination") {
  std::map<std::string, std::vector<int>> values{
      {"brand", {0}}, {"color", {0, 4, 5}}, {"usage", {}}, {"model name", {1, 2, 3}}};
  const auto lookup = [&](const std::string& a) { return values.at(a); };

  // a repeated attribute keeps its first occurrence
  const auto pairs = combine_stages({"brand", "model name", "brand", "color"}, 8, lookup);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0] == AVPair{"brand", {0}});
  CHECK(pairs[1] == AVPair{"model name", {1, 2, 3}});
  // index 0 was already claimed by brand
  CHECK(pairs[2] == AVPair{"color", {4, 5}});

  // empty values drop the attribute
  CHECK(combine_stages({"usage"}, 8, lookup).empty());
  CHECK(combine_stages({}, 8, lookup).empty());
  // fully claimed values also drop it
  CHECK(combine_stages({"color", "brand"}, 8, lookup).size() == 1);
  CHECK_THROWS_AS(combine_stages({"color"}, 3, lookup), PipelineError);
}

TEST_CASE("plan json round trip and validation") {
  TrainPlan plan = tiny_plan(models::ModelKind::kToCVE, 3);
  plan.value_pruning_rate = 0.25;
  plan.dataset = "train.jsonl";
  nlohmann::json j = plan;
  const auto back = j.get<TrainPlan>();
  CHECK(back.kind == plan.kind);
  CHECK(back.config == plan.config);
  CHECK(back.epochs == 3);
  CHECK(back.value_pruning_rate == 0.25);
  CHECK(back.dataset == plan.dataset);

  const auto flat = nlohmann::json{{"kind", "genae"}, {"marker_enabled", false}}.get<TrainPlan>();
  CHECK_FALSE(flat.config.marker_enabled);
  CHECK(flat.epochs == TrainPlan{}.epochs);

  plan.epochs = 0;
  CHECK_THROWS_AS(plan.validate(), PipelineError);
  plan.epochs = 1;
  plan.value_pruning_rate = 1.5;
  CHECK_THROWS_AS(plan.validate(), PipelineError);
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train(tiny_plan(models::ModelKind::kGenAE, 1), corpus::Dataset{}), PipelineError);
  corpus::Dataset unlabeled{{{"steel", "chair"}, {}, std::nullopt, ""}};
  auto plan = tiny_plan(models::ModelKind::kToCVE, 1);
  plan.value_pruning_rate = 0.0;
  CHECK_THROWS_AS(train(plan, unlabeled), PipelineError);
}

TEST_CASE("training is deterministic in the seed") {
  const auto d = fixture();
  const auto dir = std::filesystem::temp_directory_path();
  for (const auto kind : {models::ModelKind::kGenAE, models::ModelKind::kToCVE, models::ModelKind::kToCAVE}) {
    auto plan = tiny_plan(kind, 2);
    plan.config.dropout = 0.1;
    const auto a = train(plan, d);
    const auto b = train(plan, d);
    a.model.save(dir / "gentoc_det_a.ckpt");
    b.model.save(dir / "gentoc_det_b.ckpt");
    CHECK(file_bytes(dir / "gentoc_det_a.ckpt") == file_bytes(dir / "gentoc_det_b.ckpt"));
    plan.seed = 6;
    train(plan, d).model.save(dir / "gentoc_det_b.ckpt");
    CHECK(file_bytes(dir / "gentoc_det_a.ckpt") != file_bytes(dir / "gentoc_det_b.ckpt"));
  }
  std::filesystem::remove(dir / "gentoc_det_a.ckpt");
  std::filesystem::remove(dir / "gentoc_det_b.ckpt");
}

TEST_CASE("ten-example fixture converges") {
  std::vector<double> per_epoch;
  const auto r = train(tiny_plan(models::ModelKind::kGenAE, 200), fixture(),
                       [&](const EpochLog& log) { per_epoch.push_back(log.mean_loss); });
  REQUIRE(r.history.size() == 200);
  CHECK(per_epoch.size() == 200);
  CHECK(r.history.back().mean_loss < 0.1 * r.history.front().mean_loss);
  CHECK(r.model.meta.at("loss_history").size() == 200);
}

TEST_CASE("checkpoint manifest records the marker ablation") {
  auto plan = tiny_plan(models::ModelKind::kGenAE, 1);
  plan.config.marker_enabled = false;
  const auto r = train(plan, fixture());
  const auto path = std::filesystem::temp_directory_path() / "gentoc_ablation.ckpt";
  r.model.save(path);
  const auto back = models::Model::load(path);
  CHECK_FALSE(back.config().marker_enabled);
  CHECK_FALSE(back.meta.at("plan").at("config").at("marker_enabled").get<bool>());
  std::filesystem::remove(path);

  // the value extractor never uses the marker
  CHECK_FALSE(train(tiny_plan(models::ModelKind::kToCVE, 1), fixture()).model.config().marker_enabled);
}

TEST_CASE("two-stage inference recovers fixture pairs") {
  const auto& f = fitted();
  std::size_t exact = 0;
  const auto d = fixture();
  for (const auto& ex : d) {
    if (gentoc_infer(ex.words, f.genae, f.tocve) == ex.observed_pairs) ++exact;
  }
  CHECK(exact >= 8);
}

TEST_CASE("bootstrap replaces observed pairs and reports stats") {
  const auto& f = fitted();
  auto d = fixture();
  // hide a pair the models have learned
  d[1].observed_pairs = {{"brand", {0}}};
  const auto b = bootstrap(d, f.genae, f.tocve);
  REQUIRE(b.dataset.size() == d.size());
  CHECK(b.before.tagged_ratio == doctest::Approx(corpus::stats(d).tagged_ratio));
  CHECK(b.after.tagged_ratio == doctest::Approx(corpus::stats(b.dataset).tagged_ratio));
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(b.dataset[i].retagged);
    CHECK(b.dataset[i].words == d[i].words);
    CHECK(b.dataset[i].full_pairs == d[i].full_pairs);
    CHECK_NOTHROW(corpus::validate_example(b.dataset[i]));
  }
  // the hidden color pair comes back
  CHECK(b.dataset[1].observed_pairs == d[1].full_pairs.value());
}
