#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gentoc/models/model.hpp"
#include "gentoc/numerics/optimizer.hpp"

using namespace gentoc;
using namespace gentoc::models;

namespace {

const std::vector<std::string> kNameWords{"boat",    "rockerz", "255",       "pro",
                                          "raging",  "red",     "bluetooth", "neckband"};

text::Vocab fixture_vocab() {
  text::Vocab v;
  for (const auto& w : kNameWords) v.add(w);
  for (const auto* w : {"brand", "model", "name", "color", "connectivity", "type", "acme", "steel", "chair"}) v.add(w);
  return v;
}

ModelConfig small_config(bool marker = true) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.feedforward = 32;
  c.max_length = 24;
  c.dropout = 0.0;
  c.marker_enabled = marker;
  return c;
}

PairList starred_pairs() { return {{"brand", {0}}, {"model name", {1, 2, 3}}, {"color", {4, 5}}}; }

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

struct Fixture {
  std::vector<text::TokenSeq> names;
  std::vector<PairList> pairs;
};

// Ten short listings with their pairs, over the fixture vocabulary.
Fixture ten_examples(const text::Vocab& v) {
  const std::vector<std::pair<std::vector<std::string>, PairList>> raw{
      {{"boat", "rockerz", "255", "pro", "raging", "red", "bluetooth", "neckband"}, starred_pairs()},
      {{"boat", "red", "neckband"}, {{"brand", {0}}, {"color", {1}}}},
      {{"acme", "steel", "chair"}, {{"brand", {0}}}},
      {{"red", "acme", "chair"}, {{"color", {0}}, {"brand", {1}}}},
      {{"boat", "bluetooth", "neckband"}, {{"brand", {0}}, {"connectivity", {1}}}},
      {{"rockerz", "255", "bluetooth"}, {{"model name", {0, 1}}, {"connectivity", {2}}}},
      {{"acme", "raging", "red", "chair"}, {{"brand", {0}}, {"color", {1, 2}}}},
      {{"steel", "chair"}, {}},
      {{"boat", "pro", "neckband"}, {{"brand", {0}}, {"model name", {1}}}},
      {{"neckband", "bluetooth", "red"}, {{"type", {0}}, {"connectivity", {1}}, {"color", {2}}}},
  };
  Fixture f;
  for (const auto& [words, pairs] : raw) {
    f.names.push_back(text::encode(words, v));
    f.pairs.push_back(pairs);
  }
  return f;
}

template <typename Example, typename LossFn>
std::pair<double, double> fit(Model& model, const std::vector<Example>& examples, int steps, double lr, LossFn loss_fn) {
  numerics::Adam<Real> adam({lr});
  numerics::Rng rng(1);
  double first = 0.0, last = 0.0;
  for (int s = 0; s < steps; ++s) {
    model.params().zero_grad();
    double total = 0.0;
    for (const auto& ex : examples) {
      Tape tape;
      Context ctx(tape, model.params(), rng, 0.0f);
      const Var loss = loss_fn(ctx, model, ex);
      total += loss.item();
      tape.backward(numerics::scale(loss, 1.0f / static_cast<float>(examples.size())));
    }
    adam.step(model.params());
    if (s == 0) first = total;
    last = total;
  }
  return {first, last};
}

}  // namespace

TEST_CASE("config validation") {
  auto c = small_config();
  c.vocab_size = 10;
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ModelError);
  c = small_config();
  CHECK_THROWS_AS(c.validate(), ModelError);  // vocab size unset
  CHECK(parse_model_kind("tocave") == ModelKind::kToCAVE);
  CHECK_THROWS_AS(parse_model_kind("bert"), ModelError);
}

TEST_CASE("marker vector is a single d_model row") {
  Model m(ModelKind::kGenAE, small_config(), fixture_vocab(), {}, 1);
  CHECK(m.params()[m.encoder().marker()].shape == numerics::Shape{1, 16});
  int markers = 0;
  for (const auto& p : m.params().items()) markers += p.name.find("marker") != std::string::npos;
  CHECK(markers == 1);
}

TEST_CASE("marker addition is exact and only at flagged positions") {
  const auto v = fixture_vocab();
  Model m(ModelKind::kGenAE, small_config(), v, {}, 3);
  const auto seq = text::encode(kNameWords, v);
  const auto none = text::all_false_mask(seq);
  const auto all = text::all_true_mask(seq);
  const auto train_mask = text::build_marker_mask(seq, starred_pairs());

  const auto base = encode_states(m, seq.ids, nullptr);
  const auto zero = encode_states(m, seq.ids, &none);
  CHECK(max_abs_diff(base.values, zero.values) == 0.0);

  const auto& marker = m.params()[m.encoder().marker()].values;
  for (const auto* mask : {&all, &train_mask}) {
    const auto shifted = encode_states(m, seq.ids, mask);
    int moved = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      for (std::size_t d = 0; d < 16; ++d) {
        const float delta = shifted.values[i * 16 + d] - zero.values[i * 16 + d];
        const float want = mask->flags[i] ? marker[d] : 0.0f;
        CHECK(std::abs(delta - want) <= 1e-6f * (1.0f + std::abs(marker[d])));
      }
      moved += mask->flags[i];
    }
    CHECK(moved == static_cast<int>(mask->popcount()));
  }
  CHECK(train_mask.popcount() == 6);
}

TEST_CASE("disabled marker ignores the mask") {
  const auto v = fixture_vocab();
  for (const auto kind : {ModelKind::kGenAE, ModelKind::kGenAVE}) {
    Model m(kind, small_config(false), v, {}, 4);
    const auto seq = text::encode(kNameWords, v);
    const auto all = text::all_true_mask(seq);
    CHECK(encode_states(m, seq.ids, &all).values == encode_states(m, seq.ids, nullptr).values);
    Seq2SeqExample with{seq.ids, all.flags, encode_target("brand,color", v)};
    Seq2SeqExample without{seq.ids, {}, with.target};
    Tape t1(false), t2(false);
    Context c1(t1, m.params()), c2(t2, m.params());
    CHECK(seq2seq_loss(c1, m, with).item() == seq2seq_loss(c2, m, without).item());
  }
}

TEST_CASE("mask length must match the name") {
  const auto v = fixture_vocab();
  Model m(ModelKind::kGenAE, small_config(), v, {}, 5);
  const auto seq = text::encode(kNameWords, v);
  const text::MarkerMask short_mask{{true, false}};
  CHECK_THROWS_AS(encode_states(m, seq.ids, &short_mask), ModelError);
}

TEST_CASE("seq2seq loss on an empty attribute list covers only <eos>") {
  const auto v = fixture_vocab();
  Model m(ModelKind::kGenAE, small_config(), v, {}, 6);
  const auto seq = text::encode(kNameWords, v);
  const auto ex = make_genae_example(seq, {}, v, true);
  CHECK(ex.target.empty());
  Tape tape(false);
  Context ctx(tape, m.params());
  const double loss = seq2seq_loss(ctx, m, ex).item();
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);
}

TEST_CASE("marker gradient is zero without flags and nonzero with them") {
  const auto v = fixture_vocab();
  Model m(ModelKind::kGenAE, small_config(), v, {}, 7);
  const auto seq = text::encode(kNameWords, v);
  numerics::Rng rng(1);
  for (const bool flagged : {false, true}) {
    auto ex = make_genae_example(seq, starred_pairs(), v, true);
    if (!flagged) ex.mask.assign(seq.size(), false);
    m.params().zero_grad();
    Tape tape;
    Context ctx(tape, m.params(), rng, 0.0f);
    tape.backward(seq2seq_loss(ctx, m, ex));
    const auto& g = m.params()[m.encoder().marker()].grad;
    const bool any = std::any_of(g.begin(), g.end(), [](float x) { return x != 0.0f; });
    CHECK(any == flagged);
  }
}

TEST_CASE("targets longer than max_length are rejected") {
  const auto v = fixture_vocab();
  auto c = small_config();
  c.max_length = 4;
  Model m(ModelKind::kGenAVE, c, v, {}, 8);
  const auto seq = text::encode({"boat", "red"}, v);
  const auto ex = make_genave_example(seq, {{"brand", {0}}, {"color", {1}}}, v, false);
  Tape tape(false);
  Context ctx(tape, m.params());
  CHECK_THROWS_AS(seq2seq_loss(ctx, m, ex), ModelError);
}

TEST_CASE("untrained decoders terminate") {
  const auto v = fixture_vocab();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Model ae(ModelKind::kGenAE, small_config(), v, {}, seed);
    Model ave(ModelKind::kGenAVE, small_config(), v, {}, seed);
    const auto seq = text::encode(kNameWords, v);
    const auto mask = text::all_true_mask(seq);
    CHECK(greedy_decode(ae, seq.ids, &mask).size() <= static_cast<std::size_t>(ae.config().max_length));
    CHECK_NOTHROW(genae_decode(ae, seq));
    CHECK_NOTHROW(genave_decode(ave, seq));
  }
}

// ---------------------------------------------------------------------------

TEST_CASE("value-extraction targets and loss masking") {
  const auto v = fixture_vocab();
  const auto seq = text::encode(kNameWords, v);
  const auto ex = make_tocve_example("color", seq, {4, 5}, v);
  CHECK(ex.labels == std::vector<int>{0, 0, 0, 0, 1, 1, 0, 0});
  CHECK(ex.offset == 2);
  const auto pruned = make_tocve_example("brand", text::encode({"rockerz", "255"}, v), {}, v);
  CHECK(pruned.labels == std::vector<int>{0, 0});
  CHECK_THROWS_AS(make_tocve_example("color", seq, {8}, v), ModelError);

  // the head only reads product positions, so prefix tokens matter only
  // through attention; swapping the prefix attribute leaves the label vector
  // length unchanged
  Model m(ModelKind::kToCVE, small_config(false), v, {"NO", "YES"}, 9);
  Tape tape(false);
  Context ctx(tape, m.params());
  CHECK(std::isfinite(tagger_loss(ctx, m, ex).item()));
}

TEST_CASE("tagger loss ignores logits at prefix positions") {
  const auto v = fixture_vocab();
  Model m(ModelKind::kToCVE, small_config(false), v, {"NO", "YES"}, 10);
  const auto seq = text::encode(kNameWords, v);
  const auto ex = make_tocve_example("model name", seq, {1, 2, 3}, v);
  REQUIRE(ex.offset == 3);
  Tape tape(false);
  Context ctx(tape, m.params());
  const double reference = tagger_loss(ctx, m, ex).item();

  const int n = static_cast<int>(ex.input.size());
  const Var logits = m.head().forward(ctx, m.encoder().forward(ctx, ex.input, nullptr));
  numerics::Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Real> noise(static_cast<std::size_t>(n) * 2, 0.0f);
    for (int i = 0; i < ex.offset * 2; ++i) noise[static_cast<std::size_t>(i)] = static_cast<Real>(10.0 * rng.normal());
    const Var perturbed = numerics::add(logits, tape.constant({n, 2}, noise));
    const Var loss = numerics::cross_entropy(numerics::slice_rows(perturbed, ex.offset, n), std::span<const int>(ex.labels));
    CHECK(loss.item() == doctest::Approx(reference).epsilon(1e-6));
  }
}

TEST_CASE("tagger merge rule") {
  CHECK(merge_tags({"O", "O"}).empty());
  const auto pairs = merge_tags({"brand", "O", "color", "color"});
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == AVPair{"brand", {0}});
  CHECK(pairs[1] == AVPair{"color", {2, 3}});
  CHECK(merge_tags({"color", "brand", "brand", "color"}).size() == 3);
}

TEST_CASE("generated values are grounded leftmost-unused") {
  const std::vector<std::string> words{"red", "boat", "red", "chair"};
  const auto g = ground_pairs({{"color", "red"}, {"trim", "red"}, {"brand", "acme"}}, words);
  REQUIRE(g.pairs.size() == 2);
  CHECK(g.pairs[0] == AVPair{"color", {0}});
  CHECK(g.pairs[1] == AVPair{"trim", {2}});
  CHECK(g.malformed == 1);
  const auto multi = ground_pairs({{"model name", "boat red"}}, words);
  CHECK(multi.pairs.at(0).value_indices == std::vector<int>{1, 2});
}

// ---------------------------------------------------------------------------

TEST_CASE("attribute generator fits a ten-example fixture") {
  const auto v = fixture_vocab();
  const auto f = ten_examples(v);
  Model m(ModelKind::kGenAE, small_config(), v, {}, 11);
  std::vector<Seq2SeqExample> exs;
  for (std::size_t i = 0; i < f.names.size(); ++i) exs.push_back(make_genae_example(f.names[i], f.pairs[i], v, true));
  const auto [first, last] = fit(m, exs, 150, 1e-2, [](Context& c, const Model& mm, const Seq2SeqExample& e) {
    return seq2seq_loss(c, mm, e);
  });
  CHECK(last < 0.1 * first);
  int exact = 0;
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    const auto want = text::parse_genae_output(text::build_genae_target(f.pairs[i])).attributes;
    exact += genae_decode(m, f.names[i]).attributes == want;
  }
  CHECK(exact >= 10 * 95 / 100);
}

TEST_CASE("value extractor fits a fixture") {
  const auto v = fixture_vocab();
  const auto f = ten_examples(v);
  Model m(ModelKind::kToCVE, small_config(false), v, {"NO", "YES"}, 12);
  std::vector<TaggerExample> exs;
  std::vector<std::tuple<std::string, std::size_t, std::vector<int>>> cases;
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    for (const auto& p : f.pairs[i]) {
      exs.push_back(make_tocve_example(p.attribute, f.names[i], p.value_indices, v));
      cases.emplace_back(p.attribute, i, p.value_indices);
    }
  }
  const auto [first, last] = fit(m, exs, 150, 1e-2, [](Context& c, const Model& mm, const TaggerExample& e) {
    return tagger_loss(c, mm, e);
  });
  CHECK(last < 0.1 * first);
  std::size_t hits = 0;
  for (const auto& [attr, i, gold] : cases) hits += tocve_predict(m, attr, f.names[i]) == gold;
  CHECK(static_cast<double>(hits) >= 0.95 * static_cast<double>(cases.size()));
}

TEST_CASE("sequence confidence of a uniform model is 1/V") {
  const auto v = fixture_vocab();
  Model m(ModelKind::kRescorer, small_config(false), v, {}, 13);
  // zero projection weights and bias give uniform next-token distributions
  for (auto& p : m.params().items()) {
    if (p.name.rfind("decoder.projection", 0) == 0) std::fill(p.tensor.values.begin(), p.tensor.values.end(), 0.0f);
  }
  const auto seq = text::encode({"boat", "red"}, v);
  const double c = sequence_confidence(m, seq.ids, encode_target("color: red", v));
  CHECK(c == doctest::Approx(1.0 / v.size()).epsilon(1e-5));
}

TEST_CASE("checkpoint save and load reproduce predictions") {
  const auto v = fixture_vocab();
  Model m(ModelKind::kToCAVE, small_config(), v, {"O", "brand", "color"}, 14);
  m.meta = {{"note", "fixture"}};
  const auto path = std::filesystem::temp_directory_path() / "gentoc_model_ckpt.bin";
  m.save(path);
  const auto back = Model::load(path);
  CHECK(back.kind() == ModelKind::kToCAVE);
  CHECK(back.config() == m.config());
  CHECK(back.vocab() == m.vocab());
  CHECK(back.labels() == m.labels());
  CHECK(back.meta.at("note") == "fixture");
  const auto seq = text::encode(kNameWords, v);
  CHECK(tocave_predict(back, seq) == tocave_predict(m, seq));
  std::filesystem::remove(path);
}

TEST_CASE("vocabulary compatibility check") {
  auto v2 = fixture_vocab();
  v2.add("extra");
  Model a(ModelKind::kGenAE, small_config(), fixture_vocab(), {}, 1);
  Model b(ModelKind::kToCVE, small_config(false), v2, {"NO", "YES"}, 1);
  CHECK_THROWS_AS(require_same_vocab(a, b), ModelError);
}

TEST_CASE("value extractor skips attributes that cannot fit beside the name") {
  const auto v = fixture_vocab();
  auto cfg = small_config(false);
  cfg.max_length = 8;
  const Model tocve(ModelKind::kToCVE, cfg, v, {"NO", "YES"}, 3);
  const auto seq = text::encode({"boat", "red", "neckband"}, v);
  CHECK_NOTHROW(tocve_predict(tocve, "color", seq));
  CHECK(tocve_predict(tocve, "model name model name model", seq).empty());
  CHECK_THROWS(tocve_probabilities(tocve, "model name model name model", seq));
}
