#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gentoc/corpus/catalog.hpp"
#include "gentoc/corpus/dataset.hpp"

using namespace gentoc;
using namespace gentoc::corpus;

namespace {

CatalogGrammar tiny_grammar() {
  Category cat;
  cat.name = "chairs";
  cat.slots = {{"brand", "brand", {"acme"}, 1.0}, {"material", "material", {"steel"}, 1.0}};
  cat.nouns = {"chair"};
  cat.templates = {make_template(cat, {"brand", "material", "#"}, 0.0)};
  return CatalogGrammar{{cat}, true};
}

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

const Dataset& default_catalog() {
  static const Dataset d = generate_catalog(default_grammar(), 10000, 7);
  return d;
}

}  // namespace

TEST_CASE("single-template grammar enumerates by hand") {
  const auto d = generate_catalog(tiny_grammar(), 1, 1);
  REQUIRE(d.size() == 1);
  CHECK(d[0].name() == "acme steel chair");
  REQUIRE(d[0].full_pairs.has_value());
  CHECK(d[0].full_pairs->size() == 2);
  CHECK(d[0].observed_pairs == *d[0].full_pairs);
  CHECK(covered_fraction(d[0].words, *d[0].full_pairs) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("generation is deterministic in the seed") {
  CHECK(generate_catalog(default_grammar(), 200, 5) == generate_catalog(default_grammar(), 200, 5));
  CHECK_FALSE(generate_catalog(default_grammar(), 200, 5) == generate_catalog(default_grammar(), 200, 6));
}

TEST_CASE("generation errors") {
  CHECK_THROWS_AS(generate_catalog(CatalogGrammar{}, 10, 1), CorpusError);
  CHECK_THROWS_AS(generate_catalog(default_grammar(), 0, 1), CorpusError);
}

TEST_CASE("default grammar validates and matches the name-length target") {
  CHECK_NOTHROW(validate_grammar(default_grammar()));
  const auto s = stats(default_catalog());
  CHECK(s.mean_name_length >= 4.0);
  CHECK(s.mean_name_length <= 6.0);
  for (const auto& ex : default_catalog()) {
    CHECK(ex.words.size() >= 2);
    CHECK(ex.words.size() <= 12);
  }
}

TEST_CASE("generated examples have disjoint pairs and uncovered filler words") {
  std::size_t with_filler = 0;
  for (const auto& ex : default_catalog()) {
    CHECK_NOTHROW(validate_example(ex));
    if (covered_fraction(ex.words, *ex.full_pairs) < 1.0) ++with_filler;
  }
  CHECK(with_filler > 0);
}

TEST_CASE("synonym noise adds redundant attribute strings") {
  auto plain = default_grammar();
  plain.synonym_noise = false;
  const auto noisy_stats = stats(generate_catalog(default_grammar(), 3000, 3));
  const auto plain_stats = stats(generate_catalog(plain, 3000, 3));
  CHECK(noisy_stats.attribute_count > plain_stats.attribute_count);

  std::set<std::string> attrs;
  for (const auto& ex : default_catalog()) {
    for (const auto& p : *ex.full_pairs) attrs.insert(p.attribute);
  }
  CHECK(attrs.count("model number") == 1);
  CHECK(attrs.count("model no.") == 1);
}

TEST_CASE("reserved delimiters are rejected in the grammar") {
  auto g = tiny_grammar();
  g.categories[0].slots[0].lexicon = {"a,b"};
  CHECK_THROWS_AS(validate_grammar(g), CorpusError);
  g = tiny_grammar();
  g.categories[0].slots[1].surface = "mat:erial";
  CHECK_THROWS_AS(validate_grammar(g), CorpusError);
}

// ---------------------------------------------------------------------------

TEST_CASE("partial labeling hits the coverage target and never invents pairs") {
  const auto r = partial_labeling(default_catalog(), 0.4, 11);
  const auto s = stats(r.dataset);
  CHECK(s.tagged_ratio >= 0.38);
  CHECK(s.tagged_ratio <= 0.42);
  CHECK(r.realized_coverage == doctest::Approx(s.tagged_ratio));
  std::size_t emptied = 0;
  for (std::size_t i = 0; i < r.dataset.size(); ++i) {
    const auto& ex = r.dataset[i];
    CHECK(ex.full_pairs == default_catalog()[i].full_pairs);
    for (const auto& p : ex.observed_pairs) {
      CHECK(std::find(ex.full_pairs->begin(), ex.full_pairs->end(), p) != ex.full_pairs->end());
    }
    if (ex.observed_pairs.empty()) ++emptied;
  }
  CHECK(emptied > 0);
}

TEST_CASE("per-attribute dropout also calibrates") {
  const auto r = partial_labeling(default_catalog(), 0.4, 11, DropoutMode::kPerAttribute);
  CHECK(std::abs(stats(r.dataset).tagged_ratio - 0.4) <= 0.02);
  for (const auto* a : {"brand", "color", "model no."}) {
    const double p = attribute_drop_propensity(a);
    CHECK(p >= 0.5);
    CHECK(p <= 1.5);
  }
}

TEST_CASE("full coverage target keeps every pair") {
  const auto small = generate_catalog(default_grammar(), 300, 2);
  const auto r = partial_labeling(small, 1.0, 3);
  for (const auto& ex : r.dataset) CHECK(ex.observed_pairs == *ex.full_pairs);
}

TEST_CASE("partial labeling errors") {
  const auto small = generate_catalog(default_grammar(), 10, 2);
  CHECK_THROWS_AS(partial_labeling(small, 0.0, 1), CorpusError);
  CHECK_THROWS_AS(partial_labeling(small, 1.5, 1), CorpusError);
  auto no_oracle = small;
  no_oracle[0].full_pairs.reset();
  CHECK_THROWS_AS(partial_labeling(no_oracle, 0.5, 1), CorpusError);
}

// ---------------------------------------------------------------------------

TEST_CASE("stats") {
  ProductExample five{{"a", "b", "c", "d", "e"}, {{"x", {0, 1}}}, std::nullopt, "c"};
  CHECK(stats({five}).tagged_ratio == doctest::Approx(0.4));

  ProductExample neckband{{"boat", "rockerz", "255", "pro", "raging", "red", "bluetooth", "neckband"},
                        {{"brand", {0}}, {"model name", {1, 2, 3}}, {"color", {4, 5}}},
                        std::nullopt,
                        "headphones"};
  const auto s = stats({neckband});
  CHECK(s.tagged_ratio == doctest::Approx(0.75));
  CHECK(s.pair_count == 3);
  CHECK(s.attribute_count == 3);
  CHECK(s.mean_name_length == doctest::Approx(8.0));

  const auto full = generate_catalog(default_grammar(), 100, 4);
  CHECK(stats(full).tagged_ratio == doctest::Approx(stats(full, PairSource::kFull).tagged_ratio));
  CHECK_THROWS_AS(stats(Dataset{}), CorpusError);
}

TEST_CASE("validation catches overlaps and bad indices") {
  ProductExample ex{{"a", "b", "c"}, {{"x", {0, 1}}, {"y", {1}}}, std::nullopt, ""};
  CHECK_THROWS_AS(validate_example(ex), CorpusError);
  ex.observed_pairs = {{"x", {1, 0}}};
  CHECK_THROWS_AS(validate_example(ex), CorpusError);
  ex.observed_pairs = {{"x", {3}}};
  CHECK_THROWS_AS(validate_example(ex), CorpusError);
  ex.observed_pairs = {{"x", {0}}};
  ex.full_pairs = PairList{{"y", {0}}};
  CHECK_THROWS_AS(validate_example(ex), CorpusError);
  ex.retagged = true;
  CHECK_NOTHROW(validate_example(ex));
}

// ---------------------------------------------------------------------------

TEST_CASE("jsonl round trip") {
  const auto d = partial_labeling(generate_catalog(default_grammar(), 500, 8), 0.4, 9).dataset;
  const auto path = temp_file("gentoc_corpus_rt.jsonl");
  save_jsonl(d, path);
  CHECK(load_jsonl(path) == d);

  auto retagged = d;
  retagged[0].retagged = true;
  retagged[0].observed_pairs = {{"made up", {0}}};
  save_jsonl(retagged, path);
  CHECK(load_jsonl(path) == retagged);
  std::filesystem::remove(path);
}

TEST_CASE("jsonl tolerates a trailing newline and a missing oracle") {
  const auto path = temp_file("gentoc_corpus_schema.jsonl");
  {
    std::ofstream out(path);
    out << R"({"name":"acme steel chair","category":"chairs","observed_pairs":[{"attribute":"brand","value_indices":[0]}]})"
        << "\n\n";
  }
  const auto d = load_jsonl(path);
  REQUIRE(d.size() == 1);
  CHECK_FALSE(d[0].full_pairs.has_value());
  CHECK(d[0].observed_pairs.size() == 1);
  std::filesystem::remove(path);
}

TEST_CASE("malformed jsonl lines report their line number") {
  const auto path = temp_file("gentoc_corpus_bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"name":"a b","category":"c","observed_pairs":[]})" << "\n";
    out << R"({"name":"a b","observed_pairs":[{"attribute":"x","value_indices":[5]}]})" << "\n";
  }
  try {
    load_jsonl(path);
    FAIL("expected an error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  std::filesystem::remove(path);
}
