#include <doctest.h>

#include <random>

#include "cartal/error.hpp"
#include "cartal/pool.hpp"
#include "test_helpers.hpp"

using namespace cartal;

TEST_CASE("load_dataset reads JSONL in record order") {
  auto dir = testutil::temp_dir("pool");
  auto path = testutil::write_file(dir / "d.jsonl",
                                   R"({"id": 0, "source": "a", "features": [0.5, 1.0], "label": 2}
{"id": 1, "source": "b", "features": [1.5, -1.0], "tokens": ["x", "y"], "label": 0}
{"id": 4, "source": "a", "features": [2.5, 3.0], "label": 1}
)");
  const Dataset ds = load_dataset(path, DatasetFormat::Jsonl);
  CHECK(ds.size() == 3);
  CHECK(ds.feature_dim == 2);
  CHECK(ds.num_classes == 3);
  CHECK(ds.examples[1].tokens == std::vector<std::string>{"x", "y"});
  CHECK(ds.examples[2].id == 4);
  CHECK(ds.examples[0].features == std::vector<double>{0.5, 1.0});
}

TEST_CASE("load_dataset accepts an empty file") {
  auto dir = testutil::temp_dir("pool");
  auto path = testutil::write_file(dir / "empty.jsonl", "");
  const Dataset ds = load_dataset(path, DatasetFormat::Jsonl);
  CHECK(ds.empty());
  CHECK(ds.feature_dim == 0);
}

TEST_CASE("load_dataset rejects inconsistent feature dimension naming the id") {
  auto dir = testutil::temp_dir("pool");
  auto path = testutil::write_file(dir / "bad.jsonl",
                                   R"({"id": 0, "source": "a", "features": [1, 2, 3, 4], "label": 0}
{"id": 7, "source": "a", "features": [1, 2], "label": 0}
)");
  try {
    load_dataset(path, DatasetFormat::Jsonl);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("example 7") != std::string::npos);
  }
}

TEST_CASE("load_dataset reports malformed records with line numbers") {
  auto dir = testutil::temp_dir("pool");
  auto path = testutil::write_file(dir / "bad.jsonl",
                                   "{\"id\": 0, \"source\": \"a\", \"features\": [1], \"label\": 0}\n"
                                   "{\"id\": 1, \"source\": \"a\", \"features\": [1]}\n");
  try {
    load_dataset(path, DatasetFormat::Jsonl);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  auto garbage = testutil::write_file(dir / "garbage.jsonl", "{not json\n");
  CHECK_THROWS_AS(load_dataset(garbage, DatasetFormat::Jsonl), ParseError);
}

TEST_CASE("load_dataset rejects duplicate ids") {
  auto dir = testutil::temp_dir("pool");
  auto path = testutil::write_file(dir / "dup.jsonl",
                                   R"({"id": 3, "source": "a", "features": [1], "label": 0}
{"id": 3, "source": "a", "features": [2], "label": 1}
)");
  CHECK_THROWS_AS(load_dataset(path, DatasetFormat::Jsonl), SchemaError);
}

TEST_CASE("load_dataset reads the CSV variant") {
  auto dir = testutil::temp_dir("pool");
  auto path = testutil::write_file(dir / "d.csv",
                                   "id,source,label,tok0,tok1,f0,f1\n"
                                   "0,a,1,x,y,0.5,1\n"
                                   "1,b,0,z,,2,3\n");
  const Dataset ds = load_dataset(path, DatasetFormat::Csv);
  REQUIRE(ds.size() == 2);
  CHECK(ds.feature_dim == 2);
  CHECK(ds.examples[0].tokens == std::vector<std::string>{"x", "y"});
  CHECK(ds.examples[1].tokens == std::vector<std::string>{"z"});
  CHECK(ds.examples[1].features == std::vector<double>{2.0, 3.0});
  CHECK(ds.examples[1].source == "b");

  auto bad = testutil::write_file(dir / "bad.csv", "id,source,label,f0\n0,a,1,abc\n");
  CHECK_THROWS_AS(load_dataset(bad, DatasetFormat::Csv), ParseError);
}

TEST_CASE("write_jsonl round-trips through load_dataset") {
  auto dir = testutil::temp_dir("pool");
  const Dataset ds = generate_synthetic_source(testutil::blob_spec("src", 50, 0.2), 3);
  write_jsonl(ds, dir / "src.jsonl");
  Dataset back = load_dataset(dir / "src.jsonl", DatasetFormat::Jsonl, 3);
  back.name = ds.name;
  back.flipped = ds.flipped;
  CHECK(back == ds);
}

TEST_CASE("generate_synthetic_source is a pure function of spec and seed") {
  const auto spec = testutil::blob_spec("s", 100);
  CHECK(generate_synthetic_source(spec, 7) == generate_synthetic_source(spec, 7));
  CHECK_FALSE(generate_synthetic_source(spec, 7) == generate_synthetic_source(spec, 8));
}

TEST_CASE("generate_synthetic_source flips an exact count of labels") {
  const Dataset ds = generate_synthetic_source(testutil::blob_spec("s", 1000, 0.3), 7);
  CHECK(ds.flipped.size() == 300);
  for (const auto& [id, original] : ds.flipped) CHECK(ds.at(id).label != original);
}

TEST_CASE("generate_synthetic_source with flip rate 1 flips every label") {
  const Dataset ds = generate_synthetic_source(testutil::blob_spec("s", 100, 1.0), 7);
  REQUIRE(ds.flipped.size() == 100);
  for (const auto& e : ds.examples) CHECK(e.label != ds.flipped.at(e.id));
}

TEST_CASE("generate_synthetic_source emits one-decimal feature tokens") {
  const Dataset ds = generate_synthetic_source(testutil::blob_spec("s", 5), 1);
  for (const auto& e : ds.examples) {
    REQUIRE(e.tokens.size() == 2);
    char buf[32];
    double q = std::round(e.features[1] * 10.0) / 10.0;
    if (q == 0.0) q = 0.0;
    std::snprintf(buf, sizeof buf, "f1=%.1f", q);
    CHECK(e.tokens[1] == buf);
  }
}

TEST_CASE("generate_synthetic_source edge cases") {
  auto spec = testutil::blob_spec("s", 0);
  CHECK(generate_synthetic_source(spec, 1).empty());
  spec.class_centroids.resize(1);
  CHECK_THROWS_AS(generate_synthetic_source(spec, 1), ConfigError);
  spec = testutil::blob_spec("s", 10);
  spec.noise_scale = {0.0};
  CHECK_THROWS_AS(generate_synthetic_source(spec, 1), ConfigError);
  spec = testutil::blob_spec("s", 10, 1.5);
  CHECK_THROWS_AS(generate_synthetic_source(spec, 1), ConfigError);
}

TEST_CASE("build_multi_source_pool down-samples to the minority source") {
  SUBCASE("cap below the minority") {
    std::vector<Dataset> sources{testutil::plain_dataset("snli", 549500),
                                 testutil::plain_dataset("anli", 146000),
                                 testutil::plain_dataset("wanli", 103000)};
    const Dataset pool = build_multi_source_pool(sources, 20000, 1);
    CHECK(pool.size() == 60000);
    std::map<std::string, std::size_t> per;
    for (const auto& e : pool.examples) ++per[e.source];
    CHECK(per["snli"] == 20000);
    CHECK(per["anli"] == 20000);
    CHECK(per["wanli"] == 20000);
  }
  SUBCASE("uncapped") {
    std::vector<Dataset> sources{testutil::plain_dataset("a", 100), testutil::plain_dataset("b", 50),
                                 testutil::plain_dataset("c", 30)};
    const Dataset pool = build_multi_source_pool(sources, 1000000000, 1);
    CHECK(pool.size() == 90);
    std::map<std::string, std::size_t> per;
    for (const auto& e : pool.examples) ++per[e.source];
    CHECK(per == std::map<std::string, std::size_t>{{"a", 30}, {"b", 30}, {"c", 30}});
    pool.validate();
    // Provenance maps every new id back to a distinct original example.
    std::set<std::pair<std::string, ExampleId>> originals;
    for (const auto& e : pool.examples) {
      const auto& p = pool.provenance.at(e.id);
      CHECK(p.source == e.source);
      CHECK(e.features[0] == static_cast<double>(p.original_id));
      originals.emplace(p.source, p.original_id);
    }
    CHECK(originals.size() == 90);
  }
  SUBCASE("single source") {
    std::vector<Dataset> sources{testutil::plain_dataset("a", 40)};
    CHECK(build_multi_source_pool(sources, 20, 1).size() == 20);
  }
  SUBCASE("mismatched schema") {
    std::vector<Dataset> sources{testutil::plain_dataset("a", 4, 3), testutil::plain_dataset("b", 4, 2)};
    CHECK_THROWS_AS(build_multi_source_pool(sources, 10, 1), SchemaError);
  }
}

TEST_CASE("build_multi_source_pool carries planted flips to the new ids") {
  std::vector<Dataset> sources{generate_synthetic_source(testutil::blob_spec("a", 200, 0.0), 1),
                               generate_synthetic_source(testutil::blob_spec("b", 200, 0.5), 2)};
  const Dataset pool = build_multi_source_pool(sources, 100, 3);
  for (const auto& [id, original] : pool.flipped) {
    CHECK(pool.at(id).source == "b");
    CHECK(pool.at(id).label != original);
  }
  CHECK(pool.flipped.size() > 20);
}

TEST_CASE("seed_split partitions the pool") {
  auto pool = std::make_shared<const Dataset>(testutil::plain_dataset("a", 60000));
  const PoolState s = seed_split(pool, 500, 9);
  CHECK(s.labelled().size() == 500);
  CHECK(s.unlabelled().size() == 59500);
  CHECK(seed_split(pool, 0, 9).labelled().empty());
  CHECK(seed_split(pool, 60000, 9).unlabelled().empty());
  CHECK_THROWS_AS(seed_split(pool, 60001, 9), ArgumentError);
}

TEST_CASE("transfer moves ids between partitions") {
  auto pool = std::make_shared<const Dataset>(testutil::plain_dataset("a", 4));
  const PoolState s(pool, {1}, {2, 3});
  const PoolState t = transfer(s, {2});
  CHECK(t.labelled() == IdSet{1, 2});
  CHECK(t.unlabelled() == IdSet{3});
  CHECK_THROWS_AS(transfer(t, {1}), StateError);
  CHECK_THROWS_AS(transfer(t, {99}), StateError);
  try {
    transfer(t, {1, 3, 99});
  } catch (const StateError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("1 (already labelled)") != std::string::npos);
    CHECK(msg.find("99 (unknown)") != std::string::npos);
  }
}

TEST_CASE("seed 500 plus seven transfers of 500 gives 4000 labelled") {
  auto pool = std::make_shared<const Dataset>(testutil::plain_dataset("a", 60000));
  PoolState s = seed_split(pool, 500, 1);
  std::mt19937_64 rng(4);
  for (int r = 0; r < 7; ++r) {
    std::vector<ExampleId> un(s.unlabelled().begin(), s.unlabelled().end());
    std::shuffle(un.begin(), un.end(), rng);
    s = transfer(s, IdSet(un.begin(), un.begin() + 500));
  }
  CHECK(s.labelled().size() == 4000);
  CHECK(s.unlabelled().size() == 56000);
}

TEST_CASE("property: random transfer sequences keep partitions disjoint and complete") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    auto pool = std::make_shared<const Dataset>(testutil::plain_dataset("a", n));
    PoolState s = seed_split(pool, rng() % (n + 1), rng());
    while (!s.unlabelled().empty()) {
      std::vector<ExampleId> un(s.unlabelled().begin(), s.unlabelled().end());
      std::shuffle(un.begin(), un.end(), rng);
      const std::size_t k = 1 + rng() % un.size();
      const std::size_t before = s.labelled().size();
      s = transfer(s, IdSet(un.begin(), un.begin() + static_cast<std::ptrdiff_t>(k)));
      CHECK(s.labelled().size() == before + k);
      CHECK(s.labelled().size() + s.unlabelled().size() == n);
      for (auto id : s.labelled()) CHECK_FALSE(s.unlabelled().contains(id));
    }
  }
}

TEST_CASE("hold_out splits a dataset without overlap") {
  const Dataset ds = testutil::plain_dataset("a", 100);
  const auto [held, rest] = hold_out(ds, 0.1, 5);
  CHECK(held.size() == 10);
  CHECK(rest.size() == 90);
  for (const auto& e : held.examples) CHECK_FALSE(rest.contains(e.id));
}
