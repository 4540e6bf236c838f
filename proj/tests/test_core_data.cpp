#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <string>
#include <vector>

#include "shiftbench/dataset.hpp"
#include "shiftbench/joint.hpp"
#include "shiftbench/manifest.hpp"
#include "shiftbench/schema.hpp"

using namespace shiftbench;

namespace {

const char* kSpritesSchemaJson =
    R"({"attributes":[{"name":"shape","values":["square","ellipse","heart"]},)"
    R"({"name":"color","values":["red","green","blue"]}],)"
    R"("label_index":0,"nuisance_index":1})";

AttributedDataset grid_dataset(const AttributeSchema& schema,
                               const std::vector<std::vector<int>>& counts) {
  std::vector<ExampleRecord> records;
  uint64_t id = 0;
  for (uint32_t u = 0; u < counts.size(); ++u) {
    for (uint32_t v = 0; v < counts[u].size(); ++v) {
      for (int k = 0; k < counts[u][v]; ++k) {
        ExampleRecord r;
        r.sample_id = id++;
        r.attr = {u, v};
        r.payload = Payload::make_features({static_cast<float>(u), 1.0f});
        records.push_back(std::move(r));
      }
    }
  }
  return AttributedDataset(schema, std::move(records));
}

}  // namespace

TEST_CASE("load_schema accepts the two-attribute color-shape document") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  REQUIRE(schema.num_attributes() == 2);
  REQUIRE(schema.cardinality(0) == 3);
  REQUIRE(schema.cardinality(1) == 3);
  REQUIRE(schema.label_index == 0);
  REQUIRE(schema.nuisance_index == 1);
}

TEST_CASE("load_schema rejects label equal to nuisance") {
  REQUIRE_THROWS_AS(
      load_schema(R"({"attributes":[{"name":"a","values":["x","y"]}],)"
                  R"("label_index":0,"nuisance_index":0})"),
      SchemaError);
}

TEST_CASE("load_schema rejects duplicate values") {
  REQUIRE_THROWS_AS(
      load_schema(R"({"attributes":[{"name":"a","values":["red","red"]},)"
                  R"({"name":"b","values":["x"]}],"label_index":0,"nuisance_index":1})"),
      SchemaError);
}

TEST_CASE("load_schema rejects malformed JSON and empty value sets") {
  REQUIRE_THROWS_AS(load_schema("{nope"), ParseError);
  REQUIRE_THROWS_AS(
      load_schema(R"({"attributes":[{"name":"a","values":[]},)"
                  R"({"name":"b","values":["x"]}],"label_index":0,"nuisance_index":1})"),
      SchemaError);
}

TEST_CASE("load_dataset reads a full 3x3 grid") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  std::string csv = "sample_id,attr_0,attr_1,payload\n";
  int id = 0;
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v)
      csv += std::to_string(id++) + "," + std::to_string(u) + "," +
             std::to_string(v) + ",feat:1;2\n";
  AttributedDataset ds = load_dataset(schema, csv);
  REQUIRE(ds.size() == 9);
  REQUIRE(ds.record(4).attr == std::vector<uint32_t>{1, 1});
}

TEST_CASE("load_dataset rejects out-of-range attribute values") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  REQUIRE_THROWS_AS(
      load_dataset(schema, "sample_id,attr_0,attr_1,payload\n1,0,3,feat:1\n"),
      RangeError);
}

TEST_CASE("load_dataset rejects duplicate ids") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  REQUIRE_THROWS_AS(load_dataset(schema,
                                 "sample_id,attr_0,attr_1,payload\n"
                                 "7,0,0,feat:1\n7,1,1,feat:1\n"),
                    DuplicateIdError);
}

TEST_CASE("load_dataset rejects a wrong header") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  REQUIRE_THROWS_AS(load_dataset(schema, "id,attr_0,attr_1,payload\n"),
                    ParseError);
}

TEST_CASE("dataset serialization round-trips and sorts by id") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  std::string csv =
      "sample_id,attr_0,attr_1,payload\n"
      "9,1,2,latent:00010000000200000000800000000000\n"
      "2,0,1,feat:0.5;-1.25\n"
      "5,2,0,path:external/file.png\n";
  AttributedDataset ds = load_dataset(schema, csv);
  REQUIRE(ds.records().front().sample_id == 2);
  std::string serialized = ds.to_csv();
  AttributedDataset again = load_dataset(schema, serialized);
  REQUIRE(again.to_csv() == serialized);
}

TEST_CASE("compute_joint is uniform on a one-per-cell grid") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  auto ds = grid_dataset(schema, {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  auto ids = ds.all_ids();
  JointDistribution jd = compute_joint(ds, ids, 0, 1);
  REQUIRE(jd.probs_defined);
  for (const auto& row : jd.probs)
    for (double p : row) REQUIRE(p == Catch::Approx(1.0 / 9.0));
}

TEST_CASE("compute_joint flags the empty id set") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  auto ds = grid_dataset(schema, {{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  std::vector<uint64_t> none;
  JointDistribution jd = compute_joint(ds, none, 0, 1);
  REQUIRE_FALSE(jd.probs_defined);
  for (const auto& row : jd.counts)
    for (uint64_t c : row) REQUIRE(c == 0);
}

TEST_CASE("compute_joint matches an independent tally on a skewed grid") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  // 90 per diagonal cell plus one per off-diagonal cell.
  std::vector<std::vector<int>> counts = {
      {90, 1, 1}, {1, 90, 1}, {1, 1, 90}};
  auto ds = grid_dataset(schema, counts);
  auto ids = ds.all_ids();
  JointDistribution jd = compute_joint(ds, ids, 0, 1);

  // Independent oracle: recount straight off the record list.
  std::map<std::pair<uint32_t, uint32_t>, uint64_t> tally;
  for (const auto& r : ds.records()) tally[{r.attr[0], r.attr[1]}]++;
  for (uint32_t u = 0; u < 3; ++u)
    for (uint32_t v = 0; v < 3; ++v)
      REQUIRE(jd.counts[u][v] == tally[{u, v}]);
}

TEST_CASE("compute_joint marginals recover the attribute marginal") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  auto ds = grid_dataset(schema, {{5, 2, 0}, {1, 1, 1}, {0, 0, 4}});
  auto ids = ds.all_ids();
  JointDistribution jd = compute_joint(ds, ids, 0, 1);
  auto marginal = jd.marginal_i();

  std::vector<double> oracle(3, 0.0);
  for (const auto& r : ds.records()) oracle[r.attr[0]] += 1.0;
  for (auto& v : oracle) v /= static_cast<double>(ds.size());
  for (size_t u = 0; u < 3; ++u)
    REQUIRE(marginal[u] == Catch::Approx(oracle[u]).margin(1e-12));
}

TEST_CASE("compute_joint rejects bad axes and unknown ids") {
  AttributeSchema schema = load_schema(kSpritesSchemaJson);
  auto ds = grid_dataset(schema, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  auto ids = ds.all_ids();
  REQUIRE_THROWS_AS(compute_joint(ds, ids, 0, 0), AxisError);
  REQUIRE_THROWS_AS(compute_joint(ds, ids, 0, 5), AxisError);
  std::vector<uint64_t> bad{999};
  REQUIRE_THROWS_AS(compute_joint(ds, bad, 0, 1), UnknownIdError);
}

TEST_CASE("manifest serialization is canonical and round-trips") {
  SplitManifest m;
  m.seed = 7;
  m.spec_digest = "00ff";
  m.train = {{3, 1.0, Origin::bulk, std::nullopt},
             {1, 0.5, Origin::lowdata, 2},
             {2, 1.5, Origin::correlated, std::nullopt}};
  m.val = {10, 9};
  m.test = {20, 19};
  m.canonicalize();

  std::string j1 = m.to_json();
  SplitManifest parsed = SplitManifest::from_json(j1);
  REQUIRE(parsed.to_json() == j1);
  // Serializing twice yields identical bytes.
  REQUIRE(m.to_json() == j1);
  REQUIRE(parsed.train[0].id == 1);
  REQUIRE(parsed.train[0].label_override.has_value());
  REQUIRE(*parsed.train[0].label_override == 2);
}

TEST_CASE("manifest rejects overlapping splits on read") {
  std::string bad =
      R"({"seed":1,"spec_digest":"x","train":[{"id":5,"w":1,"origin":"bulk",)"
      R"("label_override":null}],"val":[],"test":[5]})";
  REQUIRE_THROWS_AS(SplitManifest::from_json(bad), FormatError);
}

TEST_CASE("manifest rejects negative weights") {
  std::string bad =
      R"({"seed":1,"spec_digest":"x","train":[{"id":5,"w":-0.5,"origin":"bulk",)"
      R"("label_override":null}],"val":[],"test":[]})";
  REQUIRE_THROWS_AS(SplitManifest::from_json(bad), FormatError);
}

TEST_CASE("manifest file round-trip is byte-identical") {
  SplitManifest m;
  m.seed = 42;
  m.spec_digest = "abcd";
  m.train = {{1, 1.0, Origin::bulk, std::nullopt},
             {2, 2.0, Origin::uncorrelated, std::nullopt},
             {3, 1.0 / 3.0, Origin::lowdata, 1}};
  m.val = {4};
  m.test = {5};
  m.canonicalize();

  std::string path = "manifest_roundtrip_test.json";
  m.write(path);
  SplitManifest r = SplitManifest::read(path);
  std::string first = read_file(path);
  r.write(path);
  REQUIRE(read_file(path) == first);
  std::remove(path.c_str());
}
