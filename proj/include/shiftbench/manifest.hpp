#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "shiftbench/errors.hpp"
#include "shiftbench/jsonio.hpp"

namespace shiftbench {

enum class Origin : uint8_t { correlated, uncorrelated, bulk, lowdata };

inline const char* origin_name(Origin o) {
  switch (o) {
    case Origin::correlated: return "correlated";
    case Origin::uncorrelated: return "uncorrelated";
    case Origin::bulk: return "bulk";
    case Origin::lowdata: return "lowdata";
  }
  throw FormatError("unreachable origin");
}

inline Origin origin_from_name(const std::string& s) {
  if (s == "correlated") return Origin::correlated;
  if (s == "uncorrelated") return Origin::uncorrelated;
  if (s == "bulk") return Origin::bulk;
  if (s == "lowdata") return Origin::lowdata;
  throw FormatError("unknown origin: " + s);
}

struct TrainEntry {
  uint64_t id = 0;
  double weight = 1.0;
  Origin origin = Origin::bulk;
  std::optional<uint32_t> label_override;
};

// Materialized split: train entries with weights/origins/overrides plus
// val/test id lists. Canonically serialized (fixed key order, 9-significant-
// digit floats, entries sorted) so identical splits give identical bytes.
struct SplitManifest {
  uint64_t seed = 0;
  std::string spec_digest;
  std::vector<TrainEntry> train;
  std::vector<uint64_t> val;
  std::vector<uint64_t> test;

  void canonicalize() {
    std::sort(train.begin(), train.end(),
              [](const TrainEntry& a, const TrainEntry& b) {
                if (a.id != b.id) return a.id < b.id;
                return static_cast<int>(a.origin) < static_cast<int>(b.origin);
              });
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());
  }

  void validate() const {
    std::set<uint64_t> train_ids;
    for (const auto& e : train) {
      if (e.weight < 0.0)
        throw FormatError("negative weight on id " + std::to_string(e.id));
      train_ids.insert(e.id);
    }
    std::set<uint64_t> val_ids(val.begin(), val.end());
    std::set<uint64_t> test_ids(test.begin(), test.end());
    if (val_ids.size() != val.size()) throw FormatError("duplicate val ids");
    if (test_ids.size() != test.size()) throw FormatError("duplicate test ids");
    for (uint64_t id : val_ids)
      if (train_ids.count(id)) throw FormatError("id in train and val: " + std::to_string(id));
    for (uint64_t id : test_ids) {
      if (train_ids.count(id)) throw FormatError("id in train and test: " + std::to_string(id));
      if (val_ids.count(id)) throw FormatError("id in val and test: " + std::to_string(id));
    }
  }

  double train_weight_mean() const {
    if (train.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : train) s += e.weight;
    return s / static_cast<double>(train.size());
  }

  std::string to_json() const {
    std::string out = "{\"seed\":" + std::to_string(seed);
    out += ",\"spec_digest\":\"" + json_escape(spec_digest) + "\"";
    out += ",\"train\":[";
    for (size_t i = 0; i < train.size(); ++i) {
      const auto& e = train[i];
      if (i) out += ',';
      out += "{\"id\":" + std::to_string(e.id);
      out += ",\"w\":" + format_float9(e.weight);
      out += ",\"origin\":\"" + std::string(origin_name(e.origin)) + "\"";
      out += ",\"label_override\":";
      out += e.label_override ? std::to_string(*e.label_override) : "null";
      out += '}';
    }
    out += "],\"val\":[";
    for (size_t i = 0; i < val.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(val[i]);
    }
    out += "],\"test\":[";
    for (size_t i = 0; i < test.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(test[i]);
    }
    out += "]}";
    return out;
  }

  static SplitManifest from_json(const std::string& text) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("manifest JSON: ") + e.what());
    }
    SplitManifest m;
    try {
      m.seed = doc.at("seed").get<uint64_t>();
      m.spec_digest = doc.at("spec_digest").get<std::string>();
      for (const auto& t : doc.at("train")) {
        TrainEntry e;
        e.id = t.at("id").get<uint64_t>();
        e.weight = t.at("w").get<double>();
        e.origin = origin_from_name(t.at("origin").get<std::string>());
        const auto& ov = t.at("label_override");
        if (!ov.is_null()) e.label_override = ov.get<uint32_t>();
        m.train.push_back(e);
      }
      for (const auto& v : doc.at("val")) m.val.push_back(v.get<uint64_t>());
      for (const auto& v : doc.at("test")) m.test.push_back(v.get<uint64_t>());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("manifest JSON: ") + e.what());
    }
    m.canonicalize();
    m.validate();
    return m;
  }

  void write(const std::string& path) const {
    validate();
    write_file(path, to_json() + "\n");
  }

  static SplitManifest read(const std::string& path) {
    return from_json(read_file(path));
  }
};

inline void write_manifest(const SplitManifest& m, const std::string& path) {
  m.write(path);
}

inline SplitManifest read_manifest(const std::string& path) {
  return SplitManifest::read(path);
}

}  // namespace shiftbench
