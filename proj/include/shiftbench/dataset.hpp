#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "shiftbench/errors.hpp"
#include "shiftbench/jsonio.hpp"
#include "shiftbench/schema.hpp"

namespace shiftbench {

// Sample payload: an inline feature vector, a generator latent reference
// (four 32-bit fixed-point words), or an opaque external path.
struct Payload {
  enum class Kind { features, latent, path };

  Kind kind = Kind::path;
  std::vector<float> features;
  std::array<uint32_t, 4> latent_words{};
  std::string path;

  static Payload make_features(std::vector<float> f) {
    Payload p;
    p.kind = Kind::features;
    p.features = std::move(f);
    return p;
  }

  static Payload make_latent(std::array<uint32_t, 4> words) {
    Payload p;
    p.kind = Kind::latent;
    p.latent_words = words;
    return p;
  }

  static Payload make_path(std::string s) {
    Payload p;
    p.kind = Kind::path;
    p.path = std::move(s);
    return p;
  }

  // Wire forms: "feat:v1;v2;...", "latent:<32 hex chars>", "path:<string>".
  std::string encode() const {
    switch (kind) {
      case Kind::features: {
        std::string out = "feat:";
        for (size_t i = 0; i < features.size(); ++i) {
          if (i) out += ';';
          out += format_float9(features[i]);
        }
        return out;
      }
      case Kind::latent: {
        std::string out = "latent:";
        for (uint32_t w : latent_words) out += to_hex8(w);
        return out;
      }
      case Kind::path:
        return "path:" + path;
    }
    throw FormatError("unreachable payload kind");
  }

  static Payload parse(std::string_view text) {
    if (text.rfind("feat:", 0) == 0) {
      std::vector<float> vals;
      std::string_view rest = text.substr(5);
      while (!rest.empty()) {
        size_t sep = rest.find(';');
        std::string_view tok = rest.substr(0, sep);
        float v;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
          throw ParseError("bad feature value: " + std::string(tok));
        vals.push_back(v);
        if (sep == std::string_view::npos) break;
        rest = rest.substr(sep + 1);
      }
      if (vals.empty()) throw ParseError("empty feature payload");
      return make_features(std::move(vals));
    }
    if (text.rfind("latent:", 0) == 0) {
      std::string_view hex = text.substr(7);
      if (hex.size() != 32) throw ParseError("latent payload must be 32 hex chars");
      std::array<uint32_t, 4> words{};
      for (int w = 0; w < 4; ++w) {
        uint32_t v = 0;
        auto tok = hex.substr(static_cast<size_t>(w) * 8, 8);
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + 8, v, 16);
        if (ec != std::errc() || p != tok.data() + 8)
          throw ParseError("bad latent hex: " + std::string(tok));
        words[static_cast<size_t>(w)] = v;
      }
      return make_latent(words);
    }
    if (text.rfind("path:", 0) == 0) return make_path(std::string(text.substr(5)));
    throw ParseError("unknown payload prefix: " + std::string(text.substr(0, 8)));
  }
};

struct ExampleRecord {
  uint64_t sample_id = 0;
  std::vector<uint32_t> attr;  // value index per schema attribute
  Payload payload;
};

// Validated record collection, sorted by sample_id.
class AttributedDataset {
 public:
  AttributedDataset() = default;

  AttributedDataset(AttributeSchema schema, std::vector<ExampleRecord> records)
      : schema_(std::move(schema)), records_(std::move(records)) {
    schema_.validate();
    std::sort(records_.begin(), records_.end(),
              [](const ExampleRecord& a, const ExampleRecord& b) {
                return a.sample_id < b.sample_id;
              });
    for (size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (i > 0 && records_[i - 1].sample_id == r.sample_id)
        throw DuplicateIdError("sample_id " + std::to_string(r.sample_id));
      if (r.attr.size() != schema_.num_attributes())
        throw RangeError("record " + std::to_string(r.sample_id) +
                         " has wrong attribute count");
      for (size_t k = 0; k < r.attr.size(); ++k) {
        if (r.attr[k] >= schema_.cardinality(k))
          throw RangeError("record " + std::to_string(r.sample_id) + " attr_" +
                           std::to_string(k) + " = " + std::to_string(r.attr[k]) +
                           " out of range");
      }
    }
  }

  const AttributeSchema& schema() const { return schema_; }
  const std::vector<ExampleRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }

  bool contains(uint64_t id) const { return find(id) != nullptr; }

  const ExampleRecord& record(uint64_t id) const {
    const ExampleRecord* r = find(id);
    if (!r) throw UnknownIdError("sample_id " + std::to_string(id));
    return *r;
  }

  std::vector<uint64_t> all_ids() const {
    std::vector<uint64_t> ids;
    ids.reserve(records_.size());
    for (const auto& r : records_) ids.push_back(r.sample_id);
    return ids;
  }

  // CSV with header `sample_id,attr_0,...,attr_{K-1},payload`.
  static AttributedDataset load_csv(const AttributeSchema& schema,
                                    const std::string& text) {
    size_t k = schema.num_attributes();
    std::string expected_header = "sample_id";
    for (size_t i = 0; i < k; ++i) expected_header += ",attr_" + std::to_string(i);
    expected_header += ",payload";

    std::vector<ExampleRecord> records;
    size_t pos = 0;
    size_t line_no = 0;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      std::string_view line(text.data() + pos,
                            (eol == std::string::npos ? text.size() : eol) - pos);
      pos = (eol == std::string::npos) ? text.size() : eol + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      if (line_no == 1) {
        if (line != expected_header)
          throw ParseError("bad CSV header, expected: " + expected_header);
        continue;
      }
      if (line.empty()) continue;

      ExampleRecord rec;
      std::string_view rest = line;
      auto next_field = [&](bool last) -> std::string_view {
        size_t comma = last ? std::string_view::npos : rest.find(',');
        if (!last && comma == std::string_view::npos)
          throw ParseError("line " + std::to_string(line_no) + ": too few fields");
        std::string_view f = rest.substr(0, comma);
        rest = last ? std::string_view{} : rest.substr(comma + 1);
        return f;
      };

      auto id_tok = next_field(false);
      auto [p, ec] = std::from_chars(id_tok.data(), id_tok.data() + id_tok.size(),
                                     rec.sample_id);
      if (ec != std::errc() || p != id_tok.data() + id_tok.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad sample_id");

      rec.attr.resize(k);
      for (size_t i = 0; i < k; ++i) {
        auto tok = next_field(false);
        uint32_t v = 0;
        auto [pp, ee] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ee != std::errc() || pp != tok.data() + tok.size())
          throw ParseError("line " + std::to_string(line_no) + ": bad attr_" +
                           std::to_string(i));
        rec.attr[i] = v;
      }
      rec.payload = Payload::parse(next_field(true));
      records.push_back(std::move(rec));
    }
    return AttributedDataset(schema, std::move(records));
  }

  std::string to_csv() const {
    std::string out = "sample_id";
    for (size_t i = 0; i < schema_.num_attributes(); ++i)
      out += ",attr_" + std::to_string(i);
    out += ",payload\n";
    for (const auto& r : records_) {
      out += std::to_string(r.sample_id);
      for (uint32_t a : r.attr) out += ',' + std::to_string(a);
      out += ',' + r.payload.encode() + '\n';
    }
    return out;
  }

 private:
  const ExampleRecord* find(uint64_t id) const {
    auto it = std::lower_bound(records_.begin(), records_.end(), id,
                               [](const ExampleRecord& r, uint64_t v) {
                                 return r.sample_id < v;
                               });
    if (it == records_.end() || it->sample_id != id) return nullptr;
    return &*it;
  }

  AttributeSchema schema_;
  std::vector<ExampleRecord> records_;
};

inline AttributedDataset load_dataset(const AttributeSchema& schema,
                                      const std::string& csv_text) {
  return AttributedDataset::load_csv(schema, csv_text);
}

}  // namespace shiftbench
