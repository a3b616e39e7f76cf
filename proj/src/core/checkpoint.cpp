#include "fsad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fsad/error.hpp"

namespace fsad {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'F', 'S', 'A', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::kFormat, "checkpoint is truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct TensorSpec {
  std::string name;
  std::string dtype;
  std::uint64_t count;
};

json feature_config_json(const FeatureConfig& f) {
  return json{{"ngram_orders", f.ngram_orders},
              {"n_buckets", f.n_buckets},
              {"weighting", "log-count"},
              {"normalize", f.normalize},
              {"max_tokens", f.max_tokens}};
}

FeatureConfig feature_config_from_json(const json& j) {
  FeatureConfig f;
  f.ngram_orders = j.at("ngram_orders").get<std::vector<std::uint32_t>>();
  f.n_buckets = j.at("n_buckets").get<std::uint32_t>();
  if (j.at("weighting").get<std::string>() != "log-count") {
    fail(ErrorCode::kFormat, "checkpoint: unknown feature weighting");
  }
  f.normalize = j.at("normalize").get<bool>();
  f.max_tokens = j.at("max_tokens").get<std::uint32_t>();
  return f;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const EncoderShape& shape = ckpt.params.shape();
  const ParamLayout& layout = ckpt.params.layout();

  std::vector<TensorSpec> tensors;
  std::vector<std::pair<std::size_t, std::size_t>> param_ranges;
  if (ckpt.method != Method::kOneClass) {
    auto add = [&](const char* name, std::size_t begin, std::size_t end) {
      tensors.push_back({name, "f64", end - begin});
      param_ranges.emplace_back(begin, end);
    };
    add("w1", layout.w1, layout.b1);
    add("b1", layout.b1, layout.w2);
    add("w2", layout.w2, layout.b2);
    add("b2", layout.b2, layout.head_begin);
    if (shape.has_head) {
      add("head_w", layout.head_w, layout.head_b);
      add("head_b", layout.head_b, layout.total);
    }
  }

  std::uint64_t total_nnz = 0;
  for (const auto& r : ckpt.oneclass.references) total_nnz += r.nnz();
  if (ckpt.method == Method::kOneClass) {
    tensors.push_back({"ref_offsets", "u64", ckpt.oneclass.references.size() + 1});
    tensors.push_back({"ref_indices", "u32", total_nnz});
    tensors.push_back({"ref_values", "f64", total_nnz});
  }

  json header;
  header["method"] = std::string(to_string(ckpt.method));
  header["domain"] = ckpt.domain;
  header["features"] = feature_config_json(ckpt.features);
  header["shape"] = json{{"input_dim", shape.input_dim},
                         {"hidden_dim", shape.hidden_dim},
                         {"embed_dim", shape.embed_dim},
                         {"has_head", shape.has_head}};
  header["seed"] = ckpt.seed;
  header["config"] = json::parse(ckpt.config_snapshot);
  if (ckpt.method == Method::kOneClass) header["k_nn"] = ckpt.oneclass.k_nn;
  json table = json::array();
  for (const auto& t : tensors) table.push_back({{"name", t.name}, {"dtype", t.dtype}, {"count", t.count}});
  header["tensors"] = table;
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, ckpt.format_version);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;

  const auto values = ckpt.params.values();
  for (const auto& [begin, end] : param_ranges) {
    for (std::size_t i = begin; i < end; ++i) put_le<double>(out, values[i]);
  }
  if (ckpt.method == Method::kOneClass) {
    std::uint64_t offset = 0;
    put_le<std::uint64_t>(out, offset);
    for (const auto& r : ckpt.oneclass.references) {
      offset += r.nnz();
      put_le<std::uint64_t>(out, offset);
    }
    for (const auto& r : ckpt.oneclass.references) {
      for (auto idx : r.indices) put_le<std::uint32_t>(out, idx);
    }
    for (const auto& r : ckpt.oneclass.references) {
      for (double v : r.values) put_le<double>(out, v);
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    fail(ErrorCode::kFormat, "not a checkpoint file (bad magic bytes)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != Checkpoint::kFormatVersion) {
    fail(ErrorCode::kFormat, "unsupported checkpoint format version " + std::to_string(version) +
                                 " (expected " + std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  const auto header_len = in.get<std::uint64_t>();
  if (header_len > bytes.size()) fail(ErrorCode::kFormat, "checkpoint is truncated");

  Checkpoint ckpt;
  try {
    const json header = json::parse(in.take(static_cast<std::size_t>(header_len)));
    ckpt.method = parse_method(header.at("method").get<std::string>());
    ckpt.domain = header.at("domain").get<std::string>();
    ckpt.features = feature_config_from_json(header.at("features"));
    const auto& s = header.at("shape");
    EncoderShape shape{s.at("input_dim").get<std::uint32_t>(), s.at("hidden_dim").get<std::uint32_t>(),
                       s.at("embed_dim").get<std::uint32_t>(), s.at("has_head").get<bool>()};
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.config_snapshot = header.at("config").dump();

    std::vector<TensorSpec> tensors;
    for (const auto& t : header.at("tensors")) {
      tensors.push_back({t.at("name").get<std::string>(), t.at("dtype").get<std::string>(),
                         t.at("count").get<std::uint64_t>()});
    }

    if (ckpt.method != Method::kOneClass) {
      ckpt.params = EncoderParams(shape);
      const ParamLayout& l = ckpt.params.layout();
      std::vector<std::pair<std::string, std::size_t>> expected{
          {"w1", l.b1 - l.w1}, {"b1", l.w2 - l.b1}, {"w2", l.b2 - l.w2}, {"b2", l.head_begin - l.b2}};
      if (shape.has_head) {
        expected.emplace_back("head_w", l.head_b - l.head_w);
        expected.emplace_back("head_b", 1);
      }
      if (tensors.size() != expected.size()) fail(ErrorCode::kFormat, "checkpoint: tensor count mismatch");
      for (std::size_t i = 0; i < expected.size(); ++i) {
        if (tensors[i].name != expected[i].first || tensors[i].dtype != "f64" ||
            tensors[i].count != expected[i].second) {
          fail(ErrorCode::kFormat, "checkpoint: tensor '" + tensors[i].name +
                                       "' does not match the declared shape");
        }
      }
      for (double& v : ckpt.params.values()) v = in.get<double>();
    } else {
      ckpt.oneclass.k_nn = header.at("k_nn").get<std::uint32_t>();
      if (tensors.size() != 3 || tensors[0].name != "ref_offsets" || tensors[1].name != "ref_indices" ||
          tensors[2].name != "ref_values" || tensors[1].count != tensors[2].count ||
          tensors[0].count == 0) {
        fail(ErrorCode::kFormat, "checkpoint: malformed one-class tensors");
      }
      std::vector<std::uint64_t> offsets(tensors[0].count);
      for (auto& o : offsets) o = in.get<std::uint64_t>();
      if (offsets.front() != 0 || offsets.back() != tensors[1].count) {
        fail(ErrorCode::kFormat, "checkpoint: inconsistent one-class offsets");
      }
      std::vector<std::uint32_t> indices(tensors[1].count);
      for (auto& i : indices) i = in.get<std::uint32_t>();
      std::vector<double> values(tensors[2].count);
      for (auto& v : values) v = in.get<double>();
      for (std::size_t r = 0; r + 1 < offsets.size(); ++r) {
        if (offsets[r] > offsets[r + 1]) fail(ErrorCode::kFormat, "checkpoint: inconsistent one-class offsets");
        SparseFeatures f;
        f.dimension = ckpt.features.n_buckets;
        f.indices.assign(indices.begin() + static_cast<std::ptrdiff_t>(offsets[r]),
                         indices.begin() + static_cast<std::ptrdiff_t>(offsets[r + 1]));
        f.values.assign(values.begin() + static_cast<std::ptrdiff_t>(offsets[r]),
                        values.begin() + static_cast<std::ptrdiff_t>(offsets[r + 1]));
        ckpt.oneclass.references.push_back(std::move(f));
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint header: ") + e.what());
  }
  if (!in.at_end()) fail(ErrorCode::kFormat, "checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace fsad
