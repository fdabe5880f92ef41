// Copyright 2026 The SketchComm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sketchcomm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace sketchcomm {

namespace {

template <typename T>
void PutLe(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T Get(const char* what) {
    Need(sizeof(T), what);
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (size_t i = 0; i < sizeof(T); ++i) {
      u = static_cast<U>(u | (static_cast<U>(static_cast<uint8_t>(bytes_[pos_ + i])) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::string Bytes(size_t n, const char* what) {
    Need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError("checkpoint: truncated while reading " + std::string(what) + " at byte " +
                            std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string EncodeCheckpoint(const CheckpointData& data) {
  std::string out = "SKCM";
  PutLe<uint32_t>(out, kCheckpointVersion);
  const std::string meta = data.metadata.dump();
  PutLe<uint64_t>(out, meta.size());
  out += meta;
  // Names listed in `order` come first; any others follow in map order.
  std::vector<std::string> names = data.order;
  const std::set<std::string> listed(names.begin(), names.end());
  if (listed.size() != names.size()) throw CheckpointError("checkpoint: duplicate name in order");
  for (const auto& [name, t] : data.tensors) {
    if (!listed.count(name)) names.push_back(name);
  }
  PutLe<uint32_t>(out, static_cast<uint32_t>(names.size()));
  for (const auto& name : names) {
    const auto it = data.tensors.find(name);
    if (it == data.tensors.end()) throw CheckpointError("checkpoint: no tensor named '" + name + "'");
    const Tensor& t = it->second;
    PutLe<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    PutLe<uint32_t>(out, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) PutLe<int64_t>(out, d);
    for (float v : t.data()) PutLe<uint32_t>(out, std::bit_cast<uint32_t>(v));
  }
  return out;
}

CheckpointData DecodeCheckpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.Bytes(4, "magic") != "SKCM") throw CheckpointError("checkpoint: bad magic, not an SKCM file");
  const auto version = r.Get<uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  CheckpointData data;
  const auto meta_len = r.Get<uint64_t>("metadata length");
  try {
    data.metadata = nlohmann::json::parse(r.Bytes(static_cast<size_t>(meta_len), "metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const auto count = r.Get<uint32_t>("tensor count");
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.Get<uint32_t>("name length");
    std::string name = r.Bytes(name_len, "name");
    const auto rank = r.Get<uint32_t>("rank");
    Shape shape;
    for (uint32_t k = 0; k < rank; ++k) {
      const auto d = r.Get<int64_t>("dims");
      if (d < 0) throw CheckpointError("checkpoint: negative dim in '" + name + "'");
      shape.push_back(d);
    }
    std::vector<float> values(static_cast<size_t>(NumElements(shape)));
    for (float& v : values) v = std::bit_cast<float>(r.Get<uint32_t>("values"));
    if (data.tensors.count(name)) throw CheckpointError("checkpoint: duplicate tensor '" + name + "'");
    data.tensors.emplace(name, Tensor::FromData(shape, std::move(values)));
    data.order.push_back(std::move(name));
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes at " + std::to_string(r.pos()));
  return data;
}

void SaveCheckpointFile(const std::filesystem::path& path, const CheckpointData& data) {
  const std::string bytes = EncodeCheckpoint(data);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData LoadCheckpointFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return DecodeCheckpoint(ss.str());
}

}  // namespace sketchcomm
