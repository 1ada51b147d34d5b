/* Copyright 2026 The parkdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "parkdiff/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "parkdiff/error.hpp"

namespace parkdiff {

namespace {

constexpr char kMagic[4] = {'P', 'K', 'D', 'F'};
constexpr std::uint8_t kF64 = 0, kU64 = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void str(const std::string& s) { bytes(s.data(), s.size()); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) {
      throw ParseError("checkpoint truncated while reading " + std::string(what) + " at byte " +
                       std::to_string(pos_));
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
  }
  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

struct Entry {
  std::string name;
  std::uint8_t dtype = kF64;
  Shape shape;
  const Tensor* tensor = nullptr;
  std::uint64_t scalar = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<Entry> entries;
  for (const auto& [name, t] : ckpt.state.model.params) entries.push_back({"param/" + name, kF64, t.shape(), &t, 0});
  for (const auto& [name, t] : ckpt.state.adam.m) entries.push_back({"adam.m/" + name, kF64, t.shape(), &t, 0});
  for (const auto& [name, t] : ckpt.state.adam.v) entries.push_back({"adam.v/" + name, kF64, t.shape(), &t, 0});
  entries.push_back({"meta/adam_step", kU64, {}, nullptr, ckpt.state.adam.step});
  entries.push_back({"meta/stage", kU64, {}, nullptr, static_cast<std::uint64_t>(ckpt.state.stage)});
  entries.push_back({"meta/iteration", kU64, {}, nullptr, ckpt.state.iteration});

  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  const std::string config = config_to_json(ckpt.config);
  w.u64(config.size());
  w.str(config);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const Entry& e : entries) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.str(e.name);
    w.u8(e.dtype);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) w.u64(d);
  }
  for (const Entry& e : entries) {
    if (e.dtype == kU64) {
      w.u64(e.scalar);
    } else {
      for (double v : e.tensor->values()) w.f64(v);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.str(4, "magic") != std::string(kMagic, 4)) throw ParseError("not a checkpoint (bad magic bytes)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t config_len = r.u64("config length");
  r.need(config_len, "config");
  Checkpoint ckpt;
  try {
    ckpt.config = config_from_json(r.str(config_len, "config"));
    ckpt.config.validate();
  } catch (const ConfigError& e) {
    throw ParseError(std::string("embedded config rejected: ") + e.what());
  }

  const std::uint32_t count = r.u32("entry count");
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const std::uint32_t len = r.u32("entry name length");
    e.name = r.str(len, "entry name");
    e.dtype = r.u8("entry dtype");
    if (e.dtype != kF64 && e.dtype != kU64) {
      throw ParseError("entry '" + e.name + "' has unknown dtype " + std::to_string(e.dtype));
    }
    const std::uint32_t rank = r.u32("entry rank");
    if (rank > 8) throw ParseError("entry '" + e.name + "' has implausible rank " + std::to_string(rank));
    std::uint64_t elements = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint64_t d = r.u64("entry dims");
      if (d != 0 && elements > bytes.size() / d) throw ParseError("entry '" + e.name + "' is larger than the file");
      elements *= d;
      e.shape.push_back(d);
    }
    if (e.dtype == kU64 && rank != 0) throw ParseError("entry '" + e.name + "' must be a scalar");
    entries.push_back(std::move(e));
  }

  Model expected = init_model(ckpt.config.model, 0);
  std::set<std::string> seen;
  bool have_step = false, have_stage = false, have_iteration = false;
  for (Entry& e : entries) {
    if (!seen.insert(e.name).second) throw ParseError("duplicate entry '" + e.name + "'");
    if (e.dtype == kU64) {
      const std::uint64_t v = r.u64(e.name.c_str());
      if (e.name == "meta/adam_step") {
        ckpt.state.adam.step = v;
        have_step = true;
      } else if (e.name == "meta/stage") {
        if (v != 1 && v != 2) throw ParseError("meta/stage must be 1 or 2, got " + std::to_string(v));
        ckpt.state.stage = static_cast<int>(v);
        have_stage = true;
      } else if (e.name == "meta/iteration") {
        ckpt.state.iteration = v;
        have_iteration = true;
      } else {
        throw ParseError("unknown entry '" + e.name + "'");
      }
      continue;
    }
    Tensor t(e.shape);
    r.need(t.size() * 8, e.name.c_str());
    for (double& v : t.values()) v = r.f64(e.name.c_str());
    const auto slash = e.name.find('/');
    const std::string group = e.name.substr(0, slash), param = slash == std::string::npos ? "" : e.name.substr(slash + 1);
    if (!expected.params.contains(param)) throw ParseError("unknown entry '" + e.name + "'");
    if (expected.params.get(param).shape() != t.shape()) {
      throw ParseError("entry '" + e.name + "' has shape " + shape_string(t.shape()) + ", expected " +
                       shape_string(expected.params.get(param).shape()));
    }
    if (group == "param") {
      ckpt.state.model.params.add(param, std::move(t));
    } else if (group == "adam.m") {
      ckpt.state.adam.m.emplace(param, std::move(t));
    } else if (group == "adam.v") {
      ckpt.state.adam.v.emplace(param, std::move(t));
    } else {
      throw ParseError("unknown entry '" + e.name + "'");
    }
  }
  if (r.remaining() != 0) throw ParseError(std::to_string(r.remaining()) + " trailing bytes after the last entry");

  std::string missing;
  for (const std::string& name : expected.params.names()) {
    if (!ckpt.state.model.params.contains(name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) throw ParseError("checkpoint is missing parameters: " + missing);
  if (!have_step || !have_stage || !have_iteration) throw ParseError("checkpoint is missing meta entries");
  ckpt.state.model.config = ckpt.config.model;
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace parkdiff
