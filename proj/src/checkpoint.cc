// checkpoint.cc

// Copyright 2026  The lseend Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "lseend/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lseend {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

template <typename U>
void Put(std::string* out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out->append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename U>
  U Get() {
    Need(sizeof(U));
    U v;
    std::memcpy(&v, s_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string Bytes(size_t n) {
    Need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void Need(size_t n) {
    if (s_.size() - pos_ < n) throw IoError("checkpoint: truncated");
  }
  const std::string& s_;
  size_t pos_ = 0;
};

void PutTensor(std::string* out, const std::string& name, const MatrixD& m) {
  Put<uint32_t>(out, static_cast<uint32_t>(name.size()));
  out->append(name);
  Put<uint8_t>(out, 0);
  Put<uint32_t>(out, static_cast<uint32_t>(m.rows()));
  Put<uint32_t>(out, static_cast<uint32_t>(m.cols()));
  out->append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size());
}

}  // namespace

std::string EncodeCheckpoint(const Checkpoint& ck) {
  nlohmann::json header = {{"config", ToJson(ck.config)}, {"state", ck.state}};
  const std::string h = header.dump();
  std::string out = "LSCK";
  Put<uint32_t>(&out, kCheckpointVersion);
  Put<uint64_t>(&out, h.size());
  out += h;
  Put<uint64_t>(&out, ck.params.size() + ck.opt_m.size() + ck.opt_v.size());
  for (const auto& [n, m] : ck.params) PutTensor(&out, n, m);
  for (const auto& [n, m] : ck.opt_m) PutTensor(&out, "opt.m." + n, m);
  for (const auto& [n, m] : ck.opt_v) PutTensor(&out, "opt.v." + n, m);
  return out;
}

Checkpoint DecodeCheckpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.Bytes(4) != "LSCK") throw IoError("checkpoint: bad magic");
  const auto version = r.Get<uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const auto hlen = r.Get<uint64_t>();
  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(r.Bytes(hlen));
    ck.config = ModelConfigFromJson(header.at("config"));
    ck.state = header.value("state", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad header: ") + e.what());
  }
  const auto count = r.Get<uint64_t>();
  for (uint64_t i = 0; i < count; ++i) {
    const std::string name = r.Bytes(r.Get<uint32_t>());
    if (r.Get<uint8_t>() != 0) throw IoError("checkpoint: unsupported dtype for " + name);
    const auto rows = r.Get<uint32_t>();
    const auto cols = r.Get<uint32_t>();
    const std::string payload = r.Bytes(sizeof(double) * static_cast<size_t>(rows) * cols);
    MatrixD m(rows, cols);
    std::memcpy(m.data(), payload.data(), payload.size());
    if (name.rfind("opt.m.", 0) == 0)
      ck.opt_m[name.substr(6)] = std::move(m);
    else if (name.rfind("opt.v.", 0) == 0)
      ck.opt_v[name.substr(6)] = std::move(m);
    else
      ck.params[name] = std::move(m);
  }
  if (!r.done()) throw IoError("checkpoint: trailing bytes");
  ValidateTensors(ck.config, ck.params);
  return ck;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& ck) {
  const std::string bytes = EncodeCheckpoint(ck);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename " + tmp);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return DecodeCheckpoint(ss.str());
}

}  // namespace lseend
