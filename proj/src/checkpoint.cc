// src/checkpoint.cc

// Copyright 2026  mtcascade authors

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

#include "mtcascade/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mtcascade {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void AppendPod(std::string *buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf->append(bytes, sizeof(T));
}

template <typename T>
T ReadPod(const std::string &buf, size_t *pos, const std::string &path) {
  if (*pos + sizeof(T) > buf.size())
    throw IoError("checkpoint " + path + ": truncated file");
  T v;
  std::memcpy(&v, buf.data() + *pos, sizeof(T));
  *pos += sizeof(T);
  return v;
}

}  // namespace

void SaveCheckpoint(const ParamStore &store, const nlohmann::json &wiring,
                    const std::string &path) {
  nlohmann::json header;
  header["wiring"] = wiring;
  header["tensors"] = nlohmann::json::array();
  for (size_t i = 0; i < store.size(); ++i) {
    const Parameter &p = store.at(i);
    if (!p.value.allFinite())
      throw DataError("refusing to save non-finite tensor '" + p.name + "'");
    header["tensors"].push_back({{"name", p.name},
                                 {"shape", {p.value.rows(), p.value.cols()}},
                                 {"dtype", "float32"}});
  }
  const std::string text = header.dump();
  std::string buf(kCheckpointMagic, 4);
  AppendPod<uint32_t>(&buf, kCheckpointVersion);
  AppendPod<uint64_t>(&buf, text.size());
  buf += text;
  for (size_t i = 0; i < store.size(); ++i) {
    const Matrix &m = store.at(i).value;
    for (Eigen::Index k = 0; k < m.size(); ++k)
      AppendPod<float>(&buf, static_cast<float>(m.data()[k]));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed for " + path);
}

Checkpoint ReadCheckpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0)
    throw IoError("checkpoint " + path + ": bad magic");
  size_t pos = 4;
  const uint32_t version = ReadPod<uint32_t>(buf, &pos, path);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint " + path + ": unsupported version " +
                  std::to_string(version));
  const uint64_t header_bytes = ReadPod<uint64_t>(buf, &pos, path);
  if (pos + header_bytes > buf.size())
    throw IoError("checkpoint " + path + ": truncated file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(pos, header_bytes));
  } catch (const nlohmann::json::exception &e) {
    throw IoError("checkpoint " + path + ": corrupt header (" + e.what() + ")");
  }
  pos += header_bytes;
  Checkpoint ckpt;
  ckpt.wiring = header.value("wiring", nlohmann::json::object());
  for (const auto &t : header.at("tensors")) {
    if (t.value("dtype", "") != "float32")
      throw IoError("checkpoint " + path + ": unsupported dtype");
    const int64_t rows = t.at("shape").at(0), cols = t.at("shape").at(1);
    CheckpointTensor ct;
    ct.name = t.at("name").get<std::string>();
    ct.value.resize(rows, cols);
    const size_t n = static_cast<size_t>(rows * cols);
    if (pos + n * sizeof(float) > buf.size())
      throw IoError("checkpoint " + path + ": truncated file");
    for (size_t k = 0; k < n; ++k)
      ct.value.data()[k] = static_cast<Real>(ReadPod<float>(buf, &pos, path));
    ckpt.tensors.push_back(std::move(ct));
  }
  if (pos != buf.size())
    throw IoError("checkpoint " + path + ": trailing bytes after tensor data");
  return ckpt;
}

size_t LoadTensors(const Checkpoint &ckpt, ParamStore *store,
                   std::string_view prefix, bool strict) {
  size_t loaded = 0;
  for (const auto &t : ckpt.tensors) {
    if (t.name.compare(0, prefix.size(), prefix) != 0) continue;
    Parameter *p = store->Find(t.name);
    if (!p) {
      if (strict) throw GeometryError("unknown tensor name '" + t.name + "'");
      continue;
    }
    if (p->value.rows() != t.value.rows() || p->value.cols() != t.value.cols())
      throw GeometryError("tensor '" + t.name + "' has shape " +
                          ShapeString(t.value) + ", model expects " +
                          ShapeString(p->value));
    p->value = t.value;
    ++loaded;
  }
  return loaded;
}

}  // namespace mtcascade
