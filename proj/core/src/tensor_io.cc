//
// Copyright 2026 The PCM Authors
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
//

#include "pcm/tensor_io.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pcm {
namespace {

constexpr char kMagic[8] = {'P', 'C', 'M', 'T', 'N', 'S', 'R', '1'};

}  // namespace

void WriteTensorFile(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const ag::Mat*>>& tensors) {
  nlohmann::json header;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : tensors) {
    header["tensors"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m->size());
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : tensors) {
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("short write to " + path);
}

TensorFile ReadTensorFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error(path + ": not a tensor file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(path + ": truncated header");
  const nlohmann::json header = nlohmann::json::parse(text);
  const std::streampos data_start = in.tellg();

  TensorFile file;
  file.meta = header.value("meta", nlohmann::json::object());
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    ag::Mat m(rows, cols);
    in.seekg(data_start + static_cast<std::streamoff>(offset * sizeof(double)));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated tensor " + t.at("name").get<std::string>());
    file.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
  }
  return file;
}

}  // namespace pcm
