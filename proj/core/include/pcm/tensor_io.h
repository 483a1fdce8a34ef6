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

#ifndef PCM_TENSOR_IO_H_
#define PCM_TENSOR_IO_H_

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/autograd.h"

namespace pcm {

// Named-tensor container file:
//   8-byte magic "PCMTNSR1", uint64 little-endian header length, a JSON
//   header {"meta": ..., "tensors": [{"name", "rows", "cols", "offset"}]},
//   then all tensors as little-endian float64, row-major, at `offset`
//   doubles from the end of the header.
struct TensorFile {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, ag::Mat> tensors;
};

void WriteTensorFile(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const ag::Mat*>>& tensors);
TensorFile ReadTensorFile(const std::string& path);

}  // namespace pcm

#endif  // PCM_TENSOR_IO_H_
