// Copyright 2026 Orthros Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ORTHROS_CHECKPOINT_H_
#define ORTHROS_CHECKPOINT_H_

#include <string>
#include <vector>

#include "orthros/model.h"

namespace orthros {

// Binary container: magic "ORTHROS1", u32 format version, length-prefixed
// config text, then one record per parameter (u32 name length, name bytes,
// u32 rank, u32 dims, raw little-endian f32 data). Round trips bit-exact.
void save_checkpoint(const std::string& path, const OrthrosModel<float>& model);
OrthrosModel<float> load_checkpoint(const std::string& path);

// Arithmetic mean of every parameter across checkpoints sharing one config.
OrthrosModel<float> average_checkpoints(const std::vector<std::string>& paths);

}  // namespace orthros

#endif  // ORTHROS_CHECKPOINT_H_
