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

#include "orthros/checkpoint.h"

#include <cstring>
#include <fstream>

namespace orthros {

namespace {

constexpr char kMagic[8] = {'O', 'R', 'T', 'H', 'R', 'O', 'S', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  check(in.gcount() == 4, "checkpoint: truncated file reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, const float* data, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    write_u32(out, bits);
  }
}

void read_f32(std::istream& in, float* data, size_t n,
              const std::string& what) {
  for (size_t i = 0; i < n; ++i) {
    const uint32_t bits = read_u32(in, what);
    std::memcpy(&data[i], &bits, 4);
  }
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const OrthrosModel<float>& model) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  const std::string cfg = model.config().serialize();
  write_u32(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  for (const Parameter<float>& prm : model.params()) {
    write_u32(out, static_cast<uint32_t>(prm.name.size()));
    out.write(prm.name.data(), static_cast<std::streamsize>(prm.name.size()));
    write_u32(out, static_cast<uint32_t>(prm.value.rank()));
    for (int d : prm.value.shape) write_u32(out, static_cast<uint32_t>(d));
    write_f32(out, prm.value.data.data(), prm.value.data.size());
  }
  check(out.good(), "checkpoint: write failed for " + path);
}

OrthrosModel<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  check(in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0,
        "checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(in, "version");
  check(version == kVersion, "checkpoint: unsupported version " +
                                 std::to_string(version) + " in " + path);
  const uint32_t cfg_len = read_u32(in, "config length");
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  check(in.gcount() == static_cast<std::streamsize>(cfg_len),
        "checkpoint: truncated file reading config");

  OrthrosModel<float> model(ModelConfig::deserialize(cfg_text));
  std::vector<bool> seen(model.params().size(), false);
  while (true) {
    unsigned char peek[4];
    in.read(reinterpret_cast<char*>(peek), 4);
    if (in.gcount() == 0) break;
    check(in.gcount() == 4, "checkpoint: truncated file reading record");
    const uint32_t name_len = static_cast<uint32_t>(peek[0]) |
                              (static_cast<uint32_t>(peek[1]) << 8) |
                              (static_cast<uint32_t>(peek[2]) << 16) |
                              (static_cast<uint32_t>(peek[3]) << 24);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    check(in.gcount() == static_cast<std::streamsize>(name_len),
          "checkpoint: truncated file reading name");
    Parameter<float>* prm = model.find(name);
    check(prm != nullptr, "checkpoint: unexpected parameter " + name);
    const uint32_t rank = read_u32(in, "rank");
    check(rank == static_cast<uint32_t>(prm->value.rank()),
          "checkpoint: rank mismatch for " + name);
    for (uint32_t d = 0; d < rank; ++d) {
      const uint32_t dim = read_u32(in, "dims");
      check(dim == static_cast<uint32_t>(prm->value.shape[d]),
            "checkpoint: shape mismatch for " + name);
    }
    read_f32(in, prm->value.data.data(), prm->value.data.size(), name);
    const size_t idx = static_cast<size_t>(prm - model.params().data());
    check(!seen[idx], "checkpoint: duplicate parameter " + name);
    seen[idx] = true;
  }
  for (size_t i = 0; i < seen.size(); ++i)
    check(seen[i],
          "checkpoint: missing parameter " + model.params()[i].name);
  return model;
}

OrthrosModel<float> average_checkpoints(const std::vector<std::string>& paths) {
  check(!paths.empty(), "average: no checkpoints given");
  OrthrosModel<float> mean = load_checkpoint(paths[0]);
  std::vector<std::vector<double>> acc(mean.params().size());
  for (size_t i = 0; i < mean.params().size(); ++i) {
    const Tensor<float>& v = mean.params()[i].value;
    acc[i].assign(v.data.begin(), v.data.end());
  }
  for (size_t k = 1; k < paths.size(); ++k) {
    OrthrosModel<float> next = load_checkpoint(paths[k]);
    check(next.config() == mean.config(),
          "average: config mismatch in " + paths[k]);
    for (size_t i = 0; i < acc.size(); ++i) {
      check(next.params()[i].name == mean.params()[i].name,
            "average: parameter order mismatch in " + paths[k]);
      const Tensor<float>& v = next.params()[i].value;
      for (size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += v.data[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(paths.size());
  for (size_t i = 0; i < acc.size(); ++i)
    for (size_t j = 0; j < acc[i].size(); ++j)
      mean.params()[i].value.data[j] = static_cast<float>(acc[i][j] * inv);
  return mean;
}

}  // namespace orthros
