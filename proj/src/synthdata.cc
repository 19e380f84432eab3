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

#include "orthros/synthdata.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "orthros/kvconfig.h"
#include "orthros/vocab.h"

namespace orthros {

namespace {

constexpr char kMagic[8] = {'O', 'S', 'T', 'D', 'A', 'T', 'A', '1'};
constexpr uint32_t kVersion = 1;

int downsampled(int u) {
  const int half = (u + 1) / 2;
  return (half + 1) / 2;
}

int adjacent_repeats(const std::vector<int>& seq) {
  int r = 0;
  for (size_t i = 1; i < seq.size(); ++i) r += seq[i] == seq[i - 1];
  return r;
}

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
  check(in.gcount() == 4, "corpus: truncated file reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

void write_ids(std::ostream& out, const std::vector<int>& ids) {
  write_u32(out, static_cast<uint32_t>(ids.size()));
  for (int v : ids) write_u32(out, static_cast<uint32_t>(v));
}

std::vector<int> read_ids(std::istream& in, const std::string& what) {
  const uint32_t n = read_u32(in, what + " length");
  check(n <= (1u << 24), "corpus: implausible sequence length");
  std::vector<int> ids(n);
  for (uint32_t i = 0; i < n; ++i)
    ids[i] = static_cast<int>(read_u32(in, what));
  return ids;
}

}  // namespace

void TaskSpec::validate() const {
  check(v_src_core >= 1, "task: v_src_core must be positive");
  check(synonyms >= 1, "task: synonyms must be >= 1");
  check(v_tgt_core >= v_src_core * synonyms,
        "task: v_tgt_core must cover v_src_core * synonyms lexicon slots");
  check(1 <= l_min && l_min <= l_max, "task: bad sentence length range");
  check(2 <= d_min && d_min <= d_max, "task: bad duration range");
  check(sigma >= 0.0, "task: sigma must be non-negative");
  check(reorder_window >= 1, "task: reorder_window must be >= 1");
  check(p_fertility2 >= 0.0 && p_fertility2 <= 1.0,
        "task: p_fertility2 must be a probability");
  check(p_silence >= 0.0 && p_silence <= 1.0,
        "task: p_silence must be a probability");
  check(input_dim >= 1, "task: input_dim must be positive");
}

std::string TaskSpec::serialize() const {
  std::ostringstream out;
  out << "v_src_core = " << v_src_core << "\n";
  out << "v_tgt_core = " << v_tgt_core << "\n";
  out << "l_min = " << l_min << "\n";
  out << "l_max = " << l_max << "\n";
  out << "d_min = " << d_min << "\n";
  out << "d_max = " << d_max << "\n";
  out << "sigma = " << format_double(sigma) << "\n";
  out << "reorder_window = " << reorder_window << "\n";
  out << "p_fertility2 = " << format_double(p_fertility2) << "\n";
  out << "synonyms = " << synonyms << "\n";
  out << "p_silence = " << format_double(p_silence) << "\n";
  out << "input_dim = " << input_dim << "\n";
  out << "seed = " << seed << "\n";
  return out.str();
}

TaskSpec TaskSpec::deserialize(const std::string& text) {
  KvConfig kv = KvConfig::from_string(text);
  TaskSpec s;
  s.v_src_core = static_cast<int>(kv.get_int("v_src_core", s.v_src_core));
  s.v_tgt_core = static_cast<int>(kv.get_int("v_tgt_core", s.v_tgt_core));
  s.l_min = static_cast<int>(kv.get_int("l_min", s.l_min));
  s.l_max = static_cast<int>(kv.get_int("l_max", s.l_max));
  s.d_min = static_cast<int>(kv.get_int("d_min", s.d_min));
  s.d_max = static_cast<int>(kv.get_int("d_max", s.d_max));
  s.sigma = kv.get_double("sigma", s.sigma);
  s.reorder_window =
      static_cast<int>(kv.get_int("reorder_window", s.reorder_window));
  s.p_fertility2 = kv.get_double("p_fertility2", s.p_fertility2);
  s.synonyms = static_cast<int>(kv.get_int("synonyms", s.synonyms));
  s.p_silence = kv.get_double("p_silence", s.p_silence);
  s.input_dim = static_cast<int>(kv.get_int("input_dim", s.input_dim));
  s.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(s.seed)));
  kv.require_consumed();
  s.validate();
  return s;
}

bool TaskSpec::operator==(const TaskSpec& o) const {
  return v_src_core == o.v_src_core && v_tgt_core == o.v_tgt_core &&
         l_min == o.l_min && l_max == o.l_max && d_min == o.d_min &&
         d_max == o.d_max && sigma == o.sigma &&
         reorder_window == o.reorder_window &&
         p_fertility2 == o.p_fertility2 && synonyms == o.synonyms &&
         p_silence == o.p_silence && input_dim == o.input_dim &&
         seed == o.seed;
}

Tensor<float> token_prototypes(const TaskSpec& spec) {
  Rng r = Rng(spec.seed).fork(0x9e01);
  Tensor<float> protos(spec.v_src_core, spec.input_dim);
  for (int64_t i = 0; i < protos.numel(); ++i)
    protos[i] = static_cast<float>(r.normal());
  return protos;
}

Triplet generate_triplet(const TaskSpec& spec, Rng& rng) {
  spec.validate();
  const Tensor<float> protos = token_prototypes(spec);

  // Draw order is part of the format: length, token ids, layout
  // (silences interleaved with durations), frame noise, translation.
  const int l = static_cast<int>(rng.uniform_int(spec.l_min, spec.l_max));
  std::vector<int> cores(l);
  for (int& c : cores)
    c = static_cast<int>(rng.uniform_int(0, spec.v_src_core - 1));

  // Segment layout: proto index per segment, -1 for silence.
  std::vector<int> seg_token;
  std::vector<int> seg_dur;
  Triplet out;
  out.durations.reserve(l);
  for (int i = 0; i <= l; ++i) {
    if (rng.bernoulli(spec.p_silence)) {
      seg_token.push_back(-1);
      seg_dur.push_back(static_cast<int>(rng.uniform_int(1, spec.d_max)));
    }
    if (i == l) break;
    seg_token.push_back(cores[i]);
    const int d = static_cast<int>(rng.uniform_int(spec.d_min, spec.d_max));
    seg_dur.push_back(d);
    out.durations.push_back(d);
  }

  out.transcription.reserve(l);
  for (int c : cores) out.transcription.push_back(kSrcCoreBase + c);

  // Pad with trailing silence until the downsampled length can carry the
  // CTC target.
  int u = 0;
  for (int d : seg_dur) u += d;
  const int needed =
      std::max(4, 4 * (l + adjacent_repeats(out.transcription)) - 3);
  if (u < needed) {
    seg_token.push_back(-1);
    seg_dur.push_back(needed - u);
    u = needed;
  }

  out.frames = Tensor<float>(u, spec.input_dim);
  int row = 0;
  for (size_t s = 0; s < seg_token.size(); ++s) {
    for (int f = 0; f < seg_dur[s]; ++f, ++row) {
      for (int j = 0; j < spec.input_dim; ++j) {
        const float base =
            seg_token[s] < 0 ? 0.0f : protos.at(seg_token[s], j);
        out.frames.at(row, j) =
            base + static_cast<float>(spec.sigma * rng.normal());
      }
      if (seg_token[s] < 0) ++out.silence_frames;
    }
  }

  // Translation: synonym choice and fertility per source token, then
  // deterministic adjacent swaps inside fixed windows.
  for (int c : cores) {
    const int syn = static_cast<int>(rng.uniform_int(0, spec.synonyms - 1));
    const int fert = rng.bernoulli(spec.p_fertility2) ? 2 : 1;
    const int tok = kTgtCoreBase + c * spec.synonyms + syn;
    for (int f = 0; f < fert; ++f) out.translation.push_back(tok);
  }
  const int w = spec.reorder_window;
  const int n = static_cast<int>(out.translation.size());
  for (int start = 0; start < n; start += w)
    for (int k = start; k + 1 < std::min(start + w, n); k += 2)
      std::swap(out.translation[k], out.translation[k + 1]);

  check(downsampled(u) >=
            l + adjacent_repeats(out.transcription),
        "generate_triplet: infeasible layout");
  return out;
}

Tensor<float> augment_frames(const Tensor<float>& frames, Rng& rng,
                             int time_mask_len, int n_masks) {
  check(frames.rank() == 2, "augment: rank-2 frames required");
  check(time_mask_len >= 0 && n_masks >= 0, "augment: negative argument");
  check(time_mask_len < frames.rows(), "augment: mask longer than utterance");
  Tensor<float> out = frames;
  for (int m = 0; m < n_masks; ++m) {
    const int start = static_cast<int>(
        rng.uniform_int(0, frames.rows() - time_mask_len));
    for (int i = start; i < start + time_mask_len; ++i)
      for (int j = 0; j < out.cols(); ++j) out.at(i, j) = 0.0f;
  }
  return out;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "corpus: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  const std::string spec_text = corpus.spec.serialize();
  write_u32(out, static_cast<uint32_t>(spec_text.size()));
  out.write(spec_text.data(),
            static_cast<std::streamsize>(spec_text.size()));
  write_u32(out, static_cast<uint32_t>(corpus.items.size()));
  for (const Triplet& it : corpus.items) {
    check(it.frames.rank() == 2 && it.frames.cols() == corpus.spec.input_dim,
          "corpus: frame width does not match the task spec");
    write_u32(out, static_cast<uint32_t>(it.frames.rows()));
    write_u32(out, static_cast<uint32_t>(it.frames.cols()));
    for (int64_t i = 0; i < it.frames.numel(); ++i) {
      const float f = it.frames[i];
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      write_u32(out, bits);
    }
    write_ids(out, it.transcription);
    write_ids(out, it.translation);
  }
  check(out.good(), "corpus: write failed for " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "corpus: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  check(in.gcount() == 8 && std::memcmp(magic, kMagic, 8) == 0,
        "corpus: bad magic");
  check(read_u32(in, "version") == kVersion, "corpus: unsupported version");
  const uint32_t spec_len = read_u32(in, "spec length");
  check(spec_len <= (1u << 20), "corpus: implausible spec length");
  std::string spec_text(spec_len, '\0');
  in.read(spec_text.data(), spec_len);
  check(in.gcount() == static_cast<std::streamsize>(spec_len),
        "corpus: truncated file reading spec");
  Corpus corpus;
  corpus.spec = TaskSpec::deserialize(spec_text);
  const uint32_t count = read_u32(in, "record count");
  corpus.items.reserve(count);
  for (uint32_t r = 0; r < count; ++r) {
    Triplet it;
    const uint32_t rows = read_u32(in, "frame rows");
    const uint32_t cols = read_u32(in, "frame cols");
    check(rows >= 1 && rows <= (1u << 22) &&
              cols == static_cast<uint32_t>(corpus.spec.input_dim),
          "corpus: bad frame shape");
    it.frames = Tensor<float>(static_cast<int>(rows), static_cast<int>(cols));
    for (int64_t i = 0; i < it.frames.numel(); ++i) {
      const uint32_t bits = read_u32(in, "frames");
      std::memcpy(&it.frames[i], &bits, 4);
    }
    it.transcription = read_ids(in, "transcription");
    it.translation = read_ids(in, "translation");
    corpus.items.push_back(std::move(it));
  }
  in.peek();
  check(in.eof(), "corpus: trailing bytes after last record");
  return corpus;
}

CorpusSplits build_corpus(const TaskSpec& spec, int n_train, int n_dev,
                          int n_test, const std::string& out_dir) {
  spec.validate();
  check(n_train >= 1 && n_dev >= 1 && n_test >= 1,
        "build_corpus: split sizes must be positive");
  Rng rng = Rng(spec.seed).fork(0xC0);
  CorpusSplits splits;
  splits.train.spec = splits.dev.spec = splits.test.spec = spec;
  for (int i = 0; i < n_train; ++i)
    splits.train.items.push_back(generate_triplet(spec, rng));
  for (int i = 0; i < n_dev; ++i)
    splits.dev.items.push_back(generate_triplet(spec, rng));
  for (int i = 0; i < n_test; ++i)
    splits.test.items.push_back(generate_triplet(spec, rng));
  if (!out_dir.empty()) {
    save_corpus(out_dir + "/train.bin", splits.train);
    save_corpus(out_dir + "/dev.bin", splits.dev);
    save_corpus(out_dir + "/test.bin", splits.test);
  }
  return splits;
}

}  // namespace orthros
