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

#ifndef ORTHROS_SYNTHDATA_H_
#define ORTHROS_SYNTHDATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "orthros/common.h"
#include "orthros/tensor.h"

namespace orthros {

// Generator controls for the synthetic speech-like transduction task.
// Source sentences are uniform over the core source vocabulary; each token
// emits a noisy prototype segment; the translation is a lexicon image with
// per-word synonym choice (the multimodality knob), optional fertility-2
// doubling, and deterministic in-window reordering.
struct TaskSpec {
  int v_src_core = 20;
  int v_tgt_core = 40;  // must cover v_src_core * synonyms lexicon slots
  int l_min = 3;
  int l_max = 10;
  int d_min = 6;  // frames per token; >= 2 keeps CTC feasible downstream
  int d_max = 9;
  double sigma = 0.1;       // frame noise
  int reorder_window = 2;   // deterministic adjacent swaps inside windows
  double p_fertility2 = 0.0;
  int synonyms = 2;         // s; > 1 makes the corpus multimodal
  double p_silence = 0.1;
  int input_dim = 16;
  uint64_t seed = 1;

  void validate() const;
  std::string serialize() const;
  static TaskSpec deserialize(const std::string& text);
  bool operator==(const TaskSpec& o) const;
};

// One example: frame matrix, source transcription, target translation.
// durations/silence_frames describe the generated layout (not persisted).
struct Triplet {
  Tensor<float> frames;            // [U, input_dim]
  std::vector<int> transcription;  // source-vocabulary ids
  std::vector<int> translation;    // target-vocabulary ids
  std::vector<int> durations;      // per source token, frames emitted
  int silence_frames = 0;          // total silence rows, padding included
};

// Fixed per-task token prototypes (derived from spec.seed, not from the
// sample stream).
Tensor<float> token_prototypes(const TaskSpec& spec);

Triplet generate_triplet(const TaskSpec& spec, Rng& rng);

// Zeroes n_masks random contiguous row spans of the given length.
Tensor<float> augment_frames(const Tensor<float>& frames, Rng& rng,
                             int time_mask_len, int n_masks);

struct Corpus {
  TaskSpec spec;
  std::vector<Triplet> items;
};

void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

struct CorpusSplits {
  Corpus train;
  Corpus dev;
  Corpus test;
};

// Draws train/dev/test consecutively from one seeded stream (disjoint by
// sample index). When out_dir is non-empty, persists train.bin / dev.bin /
// test.bin inside it.
CorpusSplits build_corpus(const TaskSpec& spec, int n_train, int n_dev,
                          int n_test, const std::string& out_dir = "");

}  // namespace orthros

#endif  // ORTHROS_SYNTHDATA_H_
