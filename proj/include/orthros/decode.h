// Copyright 2026 Orthros Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Inference: Mask-Predict iterative refinement over the non-causal decoder,
// length-candidate generation (classifier or CTC-scaled), parallel causal
// re-scoring of candidates, causal beam search, and CTC greedy decoding.

#ifndef ORTHROS_DECODE_H_
#define ORTHROS_DECODE_H_

#include <string>
#include <vector>

#include "orthros/model.h"
#include "orthros/tensor.h"

namespace orthros {

// How to turn one utterance into one hypothesis.
struct DecodeConfig {
  int iterations = 10;              // T: refinement passes per length
  int length_beam = 9;              // l: number of length candidates
  int beam = 4;                     // b: causal beam width (mode "ar")
  bool use_ar_selection = false;    // re-score candidates with the causal head
  bool use_smart_updates = false;   // update all changed positions, not just
                                    // the re-masked ones
  std::string length_mode = "classifier";  // "classifier" | "ctc_scale"
  double alpha = 1.0;               // length scale for ctc_scale
  int max_len = 64;                 // token budget for causal decoding
  std::string mode = "nar";         // "nar" | "ar" | "ctc"

  void validate() const;
};

// A finalized translation. `tokens` holds core target ids only; confidences
// are per-token posteriors in (0, 1]; nar_score / ar_score are mean
// log-probabilities (ar_score averages over length+1 terms, EOS included).
struct Hypothesis {
  std::vector<int> tokens;
  std::vector<double> confidences;
  double nar_score = 0.0;
  double ar_score = 0.0;
  bool has_ar_score = false;
  bool truncated = false;

  int length() const { return static_cast<int>(tokens.size()); }
};

// Forward-pass counters for verifying decode cost contracts.
struct DecodeStats {
  int encoder_passes = 0;
  int nar_passes = 0;
  int ar_passes = 0;
};

// Number of positions to mask before refinement pass t (0-based): all of
// them at t=0, then floor(n_hat * (T - t) / T).
int mask_schedule(int n_hat, int iterations, int t);

// Indices of the k lowest confidences; ties keep the lower index. Returned
// ascending.
std::vector<int> select_masked_positions(const std::vector<double>& conf,
                                         int k);

// Iterative refinement at a fixed length: exactly `iterations` non-causal
// passes over shared encoder states. Argmax is restricted to core target
// tokens, so the result never contains specials. When changed_fraction is
// given, one entry per iteration records the fraction of positions whose
// committed token changed (1.0 at t=0, where everything leaves MASK).
Hypothesis mask_predict(OrthrosModel<float>& m, const EncStates<float>& enc,
                        int n_hat, int iterations, bool use_smart_updates,
                        DecodeStats* stats = nullptr,
                        std::vector<double>* changed_fraction = nullptr);

// Top-l lengths by classifier probability; ties prefer the smaller length.
// length_logits is the [1, n_max] head output.
std::vector<int> length_candidates(const Tensor<float>& length_logits, int l);

// Per-frame argmax, collapse adjacent repeats, drop BLANK. Returns ids in
// the CTC head's vocabulary.
std::vector<int> ctc_greedy(const Tensor<float>& ctc_logits);

// Length fan-out around floor(alpha * |ctc greedy output|): center, then
// -1, +1, -2, +2, ... clamped to [1, n_max] and deduplicated, until l
// distinct lengths exist. An empty greedy output centers at 1.
std::vector<int> ctc_length_estimate(const Tensor<float>& ctc_logits,
                                     double alpha, int l, int n_max);

// One teacher-forced causal pass per candidate over shared encoder states;
// ar_score = mean log-prob of tokens plus EOS over length+1 terms. Returns
// the best candidate (ties prefer the smaller length) with ar_score set.
Hypothesis select_candidate_ar(OrthrosModel<float>& m,
                               const EncStates<float>& enc,
                               const std::vector<Hypothesis>& candidates,
                               DecodeStats* stats = nullptr);

// Best candidate by nar_score; ties prefer the smaller length.
Hypothesis select_candidate_nar(const std::vector<Hypothesis>& candidates);

// Causal beam search with length-normalized scores. Finished items keep
// their slot unexpanded; ties break by token sequence. If nothing reaches
// EOS within max_len tokens, the best unfinished item is returned with
// `truncated` set. b=1 is exact greedy decoding.
Hypothesis beam_search_ar(OrthrosModel<float>& m, const EncStates<float>& enc,
                          int b, int max_len, DecodeStats* stats = nullptr);

// Full pipeline for one utterance: one encoder pass, then the configured
// decode mode. Mode "nar" costs exactly l*T non-causal passes plus l causal
// passes when AR selection is on.
Hypothesis translate(OrthrosModel<float>& m, const Tensor<float>& frames,
                     const DecodeConfig& cfg, DecodeStats* stats = nullptr);

}  // namespace orthros

#endif  // ORTHROS_DECODE_H_
