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

#ifndef ORTHROS_LOSSES_H_
#define ORTHROS_LOSSES_H_

#include <cstdint>
#include <vector>

#include "orthros/model.h"
#include "orthros/tape.h"

namespace orthros {

// Training hyperparameters. lambda_asr must stay below 1 so the CMLM term
// keeps positive weight 1 - lambda_asr in the joint objective.
struct TrainConfig {
  double lambda_ar = 0.3;
  double lambda_lp = 0.1;
  double lambda_asr = 0.3;
  bool use_smart = false;
  bool use_seq_kd = false;
  double label_smoothing = 0.1;  // causal decoder CE only; CMLM CE is plain
  int batch_size = 8;            // sequences per optimizer step
  int accum_steps = 1;           // gradient accumulation multiplier
  int max_steps = 1000;
  uint64_t seed = 1;
  int keep_checkpoints = 5;
  int warmup_steps = 25000;      // Noam ramp length
  double lr_constant = 5.0;      // Noam scale

  void validate() const;
};

// One target row with a sampled mask pattern applied.
struct MaskedTarget {
  std::vector<int> y_obs;   // y with MASK substituted at masked positions
  std::vector<char> mask;   // 1 where masked
  std::vector<int> y;       // ground truth
};

// Masks k ~ U(1, N) distinct positions chosen uniformly without
// replacement.
MaskedTarget sample_mask(const std::vector<int>& y, Rng& rng);

// Mean CE over masked positions only; observed positions carry no loss.
template <typename S>
int cmlm_loss_on_logits(Tape<S>& t, int logits, const MaskedTarget& mt);

template <typename S>
int cmlm_loss(Tape<S>& t, OrthrosModel<S>& m, const EncodeOut& enc,
              const MaskedTarget& mt, Rng* drop);

struct SmartOpts {
  // Run pass 1 on the caller's tape instead of a scratch tape. Gradients
  // are identical either way — nothing differentiable crosses the argmax —
  // so this is only exercised to assert that equivalence.
  bool pass1_in_graph = false;
  // Ablation: add the pass-1 masked CE to the returned loss (forces
  // pass1_in_graph).
  bool pass1_loss = false;
};

// Two-pass loss: pass 1 predicts from a masked input, the argmax
// predictions are re-masked with a fresh pattern, and pass 2 is scored
// against the ground truth at every position.
template <typename S>
int smart_loss(Tape<S>& t, OrthrosModel<S>& m, const EncodeOut& enc,
               const std::vector<int>& y, Rng& mask_rng, Rng* drop,
               const SmartOpts& opts = {});

// Teacher-forced CE of BOS-prefixed y predicting y·EOS, mean over the
// N + 1 positions, label smoothing eps_ls.
template <typename S>
int ar_loss(Tape<S>& t, OrthrosModel<S>& m, const EncodeOut& enc,
            const std::vector<int>& y, double eps_ls, Rng* drop);

// CE of the length classifier against true length n (class index n - 1).
template <typename S>
int length_loss(Tape<S>& t, int length_logits, int n);

// CTC negative log-likelihood of the transcription under per-frame logits.
template <typename S>
int ctc_loss(Tape<S>& t, int ctc_logits, const std::vector<int>& y_src);

// Component loss nodes for the joint objective; -1 marks an absent term
// (allowed only under zero weight).
struct LossTerms {
  int cmlm = -1;
  int ar = -1;
  int lp = -1;
  int asr = -1;
};

// (1 - lambda_asr)·L_cmlm + lambda_ar·L_ar + lambda_lp·L_lp
// + lambda_asr·L_asr. Terms with weight exactly 1 pass through unscaled so
// zeroing every lambda returns the CMLM node itself.
template <typename S>
int total_loss(Tape<S>& t, const LossTerms& terms, const TrainConfig& cfg);

}  // namespace orthros

#endif  // ORTHROS_LOSSES_H_
