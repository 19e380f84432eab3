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

#include "orthros/losses.h"

#include <algorithm>

#include "orthros/vocab.h"

namespace orthros {

void TrainConfig::validate() const {
  check(lambda_ar >= 0.0 && lambda_lp >= 0.0 && lambda_asr >= 0.0,
        "config: negative loss weight");
  check(lambda_asr < 1.0, "config: lambda_asr must be < 1");
  check(label_smoothing >= 0.0 && label_smoothing < 1.0,
        "config: label_smoothing must be in [0, 1)");
  check(batch_size >= 1, "config: batch_size must be positive");
  check(accum_steps >= 1, "config: accum_steps must be positive");
  check(max_steps >= 0, "config: max_steps must be non-negative");
  check(keep_checkpoints >= 1, "config: keep_checkpoints must be positive");
  check(warmup_steps >= 1, "config: warmup_steps must be positive");
  check(lr_constant > 0.0, "config: lr_constant must be positive");
}

MaskedTarget sample_mask(const std::vector<int>& y, Rng& rng) {
  const int n = static_cast<int>(y.size());
  check(n >= 1, "sample_mask: empty sequence");
  const int k = static_cast<int>(rng.uniform_int(1, n));
  // Partial Fisher-Yates: the first k slots of a shuffled index vector are
  // a uniform k-subset.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(0, n - 1 - i));
    std::swap(idx[i], idx[j]);
  }
  MaskedTarget mt;
  mt.y = y;
  mt.y_obs = y;
  mt.mask.assign(n, 0);
  for (int i = 0; i < k; ++i) {
    mt.mask[idx[i]] = 1;
    mt.y_obs[idx[i]] = kMask;
  }
  return mt;
}

template <typename S>
int cmlm_loss_on_logits(Tape<S>& t, int logits, const MaskedTarget& mt) {
  const int n = static_cast<int>(mt.y.size());
  check(n >= 1 && mt.y_obs.size() == mt.y.size() &&
            mt.mask.size() == mt.y.size(),
        "cmlm_loss: inconsistent masked target");
  check(t.val(logits).rank() == 2 && t.val(logits).rows() == n,
        "cmlm_loss: logits row count mismatch");
  std::vector<int> targets(n);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    targets[i] = mt.mask[i] ? mt.y[i] : -1;
    any = any || mt.mask[i];
  }
  check(any, "cmlm_loss: no masked positions");
  return t.cross_entropy(logits, targets, /*ignore_index=*/-1,
                         /*smoothing=*/0.0);
}

template <typename S>
int cmlm_loss(Tape<S>& t, OrthrosModel<S>& m, const EncodeOut& enc,
              const MaskedTarget& mt, Rng* drop) {
  return cmlm_loss_on_logits(t, m.nar_logits_t(t, enc, mt.y_obs, drop), mt);
}

template <typename S>
int smart_loss(Tape<S>& t, OrthrosModel<S>& m, const EncodeOut& enc,
               const std::vector<int>& y, Rng& mask_rng, Rng* drop,
               const SmartOpts& opts) {
  const int n = static_cast<int>(y.size());
  check(n >= 1, "smart_loss: empty target");
  const bool in_graph = opts.pass1_in_graph || opts.pass1_loss;

  // Pass 1: predict every position from a masked ground-truth input. The
  // argmax is a hard boundary — only token ids cross it — so the pass can
  // run off-tape without changing any gradient.
  const MaskedTarget mt1 = sample_mask(y, mask_rng);
  std::vector<int> yhat(n);
  int logits1 = -1;
  if (in_graph) {
    logits1 = m.nar_logits_t(t, enc, mt1.y_obs, /*drop=*/nullptr);
    for (int i = 0; i < n; ++i) yhat[i] = argmax_row(t.val(logits1), i);
  } else {
    Tape<S> scratch;
    const EncodeOut enc1{scratch.leaf(t.val(enc.node)), enc.u_valid};
    const int lg = m.nar_logits_t(scratch, enc1, mt1.y_obs, /*drop=*/nullptr);
    for (int i = 0; i < n; ++i) yhat[i] = argmax_row(scratch.val(lg), i);
  }

  // Re-mask the predictions with a fresh pattern, then score pass 2
  // against the ground truth at all positions.
  const MaskedTarget mt2 = sample_mask(yhat, mask_rng);
  const int logits2 = m.nar_logits_t(t, enc, mt2.y_obs, drop);
  int loss = t.cross_entropy(logits2, y, /*ignore_index=*/-1,
                             /*smoothing=*/0.0);
  if (opts.pass1_loss)
    loss = t.add(loss, cmlm_loss_on_logits(t, logits1, mt1));
  return loss;
}

template <typename S>
int ar_loss(Tape<S>& t, OrthrosModel<S>& m, const EncodeOut& enc,
            const std::vector<int>& y, double eps_ls, Rng* drop) {
  check(!y.empty(), "ar_loss: empty target");
  std::vector<int> prefix;
  prefix.reserve(y.size() + 1);
  prefix.push_back(kBos);
  prefix.insert(prefix.end(), y.begin(), y.end());
  std::vector<int> gold(y);
  gold.push_back(kEos);
  const int logits = m.ar_logits_t(t, enc, prefix, drop);
  return t.cross_entropy(logits, gold, /*ignore_index=*/-1, eps_ls);
}

template <typename S>
int length_loss(Tape<S>& t, int length_logits, int n) {
  const Tensor<S>& v = t.val(length_logits);
  check(v.rank() == 2 && v.rows() == 1,
        "length_loss: logits must be a single row");
  check(n >= 1 && n <= v.cols(), "length_loss: length out of range");
  return t.cross_entropy(length_logits, {n - 1}, /*ignore_index=*/-1,
                         /*smoothing=*/0.0);
}

template <typename S>
int ctc_loss(Tape<S>& t, int ctc_logits, const std::vector<int>& y_src) {
  return t.ctc(ctc_logits, y_src, kBlank);
}

template <typename S>
int total_loss(Tape<S>& t, const LossTerms& terms, const TrainConfig& cfg) {
  check(cfg.lambda_ar >= 0.0 && cfg.lambda_lp >= 0.0 && cfg.lambda_asr >= 0.0,
        "total_loss: negative weight");
  check(cfg.lambda_asr < 1.0, "total_loss: lambda_asr must be < 1");
  int node = -1;
  auto take = [&](int term, double w, const char* missing) {
    if (w == 0.0) return;
    check(term >= 0, missing);
    const int scaled = w == 1.0 ? term : t.scale(term, static_cast<S>(w));
    node = node < 0 ? scaled : t.add(node, scaled);
  };
  take(terms.cmlm, 1.0 - cfg.lambda_asr, "total_loss: missing cmlm term");
  take(terms.ar, cfg.lambda_ar, "total_loss: missing ar term");
  take(terms.lp, cfg.lambda_lp, "total_loss: missing length term");
  take(terms.asr, cfg.lambda_asr, "total_loss: missing asr term");
  return node;
}

#define ORTHROS_INSTANTIATE(S)                                              \
  template int cmlm_loss_on_logits<S>(Tape<S>&, int, const MaskedTarget&);  \
  template int cmlm_loss<S>(Tape<S>&, OrthrosModel<S>&, const EncodeOut&,   \
                            const MaskedTarget&, Rng*);                     \
  template int smart_loss<S>(Tape<S>&, OrthrosModel<S>&, const EncodeOut&,  \
                             const std::vector<int>&, Rng&, Rng*,           \
                             const SmartOpts&);                             \
  template int ar_loss<S>(Tape<S>&, OrthrosModel<S>&, const EncodeOut&,     \
                          const std::vector<int>&, double, Rng*);           \
  template int length_loss<S>(Tape<S>&, int, int);                          \
  template int ctc_loss<S>(Tape<S>&, int, const std::vector<int>&);        \
  template int total_loss<S>(Tape<S>&, const LossTerms&, const TrainConfig&);

ORTHROS_INSTANTIATE(float)
ORTHROS_INSTANTIATE(double)
#undef ORTHROS_INSTANTIATE

}  // namespace orthros
