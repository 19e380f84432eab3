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

#ifndef ORTHROS_MODEL_H_
#define ORTHROS_MODEL_H_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "orthros/kvconfig.h"
#include "orthros/tape.h"
#include "orthros/tensor.h"
#include "orthros/vocab.h"

namespace orthros {

struct ModelConfig {
  int d_model = 64;
  int d_ff = 256;
  int n_heads = 4;
  int n_enc_layers = 4;
  int n_dec_layers = 2;
  int v_tgt = 0;
  int v_src = 0;
  int n_max = 64;
  int input_dim = 16;
  double dropout = 0.1;
  // "frames": conv front-end over feature frames (speech input).
  // "text": source token embedding front-end (the MT teacher).
  std::string frontend = "frames";

  void validate() const;
  std::string serialize() const;
  static ModelConfig deserialize(const std::string& text);
  bool operator==(const ModelConfig& o) const;
};

// Encoder output inside a tape: node id plus the count of valid (non-pad)
// leading rows.
struct EncodeOut {
  int node = -1;
  int u_valid = 0;
};

// Encoder output as plain values, for reuse across many decoder passes
// without re-encoding.
template <typename S>
struct EncStates {
  Tensor<S> states;
  int u_valid = 0;
};

// The dual-decoder model: one shared encoder (conv front-end + self-attn
// stack), a non-causal CMLM decoder, a causal decoder, a length classifier
// and a CTC classifier. All four heads read the same encoder parameters.
template <typename S>
class OrthrosModel {
 public:
  explicit OrthrosModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Parameter<S>>& params() { return params_; }
  const std::vector<Parameter<S>>& params() const { return params_; }
  Parameter<S>& p(const std::string& name);
  Parameter<S>* find(const std::string& name);
  void zero_grads();
  int64_t param_count() const;

  // Deterministic init: truncated-normal for the CMLM decoder stack,
  // scaled-uniform fan-in elsewhere, unit layer-norm gains, zero biases.
  void init_parameters(uint64_t seed);

  // --- Graph builders (shared by training and inference). `drop` enables
  // dropout when non-null; pass nullptr for inference.

  // frames: [U, input_dim], first u_valid rows are real. Output length
  // U' = ceil(ceil(U/2)/2); valid prefix ceil(ceil(u_valid/2)/2).
  EncodeOut encode_frames_t(Tape<S>& t, const Tensor<S>& frames, int u_valid,
                            Rng* drop);
  // Token front-end (no downsampling); src_ids over the source vocabulary.
  EncodeOut encode_text_t(Tape<S>& t, const std::vector<int>& src_ids,
                          Rng* drop);
  // Non-causal decoder logits [N, v_tgt] for a MASK-carrying token row.
  // `positions` overrides the 0..N-1 positional indices (tests only).
  int nar_logits_t(Tape<S>& t, const EncodeOut& enc,
                   const std::vector<int>& obs_ids, Rng* drop,
                   const std::vector<int>* positions = nullptr);
  // Causal decoder logits [n, v_tgt]; row i predicts the token after
  // prefix position i. prefix must start with BOS.
  int ar_logits_t(Tape<S>& t, const EncodeOut& enc,
                  const std::vector<int>& prefix, Rng* drop);
  // [1, n_max]; entry i scores target length i+1.
  int length_logits_t(Tape<S>& t, const EncodeOut& enc);
  // [U', v_src] per-frame classification logits (BLANK included).
  int ctc_logits_t(Tape<S>& t, const EncodeOut& enc);

  // --- Value-level wrappers (fresh tape per call, no dropout).
  EncStates<S> encode_frames(const Tensor<S>& frames, int u_valid);
  EncStates<S> encode_text(const std::vector<int>& src_ids);
  Tensor<S> nar_logits(const EncStates<S>& enc, const std::vector<int>& obs,
                       const std::vector<int>* positions = nullptr);
  Tensor<S> ar_logits(const EncStates<S>& enc,
                      const std::vector<int>& prefix);
  Tensor<S> length_logits(const EncStates<S>& enc);
  Tensor<S> ctc_logits(const EncStates<S>& enc);

  int enc_leaf(Tape<S>& t, const EncStates<S>& enc) {
    return t.leaf(enc.states);
  }

 private:
  void add_param(const std::string& name, std::vector<int> shape);
  void build_params();
  int linear(Tape<S>& t, int x, const std::string& base);
  int posenc_leaf(Tape<S>& t, const std::vector<int>& positions);
  int additive_mask_leaf(Tape<S>& t, int n_q, int n_k, int valid_k,
                         bool causal);
  int mha(Tape<S>& t, int q_in, int kv_in, int mask, const std::string& base,
          Rng* drop);
  int ffn(Tape<S>& t, int x, const std::string& base, Rng* drop);
  int enc_block(Tape<S>& t, int x, int mask, const std::string& base,
                Rng* drop);
  int dec_block(Tape<S>& t, int x, int self_mask, const EncodeOut& enc,
                int cross_mask, const std::string& base, Rng* drop);
  int dec_stack(Tape<S>& t, const EncodeOut& enc,
                const std::vector<int>& ids, bool causal,
                const std::string& stack, Rng* drop,
                const std::vector<int>* positions);
  int maybe_drop(Tape<S>& t, int x, Rng* drop);
  int ln(Tape<S>& t, int x, const std::string& base);

  ModelConfig cfg_;
  std::vector<Parameter<S>> params_;
  std::unordered_map<std::string, size_t> index_;
};

extern template class OrthrosModel<float>;
extern template class OrthrosModel<double>;

}  // namespace orthros

#endif  // ORTHROS_MODEL_H_
