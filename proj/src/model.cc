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

#include "orthros/model.h"

#include <cmath>
#include <sstream>

namespace orthros {

namespace {

// Truncating a normal at +-2 sigma shrinks its standard deviation by this
// factor; the draw sigma is widened so the realized std lands on target.
constexpr double kTrunc2SigmaStdFactor = 0.8796256610342398;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

int ceil_div2(int n) { return (n + 1) / 2; }

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void ModelConfig::validate() const {
  check(d_model >= 1 && d_ff >= 1 && n_heads >= 1, "model config: bad widths");
  check(d_model % n_heads == 0, "model config: d_model not divisible by heads");
  check(n_enc_layers >= 1 && n_dec_layers >= 1, "model config: bad depth");
  check(v_tgt > kTgtCoreBase, "model config: target vocabulary too small");
  check(v_src > kBlank, "model config: source vocabulary too small");
  check(n_max >= 1, "model config: bad n_max");
  check(dropout >= 0.0 && dropout < 1.0, "model config: bad dropout");
  check(frontend == "frames" || frontend == "text",
        "model config: unknown frontend " + frontend);
  check(frontend != "frames" || input_dim >= 1,
        "model config: bad input_dim");
}

std::string ModelConfig::serialize() const {
  std::ostringstream out;
  out << "d_model = " << d_model << "\n";
  out << "d_ff = " << d_ff << "\n";
  out << "n_heads = " << n_heads << "\n";
  out << "n_enc_layers = " << n_enc_layers << "\n";
  out << "n_dec_layers = " << n_dec_layers << "\n";
  out << "v_tgt = " << v_tgt << "\n";
  out << "v_src = " << v_src << "\n";
  out << "n_max = " << n_max << "\n";
  out << "input_dim = " << input_dim << "\n";
  out << "dropout = " << format_double(dropout) << "\n";
  out << "frontend = " << frontend << "\n";
  return out.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  KvConfig kv = KvConfig::from_string(text);
  ModelConfig cfg;
  cfg.d_model = static_cast<int>(kv.get_int("d_model", cfg.d_model));
  cfg.d_ff = static_cast<int>(kv.get_int("d_ff", cfg.d_ff));
  cfg.n_heads = static_cast<int>(kv.get_int("n_heads", cfg.n_heads));
  cfg.n_enc_layers =
      static_cast<int>(kv.get_int("n_enc_layers", cfg.n_enc_layers));
  cfg.n_dec_layers =
      static_cast<int>(kv.get_int("n_dec_layers", cfg.n_dec_layers));
  cfg.v_tgt = static_cast<int>(kv.get_int("v_tgt", cfg.v_tgt));
  cfg.v_src = static_cast<int>(kv.get_int("v_src", cfg.v_src));
  cfg.n_max = static_cast<int>(kv.get_int("n_max", cfg.n_max));
  cfg.input_dim = static_cast<int>(kv.get_int("input_dim", cfg.input_dim));
  cfg.dropout = kv.get_double("dropout", cfg.dropout);
  cfg.frontend = kv.get_string("frontend", cfg.frontend);
  kv.require_consumed();
  cfg.validate();
  return cfg;
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return d_model == o.d_model && d_ff == o.d_ff && n_heads == o.n_heads &&
         n_enc_layers == o.n_enc_layers && n_dec_layers == o.n_dec_layers &&
         v_tgt == o.v_tgt && v_src == o.v_src && n_max == o.n_max &&
         input_dim == o.input_dim && dropout == o.dropout &&
         frontend == o.frontend;
}

template <typename S>
OrthrosModel<S>::OrthrosModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  build_params();
}

template <typename S>
void OrthrosModel<S>::add_param(const std::string& name,
                                std::vector<int> shape) {
  check(index_.emplace(name, params_.size()).second,
        "model: duplicate parameter " + name);
  params_.emplace_back(name, Tensor<S>(std::move(shape)));
}

template <typename S>
void OrthrosModel<S>::build_params() {
  const int d = cfg_.d_model;
  auto attn = [&](const std::string& base) {
    for (const char* part : {".wq", ".wk", ".wv", ".wo"}) {
      add_param(base + part + ".w", {d, d});
      add_param(base + part + ".b", {d});
    }
  };
  auto norm = [&](const std::string& base) {
    add_param(base + ".gain", {d});
    add_param(base + ".bias", {d});
  };
  auto ffn_params = [&](const std::string& base) {
    add_param(base + ".w1.w", {d, cfg_.d_ff});
    add_param(base + ".w1.b", {cfg_.d_ff});
    add_param(base + ".w2.w", {cfg_.d_ff, d});
    add_param(base + ".w2.b", {d});
  };

  if (cfg_.frontend == "frames") {
    add_param("encoder.conv0.w", {3 * cfg_.input_dim, d});
    add_param("encoder.conv0.b", {d});
    add_param("encoder.conv1.w", {3 * d, d});
    add_param("encoder.conv1.b", {d});
  } else {
    add_param("encoder.embed.w", {cfg_.v_src, d});
  }
  for (int i = 0; i < cfg_.n_enc_layers; ++i) {
    const std::string base = "encoder.layer" + std::to_string(i) + ".";
    attn(base + "self");
    norm(base + "ln1");
    ffn_params(base + "ffn");
    norm(base + "ln2");
  }
  add_param("tgt_embed.w", {cfg_.v_tgt, d});
  for (const char* stack : {"nar", "ar"}) {
    for (int i = 0; i < cfg_.n_dec_layers; ++i) {
      const std::string base =
          std::string(stack) + ".layer" + std::to_string(i) + ".";
      attn(base + "self");
      norm(base + "ln1");
      attn(base + "cross");
      norm(base + "ln2");
      ffn_params(base + "ffn");
      norm(base + "ln3");
    }
    add_param(std::string(stack) + ".out.w", {d, cfg_.v_tgt});
    add_param(std::string(stack) + ".out.b", {cfg_.v_tgt});
  }
  add_param("len.w", {d, cfg_.n_max});
  add_param("len.b", {cfg_.n_max});
  add_param("ctc.w", {d, cfg_.v_src});
  add_param("ctc.b", {cfg_.v_src});
}

template <typename S>
Parameter<S>& OrthrosModel<S>::p(const std::string& name) {
  auto it = index_.find(name);
  check(it != index_.end(), "model: unknown parameter " + name);
  return params_[it->second];
}

template <typename S>
Parameter<S>* OrthrosModel<S>::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

template <typename S>
void OrthrosModel<S>::zero_grads() {
  for (Parameter<S>& prm : params_) prm.zero_grad();
}

template <typename S>
int64_t OrthrosModel<S>::param_count() const {
  int64_t n = 0;
  for (const Parameter<S>& prm : params_) n += prm.value.numel();
  return n;
}

template <typename S>
void OrthrosModel<S>::init_parameters(uint64_t seed) {
  const Rng root(seed);
  for (Parameter<S>& prm : params_) {
    Rng rng = root.fork(fnv1a(prm.name));
    if (prm.value.rank() == 1) {
      prm.value.fill(ends_with(prm.name, ".gain") ? S(1) : S(0));
      continue;
    }
    if (starts_with(prm.name, "nar.")) {
      const double sigma = 0.02 / kTrunc2SigmaStdFactor;
      for (int64_t i = 0; i < prm.value.numel(); ++i) {
        double z;
        do {
          z = rng.normal();
        } while (std::fabs(z) > 2.0);
        prm.value[i] = static_cast<S>(z * sigma);
      }
    } else {
      const double limit = std::sqrt(3.0 / prm.value.shape[0]);
      for (int64_t i = 0; i < prm.value.numel(); ++i)
        prm.value[i] = static_cast<S>((rng.uniform() * 2.0 - 1.0) * limit);
    }
  }
}

template <typename S>
int OrthrosModel<S>::maybe_drop(Tape<S>& t, int x, Rng* drop) {
  if (drop == nullptr || cfg_.dropout <= 0.0) return x;
  return t.dropout(x, cfg_.dropout, *drop);
}

template <typename S>
int OrthrosModel<S>::linear(Tape<S>& t, int x, const std::string& base) {
  return t.add_bias(t.matmul(x, t.param(&p(base + ".w"))),
                    t.param(&p(base + ".b")));
}

template <typename S>
int OrthrosModel<S>::ln(Tape<S>& t, int x, const std::string& base) {
  return t.layer_norm(x, t.param(&p(base + ".gain")),
                      t.param(&p(base + ".bias")), S(1e-5));
}

template <typename S>
int OrthrosModel<S>::posenc_leaf(Tape<S>& t,
                                 const std::vector<int>& positions) {
  const int d = cfg_.d_model;
  Tensor<S> pe(static_cast<int>(positions.size()), d);
  for (size_t i = 0; i < positions.size(); ++i) {
    const double pos = positions[i];
    for (int j = 0; j < d; j += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(j) / d);
      pe.at(static_cast<int>(i), j) = static_cast<S>(std::sin(pos * freq));
      if (j + 1 < d)
        pe.at(static_cast<int>(i), j + 1) =
            static_cast<S>(std::cos(pos * freq));
    }
  }
  return t.leaf(std::move(pe));
}

template <typename S>
int OrthrosModel<S>::additive_mask_leaf(Tape<S>& t, int n_q, int n_k,
                                        int valid_k, bool causal) {
  if (valid_k >= n_k && !causal) return -1;
  Tensor<S> m(n_q, n_k);
  for (int i = 0; i < n_q; ++i)
    for (int j = 0; j < n_k; ++j)
      if (j >= valid_k || (causal && j > i)) m.at(i, j) = S(-1e9);
  return t.leaf(std::move(m));
}

template <typename S>
int OrthrosModel<S>::mha(Tape<S>& t, int q_in, int kv_in, int mask,
                         const std::string& base, Rng* drop) {
  (void)drop;
  const int dk = cfg_.d_model / cfg_.n_heads;
  const int q = linear(t, q_in, base + ".wq");
  const int k = linear(t, kv_in, base + ".wk");
  const int v = linear(t, kv_in, base + ".wv");
  std::vector<int> heads;
  for (int h = 0; h < cfg_.n_heads; ++h) {
    const int qh = t.slice_cols(q, h * dk, (h + 1) * dk);
    const int kh = t.slice_cols(k, h * dk, (h + 1) * dk);
    const int vh = t.slice_cols(v, h * dk, (h + 1) * dk);
    int scores = t.scale(t.matmul_nt(qh, kh),
                         static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk))));
    if (mask >= 0) scores = t.add(scores, mask);
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  return linear(t, t.concat_cols(heads), base + ".wo");
}

template <typename S>
int OrthrosModel<S>::ffn(Tape<S>& t, int x, const std::string& base,
                         Rng* drop) {
  (void)drop;
  return linear(t, t.relu(linear(t, x, base + ".w1")), base + ".w2");
}

template <typename S>
int OrthrosModel<S>::enc_block(Tape<S>& t, int x, int mask,
                               const std::string& base, Rng* drop) {
  int a = mha(t, x, x, mask, base + "self", drop);
  x = ln(t, t.add(x, maybe_drop(t, a, drop)), base + "ln1");
  int f = ffn(t, x, base + "ffn", drop);
  return ln(t, t.add(x, maybe_drop(t, f, drop)), base + "ln2");
}

template <typename S>
int OrthrosModel<S>::dec_block(Tape<S>& t, int x, int self_mask,
                               const EncodeOut& enc, int cross_mask,
                               const std::string& base, Rng* drop) {
  int a = mha(t, x, x, self_mask, base + "self", drop);
  x = ln(t, t.add(x, maybe_drop(t, a, drop)), base + "ln1");
  int c = mha(t, x, enc.node, cross_mask, base + "cross", drop);
  x = ln(t, t.add(x, maybe_drop(t, c, drop)), base + "ln2");
  int f = ffn(t, x, base + "ffn", drop);
  return ln(t, t.add(x, maybe_drop(t, f, drop)), base + "ln3");
}

template <typename S>
EncodeOut OrthrosModel<S>::encode_frames_t(Tape<S>& t,
                                           const Tensor<S>& frames,
                                           int u_valid, Rng* drop) {
  check(cfg_.frontend == "frames", "encode: model has no frame front-end");
  check(frames.rank() == 2 && frames.cols() == cfg_.input_dim,
        "encode: frame width mismatch");
  check(u_valid >= 4, "utterance too short");
  check(u_valid <= frames.rows(), "encode: valid count exceeds frames");

  int x = t.zero_rows_from(t.leaf(frames), u_valid);
  x = t.relu(t.conv1d_k3s2(x, t.param(&p("encoder.conv0.w")),
                           t.param(&p("encoder.conv0.b"))));
  const int u1 = ceil_div2(u_valid);
  x = t.zero_rows_from(x, u1);
  x = t.relu(t.conv1d_k3s2(x, t.param(&p("encoder.conv1.w")),
                           t.param(&p("encoder.conv1.b"))));
  const int u2 = ceil_div2(u1);
  x = t.zero_rows_from(x, u2);

  const int rows = t.val(x).rows();
  std::vector<int> positions(rows);
  for (int i = 0; i < rows; ++i) positions[i] = i;
  x = maybe_drop(t, t.add(x, posenc_leaf(t, positions)), drop);

  const int mask = additive_mask_leaf(t, rows, rows, u2, false);
  for (int i = 0; i < cfg_.n_enc_layers; ++i)
    x = enc_block(t, x, mask, "encoder.layer" + std::to_string(i) + ".",
                  drop);
  return EncodeOut{x, u2};
}

template <typename S>
EncodeOut OrthrosModel<S>::encode_text_t(Tape<S>& t,
                                         const std::vector<int>& src_ids,
                                         Rng* drop) {
  check(cfg_.frontend == "text", "encode: model has no text front-end");
  check(!src_ids.empty(), "encode: empty source");
  for (int id : src_ids)
    check(id >= 0 && id < cfg_.v_src, "encode: source id out of range");

  const int n = static_cast<int>(src_ids.size());
  int x = t.scale(t.embed_rows(t.param(&p("encoder.embed.w")), src_ids),
                  static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model))));
  std::vector<int> positions(n);
  for (int i = 0; i < n; ++i) positions[i] = i;
  x = maybe_drop(t, t.add(x, posenc_leaf(t, positions)), drop);
  for (int i = 0; i < cfg_.n_enc_layers; ++i)
    x = enc_block(t, x, -1, "encoder.layer" + std::to_string(i) + ".", drop);
  return EncodeOut{x, n};
}

template <typename S>
int OrthrosModel<S>::dec_stack(Tape<S>& t, const EncodeOut& enc,
                               const std::vector<int>& ids, bool causal,
                               const std::string& stack, Rng* drop,
                               const std::vector<int>* positions) {
  for (int id : ids)
    check(id >= 0 && id < cfg_.v_tgt, "decoder: token id out of range");
  const int n = static_cast<int>(ids.size());
  std::vector<int> pos(n);
  for (int i = 0; i < n; ++i) pos[i] = i;
  if (positions != nullptr) {
    check(static_cast<int>(positions->size()) == n,
          "decoder: positions length mismatch");
    pos = *positions;
  }

  int x = t.scale(t.embed_rows(t.param(&p("tgt_embed.w")), ids),
                  static_cast<S>(std::sqrt(static_cast<double>(cfg_.d_model))));
  x = maybe_drop(t, t.add(x, posenc_leaf(t, pos)), drop);

  const int self_mask = additive_mask_leaf(t, n, n, n, causal);
  const int enc_rows = t.val(enc.node).rows();
  const int cross_mask =
      additive_mask_leaf(t, n, enc_rows, enc.u_valid, false);
  for (int i = 0; i < cfg_.n_dec_layers; ++i)
    x = dec_block(t, x, self_mask, enc, cross_mask,
                  stack + "layer" + std::to_string(i) + ".", drop);
  return x;
}

template <typename S>
int OrthrosModel<S>::nar_logits_t(Tape<S>& t, const EncodeOut& enc,
                                  const std::vector<int>& obs_ids, Rng* drop,
                                  const std::vector<int>* positions) {
  check(!obs_ids.empty(), "nar_forward: empty target");
  int x = dec_stack(t, enc, obs_ids, false, "nar.", drop, positions);
  return linear(t, x, "nar.out");
}

template <typename S>
int OrthrosModel<S>::ar_logits_t(Tape<S>& t, const EncodeOut& enc,
                                 const std::vector<int>& prefix, Rng* drop) {
  check(!prefix.empty(), "ar_forward: empty prefix");
  check(prefix[0] == kBos, "ar_forward: prefix must start with BOS");
  int x = dec_stack(t, enc, prefix, true, "ar.", drop, nullptr);
  return linear(t, x, "ar.out");
}

template <typename S>
int OrthrosModel<S>::length_logits_t(Tape<S>& t, const EncodeOut& enc) {
  check(enc.u_valid >= 1, "length_logits: all positions padded");
  return linear(t, t.mean_rows(enc.node, enc.u_valid), "len");
}

template <typename S>
int OrthrosModel<S>::ctc_logits_t(Tape<S>& t, const EncodeOut& enc) {
  return linear(t, enc.node, "ctc");
}

template <typename S>
EncStates<S> OrthrosModel<S>::encode_frames(const Tensor<S>& frames,
                                            int u_valid) {
  Tape<S> t;
  EncodeOut out = encode_frames_t(t, frames, u_valid, nullptr);
  return EncStates<S>{t.val(out.node), out.u_valid};
}

template <typename S>
EncStates<S> OrthrosModel<S>::encode_text(const std::vector<int>& src_ids) {
  Tape<S> t;
  EncodeOut out = encode_text_t(t, src_ids, nullptr);
  return EncStates<S>{t.val(out.node), out.u_valid};
}

template <typename S>
Tensor<S> OrthrosModel<S>::nar_logits(const EncStates<S>& enc,
                                      const std::vector<int>& obs,
                                      const std::vector<int>* positions) {
  Tape<S> t;
  EncodeOut eo{enc_leaf(t, enc), enc.u_valid};
  return t.val(nar_logits_t(t, eo, obs, nullptr, positions));
}

template <typename S>
Tensor<S> OrthrosModel<S>::ar_logits(const EncStates<S>& enc,
                                     const std::vector<int>& prefix) {
  Tape<S> t;
  EncodeOut eo{enc_leaf(t, enc), enc.u_valid};
  return t.val(ar_logits_t(t, eo, prefix, nullptr));
}

template <typename S>
Tensor<S> OrthrosModel<S>::length_logits(const EncStates<S>& enc) {
  Tape<S> t;
  EncodeOut eo{enc_leaf(t, enc), enc.u_valid};
  return t.val(length_logits_t(t, eo));
}

template <typename S>
Tensor<S> OrthrosModel<S>::ctc_logits(const EncStates<S>& enc) {
  Tape<S> t;
  EncodeOut eo{enc_leaf(t, enc), enc.u_valid};
  return t.val(ctc_logits_t(t, eo));
}

template class OrthrosModel<float>;
template class OrthrosModel<double>;

}  // namespace orthros
