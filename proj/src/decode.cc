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

#include "orthros/decode.h"

#include <algorithm>
#include <cmath>

#include "orthros/vocab.h"

namespace orthros {
namespace {

// Argmax over core target ids only; ties keep the lower id.
int argmax_core(const Tensor<float>& probs, int row) {
  const int v = probs.cols();
  check(v > kTgtCoreBase, "decode: model has no core target tokens");
  int best = kTgtCoreBase;
  float bv = probs.at(row, kTgtCoreBase);
  for (int j = kTgtCoreBase + 1; j < v; ++j) {
    const float p = probs.at(row, j);
    if (p > bv) {
      bv = p;
      best = j;
    }
  }
  return best;
}

struct BeamItem {
  std::vector<int> tokens;
  std::vector<double> confidences;
  double sum_logp = 0.0;
  bool finished = false;

  double mean() const {
    const auto terms = tokens.size() + (finished ? 1 : 0);
    return terms == 0 ? 0.0 : sum_logp / static_cast<double>(terms);
  }
};

// Ranking order: higher mean first, then lexicographically smaller token
// sequence, then finished before unfinished. Total and deterministic.
bool beam_less(const BeamItem& a, const BeamItem& b) {
  const double ma = a.mean();
  const double mb = b.mean();
  if (ma != mb) return ma > mb;
  if (a.tokens != b.tokens) return a.tokens < b.tokens;
  return a.finished && !b.finished;
}

double ar_mean_logprob(OrthrosModel<float>& m, const EncStates<float>& enc,
                       const std::vector<int>& tokens, DecodeStats* stats) {
  std::vector<int> prefix;
  prefix.reserve(tokens.size() + 1);
  prefix.push_back(kBos);
  prefix.insert(prefix.end(), tokens.begin(), tokens.end());
  const Tensor<float> logits = m.ar_logits(enc, prefix);
  if (stats != nullptr) ++stats->ar_passes;
  const Tensor<float> logp = log_softmax(logits, 1);
  const int n = static_cast<int>(tokens.size());
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += logp.at(i, tokens[i]);
  sum += logp.at(n, kEos);
  return sum / static_cast<double>(n + 1);
}

}  // namespace

void DecodeConfig::validate() const {
  check(iterations >= 1, "config: iterations must be positive");
  check(length_beam >= 1, "config: length_beam must be positive");
  check(beam >= 1, "config: beam must be positive");
  check(max_len >= 1, "config: max_len must be positive");
  check(alpha > 0.0, "config: alpha must be positive");
  check(length_mode == "classifier" || length_mode == "ctc_scale",
        "config: unknown length_mode");
  check(mode == "nar" || mode == "ar" || mode == "ctc",
        "config: unknown decode mode");
}

int mask_schedule(int n_hat, int iterations, int t) {
  check(n_hat >= 0, "mask_schedule: negative length");
  check(iterations >= 1, "mask_schedule: iterations must be positive");
  check(t >= 0 && t < iterations, "mask_schedule: iteration out of range");
  if (t == 0) return n_hat;
  return static_cast<int>(
      (static_cast<int64_t>(n_hat) * (iterations - t)) / iterations);
}

std::vector<int> select_masked_positions(const std::vector<double>& conf,
                                         int k) {
  const int n = static_cast<int>(conf.size());
  check(k >= 0 && k <= n, "select_masked_positions: k out of range");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (conf[a] != conf[b]) return conf[a] < conf[b];
    return a < b;
  });
  std::vector<int> out(order.begin(), order.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

Hypothesis mask_predict(OrthrosModel<float>& m, const EncStates<float>& enc,
                        int n_hat, int iterations, bool use_smart_updates,
                        DecodeStats* stats,
                        std::vector<double>* changed_fraction) {
  check(n_hat >= 1 && n_hat <= m.config().n_max,
        "mask_predict: length out of range");
  check(iterations >= 1, "mask_predict: iterations must be positive");

  if (changed_fraction != nullptr) changed_fraction->clear();
  std::vector<int> cur(n_hat, kMask);
  std::vector<double> conf(n_hat, 0.0);
  Tensor<float> last_probs;
  for (int t = 0; t < iterations; ++t) {
    const int k = mask_schedule(n_hat, iterations, t);
    const std::vector<int> masked = select_masked_positions(conf, k);
    std::vector<int> obs = cur;
    for (int p : masked) obs[p] = kMask;
    const Tensor<float> logits = m.nar_logits(enc, obs);
    if (stats != nullptr) ++stats->nar_passes;
    const Tensor<float> probs = softmax(logits, 1);
    int changed = 0;
    if (use_smart_updates) {
      for (int p = 0; p < n_hat; ++p) {
        const int next = argmax_core(probs, p);
        changed += next != cur[p];
        cur[p] = next;
        conf[p] = probs.at(p, next);
      }
    } else {
      for (int p : masked) {
        const int next = argmax_core(probs, p);
        changed += next != cur[p];
        cur[p] = next;
        conf[p] = probs.at(p, next);
      }
    }
    if (changed_fraction != nullptr)
      changed_fraction->push_back(static_cast<double>(changed) / n_hat);
    last_probs = probs;
  }

  Hypothesis h;
  h.tokens = cur;
  h.confidences = conf;
  double sum = 0.0;
  for (int p = 0; p < n_hat; ++p)
    sum += std::log(static_cast<double>(last_probs.at(p, cur[p])));
  h.nar_score = sum / static_cast<double>(n_hat);
  return h;
}

std::vector<int> length_candidates(const Tensor<float>& length_logits, int l) {
  check(length_logits.rank() == 2 && length_logits.rows() == 1,
        "length_candidates: logits must be a single row");
  const int n_max = length_logits.cols();
  check(l >= 1 && l <= n_max, "length_candidates: beam out of range");
  const Tensor<float> probs = softmax(length_logits, 1);
  std::vector<int> order(n_max);
  for (int i = 0; i < n_max; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (probs.at(0, a) != probs.at(0, b)) return probs.at(0, a) > probs.at(0, b);
    return a < b;
  });
  std::vector<int> out(l);
  for (int i = 0; i < l; ++i) out[i] = order[i] + 1;
  return out;
}

std::vector<int> ctc_greedy(const Tensor<float>& ctc_logits) {
  check(ctc_logits.rank() == 2, "ctc_greedy: rank-2 logits required");
  std::vector<int> out;
  int prev = -1;
  for (int i = 0; i < ctc_logits.rows(); ++i) {
    const int a = argmax_row(ctc_logits, i);
    if (a != prev && a != kBlank) out.push_back(a);
    prev = a;
  }
  return out;
}

std::vector<int> ctc_length_estimate(const Tensor<float>& ctc_logits,
                                     double alpha, int l, int n_max) {
  check(alpha > 0.0, "ctc_length_estimate: alpha must be positive");
  check(l >= 1 && l <= n_max, "ctc_length_estimate: beam out of range");
  const int n_src = static_cast<int>(ctc_greedy(ctc_logits).size());
  const int center = std::clamp(
      static_cast<int>(std::floor(alpha * static_cast<double>(n_src))), 1,
      n_max);
  std::vector<int> out;
  std::vector<char> seen(static_cast<size_t>(n_max) + 1, 0);
  auto push = [&](int v) {
    v = std::clamp(v, 1, n_max);
    if (seen[v]) return;
    seen[v] = 1;
    out.push_back(v);
  };
  push(center);
  for (int off = 1; static_cast<int>(out.size()) < l; ++off) {
    push(center - off);
    if (static_cast<int>(out.size()) >= l) break;
    push(center + off);
  }
  return out;
}

Hypothesis select_candidate_ar(OrthrosModel<float>& m,
                               const EncStates<float>& enc,
                               const std::vector<Hypothesis>& candidates,
                               DecodeStats* stats) {
  check(!candidates.empty(), "select_candidate_ar: no candidates");
  int best = -1;
  double best_score = 0.0;
  std::vector<double> scores(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = ar_mean_logprob(m, enc, candidates[i].tokens, stats);
    if (best < 0 || scores[i] > best_score ||
        (scores[i] == best_score &&
         candidates[i].length() < candidates[best].length())) {
      best = static_cast<int>(i);
      best_score = scores[i];
    }
  }
  Hypothesis h = candidates[best];
  h.ar_score = best_score;
  h.has_ar_score = true;
  return h;
}

Hypothesis select_candidate_nar(const std::vector<Hypothesis>& candidates) {
  check(!candidates.empty(), "select_candidate_nar: no candidates");
  int best = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].nar_score > candidates[best].nar_score ||
        (candidates[i].nar_score == candidates[best].nar_score &&
         candidates[i].length() < candidates[best].length()))
      best = static_cast<int>(i);
  }
  return candidates[best];
}

Hypothesis beam_search_ar(OrthrosModel<float>& m, const EncStates<float>& enc,
                          int b, int max_len, DecodeStats* stats) {
  check(b >= 1, "beam_search_ar: beam must be positive");
  check(max_len >= 1, "beam_search_ar: max_len must be positive");
  const int v = m.config().v_tgt;
  check(v > kTgtCoreBase, "decode: model has no core target tokens");

  std::vector<BeamItem> beam(1);
  for (int step = 0; step < max_len; ++step) {
    std::vector<BeamItem> pool;
    bool any_unfinished = false;
    for (const BeamItem& item : beam) {
      if (item.finished) {
        pool.push_back(item);
        continue;
      }
      any_unfinished = true;
      std::vector<int> prefix;
      prefix.reserve(item.tokens.size() + 1);
      prefix.push_back(kBos);
      prefix.insert(prefix.end(), item.tokens.begin(), item.tokens.end());
      const Tensor<float> logits = m.ar_logits(enc, prefix);
      if (stats != nullptr) ++stats->ar_passes;
      const Tensor<float> logp = log_softmax(logits, 1);
      const int row = static_cast<int>(item.tokens.size());
      BeamItem fin = item;
      fin.finished = true;
      fin.sum_logp += logp.at(row, kEos);
      pool.push_back(std::move(fin));
      for (int w = kTgtCoreBase; w < v; ++w) {
        BeamItem ext = item;
        ext.tokens.push_back(w);
        ext.sum_logp += logp.at(row, w);
        ext.confidences.push_back(std::exp(
            static_cast<double>(logp.at(row, w))));
        pool.push_back(std::move(ext));
      }
    }
    if (!any_unfinished) break;
    std::sort(pool.begin(), pool.end(), beam_less);
    if (static_cast<int>(pool.size()) > b) pool.resize(b);
    beam = std::move(pool);
  }

  const BeamItem* pick = nullptr;
  for (const BeamItem& item : beam) {
    if (item.finished) {
      pick = &item;
      break;
    }
  }
  Hypothesis h;
  if (pick == nullptr) {
    pick = &beam.front();
    h.truncated = true;
  }
  h.tokens = pick->tokens;
  h.confidences = pick->confidences;
  h.ar_score = pick->mean();
  h.has_ar_score = !h.truncated;
  return h;
}

Hypothesis translate(OrthrosModel<float>& m, const Tensor<float>& frames,
                     const DecodeConfig& cfg, DecodeStats* stats) {
  cfg.validate();
  check(frames.rank() == 2, "translate: rank-2 frames required");
  const EncStates<float> enc = m.encode_frames(frames, frames.rows());
  if (stats != nullptr) ++stats->encoder_passes;

  if (cfg.mode == "ar") return beam_search_ar(m, enc, cfg.beam, cfg.max_len, stats);

  if (cfg.mode == "ctc") {
    const Tensor<float> logits = m.ctc_logits(enc);
    const Tensor<float> probs = softmax(logits, 1);
    Hypothesis h;
    int prev = -1;
    for (int i = 0; i < logits.rows(); ++i) {
      const int a = argmax_row(logits, i);
      const double p = probs.at(i, a);
      if (a != prev && a != kBlank && a >= kSrcCoreBase) {
        h.tokens.push_back(kTgtCoreBase + (a - kSrcCoreBase));
        h.confidences.push_back(p);
      } else if (a == prev && a != kBlank && a >= kSrcCoreBase &&
                 !h.confidences.empty()) {
        h.confidences.back() = std::max(h.confidences.back(), p);
      }
      prev = a;
    }
    double sum = 0.0;
    for (double c : h.confidences) sum += std::log(c);
    h.nar_score = h.tokens.empty() ? 0.0
                                   : sum / static_cast<double>(h.tokens.size());
    return h;
  }

  std::vector<int> lengths;
  if (cfg.length_mode == "classifier") {
    lengths = length_candidates(m.length_logits(enc), cfg.length_beam);
  } else {
    lengths = ctc_length_estimate(m.ctc_logits(enc), cfg.alpha,
                                  cfg.length_beam, m.config().n_max);
  }
  std::vector<Hypothesis> candidates;
  candidates.reserve(lengths.size());
  for (int n : lengths)
    candidates.push_back(mask_predict(m, enc, n, cfg.iterations,
                                      cfg.use_smart_updates, stats));
  if (cfg.use_ar_selection) return select_candidate_ar(m, enc, candidates, stats);
  return select_candidate_nar(candidates);
}

}  // namespace orthros
