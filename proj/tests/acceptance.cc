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

// Release gate for the whole pipeline. Each criterion prints exactly one
// [PASS]/[FAIL] line on stdout; progress notes go to stderr. Criterion 4
// trains a teacher, distills, and trains six student models from scratch,
// so a full run takes roughly half an hour of CPU time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oracles.h"
#include "orthros/bench.h"
#include "orthros/bleu.h"
#include "orthros/checkpoint.h"
#include "orthros/decode.h"
#include "orthros/losses.h"
#include "orthros/model.h"
#include "orthros/numerics.h"
#include "orthros/synthdata.h"
#include "orthros/train.h"

namespace orthros {
namespace {

namespace fs = std::filesystem;

int g_failed = 0;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

void note(const std::string& msg) {
  std::fprintf(stderr, "  .. %s\n", msg.c_str());
  std::fflush(stderr);
}

using CheckFn = std::function<bool(std::string&)>;

void run_check(const std::string& name, const CheckFn& fn) {
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
              detail.empty() ? "" : " — ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 16;
  c.d_ff = 32;
  c.n_heads = 2;
  c.n_enc_layers = 2;
  c.n_dec_layers = 1;
  c.v_tgt = 12;
  c.v_src = 9;
  c.n_max = 16;
  c.input_dim = 4;
  c.dropout = 0.0;
  return c;
}

template <typename S>
Tensor<S> random_frames(int u, int d, uint64_t seed) {
  Tensor<S> f(u, d);
  Rng r(seed);
  for (int64_t i = 0; i < f.numel(); ++i)
    f[i] = static_cast<S>(r.normal() * 0.5);
  return f;
}

template <typename S>
std::vector<Tensor<S>> grad_snapshot(const OrthrosModel<S>& m) {
  std::vector<Tensor<S>> out;
  for (const Parameter<S>& p : m.params()) out.push_back(p.grad);
  return out;
}

template <typename S>
bool grads_bitwise_equal(const std::vector<Tensor<S>>& a,
                         const std::vector<Tensor<S>>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) return false;
    if (std::memcmp(a[i].data.data(), b[i].data.data(),
                    sizeof(S) * a[i].data.size()) != 0)
      return false;
  }
  return true;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Shared across criteria: the directional-quality run (criterion 4) leaves
// behind its best student model and the raw test split for the latency and
// refinement checks that follow.
std::unique_ptr<OrthrosModel<float>> g_student;
Corpus g_test;

// The synthetic task every end-to-end criterion trains on: small enough to
// learn within the CPU budget, s=2 synonym choice keeps it multimodal.
TaskSpec analog_spec() {
  TaskSpec spec;
  spec.v_src_core = 8;
  spec.v_tgt_core = 16;
  spec.synonyms = 2;
  spec.l_min = 3;
  spec.l_max = 7;
  spec.d_min = 4;
  spec.d_max = 6;
  spec.sigma = 0.05;
  spec.p_silence = 0.05;
  spec.p_fertility2 = 0.0;
  spec.reorder_window = 1;
  spec.input_dim = 16;
  spec.seed = 101;
  return spec;
}

// Training schedule that reaches a usable model within the CPU budget: the
// stock 25k-step warmup never leaves the ramp in a 2.5k-step run.
TrainConfig desk_schedule(int max_steps, uint64_t seed) {
  TrainConfig tr;
  tr.max_steps = max_steps;
  tr.batch_size = 8;
  tr.seed = seed;
  tr.warmup_steps = 600;
  tr.lr_constant = 0.4;
  return tr;
}

double decode_bleu(OrthrosModel<float>& m, const Corpus& test,
                   const DecodeConfig& cfg) {
  std::vector<TokenSeq> hyps;
  std::vector<std::vector<TokenSeq>> refs;
  for (const Triplet& it : test.items) {
    hyps.push_back(translate(m, it.frames, cfg).tokens);
    refs.push_back({it.translation});
  }
  return corpus_bleu(hyps, refs);
}

// --- criterion 1: closed-form/brute-force oracle equivalences ------------

bool check_oracles(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();

  // (a) ctc_loss against exhaustive alignment enumeration: every instance
  // with U' <= 6, |labels| <= 3, V <= 4.
  Rng r(31337);
  int checked = 0;
  int infeasible = 0;
  double ctc_worst = 0.0;
  for (int v = 2; v <= 4; ++v) {
    std::vector<int> symbols;
    for (int s = 0; s < v; ++s)
      if (s != kBlank) symbols.push_back(s);
    std::vector<std::vector<int>> labelings;
    for (int s : symbols) labelings.push_back({s});
    for (size_t len = 1; len < 3; ++len) {
      std::vector<std::vector<int>> next;
      for (const auto& base : labelings)
        if (base.size() == len)
          for (int s : symbols) {
            auto ext = base;
            ext.push_back(s);
            next.push_back(ext);
          }
      labelings.insert(labelings.end(), next.begin(), next.end());
    }
    for (int t_len = 1; t_len <= 6; ++t_len) {
      for (const auto& labels : labelings) {
        Tensor<double> logits(t_len, v);
        for (int64_t i = 0; i < logits.numel(); ++i)
          logits[i] = r.normal() * 2.0;
        int repeats = 0;
        for (size_t i = 1; i < labels.size(); ++i)
          repeats += labels[i] == labels[i - 1];
        Tape<double> t;
        int node = t.leaf(logits);
        if (t_len < static_cast<int>(labels.size()) + repeats) {
          bool threw = false;
          try {
            ctc_loss(t, node, labels);
          } catch (const std::runtime_error&) {
            threw = true;
          }
          if (!threw) {
            detail = "infeasible ctc instance did not raise";
            return false;
          }
          ++infeasible;
          continue;
        }
        int loss = ctc_loss(t, node, labels);
        const double want = oracles::ctc_bruteforce_nll(logits, labels, kBlank);
        ctc_worst = std::max(ctc_worst, std::fabs(t.val(loss)[0] - want));
        ++checked;
      }
    }
  }
  if (checked < 200 || infeasible < 30 || ctc_worst > 1e-6) {
    std::ostringstream ss;
    ss << "ctc enumeration: " << checked << " checked, worst |diff| "
       << ctc_worst;
    detail = ss.str();
    return false;
  }
  note("ctc enumeration done");

  // (b) one parallel teacher-forced pass equals sequential one-step scoring.
  OrthrosModel<float> m(tiny_config());
  m.init_parameters(21);
  const Tensor<float> frames = random_frames<float>(10, 4, 5);
  const EncStates<float> enc = m.encode_frames(frames, 10);
  Rng cand_rng(99);
  double ar_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = static_cast<int>(cand_rng.uniform_int(1, 8));
    Hypothesis cand;
    for (int i = 0; i < n; ++i)
      cand.tokens.push_back(
          static_cast<int>(cand_rng.uniform_int(kTgtCoreBase, 11)));
    const Hypothesis best = select_candidate_ar(m, enc, {cand});
    double sum = 0.0;
    std::vector<int> prefix = {kBos};
    for (int i = 0; i <= n; ++i) {
      const Tensor<float> logp = log_softmax(m.ar_logits(enc, prefix), 1);
      const int gold = (i < n) ? cand.tokens[i] : kEos;
      sum += logp.at(static_cast<int>(prefix.size()) - 1, gold);
      prefix.push_back(gold);
    }
    ar_worst = std::max(ar_worst, std::fabs(best.ar_score - sum / (n + 1)));
  }
  if (ar_worst >= 1e-5) {
    std::ostringstream ss;
    ss << "ar rescoring worst |diff| " << ar_worst;
    detail = ss.str();
    return false;
  }
  note("ar rescoring done");

  // (c) a beam wider than the whole candidate pool equals exhaustive argmax.
  ModelConfig toy_cfg = tiny_config();
  toy_cfg.v_tgt = kTgtCoreBase + 4;
  OrthrosModel<float> toy(toy_cfg);
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    toy.init_parameters(seed);
    const Tensor<float> fr = random_frames<float>(9, 4, seed + 50);
    const EncStates<float> e2 = toy.encode_frames(fr, 9);
    std::vector<std::vector<int>> space = {{}};
    for (int a = 0; a < 4; ++a) {
      space.push_back({kTgtCoreBase + a});
      for (int b2 = 0; b2 < 4; ++b2)
        space.push_back({kTgtCoreBase + a, kTgtCoreBase + b2});
    }
    std::vector<int> best_tokens;
    double best_score = -1e30;
    for (const std::vector<int>& s : space) {
      std::vector<int> prefix = {kBos};
      prefix.insert(prefix.end(), s.begin(), s.end());
      const Tensor<float> logp = log_softmax(toy.ar_logits(e2, prefix), 1);
      double sum = 0.0;
      for (size_t i = 0; i < s.size(); ++i)
        sum += logp.at(static_cast<int>(i), s[i]);
      sum += logp.at(static_cast<int>(s.size()), kEos);
      const double score = sum / static_cast<double>(s.size() + 1);
      if (score > best_score || (score == best_score && s < best_tokens)) {
        best_score = score;
        best_tokens = s;
      }
    }
    for (int b : {85, 128}) {
      const Hypothesis h = beam_search_ar(toy, e2, b, 3);
      if (h.truncated || h.tokens != best_tokens ||
          std::fabs(h.ar_score - best_score) > 1e-9) {
        std::ostringstream ss;
        ss << "beam b=" << b << " diverged from exhaustive argmax at seed "
           << seed;
        detail = ss.str();
        return false;
      }
    }
  }

  const double secs = seconds_since(start);
  std::ostringstream ss;
  ss << checked << " ctc instances (worst |diff| " << ctc_worst
     << "), 100 ar candidates (worst |diff| " << ar_worst
     << "), exhaustive beam 5/5, " << secs << "s";
  detail = ss.str();
  return secs < 60.0;
}

// --- criterion 2: finite differences across every loss term --------------

bool check_gradients(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig cfg = tiny_config();
  OrthrosModel<double> m(cfg);
  m.init_parameters(66);
  Tensor<double> frames = random_frames<double>(12, 4, 26);
  std::vector<int> y = {4, 5, 6, 7};
  std::vector<int> y_src = {2, 3};
  TrainConfig tc;

  std::vector<Parameter<double>*> params;
  for (Parameter<double>& p : m.params()) params.push_back(&p);

  std::ostringstream ss;
  bool ok = true;
  auto check_loss = [&](const char* what,
                        const std::function<int(Tape<double>&)>& build,
                        int coords) {
    Rng pick(987);
    auto fn = [&](bool with_grad) {
      Tape<double> t;
      int loss = build(t);
      if (with_grad) t.backward(loss);
      return t.val(loss)[0];
    };
    const double err = oracles::max_fd_rel_err(params, fn, coords, 1e-5, pick);
    ss << what << "=" << err << " ";
    ok = ok && err < 1e-4;
    note(std::string("fd ") + what + " done");
  };

  check_loss("cmlm",
             [&](Tape<double>& t) {
               Rng r(5);
               MaskedTarget mt = sample_mask(y, r);
               EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
               return cmlm_loss(t, m, enc, mt, nullptr);
             },
             50);
  check_loss("smart",
             [&](Tape<double>& t) {
               Rng r(6);
               EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
               return smart_loss(t, m, enc, y, r, nullptr);
             },
             50);
  check_loss("ar",
             [&](Tape<double>& t) {
               EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
               return ar_loss(t, m, enc, y, 0.1, nullptr);
             },
             50);
  check_loss("length",
             [&](Tape<double>& t) {
               EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
               return length_loss(t, m.length_logits_t(t, enc), 4);
             },
             50);
  check_loss("ctc",
             [&](Tape<double>& t) {
               EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
               return ctc_loss(t, m.ctc_logits_t(t, enc), y_src);
             },
             50);
  check_loss("total",
             [&](Tape<double>& t) {
               Rng r(5);
               MaskedTarget mt = sample_mask(y, r);
               EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
               LossTerms terms;
               terms.cmlm = cmlm_loss(t, m, enc, mt, nullptr);
               terms.ar = ar_loss(t, m, enc, y, tc.label_smoothing, nullptr);
               terms.lp = length_loss(t, m.length_logits_t(t, enc), 4);
               terms.asr = ctc_loss(t, m.ctc_logits_t(t, enc), y_src);
               return total_loss(t, terms, tc);
             },
             60);

  const double secs = seconds_since(start);
  ss << "(50+ coords each, rel tol 1e-4, " << secs << "s)";
  detail = ss.str();
  return ok && secs < 120.0;
}

// --- criterion 3: mask-predict contracts ---------------------------------

bool check_mask_predict(std::string& detail) {
  for (int t = 0; t < 10; ++t) {
    if (mask_schedule(10, 10, t) != 10 - t) {
      detail = "schedule mismatch at t=" + std::to_string(t);
      return false;
    }
  }

  ModelConfig cfg = tiny_config();
  OrthrosModel<float> m(cfg);
  m.init_parameters(7);
  const Tensor<float> frames = random_frames<float>(12, 4, 11);
  const EncStates<float> enc = m.encode_frames(frames, 12);

  for (int T : {1, 3, 10}) {
    DecodeStats stats;
    const Hypothesis h = mask_predict(m, enc, 6, T, false, &stats);
    if (stats.nar_passes != T || stats.ar_passes != 0) {
      detail = "pass count off at T=" + std::to_string(T);
      return false;
    }
    if (h.length() != 6) {
      detail = "length drifted";
      return false;
    }
    for (int tok : h.tokens)
      if (tok < kTgtCoreBase || tok >= cfg.v_tgt) {
        detail = "special token leaked into output";
        return false;
      }
  }

  // The full pipeline costs l*T non-causal passes, plus l causal passes
  // when ar selection is on.
  for (bool sel : {false, true}) {
    DecodeConfig dc;
    dc.iterations = 4;
    dc.length_beam = 3;
    dc.use_ar_selection = sel;
    dc.max_len = cfg.n_max;
    DecodeStats stats;
    translate(m, frames, dc, &stats);
    if (stats.encoder_passes != 1 || stats.nar_passes != 12 ||
        stats.ar_passes != (sel ? 3 : 0)) {
      detail = "translate pass accounting off";
      return false;
    }
  }

  // T=1 degenerates to the argmax of one all-MASK pass.
  const Hypothesis h1 = mask_predict(m, enc, 5, 1, false);
  const std::vector<int> obs(5, kMask);
  const Tensor<float> probs = softmax(m.nar_logits(enc, obs), 1);
  for (int p = 0; p < 5; ++p) {
    int best = kTgtCoreBase;
    for (int j = kTgtCoreBase + 1; j < probs.cols(); ++j)
      if (probs.at(p, j) > probs.at(p, best)) best = j;
    if (h1.tokens[p] != best ||
        h1.confidences[p] != static_cast<double>(probs.at(p, best))) {
      detail = "T=1 differs from single-shot argmax";
      return false;
    }
  }

  for (bool smart : {false, true}) {
    const Hypothesis a = mask_predict(m, enc, 7, 4, smart);
    const Hypothesis b = mask_predict(m, enc, 7, 4, smart);
    if (a.tokens != b.tokens || a.confidences != b.confidences) {
      detail = "nondeterministic decode";
      return false;
    }
  }

  detail = "schedule 10..1, pass counts exact, T=1 single-shot, no specials, "
           "deterministic";
  return true;
}

// --- criterion 4: directional quality ------------------------------------

bool check_directional(std::string& detail) {
  const TaskSpec spec = analog_spec();
  note("building 5000/200/500 corpus");
  CorpusSplits sp = build_corpus(spec, 5000, 200, 500);
  g_test = sp.test;

  const auto train_start = std::chrono::steady_clock::now();
  const ModelConfig base;

  note("training mt teacher (2500 steps)");
  OrthrosModel<float> teacher(model_config_for_task(Task::kMt, spec, base));
  teacher.init_parameters(1);
  train(teacher, sp.train, sp.dev, Task::kMt, desk_schedule(2500, 1));

  note("distilling train+dev through the teacher");
  const Corpus kd_train = distill_dataset(teacher, sp.train, 4);
  const Corpus kd_dev = distill_dataset(teacher, sp.dev, 4);

  std::vector<std::unique_ptr<OrthrosModel<float>>> kd_models;
  std::vector<std::unique_ptr<OrthrosModel<float>>> raw_models;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    note("training distilled student, seed " + std::to_string(seed));
    auto kd = std::make_unique<OrthrosModel<float>>(
        model_config_for_task(Task::kStOrthros, spec, base));
    kd->init_parameters(seed);
    train(*kd, kd_train, kd_dev, Task::kStOrthros, desk_schedule(2500, seed));
    kd_models.push_back(std::move(kd));

    note("training raw student, seed " + std::to_string(seed));
    auto raw = std::make_unique<OrthrosModel<float>>(
        model_config_for_task(Task::kStOrthros, spec, base));
    raw->init_parameters(seed);
    train(*raw, sp.train, sp.dev, Task::kStOrthros, desk_schedule(2500, seed));
    raw_models.push_back(std::move(raw));
  }
  const double train_minutes = seconds_since(train_start) / 60.0;

  auto nar = [&](int iterations, int length_beam, bool sel) {
    DecodeConfig dc;
    dc.iterations = iterations;
    dc.length_beam = length_beam;
    dc.use_ar_selection = sel;
    dc.max_len = base.n_max;
    return dc;
  };

  int votes_refine = 0;
  int votes_sel = 0;
  int votes_kd = 0;
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(2);
  for (int i = 0; i < 3; ++i) {
    note("decoding test set, seed " + std::to_string(i + 1));
    const double b_t1 = decode_bleu(*kd_models[i], sp.test, nar(1, 1, false));
    const double b_t10 = decode_bleu(*kd_models[i], sp.test, nar(10, 1, false));
    const double b_l9 = decode_bleu(*kd_models[i], sp.test, nar(4, 9, false));
    const double b_l9ar = decode_bleu(*kd_models[i], sp.test, nar(4, 9, true));
    const double b_raw = decode_bleu(*raw_models[i], sp.test, nar(4, 9, false));
    votes_refine += b_t10 >= b_t1;
    votes_sel += b_l9ar >= b_l9;
    votes_kd += b_l9 >= b_raw;
    ss << "s" << (i + 1) << " T1/T10/l9/l9+ar/raw " << b_t1 << "/" << b_t10
       << "/" << b_l9 << "/" << b_l9ar << "/" << b_raw << "; ";
  }

  g_student = std::move(kd_models[0]);

  ss << "votes refine/sel/kd " << votes_refine << "/" << votes_sel << "/"
     << votes_kd << " of 3; trained in " << train_minutes << " min";
  detail = ss.str();
  return votes_refine >= 2 && votes_sel >= 2 && votes_kd >= 2 &&
         train_minutes <= 30.0;
}

// --- criterion 5: latency ordering ---------------------------------------

bool check_latency(std::string& detail) {
  if (!g_student || g_test.items.empty()) {
    detail = "no trained student available (criterion 4 failed earlier)";
    return false;
  }
  Corpus bench_set;
  bench_set.spec = g_test.spec;
  bench_set.items.assign(g_test.items.begin(), g_test.items.begin() + 50);

  auto cell = [&](const std::string& label, const std::string& mode, int T,
                  int l, bool sel) {
    DecodeConfig dc;
    dc.mode = mode;
    dc.iterations = T;
    dc.length_beam = l;
    dc.beam = 4;
    dc.use_ar_selection = sel;
    dc.max_len = g_student->config().n_max;
    note("timing " + label);
    BenchResult r = bench_latency(*g_student, bench_set, dc, 5, 1);
    r.label = label;
    return r;
  };

  const BenchResult ctc = cell("ctc", "ctc", 10, 9, false);
  const BenchResult nar4 = cell("nar T=4 l=9", "nar", 4, 9, false);
  const BenchResult nar10 = cell("nar T=10 l=9", "nar", 10, 9, false);
  const BenchResult nar10ar = cell("nar T=10 l=9 +ar", "nar", 10, 9, true);
  const BenchResult nar4l1 = cell("nar T=4 l=1", "nar", 4, 1, false);
  const BenchResult ar4 = cell("ar b=4", "ar", 10, 9, false);

  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(2);
  bool ok = true;
  auto faster = [&](const BenchResult& a, const BenchResult& b) {
    const bool holds = b.mean_ms - a.mean_ms >= std::max(a.std_ms, b.std_ms);
    ok = ok && holds;
  };
  faster(ctc, nar4);
  faster(nar4, nar10);
  faster(nar10, nar10ar);
  faster(nar4l1, ar4);
  for (const BenchResult* r : {&ctc, &nar4, &nar10, &nar10ar, &nar4l1, &ar4})
    ss << r->label << " " << r->mean_ms << "±" << r->std_ms << "ms; ";
  ss << (ok ? "all orderings hold by >=1 sd" : "an ordering failed");
  detail = ss.str();
  return ok;
}

// --- criterion 6: smart pass-1 truncation --------------------------------

bool check_smart_truncation(std::string& detail) {
  ModelConfig cfg = tiny_config();
  OrthrosModel<double> m(cfg);
  m.init_parameters(7);
  Tensor<double> frames = random_frames<double>(12, 4, 13);
  std::vector<int> y = {4, 5, 6, 7, 8};

  auto run = [&](bool in_graph) {
    m.zero_grads();
    Rng mask_rng(501);
    Tape<double> t;
    EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
    SmartOpts opts;
    opts.pass1_in_graph = in_graph;
    int loss = smart_loss(t, m, enc, y, mask_rng, nullptr, opts);
    t.backward(loss);
    return std::make_pair(t.val(loss)[0], grad_snapshot(m));
  };
  auto a = run(false);
  auto b = run(true);
  if (std::memcmp(&a.first, &b.first, sizeof(double)) != 0 ||
      !grads_bitwise_equal(a.second, b.second)) {
    detail = "gradients diverge without dropout";
    return false;
  }

  // Same claim with dropout active elsewhere in the graph.
  cfg.dropout = 0.1;
  OrthrosModel<double> md(cfg);
  md.init_parameters(8);
  Tensor<double> fr2 = random_frames<double>(12, 4, 14);
  std::vector<int> y2 = {4, 5, 6, 7};
  auto run_drop = [&](bool in_graph) {
    md.zero_grads();
    Rng mask_rng(502);
    Rng drop(777);
    Tape<double> t;
    EncodeOut enc = md.encode_frames_t(t, fr2, 12, &drop);
    SmartOpts opts;
    opts.pass1_in_graph = in_graph;
    int loss = smart_loss(t, md, enc, y2, mask_rng, &drop, opts);
    t.backward(loss);
    return grad_snapshot(md);
  };
  if (!grads_bitwise_equal(run_drop(false), run_drop(true))) {
    detail = "gradients diverge with dropout";
    return false;
  }
  detail = "loss and all gradients bitwise equal, double precision";
  return true;
}

// --- criterion 7: observed positions carry no loss -----------------------

bool check_observed_support(std::string& detail) {
  ModelConfig cfg = tiny_config();
  OrthrosModel<double> m(cfg);
  m.init_parameters(42);
  Tensor<double> frames = random_frames<double>(12, 4, 10);
  MaskedTarget mt;
  mt.y = {4, 5, 6, 7, 8};
  mt.y_obs = {kMask, 5, kMask, 7, 8};
  mt.mask = {1, 0, 1, 0, 0};

  Tape<double> t;
  EncodeOut enc = m.encode_frames_t(t, frames, 12, nullptr);
  int logits = m.nar_logits_t(t, enc, mt.y_obs, nullptr);
  int base = cmlm_loss_on_logits(t, logits, mt);

  Tensor<double> bump(5, cfg.v_tgt);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < cfg.v_tgt; ++j)
      bump.at(i, j) = mt.mask[i] ? 0.0 : 7.7 * (1 + i) - 0.3 * j;
  int pert = cmlm_loss_on_logits(t, t.add(logits, t.leaf(bump)), mt);

  const double diff = t.val(base)[0] - t.val(pert)[0];
  if (diff != 0.0) {
    std::ostringstream ss;
    ss << "loss moved by " << diff;
    detail = ss.str();
    return false;
  }
  detail = "large observed-position logit perturbation moves the loss by "
           "exactly 0";
  return true;
}

// --- criterion 8: bleu reference values ----------------------------------

bool check_bleu(std::string& detail) {
  const TokenSeq hyp = {1, 2, 3, 4, 5};
  const TokenSeq ref = {1, 2, 3, 4};
  const double overlap = corpus_bleu({hyp}, {{ref}});
  const double identity = corpus_bleu({ref, hyp}, {{ref}, {hyp}});
  const double disjoint = corpus_bleu({{10, 11, 12, 13}}, {{ref}});

  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  ss << "overlap " << overlap << " (want 66.8740), identity " << identity
     << ", disjoint " << disjoint;
  detail = ss.str();
  return std::fabs(overlap - 66.8740304976422) < 0.01 &&
         std::fabs(identity - 100.0) < 0.01 && std::fabs(disjoint) < 0.01;
}

// --- criterion 9: serialization ------------------------------------------

bool check_serialization(std::string& detail) {
  const fs::path dir = fs::temp_directory_path() / "orthros_acceptance";
  fs::create_directories(dir);

  // Checkpoint round trip.
  OrthrosModel<float> a(tiny_config());
  a.init_parameters(3);
  const std::string pa = (dir / "a.ckpt").string();
  const std::string pb = (dir / "b.ckpt").string();
  save_checkpoint(pa, a);
  const OrthrosModel<float> loaded = load_checkpoint(pa);
  save_checkpoint(pb, loaded);
  if (file_bytes(pa) != file_bytes(pb)) {
    detail = "checkpoint round trip not byte-identical";
    return false;
  }

  // Dataset round trip.
  TaskSpec spec = analog_spec();
  CorpusSplits sp = build_corpus(spec, 8, 1, 1);
  const std::string d1 = (dir / "d1.bin").string();
  const std::string d2 = (dir / "d2.bin").string();
  save_corpus(d1, sp.train);
  save_corpus(d2, load_corpus(d1));
  if (file_bytes(d1) != file_bytes(d2)) {
    detail = "dataset round trip not byte-identical";
    return false;
  }

  // Averaging: identity on a single input, symmetry in the input order.
  OrthrosModel<float> c(tiny_config());
  c.init_parameters(4);
  const std::string pc = (dir / "c.ckpt").string();
  save_checkpoint(pc, c);
  const std::string avg_self = (dir / "avg_self.ckpt").string();
  save_checkpoint(avg_self, average_checkpoints({pa}));
  if (file_bytes(avg_self) != file_bytes(pa)) {
    detail = "single-input average is not the identity";
    return false;
  }
  const std::string ac = (dir / "ac.ckpt").string();
  const std::string ca = (dir / "ca.ckpt").string();
  save_checkpoint(ac, average_checkpoints({pa, pc}));
  save_checkpoint(ca, average_checkpoints({pc, pa}));
  if (file_bytes(ac) != file_bytes(ca)) {
    detail = "averaging is not symmetric";
    return false;
  }

  detail = "checkpoint + dataset round trips byte-identical; averaging "
           "identity and symmetry exact";
  return true;
}

// --- learnability invariant ----------------------------------------------

bool check_learnability(std::string& detail) {
  TaskSpec spec = analog_spec();
  spec.synonyms = 1;  // s=1: each transcription has exactly one translation
  note("building deterministic 5000/200/500 corpus");
  CorpusSplits sp = build_corpus(spec, 5000, 200, 500);

  note("training ar baseline (2000 steps)");
  OrthrosModel<float> m(model_config_for_task(Task::kStAr, spec, ModelConfig{}));
  m.init_parameters(1);
  train(m, sp.train, sp.dev, Task::kStAr, desk_schedule(2000, 1));

  note("beam-decoding held-out set");
  DecodeConfig dc;
  dc.mode = "ar";
  dc.beam = 4;
  dc.max_len = m.config().n_max;
  int exact = 0;
  for (const Triplet& it : sp.test.items)
    exact += translate(m, it.frames, dc).tokens == it.translation;
  const double rate = static_cast<double>(exact) / sp.test.items.size();

  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(3);
  ss << "exact match " << rate << " on 500 held-out sentences (need >= 0.9)";
  detail = ss.str();
  return rate >= 0.9;
}

// --- refinement convergence probe ----------------------------------------

bool check_refinement_convergence(std::string& detail) {
  if (!g_student || g_test.items.size() < 64) {
    detail = "no trained student available (criterion 4 failed earlier)";
    return false;
  }
  const int T = 10;
  std::vector<double> avg(T, 0.0);
  for (int i = 0; i < 64; ++i) {
    const Triplet& it = g_test.items[i];
    const EncStates<float> enc =
        g_student->encode_frames(it.frames, it.frames.rows());
    const int n_hat = length_candidates(g_student->length_logits(enc), 1)[0];
    std::vector<double> changed;
    mask_predict(*g_student, enc, n_hat, T, false, nullptr, &changed);
    for (int t = 0; t < T; ++t) avg[t] += changed[t];
  }
  for (double& v : avg) v /= 64.0;

  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(3);
  bool ok = avg[0] == 1.0;
  ss << "mean changed fraction per iteration:";
  for (int t = 0; t < T; ++t) {
    ss << " " << avg[t];
    if (t > 0 && avg[t] > avg[t - 1] + 0.02) ok = false;
  }
  detail = ss.str();
  return ok;
}

int run_all() {
  const auto start = std::chrono::steady_clock::now();
  run_check("1. oracle equivalences (ctc enumeration, ar rescoring, "
            "exhaustive beam)",
            check_oracles);
  run_check("2. finite-difference gradients for every loss term",
            check_gradients);
  run_check("3. mask-predict contracts", check_mask_predict);
  run_check("4. directional quality: refinement, ar selection, distillation "
            "(3 seeds)",
            check_directional);
  run_check("5. latency ordering across decode modes", check_latency);
  run_check("6. smart pass-1 truncation is gradient-exact",
            check_smart_truncation);
  run_check("7. observed-position logits do not move the cmlm loss",
            check_observed_support);
  run_check("8. bleu reference values", check_bleu);
  run_check("9. byte-exact serialization and checkpoint averaging",
            check_serialization);
  run_check("learnability: ar baseline solves the deterministic task",
            check_learnability);
  run_check("refinement convergence: changed fraction is non-increasing",
            check_refinement_convergence);

  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / "orthros_acceptance", ec);

  std::fprintf(stderr, "acceptance finished in %.1f min\n",
               seconds_since(start) / 60.0);
  if (g_failed == 0) {
    std::printf("acceptance: all checks passed\n");
    return 0;
  }
  std::printf("acceptance: %d check(s) failed\n", g_failed);
  return 1;
}

}  // namespace
}  // namespace orthros

int main() { return orthros::run_all(); }
