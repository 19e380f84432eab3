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

#include "orthros/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "orthros/checkpoint.h"
#include "orthros/decode.h"
#include "orthros/kvconfig.h"
#include "orthros/optim.h"
#include "orthros/vocab.h"

namespace orthros {
namespace {

constexpr int kIdShift = kTgtCoreBase - kSrcCoreBase;

// Per-sequence loss values for metrics aggregation.
struct SeqLossValues {
  double total = 0.0;
  double cmlm = 0.0;
  double ar = 0.0;
  double lp = 0.0;
  double asr = 0.0;
};

// Builds the task objective for one sequence on tape `t` and returns the
// scalar loss node; fills `vals` (requires a later t.val on the nodes, so
// values are read here while the tape is alive).
int sequence_loss(Tape<float>& t, OrthrosModel<float>& m, const Triplet& ex,
                  Task task, const TrainConfig& cfg, Rng& mask_rng, Rng* drop,
                  SeqLossValues* vals) {
  auto scalar = [&](int node) {
    return static_cast<double>(t.val(node)[0]);
  };
  int total = -1;
  switch (task) {
    case Task::kStOrthros:
    case Task::kAsr: {
      const std::vector<int> y = task == Task::kAsr
                                     ? map_src_to_tgt(ex.transcription)
                                     : ex.translation;
      const EncodeOut enc =
          m.encode_frames_t(t, ex.frames, ex.frames.rows(), drop);
      LossTerms terms;
      if (cfg.use_smart) {
        terms.cmlm = smart_loss(t, m, enc, y, mask_rng, drop);
      } else {
        terms.cmlm = cmlm_loss(t, m, enc, sample_mask(y, mask_rng), drop);
      }
      terms.ar = ar_loss(t, m, enc, y, cfg.label_smoothing, drop);
      terms.lp = length_loss(t, m.length_logits_t(t, enc),
                             static_cast<int>(y.size()));
      terms.asr = ctc_loss(t, m.ctc_logits_t(t, enc), ex.transcription);
      total = total_loss(t, terms, cfg);
      if (vals != nullptr) {
        vals->cmlm = scalar(terms.cmlm);
        vals->ar = scalar(terms.ar);
        vals->lp = scalar(terms.lp);
        vals->asr = scalar(terms.asr);
      }
      break;
    }
    case Task::kStAr:
    case Task::kMt: {
      const EncodeOut enc =
          task == Task::kMt
              ? m.encode_text_t(t, ex.transcription, drop)
              : m.encode_frames_t(t, ex.frames, ex.frames.rows(), drop);
      total = ar_loss(t, m, enc, ex.translation, cfg.label_smoothing, drop);
      if (vals != nullptr) vals->ar = scalar(total);
      break;
    }
    case Task::kStCtc: {
      const EncodeOut enc =
          m.encode_frames_t(t, ex.frames, ex.frames.rows(), drop);
      total = ctc_loss(t, m.ctc_logits_t(t, enc),
                       map_tgt_to_src(ex.translation));
      if (vals != nullptr) vals->asr = scalar(total);
      break;
    }
  }
  if (vals != nullptr) vals->total = scalar(total);
  return total;
}

std::string checkpoint_name(const std::string& out_dir, int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_step%06d.ckpt", step);
  return (std::filesystem::path(out_dir) / buf).string();
}

}  // namespace

Task parse_task(const std::string& name) {
  if (name == "st-orthros") return Task::kStOrthros;
  if (name == "asr") return Task::kAsr;
  if (name == "mt") return Task::kMt;
  if (name == "st-ar") return Task::kStAr;
  if (name == "st-ctc") return Task::kStCtc;
  check(false, "train: unknown task");
  return Task::kStOrthros;
}

std::string task_name(Task task) {
  switch (task) {
    case Task::kStOrthros: return "st-orthros";
    case Task::kAsr: return "asr";
    case Task::kMt: return "mt";
    case Task::kStAr: return "st-ar";
    case Task::kStCtc: return "st-ctc";
  }
  return "";
}

ModelConfig model_config_for_task(Task task, const TaskSpec& spec,
                                  const ModelConfig& base) {
  ModelConfig cfg = base;
  cfg.input_dim = spec.input_dim;
  cfg.frontend = task == Task::kMt ? "text" : "frames";
  switch (task) {
    case Task::kStOrthros:
    case Task::kStAr:
    case Task::kMt:
      cfg.v_src = kSrcCoreBase + spec.v_src_core;
      cfg.v_tgt = kTgtCoreBase + spec.v_tgt_core;
      break;
    case Task::kAsr:
      cfg.v_src = kSrcCoreBase + spec.v_src_core;
      cfg.v_tgt = kTgtCoreBase + spec.v_src_core;
      break;
    case Task::kStCtc:
      cfg.v_src = kSrcCoreBase + spec.v_tgt_core;
      cfg.v_tgt = kTgtCoreBase + spec.v_tgt_core;
      break;
  }
  return cfg;
}

std::vector<int> map_src_to_tgt(const std::vector<int>& src) {
  std::vector<int> out(src.size());
  for (size_t i = 0; i < src.size(); ++i) {
    check(src[i] >= kSrcCoreBase, "train: source token out of range");
    out[i] = src[i] + kIdShift;
  }
  return out;
}

std::vector<int> map_tgt_to_src(const std::vector<int>& tgt) {
  std::vector<int> out(tgt.size());
  for (size_t i = 0; i < tgt.size(); ++i) {
    check(tgt[i] >= kTgtCoreBase, "train: target token out of range");
    out[i] = tgt[i] - kIdShift;
  }
  return out;
}

RunConfig load_run_config(const std::string& path) {
  const KvConfig kv = KvConfig::from_file(path);
  RunConfig rc;
  ModelConfig& m = rc.model;
  m.d_model = static_cast<int>(kv.get_int("d_model", m.d_model));
  m.d_ff = static_cast<int>(kv.get_int("d_ff", m.d_ff));
  m.n_heads = static_cast<int>(kv.get_int("n_heads", m.n_heads));
  m.n_enc_layers = static_cast<int>(kv.get_int("n_enc_layers", m.n_enc_layers));
  m.n_dec_layers = static_cast<int>(kv.get_int("n_dec_layers", m.n_dec_layers));
  m.n_max = static_cast<int>(kv.get_int("n_max", m.n_max));
  m.dropout = kv.get_double("dropout", m.dropout);
  TrainConfig& tc = rc.train;
  tc.lambda_ar = kv.get_double("lambda_ar", tc.lambda_ar);
  tc.lambda_lp = kv.get_double("lambda_lp", tc.lambda_lp);
  tc.lambda_asr = kv.get_double("lambda_asr", tc.lambda_asr);
  tc.use_smart = kv.get_bool("use_smart", tc.use_smart);
  tc.use_seq_kd = kv.get_bool("use_seq_kd", tc.use_seq_kd);
  tc.label_smoothing = kv.get_double("label_smoothing", tc.label_smoothing);
  tc.batch_size = static_cast<int>(kv.get_int("batch_size", tc.batch_size));
  tc.accum_steps = static_cast<int>(kv.get_int("accum_steps", tc.accum_steps));
  tc.max_steps = static_cast<int>(kv.get_int("max_steps", tc.max_steps));
  tc.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(tc.seed)));
  tc.keep_checkpoints =
      static_cast<int>(kv.get_int("keep_checkpoints", tc.keep_checkpoints));
  tc.warmup_steps =
      static_cast<int>(kv.get_int("warmup_steps", tc.warmup_steps));
  tc.lr_constant = kv.get_double("lr_constant", tc.lr_constant);
  kv.require_consumed();
  tc.validate();
  return rc;
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "d_model = " << cfg.model.d_model << "\n";
  out << "d_ff = " << cfg.model.d_ff << "\n";
  out << "n_heads = " << cfg.model.n_heads << "\n";
  out << "n_enc_layers = " << cfg.model.n_enc_layers << "\n";
  out << "n_dec_layers = " << cfg.model.n_dec_layers << "\n";
  out << "n_max = " << cfg.model.n_max << "\n";
  out << "dropout = " << format_double(cfg.model.dropout) << "\n";
  out << "lambda_ar = " << format_double(cfg.train.lambda_ar) << "\n";
  out << "lambda_lp = " << format_double(cfg.train.lambda_lp) << "\n";
  out << "lambda_asr = " << format_double(cfg.train.lambda_asr) << "\n";
  out << "use_smart = " << (cfg.train.use_smart ? "true" : "false") << "\n";
  out << "use_seq_kd = " << (cfg.train.use_seq_kd ? "true" : "false") << "\n";
  out << "label_smoothing = " << format_double(cfg.train.label_smoothing)
      << "\n";
  out << "batch_size = " << cfg.train.batch_size << "\n";
  out << "accum_steps = " << cfg.train.accum_steps << "\n";
  out << "max_steps = " << cfg.train.max_steps << "\n";
  out << "seed = " << cfg.train.seed << "\n";
  out << "keep_checkpoints = " << cfg.train.keep_checkpoints << "\n";
  out << "warmup_steps = " << cfg.train.warmup_steps << "\n";
  out << "lr_constant = " << format_double(cfg.train.lr_constant) << "\n";
  return out.str();
}

std::string format_metrics(const MetricsRecord& r) {
  std::ostringstream out;
  out << "step=" << r.step << " lr=" << format_double(r.lr)
      << " loss_total=" << format_double(r.loss_total)
      << " loss_cmlm=" << format_double(r.loss_cmlm)
      << " loss_ar=" << format_double(r.loss_ar)
      << " loss_lp=" << format_double(r.loss_lp)
      << " loss_asr=" << format_double(r.loss_asr)
      << " wall_ms=" << format_double(r.wall_ms);
  return out.str();
}

MetricsRecord parse_metrics(const std::string& line) {
  MetricsRecord r;
  std::istringstream in(line);
  std::string field;
  int seen = 0;
  while (in >> field) {
    const size_t eq = field.find('=');
    check(eq != std::string::npos, "metrics: malformed field");
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "step") {
      r.step = static_cast<int>(parse_int(val, "metrics: step"));
    } else if (key == "lr") {
      r.lr = parse_double(val, "metrics: lr");
    } else if (key == "loss_total") {
      r.loss_total = parse_double(val, "metrics: loss_total");
    } else if (key == "loss_cmlm") {
      r.loss_cmlm = parse_double(val, "metrics: loss_cmlm");
    } else if (key == "loss_ar") {
      r.loss_ar = parse_double(val, "metrics: loss_ar");
    } else if (key == "loss_lp") {
      r.loss_lp = parse_double(val, "metrics: loss_lp");
    } else if (key == "loss_asr") {
      r.loss_asr = parse_double(val, "metrics: loss_asr");
    } else if (key == "wall_ms") {
      r.wall_ms = parse_double(val, "metrics: wall_ms");
    } else {
      check(false, "metrics: unknown field");
    }
    ++seen;
  }
  check(seen == 8, "metrics: missing fields");
  return r;
}

void copy_params_with_prefix(OrthrosModel<float>& dst,
                             const OrthrosModel<float>& src,
                             const std::vector<std::string>& prefixes) {
  for (const Parameter<float>& sp : src.params()) {
    bool wanted = false;
    for (const std::string& p : prefixes)
      wanted = wanted || sp.name.rfind(p, 0) == 0;
    if (!wanted) continue;
    Parameter<float>* dp = dst.find(sp.name);
    check(dp != nullptr, "init: missing parameter in target model");
    check(dp->value.same_shape(sp.value), "init: parameter shape mismatch");
    dp->value = sp.value;
  }
}

double validation_loss(OrthrosModel<float>& m, const Corpus& dev, Task task,
                       const TrainConfig& cfg) {
  check(!dev.items.empty(), "train: empty validation set");
  Rng mask_rng = Rng(cfg.seed).fork(0x7E57);
  double sum = 0.0;
  for (const Triplet& ex : dev.items) {
    Tape<float> t;
    SeqLossValues vals;
    sequence_loss(t, m, ex, task, cfg, mask_rng, nullptr, &vals);
    sum += vals.total;
  }
  return sum / static_cast<double>(dev.items.size());
}

TrainResult train(OrthrosModel<float>& m, const Corpus& train_data,
                  const Corpus& dev_data, Task task, const TrainConfig& cfg,
                  const std::string& out_dir, std::ostream* metrics_out,
                  int val_interval) {
  cfg.validate();
  check(!train_data.items.empty(), "train: empty dataset");
  check(val_interval >= 0, "train: negative validation interval");

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  if (cfg.max_steps == 0) return result;
  if (val_interval == 0) val_interval = std::max(1, cfg.max_steps / 5);

  Rng base(cfg.seed);
  Rng order_rng = base.fork(0xDA7A);
  Rng mask_rng = base.fork(0x3A5C);
  Rng drop_rng = base.fork(0xD120);

  OptimizerState<float> opt;
  opt.d_model = m.config().d_model;
  opt.warmup_steps = cfg.warmup_steps;
  opt.lr_constant = cfg.lr_constant;

  std::vector<int> order(train_data.items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  size_t pos = order.size();  // forces a shuffle on first use

  const bool keep = !out_dir.empty() && !dev_data.items.empty();
  if (keep) std::filesystem::create_directories(out_dir);
  // (validation loss, checkpoint path), best first.
  std::vector<std::pair<double, std::string>> kept;

  const int seqs_per_step = cfg.batch_size * cfg.accum_steps;
  const double grad_scale = 1.0 / static_cast<double>(seqs_per_step);
  Rng* drop = m.config().dropout > 0.0 ? &drop_rng : nullptr;

  for (int step = 1; step <= cfg.max_steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    m.zero_grads();
    SeqLossValues batch_sum;
    for (int i = 0; i < seqs_per_step; ++i) {
      if (pos == order.size()) {
        order_rng.shuffle(order);
        pos = 0;
      }
      const Triplet& ex = train_data.items[order[pos++]];
      Tape<float> t;
      SeqLossValues vals;
      const int loss = sequence_loss(t, m, ex, task, cfg, mask_rng, drop, &vals);
      if (!std::isfinite(vals.total)) {
        MetricsRecord r;
        r.step = step;
        r.loss_total = vals.total;
        r.loss_cmlm = vals.cmlm;
        r.loss_ar = vals.ar;
        r.loss_lp = vals.lp;
        r.loss_asr = vals.asr;
        if (metrics_out != nullptr) *metrics_out << format_metrics(r) << "\n";
        result.metrics.push_back(r);
        check(false, "train: non-finite loss");
      }
      t.backward(loss);
      batch_sum.total += vals.total;
      batch_sum.cmlm += vals.cmlm;
      batch_sum.ar += vals.ar;
      batch_sum.lp += vals.lp;
      batch_sum.asr += vals.asr;
    }
    for (Parameter<float>& p : m.params())
      for (int64_t i = 0; i < p.grad.numel(); ++i)
        p.grad[i] = static_cast<float>(p.grad[i] * grad_scale);
    const double lr =
        noam_lr(opt.step + 1, opt.d_model, opt.warmup_steps, opt.lr_constant);
    adam_step(m.params(), opt, lr);

    MetricsRecord r;
    r.step = step;
    r.lr = lr;
    r.loss_total = batch_sum.total / seqs_per_step;
    r.loss_cmlm = batch_sum.cmlm / seqs_per_step;
    r.loss_ar = batch_sum.ar / seqs_per_step;
    r.loss_lp = batch_sum.lp / seqs_per_step;
    r.loss_asr = batch_sum.asr / seqs_per_step;
    r.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    if (metrics_out != nullptr) *metrics_out << format_metrics(r) << "\n";
    result.metrics.push_back(r);
    result.steps = step;

    const bool validate_now =
        !dev_data.items.empty() &&
        (step % val_interval == 0 || step == cfg.max_steps);
    if (validate_now) {
      const double val = validation_loss(m, dev_data, task, cfg);
      result.has_val = true;
      if (val < result.best_val_loss) result.best_val_loss = val;
      if (keep) {
        const bool room =
            static_cast<int>(kept.size()) < cfg.keep_checkpoints;
        if (room || val < kept.back().first) {
          const std::string path = checkpoint_name(out_dir, step);
          save_checkpoint(path, m);
          kept.emplace_back(val, path);
          std::sort(kept.begin(), kept.end());
          if (static_cast<int>(kept.size()) > cfg.keep_checkpoints) {
            std::filesystem::remove(kept.back().second);
            kept.pop_back();
          }
        }
      }
    }
  }
  for (const auto& [val, path] : kept) result.checkpoints.push_back(path);
  return result;
}

Corpus distill_dataset(const TeacherFn& teacher, const Corpus& data) {
  Corpus out;
  out.spec = data.spec;
  out.items.reserve(data.items.size());
  for (const Triplet& ex : data.items) {
    Triplet d = ex;
    d.translation = teacher(ex.transcription);
    check(!d.translation.empty(), "distill: teacher produced an empty translation");
    out.items.push_back(std::move(d));
  }
  return out;
}

Corpus distill_dataset(OrthrosModel<float>& teacher, const Corpus& data,
                       int beam) {
  check(teacher.config().v_src >= kSrcCoreBase + data.spec.v_src_core &&
            teacher.config().v_tgt >= kTgtCoreBase + data.spec.v_tgt_core,
        "distill: teacher vocabulary mismatch");
  const int max_len = teacher.config().n_max;
  return distill_dataset(
      [&](const std::vector<int>& src) {
        const EncStates<float> enc = teacher.encode_text(src);
        return beam_search_ar(teacher, enc, beam, max_len).tokens;
      },
      data);
}

}  // namespace orthros
