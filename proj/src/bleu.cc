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

#include "orthros/bleu.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "orthros/common.h"

namespace orthros {
namespace {

using NgramCounts = std::map<std::vector<int>, int64_t>;

NgramCounts count_ngrams(const TokenSeq& seq, int n) {
  NgramCounts out;
  const int len = static_cast<int>(seq.size());
  for (int i = 0; i + n <= len; ++i)
    ++out[std::vector<int>(seq.begin() + i, seq.begin() + i + n)];
  return out;
}

// Reference length closest to the hypothesis length; ties prefer shorter.
int64_t closest_ref_len(int64_t hyp_len, const std::vector<TokenSeq>& refs) {
  int64_t best = static_cast<int64_t>(refs[0].size());
  for (size_t i = 1; i < refs.size(); ++i) {
    const int64_t len = static_cast<int64_t>(refs[i].size());
    const int64_t d_new = std::llabs(len - hyp_len);
    const int64_t d_old = std::llabs(best - hyp_len);
    if (d_new < d_old || (d_new == d_old && len < best)) best = len;
  }
  return best;
}

// Clipped matches of hyp n-grams against the per-reference maximum.
int64_t clipped_matches(const NgramCounts& hyp_grams,
                        const std::vector<TokenSeq>& refs, int n) {
  NgramCounts cap;
  for (const TokenSeq& r : refs) {
    for (const auto& [g, c] : count_ngrams(r, n)) {
      int64_t& slot = cap[g];
      slot = std::max(slot, c);
    }
  }
  int64_t matched = 0;
  for (const auto& [g, c] : hyp_grams) {
    const auto it = cap.find(g);
    if (it != cap.end()) matched += std::min(c, it->second);
  }
  return matched;
}

}  // namespace

BleuBreakdown corpus_bleu_detail(const std::vector<TokenSeq>& hyps,
                                 const std::vector<std::vector<TokenSeq>>& refs,
                                 int max_n) {
  check(max_n >= 1, "bleu: max_n must be positive");
  check(!hyps.empty(), "bleu: empty corpus");
  check(hyps.size() == refs.size(), "bleu: hypothesis/reference count mismatch");

  std::vector<int64_t> num(max_n, 0);
  std::vector<int64_t> den(max_n, 0);
  BleuBreakdown out;
  out.precisions.assign(max_n, 0.0);
  for (size_t i = 0; i < hyps.size(); ++i) {
    check(!refs[i].empty(), "bleu: sentence with no references");
    out.hyp_len += static_cast<int64_t>(hyps[i].size());
    out.ref_len += closest_ref_len(static_cast<int64_t>(hyps[i].size()),
                                   refs[i]);
    for (int n = 1; n <= max_n; ++n) {
      const NgramCounts grams = count_ngrams(hyps[i], n);
      for (const auto& [g, c] : grams) den[n - 1] += c;
      num[n - 1] += clipped_matches(grams, refs[i], n);
    }
  }

  if (out.hyp_len == 0) return out;  // score 0, bp 1 by convention
  out.brevity_penalty = std::exp(std::min(
      0.0, 1.0 - static_cast<double>(out.ref_len) /
                     static_cast<double>(out.hyp_len)));
  bool zero = false;
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    out.precisions[n] =
        den[n] == 0 ? 0.0
                    : static_cast<double>(num[n]) / static_cast<double>(den[n]);
    if (num[n] == 0 || den[n] == 0)
      zero = true;
    else
      log_sum += std::log(out.precisions[n]);
  }
  if (!zero)
    out.score =
        100.0 * out.brevity_penalty * std::exp(log_sum / static_cast<double>(max_n));
  return out;
}

double corpus_bleu(const std::vector<TokenSeq>& hyps,
                   const std::vector<std::vector<TokenSeq>>& refs, int max_n) {
  return corpus_bleu_detail(hyps, refs, max_n).score;
}

double sentence_bleu_smoothed(const TokenSeq& hyp,
                              const std::vector<TokenSeq>& refs, int max_n) {
  check(max_n >= 1, "bleu: max_n must be positive");
  check(!refs.empty(), "bleu: sentence with no references");
  if (hyp.empty()) return 0.0;
  const int64_t c = static_cast<int64_t>(hyp.size());
  const int64_t r = closest_ref_len(c, refs);
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const NgramCounts grams = count_ngrams(hyp, n);
    int64_t den = 0;
    for (const auto& [g, cnt] : grams) den += cnt;
    int64_t num = clipped_matches(grams, refs, n);
    if (n >= 2) {
      ++num;
      ++den;
    }
    if (num == 0 || den == 0) return 0.0;
    log_sum += std::log(static_cast<double>(num) / static_cast<double>(den));
  }
  const double bp = std::exp(
      std::min(0.0, 1.0 - static_cast<double>(r) / static_cast<double>(c)));
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

}  // namespace orthros
