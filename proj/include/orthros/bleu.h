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

// Corpus BLEU over integer token sequences: clipped modified n-gram
// precisions, geometric mean, multi-reference closest-length brevity
// penalty. No corpus-level smoothing.

#ifndef ORTHROS_BLEU_H_
#define ORTHROS_BLEU_H_

#include <cstdint>
#include <vector>

namespace orthros {

using TokenSeq = std::vector<int>;

struct BleuBreakdown {
  double score = 0.0;               // percentage in [0, 100]
  std::vector<double> precisions;   // modified n-gram precisions, n=1..max_n
  double brevity_penalty = 1.0;
  int64_t hyp_len = 0;
  int64_t ref_len = 0;              // sum of closest-length references
};

// Full corpus statistics; refs[i] holds one or more references for hyps[i].
BleuBreakdown corpus_bleu_detail(const std::vector<TokenSeq>& hyps,
                                 const std::vector<std::vector<TokenSeq>>& refs,
                                 int max_n = 4);

// Percentage score only.
double corpus_bleu(const std::vector<TokenSeq>& hyps,
                   const std::vector<std::vector<TokenSeq>>& refs,
                   int max_n = 4);

// Debugging variant for single sentences: add-one smoothing on the n>=2
// precisions (the corpus score above is unsmoothed).
double sentence_bleu_smoothed(const TokenSeq& hyp,
                              const std::vector<TokenSeq>& refs,
                              int max_n = 4);

}  // namespace orthros

#endif  // ORTHROS_BLEU_H_
