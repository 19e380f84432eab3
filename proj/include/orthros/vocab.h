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

#ifndef ORTHROS_VOCAB_H_
#define ORTHROS_VOCAB_H_

#include <string>
#include <unordered_map>
#include <vector>

#include "orthros/common.h"

namespace orthros {

// Reserved ids. Target side reserves four specials; the source/CTC side
// reserves PAD and BLANK only.
constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;
constexpr int kMask = 3;
constexpr int kTgtCoreBase = 4;

constexpr int kSrcPad = 0;
constexpr int kBlank = 1;
constexpr int kSrcCoreBase = 2;

class Vocabulary {
 public:
  // Target-side layout: PAD, BOS, EOS, MASK, then n_core words w0..w{n-1}.
  static Vocabulary target(int n_core) {
    Vocabulary v;
    v.push("<pad>");
    v.push("<bos>");
    v.push("<eos>");
    v.push("<mask>");
    for (int i = 0; i < n_core; ++i) v.push("w" + std::to_string(i));
    return v;
  }

  // Source/CTC layout: PAD, BLANK, then n_core words s0..s{n-1}.
  static Vocabulary source(int n_core) {
    Vocabulary v;
    v.push("<pad>");
    v.push("<blank>");
    for (int i = 0; i < n_core; ++i) v.push("s" + std::to_string(i));
    return v;
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  const std::string& token(int id) const {
    check(id >= 0 && id < size(), "vocab: id out of range");
    return tokens_[id];
  }

  int id(const std::string& tok) const {
    auto it = index_.find(tok);
    check(it != index_.end(), "vocab: unknown token " + tok);
    return it->second;
  }

 private:
  void push(const std::string& tok) {
    check(index_.emplace(tok, size()).second, "vocab: duplicate token");
    tokens_.push_back(tok);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace orthros

#endif  // ORTHROS_VOCAB_H_
