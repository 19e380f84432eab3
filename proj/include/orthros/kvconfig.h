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

#ifndef ORTHROS_KVCONFIG_H_
#define ORTHROS_KVCONFIG_H_

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace orthros {

// Flat "key = value" config text. '#' starts a comment, blank lines are
// skipped, duplicate keys are errors. Readers mark keys consumed; a final
// require_consumed() turns typos into hard errors instead of silent
// defaults.
class KvConfig {
 public:
  static KvConfig from_string(const std::string& text);
  static KvConfig from_file(const std::string& path);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Errors on the first key no reader asked for.
  void require_consumed() const;

  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

 private:
  const std::string* lookup(const std::string& key) const;

  std::vector<std::pair<std::string, std::string>> items_;
  mutable std::set<std::string> consumed_;
};

int64_t parse_int(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);
bool parse_bool(const std::string& s, const std::string& what);

// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace orthros

#endif  // ORTHROS_KVCONFIG_H_
