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

#include "orthros/kvconfig.h"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "orthros/common.h"

namespace orthros {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

int64_t parse_int(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  check(end != s.c_str() && *end == '\0', "config: bad integer for " + what +
                                              ": '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  check(end != s.c_str() && *end == '\0',
        "config: bad number for " + what + ": '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail("config: bad boolean for " + what + ": '" + s + "'");
}

KvConfig KvConfig::from_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    check(eq != std::string::npos,
          "config: line " + std::to_string(lineno) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    check(!key.empty(),
          "config: empty key at line " + std::to_string(lineno));
    for (const auto& kv : cfg.items_)
      check(kv.first != key, "config: duplicate key " + key);
    cfg.items_.emplace_back(key, value);
  }
  return cfg;
}

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

const std::string* KvConfig::lookup(const std::string& key) const {
  for (const auto& kv : items_) {
    if (kv.first == key) {
      consumed_.insert(key);
      return &kv.second;
    }
  }
  return nullptr;
}

bool KvConfig::has(const std::string& key) const {
  return lookup(key) != nullptr;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  const std::string* v = lookup(key);
  return v ? *v : fallback;
}

std::string KvConfig::require_string(const std::string& key) const {
  const std::string* v = lookup(key);
  check(v != nullptr, "config: missing required key " + key);
  return *v;
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
  const std::string* v = lookup(key);
  return v ? parse_int(*v, key) : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = lookup(key);
  return v ? parse_double(*v, key) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = lookup(key);
  return v ? parse_bool(*v, key) : fallback;
}

void KvConfig::require_consumed() const {
  for (const auto& kv : items_)
    check(consumed_.count(kv.first) != 0, "config: unknown key " + kv.first);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  check(res.ec == std::errc(), "format_double: conversion failed");
  return std::string(buf, res.ptr);
}

}  // namespace orthros
