/* Copyright 2026 The parkdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <string>

#include "parkdiff/config.hpp"

namespace parkdiff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, all integers little-endian:
//   "PKDF", u32 version, u64 config length, config JSON bytes,
//   u32 entry count, then per entry: u32 name length, name, u8 dtype
//   (0 = f64, 1 = u64), u32 rank, u64 dims...,
//   followed by every entry's payload in manifest order.
// Entries: "param/<name>", "adam.m/<name>", "adam.v/<name>" and the u64
// scalars "meta/adam_step", "meta/stage", "meta/iteration".
struct Checkpoint {
  RunConfig config;
  TrainState state;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws ParseError on bad magic, unsupported version, truncation, trailing
// bytes, unknown entries or parameters missing for the embedded config (the
// message lists their names).
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// IoError when the file cannot be read; ParseError as in decode_checkpoint,
// prefixed with the path.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace parkdiff
