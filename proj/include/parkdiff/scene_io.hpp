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
#include <vector>

#include "parkdiff/scene.hpp"

namespace parkdiff {

// Scene files are JSON Lines: a header line
//   {"format":"parkdiff.scenes","version":1}
// followed by one scene object per line. Doubles are written with 17
// significant digits so that load(save(s)) == s bit for bit.
inline constexpr int kSceneFormatVersion = 1;

std::string serialize_scene(const Scene& scene);
Scene parse_scene(const std::string& line, std::size_t line_number = 0);

// Throws IoError when the file cannot be written.
void save_scenes(const std::vector<Scene>& scenes, const std::string& path);
// Throws IoError when the file cannot be opened, ParseError (with the line
// number) on malformed content.
std::vector<Scene> load_scenes(const std::string& path);

// Shortest text that reads back as exactly `v` (always contains '.' or 'e').
std::string format_double(double v);

}  // namespace parkdiff
