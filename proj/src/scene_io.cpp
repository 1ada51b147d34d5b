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

#include "parkdiff/scene_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "parkdiff/error.hpp"

namespace parkdiff {

using nlohmann::json;

std::string format_double(double v) {
  if (!std::isfinite(v)) throw ContractError("cannot serialize non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

void append_point(std::string& out, const Vec2& p) {
  out += '[';
  out += format_double(p[0]);
  out += ',';
  out += format_double(p[1]);
  out += ']';
}

void append_polylines(std::string& out, const char* key, const std::vector<Polyline>& polys) {
  out += '"';
  out += key;
  out += "\":[";
  for (std::size_t i = 0; i < polys.size(); ++i) {
    if (i) out += ',';
    out += '[';
    for (std::size_t k = 0; k < polys[i].points.size(); ++k) {
      if (k) out += ',';
      append_point(out, polys[i].points[k]);
    }
    out += ']';
  }
  out += "],\"";
  out += key;
  out += "_types\":[";
  for (std::size_t i = 0; i < polys.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(polys[i].type);
  }
  out += ']';
}

const json& field(const json& obj, const char* key, std::size_t line) {
  if (!obj.is_object()) throw ParseError("expected an object", line);
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field \"") + key + "\"", line);
  return *it;
}

double number(const json& j, std::size_t line) {
  if (!j.is_number()) throw ParseError("expected a number", line);
  return j.get<double>();
}

const json& array(const json& j, std::size_t line, const char* what) {
  if (!j.is_array()) throw ParseError(std::string("expected an array for ") + what, line);
  return j;
}

std::vector<Polyline> parse_polylines(const json& map, const char* key, std::size_t line) {
  const std::string types_key = std::string(key) + "_types";
  const json& pts = array(field(map, key, line), line, key);
  const json& types = array(field(map, types_key.c_str(), line), line, types_key.c_str());
  if (pts.size() != types.size()) {
    throw ParseError(std::string(key) + " and " + types_key + " differ in length", line);
  }
  std::vector<Polyline> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const json& pl = array(pts[i], line, "polyline");
    if (pl.size() != kPolylinePoints) {
      throw ParseError("polyline " + std::to_string(i) + " has " + std::to_string(pl.size()) +
                           " points, expected " + std::to_string(kPolylinePoints),
                       line);
    }
    for (const json& p : pl) {
      if (!p.is_array() || p.size() != 2) throw ParseError("polyline point must be [x, y]", line);
      out[i].points.push_back({number(p[0], line), number(p[1], line)});
    }
    if (!types[i].is_number_integer()) throw ParseError("polyline type must be an integer", line);
    const int t = types[i].get<int>();
    if (t < 0 || t >= static_cast<int>(kPolylineTypes)) {
      throw ParseError("unknown polyline type " + std::to_string(t), line);
    }
    out[i].type = t;
  }
  return out;
}

}  // namespace

std::string serialize_scene(const Scene& scene) {
  std::string out = "{\"dt\":" + format_double(scene.dt) + ",\"agents\":[";
  for (std::size_t a = 0; a < scene.agents.size(); ++a) {
    const AgentTrack& tr = scene.agents[a];
    if (tr.valid.size() != tr.states.size()) {
      throw ContractError("agent " + std::to_string(tr.id) + ": valid and states differ in length");
    }
    if (a) out += ',';
    out += "{\"id\":" + std::to_string(tr.id) + ",\"type\":\"" + to_string(tr.type) + "\",\"states\":[";
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      const AgentState& s = tr.states[t];
      if (t) out += ',';
      out += '[';
      const double vals[6] = {s.x, s.y, s.h, s.v, s.ax, s.ay};
      for (int k = 0; k < 6; ++k) {
        if (k) out += ',';
        out += format_double(vals[k]);
      }
      out += ']';
    }
    out += "],\"valid\":[";
    for (std::size_t t = 0; t < tr.valid.size(); ++t) {
      if (t) out += ',';
      out += tr.valid[t] ? "true" : "false";
    }
    out += "]}";
  }
  out += "],\"map\":{";
  append_polylines(out, "soft", scene.map.soft);
  out += ',';
  append_polylines(out, "hard", scene.map.hard);
  out += "}}";
  return out;
}

Scene parse_scene(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_number);
  }
  Scene scene;
  scene.dt = number(field(j, "dt", line_number), line_number);
  if (!(scene.dt > 0.0)) throw ParseError("dt must be positive", line_number);
  for (const json& a : array(field(j, "agents", line_number), line_number, "agents")) {
    AgentTrack tr;
    const json& id = field(a, "id", line_number);
    if (!id.is_number_integer()) throw ParseError("agent id must be an integer", line_number);
    tr.id = id.get<int>();
    const json& type = field(a, "type", line_number);
    if (type == "vehicle") {
      tr.type = AgentType::kVehicle;
    } else if (type == "pedestrian") {
      tr.type = AgentType::kPedestrian;
    } else {
      throw ParseError("unknown agent type " + type.dump(), line_number);
    }
    for (const json& s : array(field(a, "states", line_number), line_number, "states")) {
      if (!s.is_array() || s.size() != 6) throw ParseError("state must have 6 entries", line_number);
      tr.states.push_back({number(s[0], line_number), number(s[1], line_number), number(s[2], line_number),
                           number(s[3], line_number), number(s[4], line_number), number(s[5], line_number)});
    }
    for (const json& v : array(field(a, "valid", line_number), line_number, "valid")) {
      if (!v.is_boolean()) throw ParseError("valid entries must be booleans", line_number);
      tr.valid.push_back(v.get<bool>());
    }
    if (tr.valid.size() != tr.states.size()) {
      throw ParseError("agent " + std::to_string(tr.id) + ": valid and states differ in length", line_number);
    }
    scene.agents.push_back(std::move(tr));
  }
  const json& map = field(j, "map", line_number);
  scene.map.soft = parse_polylines(map, "soft", line_number);
  scene.map.hard = parse_polylines(map, "hard", line_number);
  return scene;
}

void save_scenes(const std::vector<Scene>& scenes, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "{\"format\":\"parkdiff.scenes\",\"version\":" << kSceneFormatVersion << "}\n";
  for (const Scene& s : scenes) out << serialize_scene(s) << '\n';
  out.flush();
  if (!out) throw IoError("failed writing " + path);
}

std::vector<Scene> load_scenes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::size_t line_number = 1;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw ParseError("malformed header", 1);
  }
  if (!header.is_object() || header.find("format") == header.end() || header["format"] != "parkdiff.scenes") {
    throw ParseError("not a parkdiff scene file", 1);
  }
  const auto version = header.find("version");
  if (version == header.end() || *version != kSceneFormatVersion) {
    throw ParseError("unsupported scene file version " + (version == header.end() ? "(none)" : version->dump()), 1);
  }
  std::vector<Scene> scenes;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    scenes.push_back(parse_scene(line, line_number));
  }
  return scenes;
}

}  // namespace parkdiff
