#include "callflow/manifest.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace callflow {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

const char* to_string(FunctionKind k) {
  return k == FunctionKind::Inout ? "inout" : "compute";
}

const char* to_string(ModeFlag m) { return m == ModeFlag::Block ? "block" : "nonblock"; }

ResourceProfile default_profile(FunctionKind kind) {
  if (kind == FunctionKind::Compute) return {1, 1, 0, 0};
  return {0, 0, 0, 1};
}

std::int64_t default_duration(FunctionKind kind) {
  return kind == FunctionKind::Compute ? 100 : 5;
}

const ToolSpec* ToolManifest::find(std::string_view name) const {
  for (const auto& t : tools)
    if (t.name == name) return &t;
  return nullptr;
}

void ToolManifest::ensure_self() {
  if (knows("self")) return;
  ToolSpec self;
  self.name = "self";
  self.kind = FunctionKind::Inout;
  self.mode = ModeFlag::Block;
  self.profile = default_profile(self.kind);
  self.duration = {default_duration(self.kind), default_duration(self.kind)};
  tools.push_back(std::move(self));
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw ManifestError(what); }

FunctionKind parse_kind(const std::string& s) {
  if (s == "inout") return FunctionKind::Inout;
  if (s == "compute") return FunctionKind::Compute;
  fail("unknown function kind '" + s + "' (expected 'inout' or 'compute')");
}

ModeFlag parse_mode(const std::string& s) {
  if (s == "block") return ModeFlag::Block;
  if (s == "nonblock") return ModeFlag::Nonblock;
  fail("unknown mode '" + s + "' (expected 'block' or 'nonblock')");
}

ResultKind parse_result(const std::string& s) {
  if (s == "text") return ResultKind::Text;
  if (s == "number") return ResultKind::Number;
  fail("unknown result kind '" + s + "' (expected 'text' or 'number')");
}

DurationSpec parse_duration(const json& j, const std::string& tool) {
  DurationSpec d;
  if (j.is_number_integer() || j.is_number_float()) {
    d.min = d.max = j.get<std::int64_t>();
  } else if (j.is_object()) {
    d.min = j.at("min").get<std::int64_t>();
    d.max = j.at("max").get<std::int64_t>();
  } else {
    fail("tool '" + tool + "': duration must be a number or {min, max}");
  }
  if (d.min < 0 || d.max < d.min)
    fail("tool '" + tool + "': duration must satisfy 0 <= min <= max");
  return d;
}

ResourceProfile parse_profile(const json& j, const std::string& tool) {
  if (!j.is_object()) fail("tool '" + tool + "': profile must be an object");
  ResourceProfile p{0, 0, 0, 0};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (!it.value().is_number()) fail("tool '" + tool + "': profile." + key + " must be a number");
    double v = it.value().get<double>();
    if (key == "cpu") p.cpu = v;
    else if (key == "mem") p.mem = v;
    else if (key == "gpu_mem") p.gpu_mem = v;
    else if (key == "io") p.io = v;
    else fail("tool '" + tool + "': unknown profile resource '" + key + "'");
  }
  return p;
}

}  // namespace

ToolManifest parse_manifest(const std::string& json_text) {
  json root = json::parse(json_text, nullptr, false);
  if (root.is_discarded()) fail("manifest is not valid JSON");
  if (!root.is_object()) fail("manifest must be a JSON object");

  ToolManifest m;
  if (root.contains("tools")) {
    const json& tools = root["tools"];
    if (!tools.is_array()) fail("manifest 'tools' must be an array");
    for (const json& jt : tools) {
      if (!jt.is_object()) fail("each tool entry must be an object");
      ToolSpec t;
      if (!jt.contains("name") || !jt["name"].is_string())
        fail("each tool entry needs a string 'name'");
      t.name = jt["name"].get<std::string>();
      if (m.knows(t.name)) fail("tool '" + t.name + "' is declared twice");
      t.kind = jt.contains("kind") ? parse_kind(jt["kind"].get<std::string>())
                                   : FunctionKind::Compute;
      t.mode = jt.contains("mode") ? parse_mode(jt["mode"].get<std::string>()) : ModeFlag::Block;
      t.profile = jt.contains("profile") ? parse_profile(jt["profile"], t.name)
                                         : default_profile(t.kind);
      t.duration = jt.contains("duration")
                       ? parse_duration(jt["duration"], t.name)
                       : DurationSpec{default_duration(t.kind), default_duration(t.kind)};
      t.result = jt.contains("result") ? parse_result(jt["result"].get<std::string>())
                                       : ResultKind::Text;
      m.tools.push_back(std::move(t));
    }
  }
  if (root.contains("fault_injections")) {
    const json& faults = root["fault_injections"];
    if (!faults.is_object()) fail("'fault_injections' must map call ids to directives");
    for (auto it = faults.begin(); it != faults.end(); ++it) {
      const json& jf = it.value();
      if (!jf.is_object()) fail("fault directive for '" + it.key() + "' must be an object");
      FaultDirective f;
      if (jf.contains("fail_times")) f.fail_times = jf["fail_times"].get<int>();
      if (f.fail_times < 0) fail("fault directive for '" + it.key() + "': fail_times must be >= 0");
      if (jf.contains("kind")) f.kind = jf["kind"].get<std::string>();
      if (jf.contains("message")) f.message = jf["message"].get<std::string>();
      if (f.message.empty()) f.message = "injected failure in " + it.key();
      m.fault_injections[it.key()] = std::move(f);
    }
  }
  return m;
}

ToolManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open manifest file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_manifest(buf.str());
  } catch (const ManifestError& e) {
    fail(path + ": " + e.what());
  }
}

std::string manifest_to_json(const ToolManifest& m) {
  ordered root;
  root["tools"] = ordered::array();
  for (const auto& t : m.tools) {
    ordered jt;
    jt["name"] = t.name;
    jt["kind"] = to_string(t.kind);
    jt["mode"] = to_string(t.mode);
    jt["profile"] = {{"cpu", t.profile.cpu},
                     {"mem", t.profile.mem},
                     {"gpu_mem", t.profile.gpu_mem},
                     {"io", t.profile.io}};
    jt["duration"] = {{"min", t.duration.min}, {"max", t.duration.max}};
    jt["result"] = t.result == ResultKind::Number ? "number" : "text";
    root["tools"].push_back(std::move(jt));
  }
  if (!m.fault_injections.empty()) {
    ordered jf;
    for (const auto& [id, f] : m.fault_injections) {
      jf[id] = {{"fail_times", f.fail_times}, {"kind", f.kind}, {"message", f.message}};
    }
    root["fault_injections"] = std::move(jf);
  }
  return root.dump(2) + "\n";
}

}  // namespace callflow
