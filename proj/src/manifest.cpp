#include "scenefit/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace scenefit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TOML subset

namespace {

[[noreturn]] void toml_fail(const std::string& origin, int line, const std::string& what) {
  throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// Strips a trailing comment, respecting double-quoted strings.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

json parse_scalar(const std::string& raw, const std::string& origin, int line) {
  const std::string token = trim(raw);
  if (token.empty()) toml_fail(origin, line, "empty value");
  if (token.front() == '"') {
    if (token.size() < 2 || token.back() != '"')
      toml_fail(origin, line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < token.size(); ++i) {
      if (token[i] == '\\' && i + 2 < token.size()) {
        ++i;
        switch (token[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: toml_fail(origin, line, "unsupported escape");
        }
      } else {
        out += token[i];
      }
    }
    return json(out);
  }
  if (token == "true") return json(true);
  if (token == "false") return json(false);
  try {
    std::size_t used = 0;
    if (token.find_first_of(".eE") == std::string::npos ||
        token.rfind("0x", 0) == 0) {
      const long long v = std::stoll(token, &used);
      if (used == token.size()) return json(v);
    }
    const double v = std::stod(token, &used);
    if (used == token.size()) return json(v);
  } catch (const std::exception&) {
  }
  toml_fail(origin, line, "cannot parse value '" + token + "'");
}

json parse_array(const std::string& raw, const std::string& origin, int line) {
  json out = json::array();
  std::string body = trim(raw);
  body = body.substr(1, body.size() - 2);  // strip [ ]
  std::string token;
  bool quoted = false;
  for (char c : body) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      if (!trim(token).empty()) out.push_back(parse_scalar(token, origin, line));
      token.clear();
    } else {
      token += c;
    }
  }
  if (!trim(token).empty()) out.push_back(parse_scalar(token, origin, line));
  return out;
}

}  // namespace

json parse_toml(const std::string& text, const std::string& origin) {
  json doc = json::object();
  json* section = &doc;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') toml_fail(origin, line_no, "unterminated section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (name.empty()) toml_fail(origin, line_no, "empty section name");
      section = &doc;
      std::istringstream parts(name);
      std::string part;
      while (std::getline(parts, part, '.')) section = &((*section)[trim(part)]);
      if (!section->is_object() && !section->is_null())
        toml_fail(origin, line_no, "section '" + name + "' conflicts with a value");
      if (section->is_null()) *section = json::object();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) toml_fail(origin, line_no, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) toml_fail(origin, line_no, "empty key");
    if (!value.empty() && value.front() == '[') {
      // Arrays may span lines until brackets balance.
      while (std::count(value.begin(), value.end(), '[') >
             std::count(value.begin(), value.end(), ']')) {
        if (!std::getline(in, line)) toml_fail(origin, line_no, "unterminated array");
        ++line_no;
        value += ' ' + trim(strip_comment(line));
      }
      (*section)[key] = parse_array(value, origin, line_no);
    } else {
      (*section)[key] = parse_scalar(value, origin, line_no);
    }
    if (section->is_discarded()) toml_fail(origin, line_no, "internal parse error");
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Manifest reading with unknown-key rejection

namespace {

class DocReader {
 public:
  DocReader(json doc, std::string origin) : doc_(std::move(doc)), origin_(std::move(origin)) {}

  bool has(const std::string& path) const { return find(path) != nullptr; }

  template <typename T>
  T require(const std::string& path) {
    const json* node = find(path);
    if (!node) throw std::runtime_error(origin_ + ": missing required key '" + path + "'");
    return convert<T>(path, *node);
  }

  template <typename T>
  T get(const std::string& path, T fallback) {
    const json* node = find(path);
    if (!node) return fallback;
    return convert<T>(path, *node);
  }

  /// Consume a whole section of string -> string pairs.
  std::map<std::string, std::string> string_table(const std::string& path) {
    const json* node = find(path);
    std::map<std::string, std::string> out;
    if (!node) return out;
    if (!node->is_object())
      throw std::runtime_error(origin_ + ": '" + path + "' must be a table");
    for (const auto& [key, value] : node->items()) {
      if (!value.is_string())
        throw std::runtime_error(origin_ + ": '" + path + "." + key + "' must be a string");
      out[key] = value.get<std::string>();
      consumed_.insert(path + "." + key);
    }
    return out;
  }

  /// Errors on any key that no read above touched.
  void reject_unknown() const {
    std::vector<std::string> unknown;
    walk("", doc_, unknown);
    if (!unknown.empty())
      throw std::runtime_error(origin_ + ": unknown key '" + unknown.front() + "'");
  }

 private:
  const json* find(const std::string& path) const {
    const json* node = &doc_;
    std::istringstream parts(path);
    std::string part;
    while (std::getline(parts, part, '.')) {
      if (!node->is_object() || !node->contains(part)) return nullptr;
      node = &(*node)[part];
    }
    return node;
  }

  template <typename T>
  T convert(const std::string& path, const json& node) {
    consumed_.insert(path);
    try {
      return node.get<T>();
    } catch (const json::exception&) {
      throw std::runtime_error(origin_ + ": malformed value at '" + path + "'");
    }
  }

  void walk(const std::string& prefix, const json& node, std::vector<std::string>& unknown) const {
    if (!node.is_object()) {
      if (!consumed_.count(prefix)) unknown.push_back(prefix);
      return;
    }
    for (const auto& [key, value] : node.items()) {
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      walk(path, value, unknown);
    }
  }

  json doc_;
  std::string origin_;
  std::set<std::string> consumed_;
};

template <>
double DocReader::convert<double>(const std::string& path, const json& node) {
  consumed_.insert(path);
  if (!node.is_number())
    throw std::runtime_error(origin_ + ": malformed value at '" + path + "'");
  return node.get<double>();
}

}  // namespace

int RunManifest::class_id(const std::string& name) const {
  const auto it = std::find(class_names.begin(), class_names.end(), name);
  return it == class_names.end() ? -1 : static_cast<int>(it - class_names.begin());
}

std::set<int> RunManifest::deformable_class_ids() const {
  std::set<int> ids;
  for (const std::string& name : deformable_class_names) {
    const int id = class_id(name);
    if (id >= 0) ids.insert(id);
  }
  return ids;
}

std::set<int> RunManifest::elastic_class_ids() const {
  std::set<int> ids;
  for (const std::string& name : elastic_class_names) {
    const int id = class_id(name);
    if (id >= 0) ids.insert(id);
  }
  return ids;
}

std::vector<BendDof> RunManifest::resolve_bending(
    const std::vector<std::string>& joint_names) const {
  std::vector<BendDof> dofs;
  for (const auto& [joint, spec] : bending) {
    const auto it = std::find(joint_names.begin(), joint_names.end(), joint);
    if (it == joint_names.end())
      throw std::runtime_error("manifest: bending joint '" + joint + "' not in the model");
    if (spec.size() != 2 || (spec[0] != '+' && spec[0] != '-') ||
        (spec[1] != 'x' && spec[1] != 'y' && spec[1] != 'z'))
      throw std::runtime_error("manifest: bending spec '" + spec +
                               "' must be one of +x..-z");
    BendDof dof;
    dof.joint = static_cast<int>(it - joint_names.begin());
    dof.axis = spec[1] - 'x';
    dof.sign = spec[0] == '+' ? 1.0 : -1.0;
    dofs.push_back(dof);
  }
  return dofs;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::stringstream buffer;
  buffer << in.rdbuf();

  json doc;
  const auto ext = path.extension().string();
  if (ext == ".toml") {
    doc = parse_toml(buffer.str(), path.string());
  } else if (ext == ".json") {
    try {
      doc = json::parse(buffer.str());
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
  } else {
    throw std::runtime_error(path.string() + ": unsupported manifest extension '" + ext + "'");
  }

  DocReader reader(std::move(doc), path.string());
  RunManifest m;
  m.base_dir = path.parent_path();

  m.version = static_cast<int>(reader.get<long long>("version", 1));
  if (m.version != 1) throw std::runtime_error(path.string() + ": unsupported version");
  m.seed = static_cast<std::uint64_t>(reader.get<long long>("seed", 0));

  m.scene_path = reader.require<std::string>("paths.scene");
  m.labels_path = reader.require<std::string>("paths.labels");
  m.body_model_path = reader.require<std::string>("paths.body_model");
  m.frames_dir = reader.require<std::string>("paths.frames_dir");
  m.output_dir = reader.require<std::string>("paths.output_dir");

  m.camera.fx = reader.require<double>("camera.fx");
  m.camera.fy = reader.require<double>("camera.fy");
  m.camera.cx = reader.require<double>("camera.cx");
  m.camera.cy = reader.require<double>("camera.cy");
  m.camera.width = static_cast<int>(reader.require<long long>("camera.width"));
  m.camera.height = static_cast<int>(reader.require<long long>("camera.height"));
  m.camera.validate();

  StageConfig& s = m.stage;
  s.stage1_iterations = static_cast<int>(reader.get<long long>("stage1.iterations", s.stage1_iterations));
  s.stage1_refine_iterations =
      static_cast<int>(reader.get<long long>("stage1.refine_iterations", s.stage1_refine_iterations));
  s.lambda_theta = reader.get<double>("stage1.lambda_theta", s.lambda_theta);
  s.lambda_alpha = reader.get<double>("stage1.lambda_alpha", s.lambda_alpha);
  s.lambda_beta = reader.get<double>("stage1.lambda_beta", s.lambda_beta);
  s.optimize_shape = reader.get<bool>("stage1.optimize_shape", s.optimize_shape);
  s.shared_shape = reader.get<bool>("stage1.shared_shape", s.shared_shape);

  s.stage2_iterations = static_cast<int>(reader.get<long long>("stage2.iterations", s.stage2_iterations));
  s.stage2_learning_rate = reader.get<double>("stage2.learning_rate", s.stage2_learning_rate);
  s.lambda_obs = reader.get<double>("stage2.lambda_obs", s.lambda_obs);
  s.lambda_un = reader.get<double>("stage2.lambda_un", s.lambda_un);
  s.lambda_t_theta = reader.get<double>("stage2.lambda_t_theta", s.lambda_t_theta);
  s.lambda_t_gamma = reader.get<double>("stage2.lambda_t_gamma", s.lambda_t_gamma);
  s.contact_threshold = reader.get<double>("stage2.contact_threshold", s.contact_threshold);
  s.optimize_shape_stage2 = reader.get<bool>("stage2.optimize_shape", s.optimize_shape_stage2);

  s.stage3_outer_iterations =
      static_cast<int>(reader.get<long long>("stage3.outer_iterations", s.stage3_outer_iterations));
  s.stage3_iterations = static_cast<int>(reader.get<long long>("stage3.iterations", s.stage3_iterations));
  s.stage3_learning_rate = reader.get<double>("stage3.learning_rate", s.stage3_learning_rate);
  s.lambda_pen = reader.get<double>("stage3.lambda_pen", s.lambda_pen);

  s.sigma_joint_px = reader.get<double>("robust.sigma_joint_px", s.sigma_joint_px);
  s.sigma_contact_m = reader.get<double>("robust.sigma_contact_m", s.sigma_contact_m);
  s.validate();

  m.dbscan.eps = reader.get<double>("dbscan.eps", m.dbscan.eps);
  m.dbscan.min_pts = static_cast<int>(reader.get<long long>("dbscan.min_pts", m.dbscan.min_pts));
  m.dbscan.validate();

  m.deform.k = static_cast<int>(reader.get<long long>("deform.k", m.deform.k));
  m.deform.max_iterations =
      static_cast<int>(reader.get<long long>("deform.max_iterations", m.deform.max_iterations));
  m.deform.tolerance = reader.get<double>("deform.tolerance", m.deform.tolerance);
  const std::string scope = reader.get<std::string>("deform.rotation_scope", "all_movable");
  if (scope == "all_movable") m.deform.rotation_scope = RotationScope::kAllMovable;
  else if (scope == "controls_only") m.deform.rotation_scope = RotationScope::kControlsOnly;
  else throw std::runtime_error(path.string() + ": deform.rotation_scope must be all_movable or controls_only");
  m.deform.validate();

  m.class_names = reader.get<std::vector<std::string>>("classes.names", {});
  m.deformable_class_names =
      reader.get<std::vector<std::string>>("deform.deformable_classes", {"sofa", "bed"});
  m.elastic_class_names = reader.get<std::vector<std::string>>("deform.elastic_classes", {});

  m.joint_map = reader.string_table("joint_map");
  m.bending = reader.string_table("bending");

  reader.reject_unknown();

  for (const std::string& name : m.deformable_class_names) {
    if (m.class_id(name) < 0)
      throw std::runtime_error(path.string() + ": deformable class '" + name +
                               "' missing from classes.names");
  }
  for (const std::string& name : m.elastic_class_names) {
    if (m.class_id(name) < 0)
      throw std::runtime_error(path.string() + ": elastic class '" + name +
                               "' missing from classes.names");
  }

  // Inputs must exist up front; the output directory is created on demand.
  const std::pair<const char*, std::filesystem::path> inputs[] = {
      {"paths.scene", m.resolve(m.scene_path)},
      {"paths.labels", m.resolve(m.labels_path)},
      {"paths.body_model", m.resolve(m.body_model_path)},
      {"paths.frames_dir", m.resolve(m.frames_dir)},
  };
  for (const auto& [key, resolved] : inputs) {
    if (!std::filesystem::exists(resolved))
      throw std::runtime_error(path.string() + ": " + key + " refers to missing path " +
                               resolved.string());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Writers

namespace {

json manifest_to_json(const RunManifest& m) {
  json doc;
  doc["version"] = m.version;
  doc["seed"] = m.seed;
  doc["paths"] = {{"scene", m.scene_path.generic_string()},
                  {"labels", m.labels_path.generic_string()},
                  {"body_model", m.body_model_path.generic_string()},
                  {"frames_dir", m.frames_dir.generic_string()},
                  {"output_dir", m.output_dir.generic_string()}};
  doc["camera"] = {{"fx", m.camera.fx}, {"fy", m.camera.fy}, {"cx", m.camera.cx},
                   {"cy", m.camera.cy}, {"width", m.camera.width}, {"height", m.camera.height}};
  doc["stage1"] = {{"iterations", m.stage.stage1_iterations},
                   {"refine_iterations", m.stage.stage1_refine_iterations},
                   {"lambda_theta", m.stage.lambda_theta},
                   {"lambda_alpha", m.stage.lambda_alpha},
                   {"lambda_beta", m.stage.lambda_beta},
                   {"optimize_shape", m.stage.optimize_shape},
                   {"shared_shape", m.stage.shared_shape}};
  doc["stage2"] = {{"iterations", m.stage.stage2_iterations},
                   {"learning_rate", m.stage.stage2_learning_rate},
                   {"lambda_obs", m.stage.lambda_obs},
                   {"lambda_un", m.stage.lambda_un},
                   {"lambda_t_theta", m.stage.lambda_t_theta},
                   {"lambda_t_gamma", m.stage.lambda_t_gamma},
                   {"contact_threshold", m.stage.contact_threshold},
                   {"optimize_shape", m.stage.optimize_shape_stage2}};
  doc["stage3"] = {{"outer_iterations", m.stage.stage3_outer_iterations},
                   {"iterations", m.stage.stage3_iterations},
                   {"learning_rate", m.stage.stage3_learning_rate},
                   {"lambda_pen", m.stage.lambda_pen}};
  doc["robust"] = {{"sigma_joint_px", m.stage.sigma_joint_px},
                   {"sigma_contact_m", m.stage.sigma_contact_m}};
  doc["dbscan"] = {{"eps", m.dbscan.eps}, {"min_pts", m.dbscan.min_pts}};
  doc["deform"] = {{"k", m.deform.k},
                   {"max_iterations", m.deform.max_iterations},
                   {"tolerance", m.deform.tolerance},
                   {"rotation_scope", m.deform.rotation_scope == RotationScope::kAllMovable
                                          ? "all_movable"
                                          : "controls_only"},
                   {"deformable_classes", m.deformable_class_names},
                   {"elastic_classes", m.elastic_class_names}};
  doc["classes"] = {{"names", m.class_names}};
  doc["joint_map"] = m.joint_map;
  doc["bending"] = m.bending;
  return doc;
}

std::string toml_value(const json& v) {
  if (v.is_string()) return "\"" + v.get<std::string>() + "\"";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += toml_value(v[i]);
    }
    return out + "]";
  }
  return v.dump();
}

}  // namespace

void save_manifest_json(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

void save_manifest_toml(const RunManifest& manifest, const std::filesystem::path& path) {
  const json doc = manifest_to_json(manifest);
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_object()) out << key << " = " << toml_value(value) << '\n';
  }
  for (const auto& [section, table] : doc.items()) {
    if (!table.is_object()) continue;
    out << '\n' << '[' << section << "]\n";
    for (const auto& [key, value] : table.items())
      out << key << " = " << toml_value(value) << '\n';
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace scenefit
