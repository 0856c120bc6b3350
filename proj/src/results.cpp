#include "scenefit/results.hpp"

#include "scenefit/formats.hpp"
#include "scenefit/mesh_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace scenefit {

using nlohmann::json;

namespace {

json report_json(const OptimizerReport& report) {
  return json{{"iterations", report.iterations},
              {"final_value", report.final_value},
              {"reason", to_string(report.reason)}};
}

json contacts_json(const ContactSet& contacts) {
  json seen = json::array();
  for (const SeenContact& c : contacts.seen) {
    seen.push_back({{"body_vertex", c.body_vertex},
                    {"tri", c.tri},
                    {"bary", {c.bary[0], c.bary[1], c.bary[2]}},
                    {"point", {c.point[0], c.point[1], c.point[2]}}});
  }
  return json{{"seen", seen}, {"unseen", contacts.unseen}};
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  json doc;
  in >> doc;
  return doc;
}

}  // namespace

void write_results(const SequenceResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "contacts");
  fs::create_directories(dir / "meshes");
  fs::create_directories(dir / "reports");

  save_params_sequence(result.params, dir / "params.json");

  const int n = static_cast<int>(result.params.size());
  for (int t = 0; t < n; ++t) {
    write_json_file(contacts_json(result.contacts[t]),
                    dir / "contacts" / frame_name(t, ".json"));
    save_ply(result.scene_meshes[t], dir / "meshes" / frame_name(t, ".ply"));

    const FrameReport& r = result.reports[t];
    json stage3 = json::array();
    for (const OptimizerReport& inner : r.stage3) stage3.push_back(report_json(inner));
    json arap = json::array();
    for (const ArapStepSummary& a : r.arap) {
      arap.push_back({{"controls", a.controls},
                      {"iterations", a.iterations},
                      {"initial_energy", a.initial_energy},
                      {"final_energy", a.final_energy},
                      {"skipped", a.skipped},
                      {"note", a.note}});
    }
    write_json_file(json{{"stage1", report_json(r.stage1)},
                         {"stage1_refine", report_json(r.stage1_refine)},
                         {"stage1_unfit", r.stage1_unfit},
                         {"stage2", report_json(r.stage2)},
                         {"stage2_skipped", r.stage2_skipped},
                         {"stage3", stage3},
                         {"arap", arap},
                         {"stage3_outer_values", r.stage3_outer_values}},
                    dir / "reports" / frame_name(t, ".json"));
  }

  write_json_file(json{{"frames", n}}, dir / "summary.json");
}

std::vector<BodyParams> load_result_params(const std::filesystem::path& dir) {
  return load_params_sequence(dir / "params.json");
}

TriMesh load_result_mesh(const std::filesystem::path& dir, int frame) {
  return load_ply(dir / "meshes" / frame_name(frame, ".ply"));
}

ContactSet load_result_contacts(const std::filesystem::path& dir, int frame) {
  const json doc = read_json_file(dir / "contacts" / frame_name(frame, ".json"));
  ContactSet contacts;
  for (const json& entry : doc.at("seen")) {
    SeenContact c;
    c.body_vertex = entry.at("body_vertex").get<int>();
    c.tri = entry.at("tri").get<int>();
    const auto bary = entry.at("bary").get<std::vector<double>>();
    const auto point = entry.at("point").get<std::vector<double>>();
    c.bary = Vec3(bary[0], bary[1], bary[2]);
    c.point = Vec3(point[0], point[1], point[2]);
    contacts.seen.push_back(c);
  }
  contacts.unseen = doc.at("unseen").get<std::vector<int>>();
  return contacts;
}

int result_frame_count(const std::filesystem::path& dir) {
  return static_cast<int>(load_result_params(dir).size());
}

}  // namespace scenefit
