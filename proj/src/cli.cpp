#include "scenefit/cli.hpp"

#include "scenefit/formats.hpp"
#include "scenefit/log.hpp"
#include "scenefit/manifest.hpp"
#include "scenefit/mesh_io.hpp"
#include "scenefit/metrics.hpp"
#include "scenefit/pipeline.hpp"
#include "scenefit/results.hpp"
#include "scenefit/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace scenefit {

using nlohmann::json;

namespace {

int run_fit(const std::filesystem::path& manifest_path) {
  const RunManifest manifest = load_manifest(manifest_path);
  const BodyModel model = load_body_model(manifest.resolve(manifest.body_model_path));
  const TriMesh scene = load_mesh(manifest.resolve(manifest.scene_path));

  SemanticLabels labels;
  labels.classes = load_labels(manifest.resolve(manifest.labels_path));
  labels.deformable_classes = manifest.deformable_class_ids();

  const Pipeline pipeline(model, manifest.camera, scene, labels,
                          make_pipeline_config(manifest, model));
  const std::vector<FrameInput> frames = load_frames(manifest);
  if (frames.empty()) {
    std::cerr << "fit: no frames found under "
              << manifest.resolve(manifest.frames_dir) << "\n";
    return 1;
  }

  const SequenceResult result = pipeline.run_all(frames);
  const std::filesystem::path out = manifest.resolve(manifest.output_dir);
  write_results(result, out);
  std::cout << "fit: " << frames.size() << " frames -> " << out.string() << "\n";
  return 0;
}

int run_eval(const std::filesystem::path& results_dir, const std::filesystem::path& gt_dir,
             const std::filesystem::path& out_path) {
  const RunManifest manifest = load_manifest(gt_dir / "manifest.toml");
  const BodyModel model = load_body_model(manifest.resolve(manifest.body_model_path));

  const std::vector<BodyParams> predicted = load_result_params(results_dir);
  const std::vector<BodyParams> truth = load_params_sequence(gt_dir / "gt" / "params.json");
  if (predicted.size() != truth.size())
    throw std::runtime_error("eval: result has " + std::to_string(predicted.size()) +
                             " frames, ground truth has " + std::to_string(truth.size()));

  EvalReport report;
  report.joint_set = model.joint_names;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const PosedBody pred = model.pose(predicted[t]);
    const PosedBody gt = model.pose(truth[t]);

    EvalFrame frame;
    frame.frame = static_cast<int>(t);
    frame.pje = pje(pred.joints, gt.joints);
    frame.v2v = v2v(pred.mesh.vertices, gt.mesh.vertices);
    frame.p_pje = pje(procrustes_align(pred.joints, gt.joints), gt.joints);
    frame.p_v2v = v2v(procrustes_align(pred.mesh.vertices, gt.mesh.vertices),
                      gt.mesh.vertices);

    const TriMesh scene = load_result_mesh(results_dir, static_cast<int>(t));
    const PointIndex index(scene.vertices);
    frame.non_collision = non_collision_score(pred.mesh, scene, index);
    report.frames.push_back(frame);
  }
  report.finalize();

  std::cout << report.table();
  json doc;
  doc["joint_set"] = report.joint_set;
  doc["mean"] = {{"pje", report.mean_pje},
                 {"v2v", report.mean_v2v},
                 {"p_pje", report.mean_p_pje},
                 {"p_v2v", report.mean_p_v2v},
                 {"non_collision", report.mean_non_collision}};
  json rows = json::array();
  for (const EvalFrame& f : report.frames) {
    rows.push_back({{"frame", f.frame},
                    {"pje", f.pje},
                    {"v2v", f.v2v},
                    {"p_pje", f.p_pje},
                    {"p_v2v", f.p_v2v},
                    {"non_collision", f.non_collision}});
  }
  doc["frames"] = rows;
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error(out_path.string() + ": cannot open for writing");
    out << doc.dump(2) << '\n';
    std::cout << "eval: report written to " << out_path.string() << "\n";
  }
  return 0;
}

int run_inspect(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".obj" || ext == ".ply") {
    const TriMesh mesh = load_mesh(path);
    const OrientationReport orient = orientation_report(mesh);
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const Vec3& v : mesh.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    std::printf("mesh %s\n", path.filename().string().c_str());
    std::printf("  vertices: %d\n  faces: %d\n", mesh.vertex_count(), mesh.face_count());
    std::printf("  bbox: [%.3f %.3f %.3f] .. [%.3f %.3f %.3f] m\n", lo[0], lo[1], lo[2],
                hi[0], hi[1], hi[2]);
    std::printf("  orientation: %s (%zu flipped, %zu boundary, %zu non-manifold edges)\n",
                orient.consistent() ? "consistent" : "INCONSISTENT",
                orient.inconsistent_edges, orient.boundary_edges, orient.nonmanifold_edges);
    return 0;
  }
  if (ext == ".pgm" || ext == ".png") {
    const SubjectMask mask = load_mask(path);
    std::size_t on = 0;
    for (auto v : mask.data) on += v != 0;
    std::printf("mask %s\n  size: %dx%d\n  subject pixels: %zu (%.1f%%)\n",
                path.filename().string().c_str(), mask.width, mask.height, on,
                100.0 * on / mask.data.size());
    return 0;
  }
  if (ext == ".json" || ext == ".toml") {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    if (ext == ".toml") {
      const RunManifest manifest = load_manifest(path);
      std::printf("manifest %s\n  scene: %s\n  frames_dir: %s\n  camera: %dx%d f=(%.1f, %.1f)\n",
                  path.filename().string().c_str(), manifest.scene_path.string().c_str(),
                  manifest.frames_dir.string().c_str(), manifest.camera.width,
                  manifest.camera.height, manifest.camera.fx, manifest.camera.fy);
      return 0;
    }
    json doc;
    in >> doc;
    if (doc.contains("keypoints")) {
      const Keypoints2d kp = load_keypoints(path);
      double mean_conf = 0;
      for (double c : kp.confidence) mean_conf += c;
      std::printf("keypoints %s\n  joints: %d\n  mean confidence: %.3f\n",
                  path.filename().string().c_str(), kp.size(),
                  kp.size() ? mean_conf / kp.size() : 0.0);
    } else if (doc.value("format", "") == "scenefit-body-model") {
      const BodyModel model = load_body_model(path);
      std::printf("body model %s\n  vertices: %d\n  joints: %d\n  shape dims: %d\n",
                  path.filename().string().c_str(), model.vertex_count(),
                  model.joint_count(), model.shape_dim());
    } else if (doc.contains("frames")) {
      std::printf("parameter sequence %s\n  frames: %zu\n",
                  path.filename().string().c_str(), doc.at("frames").size());
    } else if (doc.contains("labels")) {
      const auto labels = load_labels(path);
      std::map<int, int> hist;
      for (int l : labels) ++hist[l];
      std::printf("labels %s\n  vertices: %zu\n  classes:", path.filename().string().c_str(),
                  labels.size());
      for (const auto& [cls, count] : hist) std::printf(" %d:%d", cls, count);
      std::printf("\n");
    } else if (doc.contains("camera")) {
      const RunManifest manifest = load_manifest(path);
      std::printf("manifest %s\n  scene: %s\n  camera: %dx%d\n",
                  path.filename().string().c_str(), manifest.scene_path.string().c_str(),
                  manifest.camera.width, manifest.camera.height);
    } else {
      std::printf("%s: unrecognized json document\n", path.string().c_str());
      return 1;
    }
    return 0;
  }
  std::cerr << "inspect: unsupported file type '" << ext << "'\n";
  return 1;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Global body pose fitting against a scanned scene with "
               "contact-driven deformation"};
  app.require_subcommand(1);

  std::string manifest_path;
  CLI::App* fit = app.add_subcommand("fit", "run the three-stage fit for a manifest");
  fit->add_option("--manifest", manifest_path, "run manifest (.toml or .json)")->required();

  std::string results_dir, gt_dir, eval_out;
  CLI::App* eval = app.add_subcommand("eval", "compare a results directory to ground truth");
  eval->add_option("--results", results_dir, "results directory from fit")->required();
  eval->add_option("--gt", gt_dir, "scenario directory with gt/ data")->required();
  eval->add_option("--out", eval_out, "write the report as JSON");

  std::string scenario_id, synth_out;
  std::uint64_t seed = 0;
  double noise = 0.0;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scenario");
  synth->add_option("--scenario", scenario_id, "floor_walk | sofa_sit | beanbag_fall | occluded_sit")
      ->required();
  synth->add_option("--seed", seed, "random seed")->default_val(0);
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--noise", noise, "keypoint noise sigma in pixels")->default_val(0.0);

  std::string inspect_path;
  CLI::App* inspect = app.add_subcommand("inspect", "summarize a mesh/keypoints/model file");
  inspect->add_option("path", inspect_path, "file to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (fit->parsed()) return run_fit(manifest_path);
    if (eval->parsed()) return run_eval(results_dir, gt_dir, eval_out);
    if (synth->parsed()) {
      const Scenario scenario = generate_scenario(scenario_id, seed, synth_out, noise);
      std::cout << "synth: " << scenario.id << " (" << scenario.frames.size()
                << " frames) -> " << synth_out << "\n";
      return 0;
    }
    if (inspect->parsed()) return run_inspect(inspect_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace scenefit
