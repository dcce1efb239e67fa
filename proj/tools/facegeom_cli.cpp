// Command-line front end: fixture generation, template registration, detail
// refinement, the combined reconstruct pipeline, and depth-map evaluation.
//
// Exit codes: 0 success, 2 validation/input error, 3 numerical failure.
// Errors are reported as one JSON object on stderr.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "facegeom/error.hpp"
#include "facegeom/evaluation.hpp"
#include "facegeom/fixtures.hpp"
#include "facegeom/lifting.hpp"
#include "facegeom/maps.hpp"
#include "facegeom/mesh_io.hpp"
#include "facegeom/refine.hpp"
#include "facegeom/registration.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace facegeom;

namespace {

struct PipelineConfig {
  uint64_t seed = 0;
  RegistrationConfig registration;
  RefineConfig refine;
  RansacConfig ransac;
  EvalConfig eval;
};

double jget(const json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}
int jget(const json& j, const char* key, int fallback) {
  return j.contains(key) ? j.at(key).get<int>() : fallback;
}

PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, "bad config JSON: " + std::string(e.what()));
  }
  try {
    cfg.seed = j.value("seed", uint64_t(0));
    if (j.contains("registration")) {
      const json& r = j.at("registration");
      auto& rc = cfg.registration;
      rc.alpha_p2point = jget(r, "alpha_p2point", rc.alpha_p2point);
      rc.alpha_p2plane = jget(r, "alpha_p2plane", rc.alpha_p2plane);
      rc.alpha_memb_init = jget(r, "alpha_memb_init", rc.alpha_memb_init);
      rc.alpha_memb_stop = jget(r, "alpha_memb_stop", rc.alpha_memb_stop);
      rc.stiffness_scale = jget(r, "stiffness_scale", rc.stiffness_scale);
      rc.prune_distance = jget(r, "prune_distance", rc.prune_distance);
      rc.prune_angle_deg = jget(r, "prune_angle_deg", rc.prune_angle_deg);
      rc.prune_distance_decay = r.value("prune_distance_decay", rc.prune_distance_decay);
      rc.inner_tol = jget(r, "inner_tol", rc.inner_tol);
      rc.max_inner_rounds = jget(r, "max_inner_rounds", rc.max_inner_rounds);
      rc.outer_motion_tol = jget(r, "outer_motion_tol", rc.outer_motion_tol);
      rc.pair_diff_switch = jget(r, "pair_diff_switch", rc.pair_diff_switch);
      rc.max_outer_iterations = jget(r, "max_outer_iterations", rc.max_outer_iterations);
      if (r.contains("membrane_scheme")) {
        const std::string name = r.at("membrane_scheme").get<std::string>();
        if (name == "uniform") rc.membrane_scheme = MembraneScheme::kUniform;
        else if (name == "cotangent") rc.membrane_scheme = MembraneScheme::kCotangent;
        else if (name == "bilaplacian") rc.membrane_scheme = MembraneScheme::kBilaplacian;
        else raise(ErrorCode::ValidationError, "unknown membrane_scheme '" + name + "'");
      }
    }
    if (j.contains("refine")) {
      const json& r = j.at("refine");
      auto& fc = cfg.refine;
      fc.dt = jget(r, "dt", fc.dt);
      fc.eta = jget(r, "eta", fc.eta);
      fc.gain = jget(r, "gain", fc.gain);
      fc.fairing_step = jget(r, "fairing_step", fc.fairing_step);
      fc.subdivision_levels = jget(r, "subdivision_levels", fc.subdivision_levels);
      fc.sample_radius_px = jget(r, "sample_radius_px", fc.sample_radius_px);
    }
    if (j.contains("ransac")) {
      const json& r = j.at("ransac");
      auto& ac = cfg.ransac;
      ac.iterations = jget(r, "iterations", ac.iterations);
      ac.inlier_threshold = jget(r, "inlier_threshold", ac.inlier_threshold);
      ac.min_sample = jget(r, "min_sample", ac.min_sample);
    }
    if (j.contains("eval")) {
      const json& r = j.at("eval");
      auto& ec = cfg.eval;
      ec.ransac_iterations = jget(r, "ransac_iterations", ec.ransac_iterations);
      ec.threshold_percent = jget(r, "threshold_percent", ec.threshold_percent);
      ec.pixel_size = jget(r, "pixel_size", ec.pixel_size);
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::ValidationError, "bad config value: " + std::string(e.what()));
  }
  return cfg;
}

struct RegisterOutcome {
  TriangleMesh deformed;
  RegistrationTrace trace;
  AffineTransform affine;
};

RegisterOutcome run_registration(const TemplateMesh& tmpl, const TargetMesh& target,
                                 const PipelineConfig& cfg) {
  const CorrespondenceSet matches = match_embedding_nn(tmpl, target);
  RansacConfig rcfg = cfg.ransac;
  rcfg.seed = cfg.seed;
  const AffineEstimate est = estimate_affine_ransac(matches, tmpl, target, rcfg);
  RegistrationResult reg = register_template(tmpl, target, est.transform, cfg.registration);
  return {std::move(reg.mesh), std::move(reg.trace), est.transform};
}

void write_registration_outputs(const fs::path& dir, const RegisterOutcome& out) {
  fs::create_directories(dir);
  MeshData deformed;
  deformed.mesh = out.deformed;
  write_ply(dir / "deformed.ply", deformed);
  write_trace_jsonl(dir / "trace.jsonl", out.trace);
  write_transform_json(dir / "affine.json", out.affine);
}

void write_refined_output(const fs::path& path, const RefineResult& refined) {
  MeshData data;
  data.mesh = refined.mesh;
  data.tau = refined.texture.tau;
  data.mu = refined.texture.mu;
  write_ply(path, data);
}

// ---- evaluate helpers -------------------------------------------------

struct EvalSample {
  std::string name;
  std::string label;
  DepthEvalReport report;
};

DepthEvalReport evaluate_pair(const std::string& est_path, const std::string& gt_path,
                              const std::string& mask_path, const EvalConfig& cfg) {
  const Raster est = read_pfm(est_path);
  const Raster gt = read_pfm(gt_path);
  Mask mask;
  if (!mask_path.empty()) {
    mask = read_pgm(mask_path);
  } else {
    mask = Mask(gt.width, gt.height, 1);
  }
  return evaluate_depth(est, gt, mask, cfg);
}

int run_evaluate(const std::string& est_path, const std::string& gt_path,
                 const std::string& mask_path, const std::string& pairs_path,
                 const std::string& group_by, const std::string& out_stem,
                 const PipelineConfig& cfg) {
  EvalConfig ecfg = cfg.eval;
  ecfg.seed = cfg.seed;

  std::vector<EvalSample> samples;
  if (!pairs_path.empty()) {
    std::ifstream in(pairs_path);
    if (!in) raise(ErrorCode::IoError, "cannot open " + pairs_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      raise(ErrorCode::MalformedHeader, "bad pairs JSON: " + std::string(e.what()));
    }
    if (!j.is_array() || j.empty())
      raise(ErrorCode::ValidationError, "pairs file must be a non-empty array");
    for (const json& entry : j) {
      EvalSample s;
      s.name = entry.value("name", "sample" + std::to_string(samples.size()));
      s.label = entry.value("label", "");
      s.report = evaluate_pair(entry.at("est").get<std::string>(),
                               entry.at("gt").get<std::string>(),
                               entry.value("mask", ""), ecfg);
      samples.push_back(std::move(s));
    }
  } else {
    if (est_path.empty() || gt_path.empty())
      raise(ErrorCode::ValidationError, "evaluate needs --est/--gt or --pairs");
    samples.push_back({"sample", "", evaluate_pair(est_path, gt_path, mask_path, ecfg)});
  }

  // Optional label file overrides per-sample labels: {"name": "label", ...}.
  if (!group_by.empty()) {
    std::ifstream in(group_by);
    if (!in) raise(ErrorCode::IoError, "cannot open " + group_by);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      raise(ErrorCode::MalformedHeader, "bad label JSON: " + std::string(e.what()));
    }
    for (EvalSample& s : samples)
      if (j.contains(s.name)) s.label = j.at(s.name).get<std::string>();
  }

  std::vector<std::string> names;
  std::vector<DepthEvalReport> reports;
  json out_json;
  out_json["samples"] = json::object();
  for (const EvalSample& s : samples) {
    names.push_back(s.name);
    reports.push_back(s.report);
    out_json["samples"][s.name] = json::parse(report_to_json(s.report));
  }

  // Group means (only when labels exist), plus the overall mean.
  std::vector<std::string> labels;
  for (const EvalSample& s : samples)
    if (!s.label.empty() &&
        std::find(labels.begin(), labels.end(), s.label) == labels.end())
      labels.push_back(s.label);
  std::sort(labels.begin(), labels.end());
  out_json["groups"] = json::object();
  for (const std::string& label : labels) {
    std::vector<DepthEvalReport> group;
    for (const EvalSample& s : samples)
      if (s.label == label) group.push_back(s.report);
    const DepthEvalReport agg = aggregate_reports(group);
    names.push_back("[" + label + "]");
    reports.push_back(agg);
    out_json["groups"][label] = json::parse(report_to_json(agg));
  }
  const DepthEvalReport overall = aggregate_reports(
      std::vector<DepthEvalReport>(reports.begin(), reports.begin() + long(samples.size())));
  if (samples.size() > 1) {
    names.push_back("[all]");
    reports.push_back(overall);
  }
  out_json["all"] = json::parse(report_to_json(overall));

  const std::string table = report_table(names, reports);
  std::fputs(table.c_str(), stdout);
  if (!out_stem.empty()) {
    std::ofstream jf(out_stem + ".report.json");
    if (!jf) raise(ErrorCode::IoError, "cannot write " + out_stem + ".report.json");
    jf << out_json.dump(2) << "\n";
    std::ofstream tf(out_stem + ".report.txt");
    if (!tf) raise(ErrorCode::IoError, "cannot write " + out_stem + ".report.txt");
    tf << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detail-preserving depth-map to mesh reconstruction"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "pipeline configuration JSON");
  app.add_option("--seed", seed, "seed for all randomized stages")
      ->each([&](const std::string&) { seed_set = true; });

  // fixtures ------------------------------------------------------------
  auto* fix = app.add_subcommand("fixtures", "generate a synthetic map-stack fixture");
  std::string fix_kind = "sphere", fix_out, fix_deform = "none", fix_pattern = "constant";
  FixtureSpec spec;
  std::vector<double> fix_translate;
  fix->add_option("--kind", fix_kind, "sphere | paraboloid | embossed_plane");
  fix->add_option("--out", fix_out, "output stem")->required();
  fix->add_option("--resolution", spec.resolution, "target raster resolution");
  fix->add_option("--template-resolution", spec.template_resolution,
                  "template raster resolution (0 = same)");
  fix->add_option("--radius", spec.radius, "footprint radius (mm)");
  fix->add_option("--height", spec.height, "surface height parameter (mm)");
  fix->add_option("--scale", spec.scale, "planted affine scale");
  fix->add_option("--rotation-deg", spec.rotation_deg, "planted rotation about z");
  fix->add_option("--translate", fix_translate, "planted translation x y z (mm)")
      ->expected(3);
  fix->add_option("--deformation", fix_deform, "none | gaussian | sinusoid");
  fix->add_option("--deform-amplitude", spec.deform_amplitude, "deformation height (mm)");
  fix->add_option("--deform-sigma", spec.deform_sigma, "gaussian bump width (mm)");
  fix->add_option("--deform-wavelength", spec.deform_wavelength, "sinusoid period (mm)");
  fix->add_option("--pattern", fix_pattern, "constant | checkerboard | stripes");
  fix->add_option("--pattern-scale", spec.pattern_scale, "pattern period (mm)");
  fix->add_option("--pattern-amplitude", spec.pattern_amplitude, "stripe contrast");
  fix->add_option("--noise-sigma", spec.noise_sigma, "depth noise sigma (mm)");
  fix->add_option("--outlier-fraction", spec.outlier_fraction,
                  "fraction of scrambled correspondences");

  // register ------------------------------------------------------------
  auto* reg = app.add_subcommand("register", "register a template to a map stack");
  std::string reg_template, reg_maps, reg_out;
  reg->add_option("--template", reg_template, "template PLY with ex/ey/ez")->required();
  reg->add_option("--maps", reg_maps, "map-stack stem")->required();
  reg->add_option("--out", reg_out, "output directory")->required();

  // refine ---------------------------------------------------------------
  auto* ref = app.add_subcommand("refine", "detail-refine a registered mesh");
  std::string ref_mesh, ref_maps, ref_out;
  ref->add_option("--mesh", ref_mesh, "registered mesh PLY")->required();
  ref->add_option("--maps", ref_maps, "map-stack stem")->required();
  ref->add_option("--out", ref_out, "output PLY")->required();

  // reconstruct ---------------------------------------------------------
  auto* rec = app.add_subcommand("reconstruct", "register then refine");
  std::string rec_template, rec_maps, rec_out;
  bool rec_skip_refine = false;
  rec->add_option("--template", rec_template, "template PLY with ex/ey/ez")->required();
  rec->add_option("--maps", rec_maps, "map-stack stem")->required();
  rec->add_option("--out", rec_out, "output directory")->required();
  rec->add_flag("--skip-refine", rec_skip_refine, "stop after registration");

  // evaluate ------------------------------------------------------------
  auto* eva = app.add_subcommand("evaluate", "depth-map error report");
  std::string eva_est, eva_gt, eva_mask, eva_pairs, eva_group, eva_out;
  eva->add_option("--est", eva_est, "estimated depth PFM");
  eva->add_option("--gt", eva_gt, "ground-truth depth PFM");
  eva->add_option("--mask", eva_mask, "validity mask PGM");
  eva->add_option("--pairs", eva_pairs, "JSON array of {name, est, gt, mask?, label?}");
  eva->add_option("--group-by", eva_group, "JSON object mapping sample name to label");
  eva->add_option("--out", eva_out, "report output stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    json err{{"error", "ValidationError"}, {"message", std::string("bad arguments: ") + e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  }

  try {
    PipelineConfig cfg = load_config(config_path);
    if (seed_set) cfg.seed = seed;

    if (fix->parsed()) {
      spec.kind = fixture_kind_from_name(fix_kind);
      spec.deformation = deformation_kind_from_name(fix_deform);
      spec.pattern = intensity_pattern_from_name(fix_pattern);
      if (!fix_translate.empty())
        spec.translation = Vec3(fix_translate[0], fix_translate[1], fix_translate[2]);
      spec.seed = cfg.seed;
      const Fixture fixture = generate_fixture(spec);
      const fs::path stem(fix_out);
      if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
      write_fixture(stem, fixture, spec);
      std::printf("fixture %s written to %s (%d template vertices, %zu valid pixels)\n",
                  fix_kind.c_str(), fix_out.c_str(),
                  fixture.template_mesh.mesh.vertex_count(), fixture.stack.mask.count());
    } else if (reg->parsed()) {
      const TemplateMesh tmpl = read_template_ply(reg_template);
      const MapStack stack = load_map_stack(fs::path(reg_maps));
      const TargetMesh target = lift_maps_to_mesh(stack);
      const RegisterOutcome out = run_registration(tmpl, target, cfg);
      write_registration_outputs(reg_out, out);
      std::printf("registered %d vertices in %zu iterations -> %s\n",
                  out.deformed.vertex_count(), out.trace.size(), reg_out.c_str());
    } else if (ref->parsed()) {
      const MeshData mesh = read_ply(ref_mesh);
      const MapStack stack = load_map_stack(fs::path(ref_maps));
      RefineConfig fcfg = cfg.refine;
      const RefineResult refined = refine_mesh(mesh.mesh, stack, fcfg);
      const fs::path out_path(ref_out);
      if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
      write_refined_output(out_path, refined);
      std::printf("refined %d -> %d vertices -> %s\n", mesh.mesh.vertex_count(),
                  refined.mesh.vertex_count(), ref_out.c_str());
    } else if (rec->parsed()) {
      const TemplateMesh tmpl = read_template_ply(rec_template);
      const MapStack stack = load_map_stack(fs::path(rec_maps));
      const TargetMesh target = lift_maps_to_mesh(stack);
      const RegisterOutcome out = run_registration(tmpl, target, cfg);
      write_registration_outputs(rec_out, out);
      if (!rec_skip_refine) {
        const RefineResult refined = refine_mesh(out.deformed, stack, cfg.refine);
        write_refined_output(fs::path(rec_out) / "refined.ply", refined);
      }
      std::printf("reconstruction written to %s\n", rec_out.c_str());
    } else if (eva->parsed()) {
      return run_evaluate(eva_est, eva_gt, eva_mask, eva_pairs, eva_group, eva_out, cfg);
    }
    return 0;
  } catch (const Error& e) {
    json err{{"error", error_code_name(e.code())}, {"message", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return is_solver_error(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    json err{{"error", "InternalError"}, {"message", e.what()}};
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  }
}
