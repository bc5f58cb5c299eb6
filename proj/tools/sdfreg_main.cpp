// Copyright (c) 2026 the sdfreg authors.
// SPDX-License-Identifier: Apache-2.0
//
// sdfreg command-line front end: gradient-SDF building, synthetic trial
// generation, robust registration, evaluation, and batch benchmarking.
//
// Exit codes: 0 success, 2 usage or input error, 3 registration failure,
// 4 output I/O error.
#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <sdfreg/sdfreg.hpp>

namespace fs = std::filesystem;
using namespace sdfreg;

namespace {

bool g_verbose = false;

void require_input_file(const std::string& path) {
    if (!fs::exists(path)) throw InvalidArgument("input file not found: " + path);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_time(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

Vec3 parse_sigma(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() == 1) return Vec3::Constant(vals[0]);
    if (vals.size() == 3) return Vec3(vals[0], vals[1], vals[2]);
    throw InvalidArgument("--noise expects one value or sx,sy,sz");
}

TriangleMesh load_scaled_mesh(const std::string& path, double scale) {
    require_input_file(path);
    MeshLoadStats stats;
    TriangleMesh mesh = load_mesh(path, &stats);
    if (scale != 1.0)
        for (auto& v : mesh.vertices) v *= scale;
    if (g_verbose)
        std::cerr << "loaded " << path << ": " << mesh.vertices.size() << " vertices, "
                  << mesh.faces.size() << " faces (" << stats.degenerate_faces_dropped
                  << " degenerate dropped)\n";
    return mesh;
}

RegionMask parse_region(const std::string& region, const TriangleMesh& mesh) {
    if (region == "all") return full_mask(mesh);
    if (region.rfind("cap:", 0) == 0) {
        const auto rest = region.substr(4);
        const auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw InvalidArgument("--region cap wants cap:<vertex|top|bottom>:<radius_mm>");
        const std::string which = rest.substr(0, colon);
        int center = 0;
        if (which == "top" || which == "bottom") {
            const double sign = which == "top" ? 1.0 : -1.0;
            for (int i = 1; i < static_cast<int>(mesh.vertices.size()); ++i)
                if (sign * mesh.vertices[static_cast<std::size_t>(i)].z() >
                    sign * mesh.vertices[static_cast<std::size_t>(center)].z())
                    center = i;
        } else {
            center = std::stoi(which);
        }
        return spherical_cap_mask(mesh, center, std::stod(rest.substr(colon + 1)));
    }
    if (region.rfind("file:", 0) == 0) {
        const std::string path = region.substr(5);
        require_input_file(path);
        std::ifstream in(path);
        RegionMask mask;
        std::string line;
        long line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            int f = 0;
            try {
                f = std::stoi(line);
            } catch (const std::exception&) {
                throw ParseError("mask file: expected a face index", line_no);
            }
            if (f < 0 || f >= static_cast<int>(mesh.faces.size()))
                throw ParseError("mask face index out of range", line_no);
            mask.faces.push_back(f);
        }
        if (mask.faces.empty()) throw RegionTooSmall("mask file lists no faces");
        return mask;
    }
    throw InvalidArgument("--region must be all, cap:<vertex>:<radius>, or file:<path>");
}

GradientSdf load_grid(const std::string& path) {
    require_input_file(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open " + path);
    return deserialize(in);
}

RigidTransform parse_init(const std::string& init) {
    if (init == "identity") return {};
    if (init.rfind("landmarks:", 0) == 0) {
        const std::string path = init.substr(10);
        require_input_file(path);
        const auto [model, probe] = load_landmark_pairs(path);
        if (model.size() < 3)
            throw InvalidArgument("landmark init needs at least 3 pairs");
        return umeyama_align(probe.points, model.points);
    }
    if (init.rfind("matrix:", 0) == 0) {
        const std::string path = init.substr(7);
        require_input_file(path);
        std::ifstream in(path);
        std::vector<double> vals;
        double v;
        while (in >> v) vals.push_back(v);
        if (vals.size() != 12 && vals.size() != 16)
            throw ParseError("matrix init file wants 12 or 16 numbers (row-major 3x4 or 4x4)");
        RigidTransform x;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) x.rotation(i, j) = vals[static_cast<std::size_t>(4 * i + j)];
            x.translation[i] = vals[static_cast<std::size_t>(4 * i + 3)];
        }
        if (!is_rotation(x.rotation, 1e-6))
            throw InvalidArgument("matrix init rotation block is not a rotation");
        return x;
    }
    throw InvalidArgument("--init must be identity, landmarks:<csv>, or matrix:<file>");
}

// ------------------------------------------------------------- subcommands

int cmd_make_mesh(const std::string& shape, const std::string& out, double radius, int subdiv,
                  double size, double length, double shaft_r, double head_r, double bend) {
    TriangleMesh mesh;
    if (shape == "icosphere")
        mesh = make_icosphere(radius, subdiv);
    else if (shape == "box")
        mesh = make_box(size, size, size);
    else if (shape == "bone")
        mesh = make_bone(length, shaft_r, head_r, bend);
    else
        throw InvalidArgument("shape must be icosphere, box, or bone");
    save_mesh(mesh, out);
    std::cout << "wrote " << out << " (" << mesh.vertices.size() << " vertices, "
              << mesh.faces.size() << " faces)\n";
    return 0;
}

int cmd_build_sdf(const std::string& mesh_path, const std::string& out, double voxel,
                  double padding, double scale) {
    if (!(voxel > 0.0)) throw InvalidArgument("--voxel must be positive");
    if (padding < 0.0) throw InvalidArgument("--padding must be >= 0");
    const TriangleMesh mesh = load_scaled_mesh(mesh_path, scale);

    const auto t0 = std::chrono::steady_clock::now();
    const GradientSdf sdf = build_gradient_sdf(mesh, voxel, padding);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!sdf.watertight)
        std::cerr << "warning: mesh is not watertight; inside/outside signs may be unreliable\n";
    std::ofstream file(out, std::ios::binary);
    if (!file) throw IoError("cannot open " + out + " for writing");
    serialize(sdf, file);
    if (!file) throw IoError("write failed: " + out);
    std::cout << "grid " << sdf.dims[0] << "x" << sdf.dims[1] << "x" << sdf.dims[2] << " voxels ("
              << fmt(voxel) << " mm), built in " << fmt_time(secs) << " s -> " << out << "\n";
    return 0;
}

int cmd_simulate(const std::string& mesh_path, const std::string& out_dir,
                 const ExperimentSpec& spec, const std::string& region, double scale,
                 int model_samples) {
    const TriangleMesh mesh = load_scaled_mesh(mesh_path, scale);
    const RegionMask mask = parse_region(region, mesh);
    const SyntheticTrial trial = make_trial(mesh, mask, spec);

    fs::create_directories(out_dir);
    const auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };

    save_points(trial.combined, at("points.csv"));
    save_points(trial.combined, at("points.ply"));
    save_points(trial.clean_points, at("clean.ply"));
    save_landmark_pairs(trial.landmarks_model, trial.landmarks_moved, at("landmarks.csv"));
    save_points(sample_mesh_surface(mesh, model_samples, Rng::derive(spec.seed, 99)),
                at("model_points.ply"));

    TrialManifest manifest;
    manifest.spec = spec;
    manifest.gt_transform = trial.gt_transform;
    manifest.n_inliers = trial.noisy_points.size();
    manifest.n_outliers = trial.outlier_points.size();
    manifest.points_csv = "points.csv";
    manifest.points_ply = "points.ply";
    manifest.clean_ply = "clean.ply";
    manifest.landmarks_csv = "landmarks.csv";
    manifest.model_points_ply = "model_points.ply";
    save_manifest(manifest, at("manifest.json"));

    std::cout << "trial: " << manifest.n_inliers << " inliers + " << manifest.n_outliers
              << " outliers -> " << out_dir << "\n";
    return 0;
}

int cmd_register(const std::string& sdf_path, const std::string& points_path,
                 const std::string& out, const std::string& init, const RobustConfig& cfg,
                 std::uint64_t seed) {
    const GradientSdf sdf = load_grid(sdf_path);
    require_input_file(points_path);
    const PointCloud cloud = load_points(points_path);
    const RigidTransform x0 = parse_init(init);

    const RegistrationResult result = robust_register(sdf, cloud.points, x0, cfg);
    save_result(result, cfg, seed, nullptr, out);

    std::size_t inliers = 0;
    for (bool m : result.inlier_mask)
        if (m) ++inliers;
    std::cout << "registered " << cloud.size() << " points (" << inliers << " kept), "
              << result.irls_rounds << " IRLS rounds in " << fmt_time(result.elapsed_seconds)
              << " s -> " << out << "\n";
    if (g_verbose) {
        const EulerZyx e = euler_zyx(result.transform.rotation);
        std::cerr << "euler zyx deg: " << e.rx_deg << " " << e.ry_deg << " " << e.rz_deg
                  << "  t: " << result.transform.translation.transpose() << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& result_path, const std::string& trial_dir,
                 const std::string& out) {
    require_input_file(result_path);
    const LoadedResult loaded = load_result(result_path);
    const std::string manifest_path = (fs::path(trial_dir) / "manifest.json").string();
    require_input_file(manifest_path);
    const TrialManifest manifest = load_manifest(manifest_path);
    const auto at = [&](const std::string& name) { return (fs::path(trial_dir) / name).string(); };

    // compare in the applied direction (model -> measured) so the translation
    // error is anchored at the model, not at the moved cloud's offset
    const RigidTransform est_inv = loaded.result.transform.inverse();
    const RigidTransform gt_inv = manifest.gt_transform.inverse();
    EvalReport report;
    report.mae_rot_deg = mae_rotation_deg(est_inv.rotation, gt_inv.rotation);
    report.mae_trans_mm = mae_translation_mm(est_inv.translation, gt_inv.translation);
    report.runtime_s = loaded.result.elapsed_seconds;

    const PointCloud measured = load_points(at(manifest.points_csv));
    const PointCloud model_points = load_points(at(manifest.model_points_ply));
    PointCloud registered;
    for (std::size_t i = 0; i < measured.size(); ++i) {
        const bool keep = i < loaded.result.inlier_mask.size() ? loaded.result.inlier_mask[i] : true;
        if (keep) registered.points.push_back(loaded.result.transform * measured.points[i]);
    }
    report.chamfer_mm = chamfer_one_sided(registered, model_points);

    const auto [lm_model, lm_probe] = load_landmark_pairs(at(manifest.landmarks_csv));
    const TreResult t = tre(loaded.result.transform, lm_probe, lm_model);
    report.tre_mm = t.per_landmark_mm;
    report.tre_mean_mm = t.mean_mm;

    nlohmann::json j = to_json(report);
    j["schema_version"] = 1;
    std::ofstream file(out, std::ios::binary);
    if (!file) throw IoError("cannot open " + out + " for writing");
    file << j.dump(2) << '\n';
    if (!file) throw IoError("write failed: " + out);

    std::cout << "mae_rot_deg " << fmt(report.mae_rot_deg) << "\nmae_trans_mm "
              << fmt(report.mae_trans_mm) << "\nchamfer_mm " << fmt(report.chamfer_mm)
              << "\ntre_mean_mm " << fmt(report.tre_mean_mm) << "\nruntime_s "
              << fmt_time(report.runtime_s) << "\n";
    return 0;
}

struct BenchmarkRun {
    double mae_rot = 0.0, mae_trans = 0.0, chamfer = 0.0, time_s = 0.0;
};

int cmd_benchmark(const std::string& plan_path, const std::string& out_dir, int jobs,
                  bool seed_override, std::uint64_t master_seed) {
    require_input_file(plan_path);
    nlohmann::json plan;
    try {
        plan = nlohmann::json::parse(detail::read_file(plan_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad plan JSON: ") + e.what());
    }
    if (!plan.contains("entries") || !plan.at("entries").is_array() || plan.at("entries").empty())
        throw InvalidArgument("benchmark plan has no entries");
    const std::string mesh_path = plan.value("mesh", std::string{});
    if (mesh_path.empty()) throw InvalidArgument("benchmark plan needs a mesh");
    const std::string region = plan.value("region", std::string("all"));
    const double voxel = plan.value("voxel_size", 1.0);
    const double padding = plan.value("padding", 10.0);
    const double scale = plan.value("scale", 1.0);
    const int reps = plan.value("repetitions", 1);
    if (reps < 1) throw InvalidArgument("repetitions must be >= 1");
    RobustConfig cfg;
    if (plan.contains("config")) cfg = config_from_json(plan.at("config"));
    cfg.validate();

    const TriangleMesh mesh = load_scaled_mesh(mesh_path, scale);
    const RegionMask mask = parse_region(region, mesh);
    if (g_verbose) std::cerr << "building gradient-SDF...\n";
    const GradientSdf sdf = build_gradient_sdf(mesh, voxel, padding);
    const PointCloud model_points = sample_mesh_surface(mesh, 30000, 424242);

    struct Task {
        std::string label;
        ExperimentSpec spec;
        int rep = 0;
    };
    std::vector<Task> tasks;
    std::vector<std::string> labels;
    for (std::size_t e = 0; e < plan.at("entries").size(); ++e) {
        const auto& entry = plan.at("entries")[e];
        ExperimentSpec spec = spec_from_json(entry.value("spec", nlohmann::json::object()));
        if (seed_override) spec.seed = Rng::derive(master_seed, e);
        spec.validate();
        const std::string label = entry.value("label", "entry" + std::to_string(e));
        labels.push_back(label);
        for (int r = 0; r < reps; ++r) {
            Task t;
            t.label = label;
            t.spec = spec;
            t.spec.seed = spec.seed + static_cast<std::uint64_t>(r);  // distinct per repetition
            t.rep = r;
            tasks.push_back(t);
        }
    }

    std::vector<BenchmarkRun> runs(tasks.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size() || failed.load()) break;
            try {
                const Task& task = tasks[i];
                const SyntheticTrial trial = make_trial(mesh, mask, task.spec);
                const RigidTransform init = umeyama_align(
                    {trial.landmarks_moved.points.begin(), trial.landmarks_moved.points.begin() + 3},
                    {trial.landmarks_model.points.begin(), trial.landmarks_model.points.begin() + 3});
                const RegistrationResult result =
                    robust_register(sdf, trial.combined.points, init, cfg);

                BenchmarkRun run;
                const RigidTransform est_inv = result.transform.inverse();
                const RigidTransform gt_inv = trial.gt_transform.inverse();
                run.mae_rot = mae_rotation_deg(est_inv.rotation, gt_inv.rotation);
                run.mae_trans = mae_translation_mm(est_inv.translation, gt_inv.translation);
                PointCloud registered;
                for (std::size_t k = 0; k < trial.combined.size(); ++k)
                    if (result.inlier_mask[k])
                        registered.points.push_back(result.transform * trial.combined.points[k]);
                run.chamfer = chamfer_one_sided(registered, model_points);
                run.time_s = result.elapsed_seconds;
                runs[i] = run;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failure = e.what();
                failed.store(true);
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw Error("benchmark run failed: " + failure);

    fs::create_directories(out_dir);
    const std::string csv_path = (fs::path(out_dir) / "benchmark.csv").string();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw IoError("cannot open " + csv_path + " for writing");

    csv << "label,noise_x,noise_y,noise_z,outlier_ratio,seed,"
           "mean_mae_rot_deg,mean_mae_trans_mm,mean_chamfer_mm,mean_time_s";
    for (int r = 0; r < reps; ++r)
        csv << ",rep" << r << "_mae_rot_deg,rep" << r << "_mae_trans_mm,rep" << r
            << "_chamfer_mm,rep" << r << "_time_s";
    csv << "\n";

    for (std::size_t e = 0; e < labels.size(); ++e) {
        const std::size_t base = e * static_cast<std::size_t>(reps);
        const ExperimentSpec& spec = tasks[base].spec;
        BenchmarkRun mean;
        for (int r = 0; r < reps; ++r) {
            mean.mae_rot += runs[base + static_cast<std::size_t>(r)].mae_rot / reps;
            mean.mae_trans += runs[base + static_cast<std::size_t>(r)].mae_trans / reps;
            mean.chamfer += runs[base + static_cast<std::size_t>(r)].chamfer / reps;
            mean.time_s += runs[base + static_cast<std::size_t>(r)].time_s / reps;
        }
        csv << labels[e] << ',' << fmt(spec.noise_sigma_mm.x()) << ','
            << fmt(spec.noise_sigma_mm.y()) << ',' << fmt(spec.noise_sigma_mm.z()) << ','
            << fmt(spec.outlier_ratio) << ',' << spec.seed << ',' << fmt(mean.mae_rot) << ','
            << fmt(mean.mae_trans) << ',' << fmt(mean.chamfer) << ',' << fmt_time(mean.time_s);
        for (int r = 0; r < reps; ++r) {
            const BenchmarkRun& run = runs[base + static_cast<std::size_t>(r)];
            csv << ',' << fmt(run.mae_rot) << ',' << fmt(run.mae_trans) << ',' << fmt(run.chamfer)
                << ',' << fmt_time(run.time_s);
        }
        csv << "\n";
    }
    if (!csv) throw IoError("write failed: " + csv_path);
    std::cout << "wrote " << csv_path << " (" << labels.size() << " entries x " << reps
              << " repetitions)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partial-to-full rigid registration against a gradient signed-distance field"};
    app.require_subcommand(1);
    app.add_flag("--verbose", g_verbose, "chatty diagnostics on stderr");

    // make-mesh
    auto* mk = app.add_subcommand("make-mesh", "generate a synthetic test mesh");
    std::string mk_shape, mk_out;
    double mk_radius = 50.0, mk_size = 100.0, mk_length = 150.0, mk_shaft = 12.0, mk_head = 22.0,
           mk_bend = 14.0;
    int mk_subdiv = 4;
    mk->add_option("shape", mk_shape, "icosphere | box | bone")->required();
    mk->add_option("output", mk_out, "output mesh (.ply or .obj)")->required();
    mk->add_option("--radius", mk_radius, "icosphere radius, mm");
    mk->add_option("--subdiv", mk_subdiv, "icosphere subdivisions");
    mk->add_option("--size", mk_size, "box side length, mm");
    mk->add_option("--length", mk_length, "bone length, mm");
    mk->add_option("--shaft-radius", mk_shaft, "bone shaft radius, mm");
    mk->add_option("--head-radius", mk_head, "bone head radius, mm");
    mk->add_option("--bend", mk_bend, "bone centerline bend, mm");

    // build-sdf
    auto* bs = app.add_subcommand("build-sdf", "voxelize a mesh into a gradient-SDF grid");
    std::string bs_mesh, bs_out;
    double bs_voxel = 1.0, bs_padding = 10.0, bs_scale = 1.0;
    bs->add_option("mesh", bs_mesh, "input mesh (.obj/.ply/.stl)")->required();
    bs->add_option("output", bs_out, "output grid (.gsdf)")->required();
    bs->add_option("--voxel", bs_voxel, "voxel size, mm (default 1.0)");
    bs->add_option("--padding", bs_padding, "grid padding around the mesh, mm (default 10)");
    bs->add_option("--scale", bs_scale, "scale factor applied to mesh coordinates");

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate one synthetic trial");
    std::string sim_mesh, sim_out, sim_region = "all", sim_spec_path, sim_noise;
    double sim_scale = 1.0;
    int sim_model_samples = 50000;
    ExperimentSpec sim_spec;
    std::uint64_t sim_seed = 0;
    sim->add_option("mesh", sim_mesh, "model mesh")->required();
    sim->add_option("out_dir", sim_out, "output directory")->required();
    sim->add_option("--region", sim_region, "all | cap:<vertex>:<radius> | file:<path>");
    sim->add_option("--spec", sim_spec_path, "ExperimentSpec JSON file");
    sim->add_option("--seed", sim_seed, "override spec seed");
    sim->add_option("--strokes", sim_spec.n_strokes, "number of probe strokes");
    sim->add_option("--points-per-stroke", sim_spec.points_per_stroke, "points per stroke");
    sim->add_option("--spacing", sim_spec.stroke_spacing_mm, "stroke point spacing, mm");
    sim->add_option("--rot-range", sim_spec.rot_range_deg, "per-axis rotation range, deg");
    sim->add_option("--trans-range", sim_spec.trans_range_mm, "per-axis translation range, mm");
    sim->add_option("--noise", sim_noise, "noise sigma: s or sx,sy,sz (mm)");
    sim->add_option("--outlier-ratio", sim_spec.outlier_ratio, "outlier ratio in [0,1)");
    sim->add_option("--inflation", sim_spec.aabb_inflation, "outlier AABB inflation per side");
    sim->add_option("--scale", sim_scale, "scale factor applied to mesh coordinates");
    sim->add_option("--model-samples", sim_model_samples, "model surface sample count");

    // register
    auto* reg = app.add_subcommand("register", "register a point cloud to a gradient-SDF");
    std::string reg_sdf, reg_points, reg_out, reg_init = "identity";
    RobustConfig reg_cfg;
    std::uint64_t reg_seed = 0;
    reg->add_option("sdf", reg_sdf, "prebuilt .gsdf grid")->required();
    reg->add_option("points", reg_points, "measured points (.csv or .ply)")->required();
    reg->add_option("output", reg_out, "result JSON")->required();
    reg->add_option("--init", reg_init, "identity | landmarks:<csv> | matrix:<file>");
    reg->add_option("--cauchy-c", reg_cfg.cauchy_c, "Cauchy scale c, mm (default 1.0)");
    reg->add_option("--weight-eps", reg_cfg.weight_eps, "IRLS weight-change tolerance");
    reg->add_option("--outlier-delta", reg_cfg.outlier_delta, "discard threshold delta");
    reg->add_option("--max-irls", reg_cfg.max_irls_iters, "IRLS round cap");
    reg->add_option("--max-gn", reg_cfg.max_gn_iters, "Gauss-Newton iteration cap");
    reg->add_option("--step-tol", reg_cfg.gn_step_tol, "Gauss-Newton step tolerance");
    reg->add_option("--lm-lambda0", reg_cfg.lm_lambda0, "initial Levenberg damping");
    reg->add_flag("--auto-scale-c", reg_cfg.auto_scale_c, "per-round c = 1.4826*median(|e|)");
    reg->add_option("--seed", reg_seed, "seed echoed into the result document");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score a result against a trial's ground truth");
    std::string ev_result, ev_trial, ev_out;
    ev->add_option("--result", ev_result, "result JSON from register")->required();
    ev->add_option("--trial", ev_trial, "trial directory from simulate")->required();
    ev->add_option("--out", ev_out, "evaluation report JSON")->required();

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "run a grid of synthetic trials");
    std::string bench_plan, bench_out;
    int bench_jobs = 1;
    std::uint64_t bench_seed = 0;
    bench->add_option("plan", bench_plan, "benchmark plan JSON")->required();
    bench->add_option("out_dir", bench_out, "output directory")->required();
    bench->add_option("--jobs", bench_jobs, "parallel trial workers (default 1)");
    auto* bench_seed_opt = bench->add_option("--seed", bench_seed, "master seed override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (mk->parsed())
            return cmd_make_mesh(mk_shape, mk_out, mk_radius, mk_subdiv, mk_size, mk_length,
                                 mk_shaft, mk_head, mk_bend);
        if (bs->parsed()) return cmd_build_sdf(bs_mesh, bs_out, bs_voxel, bs_padding, bs_scale);
        if (sim->parsed()) {
            ExperimentSpec spec;
            if (!sim_spec_path.empty()) {
                require_input_file(sim_spec_path);
                try {
                    spec = spec_from_json(nlohmann::json::parse(detail::read_file(sim_spec_path)));
                } catch (const nlohmann::json::exception& e) {
                    throw ParseError(std::string("bad spec JSON: ") + e.what());
                }
            }
            // flag overrides on top of the spec file
            if (sim->count("--strokes")) spec.n_strokes = sim_spec.n_strokes;
            if (sim->count("--points-per-stroke"))
                spec.points_per_stroke = sim_spec.points_per_stroke;
            if (sim->count("--spacing")) spec.stroke_spacing_mm = sim_spec.stroke_spacing_mm;
            if (sim->count("--rot-range")) spec.rot_range_deg = sim_spec.rot_range_deg;
            if (sim->count("--trans-range")) spec.trans_range_mm = sim_spec.trans_range_mm;
            if (sim->count("--outlier-ratio")) spec.outlier_ratio = sim_spec.outlier_ratio;
            if (sim->count("--inflation")) spec.aabb_inflation = sim_spec.aabb_inflation;
            if (!sim_noise.empty()) spec.noise_sigma_mm = parse_sigma(sim_noise);
            if (sim->count("--seed")) spec.seed = sim_seed;
            spec.validate();
            return cmd_simulate(sim_mesh, sim_out, spec, sim_region, sim_scale, sim_model_samples);
        }
        if (reg->parsed()) {
            reg_cfg.validate();
            return cmd_register(reg_sdf, reg_points, reg_out, reg_init, reg_cfg, reg_seed);
        }
        if (ev->parsed()) return cmd_evaluate(ev_result, ev_trial, ev_out);
        if (bench->parsed())
            return cmd_benchmark(bench_plan, bench_out, bench_jobs, bench_seed_opt->count() > 0,
                                 bench_seed);
    } catch (const TooFewInliers& e) {
        std::cerr << "registration failed: " << e.what() << "\n";
        return 3;
    } catch (const RankDeficient& e) {
        std::cerr << "registration failed: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
