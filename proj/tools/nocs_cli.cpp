// Command-line frontend: canonicalize / render / composite / fit / eval /
// proj2d / loss subcommands over the library's file formats.
//
// Exit codes: 0 success, 2 input error, 3 data-pairing error, 4 fit failed
// on every instance. Errors additionally emit a JSON record on stderr.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nocs/canonical.hpp"
#include "nocs/category.hpp"
#include "nocs/compositor.hpp"
#include "nocs/eval.hpp"
#include "nocs/fit.hpp"
#include "nocs/geom.hpp"
#include "nocs/io.hpp"
#include "nocs/loss.hpp"
#include "nocs/random.hpp"
#include "nocs/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitPairing = 3;
constexpr int kExitFitFailed = 4;

/// All instance fits failed; maps to exit code 4.
struct AllFitsFailed : nocs::Error {
    using Error::Error;
};

void emit_error(const std::string& kind, const std::string& message,
                const std::vector<std::string>& ids = {}) {
    json j;
    j["error"] = kind;
    j["message"] = message;
    if (!ids.empty()) j["ids"] = ids;
    std::cerr << j.dump() << "\n";
}

void run_parallel(int threads, int jobs, const std::function<void(int)>& fn) {
    if (threads <= 1 || jobs <= 1) {
        for (int i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min(threads, jobs);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string frame_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", index);
    return buf;
}

// --------------------------------------------------------------------------
// canonicalize
// --------------------------------------------------------------------------

int cmd_canonicalize(const std::string& in_path, const std::string& out_path) {
    const nocs::canonical::Mesh mesh = nocs::io::load_obj(in_path);
    const nocs::canonical::CanonicalMesh canon = nocs::canonical::canonicalize(mesh);
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out_path).parent_path());
    nocs::io::save_canonical_mesh(out_path, canon);
    std::cout << "canonicalized " << in_path << " -> " << out_path
              << " (source_scale " << canon.source_scale << ")\n";
    return kExitOk;
}

// --------------------------------------------------------------------------
// render
// --------------------------------------------------------------------------

std::vector<nocs::render::SceneInstance> instances_from_scene(
    const nocs::io::SceneMetadata& scene, const fs::path& base_dir) {
    std::vector<nocs::render::SceneInstance> instances;
    std::map<std::string, std::shared_ptr<const nocs::canonical::CanonicalMesh>> cache;
    for (const auto& inst : scene.instances) {
        if (inst.mesh_path.empty())
            throw nocs::InvalidInputError("scene instance " +
                                          std::to_string(inst.instance_id) +
                                          " has no mesh path");
        const std::string resolved = fs::path(inst.mesh_path).is_absolute()
                                         ? inst.mesh_path
                                         : (base_dir / inst.mesh_path).string();
        auto& mesh = cache[resolved];
        if (!mesh)
            mesh = std::make_shared<nocs::canonical::CanonicalMesh>(
                nocs::io::load_canonical_mesh(resolved));
        nocs::render::SceneInstance si;
        si.mesh = mesh;
        si.pose = inst.pose;
        si.class_id = inst.class_id;
        si.instance_id = inst.instance_id;
        si.handle_visible = inst.handle_visible;
        si.mesh_path = inst.mesh_path;
        instances.push_back(std::move(si));
    }
    return instances;
}

int cmd_render(const std::string& scene_path, const std::string& intr_path,
               const std::string& out_dir, bool write_rgb) {
    const nocs::io::SceneMetadata scene = nocs::io::load_scene(scene_path);
    nocs::geom::Intrinsics intr;
    if (!intr_path.empty()) {
        intr = nocs::io::load_intrinsics(intr_path);
    } else if (scene.intrinsics) {
        intr = *scene.intrinsics;
    } else {
        throw nocs::InvalidInputError("render: no intrinsics given (flag or scene record)");
    }

    auto instances = instances_from_scene(scene, fs::path(scene_path).parent_path());
    const nocs::render::RenderOutput out = nocs::render::render_scene(instances, intr);

    fs::create_directories(out_dir);
    const std::string id = scene.image_id.empty() ? "000000" : scene.image_id;
    const fs::path base = fs::path(out_dir) / id;
    nocs::io::write_nocs_png(base.string() + "_nocs.png", out.nocs);
    nocs::io::write_depth_png(base.string() + "_depth.png", out.depth);
    nocs::io::write_mask_png(base.string() + "_mask.png", out.mask);
    if (write_rgb) nocs::io::write_png8(base.string() + "_rgb.png", out.rgb);

    // Emit an eval-ready ground-truth record with derived fields filled in.
    nocs::io::SceneMetadata gt = scene;
    gt.image_id = id;
    gt.intrinsics = intr;
    for (size_t i = 0; i < gt.instances.size(); ++i) {
        auto& gi = gt.instances[i];
        gi.nocs_extents = instances[i].mesh->nocs_extents;
        gi.dimensions = gi.pose.s * gi.nocs_extents;
        if (!gi.handle_visible && !instances[i].mesh->mesh.handle_triangles.empty())
            gi.handle_visible = nocs::render::handle_visibility(instances[i], out.mask, intr);
    }
    nocs::io::save_scene((fs::path(out_dir) / (id + "_scene.json")).string(), gt);
    return kExitOk;
}

// --------------------------------------------------------------------------
// composite
// --------------------------------------------------------------------------

struct MeshEntry {
    std::shared_ptr<const nocs::canonical::CanonicalMesh> mesh;
    std::string path;
    int class_id = 0;
    std::array<double, 2> scale_range{0.1, 0.3};
};

std::vector<MeshEntry> load_mesh_manifest(const std::string& manifest_path,
                                          const nocs::CategoryTable& table) {
    std::ifstream in(manifest_path);
    if (!in) throw nocs::ParseError("mesh manifest: cannot open " + manifest_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw nocs::ParseError("mesh manifest: " + std::string(e.what()));
    }
    std::vector<MeshEntry> entries;
    const fs::path base = fs::path(manifest_path).parent_path();
    try {
        for (const auto& jm : j.at("meshes")) {
            MeshEntry e;
            e.path = jm.at("path").get<std::string>();
            const std::string resolved =
                fs::path(e.path).is_absolute() ? e.path : (base / e.path).string();
            e.mesh = std::make_shared<nocs::canonical::CanonicalMesh>(
                nocs::io::load_canonical_mesh(resolved));
            const std::string category = jm.at("category").get<std::string>();
            const nocs::CategorySpec* spec = nullptr;
            for (const auto& s : table.specs)
                if (s.name == category) spec = &s;
            if (!spec)
                throw nocs::ParseError("mesh manifest: unknown category " + category);
            e.class_id = spec->class_id;
            e.scale_range = spec->scale_range_m;
            entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw nocs::ParseError("mesh manifest: " + std::string(e.what()));
    }
    if (entries.empty()) throw nocs::ParseError("mesh manifest: no meshes");
    return entries;
}

int cmd_composite(const std::string& rgb_path, const std::string& depth_path,
                  const std::string& intr_path, const std::string& manifest_path,
                  const std::string& categories_path, int count, int frames,
                  uint64_t seed, int threads, const std::string& out_dir) {
    const nocs::geom::Intrinsics intr = nocs::io::load_intrinsics(intr_path);
    nocs::compositor::Background bg;
    bg.rgb = nocs::io::read_png8(rgb_path);
    bg.depth = nocs::io::read_depth_png(depth_path);
    const nocs::CategoryTable table = categories_path.empty()
                                          ? nocs::CategoryTable::defaults()
                                          : nocs::load_category_table(categories_path);
    const std::vector<MeshEntry> meshes = load_mesh_manifest(manifest_path, table);

    nocs::compositor::PlaneDetectConfig plane_cfg;
    plane_cfg.subsample_stride = std::max(1, intr.width / 160);
    plane_cfg.rng_seed = nocs::derive_seed(seed, 0x706c616e);  // plane stream
    const auto planes = nocs::compositor::detect_planes(bg.depth, intr, plane_cfg);

    std::vector<std::shared_ptr<const nocs::canonical::CanonicalMesh>> mesh_ptrs;
    std::vector<std::array<double, 2>> ranges;
    for (const auto& e : meshes) {
        mesh_ptrs.push_back(e.mesh);
        ranges.push_back(e.scale_range);
    }

    fs::create_directories(out_dir);
    run_parallel(threads, frames, [&](int f) {
        nocs::compositor::PlacementConfig pcfg;
        pcfg.count = count;
        pcfg.per_mesh_scale_range = ranges;
        pcfg.rng_seed = nocs::derive_seed(seed, static_cast<uint64_t>(f));
        const auto placed = nocs::compositor::sample_placements(planes, mesh_ptrs, pcfg);
        if (!placed.complete)
            emit_error("PlacementWarning",
                       "frame " + frame_id(f) + ": placed fewer than requested objects");

        std::vector<nocs::render::SceneInstance> instances;
        for (size_t i = 0; i < placed.placements.size(); ++i) {
            const auto& p = placed.placements[i];
            nocs::render::SceneInstance si;
            si.mesh = mesh_ptrs[p.mesh_index];
            si.pose = p.pose;
            si.class_id = meshes[p.mesh_index].class_id;
            si.instance_id = static_cast<uint8_t>(i + 1);
            si.mesh_path = meshes[p.mesh_index].path;
            instances.push_back(std::move(si));
        }

        auto result = nocs::compositor::composite(bg, instances, intr);
        result.meta.image_id = frame_id(f);
        const fs::path base = fs::path(out_dir) / result.meta.image_id;
        nocs::io::write_png8(base.string() + "_rgb.png", result.rgb);
        nocs::io::write_nocs_png(base.string() + "_nocs.png", result.nocs);
        nocs::io::write_depth_png(base.string() + "_depth.png", result.depth);
        nocs::io::write_mask_png(base.string() + "_mask.png", result.mask);
        nocs::io::save_scene(base.string() + "_scene.json", result.meta);
    });
    std::cout << "composited " << frames << " frame(s) into " << out_dir << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------------
// fit
// --------------------------------------------------------------------------

struct FitJob {
    std::string id;
    std::string nocs_path, depth_path, mask_path;
    std::string scene_path;  // optional
};

/// Fit every instance of one image; returns the number of successes and
/// appends failures to stderr.
int fit_one_image(const FitJob& job, const nocs::geom::Intrinsics& intr,
                  const nocs::fit::FitConfig& cfg, const std::string& out_dir,
                  int* attempted) {
    const nocs::InstanceMask mask = nocs::io::read_mask_png(job.mask_path);
    const nocs::DepthMap depth = nocs::io::read_depth_png(job.depth_path);
    const nocs::NocsMap nocs_map = nocs::io::read_nocs_png(job.nocs_path, mask);

    std::optional<nocs::io::SceneMetadata> scene;
    if (!job.scene_path.empty()) scene = nocs::io::load_scene(job.scene_path);

    // Instances present in the mask, in id order.
    std::set<uint8_t> ids;
    for (uint8_t v : mask.data)
        if (v != 0) ids.insert(v);
    if (scene)
        for (const auto& inst : scene->instances) ids.insert(inst.instance_id);

    nocs::io::PredictionFile pred;
    pred.image_id = job.id;
    int ok = 0;
    for (uint8_t id : ids) {
        ++*attempted;
        const nocs::io::SceneMetadata::Instance* info = nullptr;
        if (scene)
            for (const auto& inst : scene->instances)
                if (inst.instance_id == id) info = &inst;

        std::optional<Eigen::Vector3d> extents;
        if (info && info->nocs_extents.norm() > 0.0) extents = info->nocs_extents;

        try {
            nocs::fit::FitConfig instance_cfg = cfg;
            instance_cfg.rng_seed = nocs::derive_seed(cfg.rng_seed, id);
            const nocs::fit::PoseResult result = nocs::fit::estimate_pose(
                nocs_map, depth, mask, id, intr, extents, instance_cfg);

            nocs::io::PredictionFile::Detection det;
            det.class_id = info ? info->class_id : 0;
            long masked = 0;
            for (uint8_t v : mask.data) masked += v == id;
            det.score = masked > 0
                            ? std::min(1.0, static_cast<double>(result.inlier_count) / masked)
                            : 1.0;
            det.pose = result.transform;
            det.dimensions = result.dimensions;
            det.inlier_count = result.inlier_count;
            det.rmse = result.rmse;
            pred.detections.push_back(std::move(det));
            ++ok;
        } catch (const nocs::Error& e) {
            emit_error("FitFailure", job.id + " instance " + std::to_string(id) + ": " +
                                         e.what());
        }
    }
    fs::create_directories(out_dir);
    nocs::io::save_predictions((fs::path(out_dir) / (job.id + "_pred.json")).string(), pred);
    return ok;
}

int cmd_fit(const std::string& in_dir, const FitJob& single,
            const std::string& intr_path, const nocs::fit::FitConfig& cfg,
            int threads, const std::string& out_dir) {
    const nocs::geom::Intrinsics intr = nocs::io::load_intrinsics(intr_path);

    std::vector<FitJob> jobs;
    if (!in_dir.empty()) {
        for (const auto& entry : fs::directory_iterator(in_dir)) {
            const std::string name = entry.path().filename().string();
            const std::string suffix = "_nocs.png";
            if (name.size() <= suffix.size() ||
                name.substr(name.size() - suffix.size()) != suffix)
                continue;
            FitJob job;
            job.id = name.substr(0, name.size() - suffix.size());
            const fs::path base = fs::path(in_dir) / job.id;
            job.nocs_path = base.string() + "_nocs.png";
            job.depth_path = base.string() + "_depth.png";
            job.mask_path = base.string() + "_mask.png";
            if (fs::exists(base.string() + "_scene.json"))
                job.scene_path = base.string() + "_scene.json";
            jobs.push_back(std::move(job));
        }
        std::sort(jobs.begin(), jobs.end(),
                  [](const FitJob& a, const FitJob& b) { return a.id < b.id; });
        if (jobs.empty())
            throw nocs::InvalidInputError("fit: no *_nocs.png files in " + in_dir);
    } else {
        jobs.push_back(single);
    }

    std::atomic<int> ok{0}, attempted{0};
    run_parallel(threads, static_cast<int>(jobs.size()), [&](int i) {
        int local_attempted = 0;
        ok += fit_one_image(jobs[i], intr, cfg, out_dir, &local_attempted);
        attempted += local_attempted;
    });

    if (attempted > 0 && ok == 0)
        throw AllFitsFailed("fit: every instance fit failed");
    std::cout << "fit " << ok << "/" << attempted << " instance(s) across "
              << jobs.size() << " image(s)\n";
    return kExitOk;
}

// --------------------------------------------------------------------------
// eval
// --------------------------------------------------------------------------

std::vector<std::string> scan_ids(const std::string& dir, const std::string& suffix) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > suffix.size() &&
            name.substr(name.size() - suffix.size()) == suffix)
            ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& categories_path, const std::string& out_dir,
             const nocs::eval::EvalConfig& cfg) {
    const nocs::CategoryTable table = categories_path.empty()
                                          ? nocs::CategoryTable::defaults()
                                          : nocs::load_category_table(categories_path);

    std::vector<nocs::eval::ImageDetections> preds;
    for (const auto& id : scan_ids(pred_dir, "_pred.json"))
        preds.push_back(nocs::eval::from_prediction_file(nocs::io::load_predictions(
            (fs::path(pred_dir) / (id + "_pred.json")).string())));

    std::vector<nocs::eval::ImageGroundTruth> gts;
    for (const auto& id : scan_ids(gt_dir, "_scene.json"))
        gts.push_back(nocs::eval::from_scene_metadata(nocs::io::load_scene(
            (fs::path(gt_dir) / (id + "_scene.json")).string())));
    if (gts.empty()) throw nocs::InvalidInputError("eval: no *_scene.json in " + gt_dir);

    const nocs::eval::EvalReport report =
        nocs::eval::evaluate_dataset(preds, gts, table, cfg);
    nocs::eval::write_report_csv(report, out_dir);

    std::cout << "class";
    for (const auto& label : report.column_labels) std::cout << "," << label;
    std::cout << "\n";
    for (int cls : report.class_ids) {
        std::cout << report.class_names.at(cls);
        for (double v : report.table.at(cls)) std::cout << "," << v;
        std::cout << "\n";
    }
    std::cout << "mean";
    for (double v : report.mean_row) std::cout << "," << v;
    std::cout << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------------
// proj2d
// --------------------------------------------------------------------------

int cmd_proj2d(const std::string& scene_path, const std::string& pred_path,
               const std::string& intr_path, const std::string& categories_path) {
    const nocs::io::SceneMetadata scene = nocs::io::load_scene(scene_path);
    const nocs::io::PredictionFile pred = nocs::io::load_predictions(pred_path);
    nocs::geom::Intrinsics intr;
    if (!intr_path.empty())
        intr = nocs::io::load_intrinsics(intr_path);
    else if (scene.intrinsics)
        intr = *scene.intrinsics;
    else
        throw nocs::InvalidInputError("proj2d: no intrinsics given");

    const nocs::CategoryTable table = categories_path.empty()
                                          ? nocs::CategoryTable::defaults()
                                          : nocs::load_category_table(categories_path);
    const auto matches = nocs::eval::match_detections(
        nocs::eval::from_prediction_file(pred), nocs::eval::from_scene_metadata(scene),
        table);

    const fs::path base = fs::path(scene_path).parent_path();
    std::cout << "det_index,gt_instance_id,mean_px\n";
    for (const auto& rec : matches.records) {
        if (rec.gt_index < 0) continue;
        const auto& gt_inst = scene.instances[rec.gt_index];
        const std::string resolved = fs::path(gt_inst.mesh_path).is_absolute()
                                         ? gt_inst.mesh_path
                                         : (base / gt_inst.mesh_path).string();
        const auto mesh = nocs::io::load_canonical_mesh(resolved);
        nocs::geom::PointCloud model;
        model.points = mesh.mesh.vertices;
        const double px = nocs::geom::projection_error_2d_px(
            pred.detections[rec.det_index].pose, gt_inst.pose, model, intr);
        std::cout << rec.det_index << "," << static_cast<int>(gt_inst.instance_id) << ","
                  << px << "\n";
    }
    return kExitOk;
}

// --------------------------------------------------------------------------
// loss
// --------------------------------------------------------------------------

int cmd_loss(const std::string& gt_path, const std::string& pred_path,
             const std::string& mask_path, const std::string& categories_path,
             int class_id, std::optional<bool> handle_visible,
             const std::string& probs_path, int bins) {
    const nocs::InstanceMask mask = nocs::io::read_mask_png(mask_path);
    const nocs::NocsMap gt = nocs::io::read_nocs_png(gt_path, mask);
    const nocs::NocsMap pred = nocs::io::read_nocs_png(pred_path, mask);
    const nocs::CategoryTable table = categories_path.empty()
                                          ? nocs::CategoryTable::defaults()
                                          : nocs::load_category_table(categories_path);
    const nocs::CategorySpec& spec = table.at(class_id);

    json out;
    out["soft_l1"] = nocs::loss::soft_l1(gt, pred, mask);
    out["symmetric"] = nocs::loss::symmetric_loss(gt, pred, mask, spec, handle_visible);
    if (!probs_path.empty()) {
        const nocs::ProbabilityMap probs = nocs::io::read_probability_tensor(probs_path);
        const auto stats =
            nocs::loss::bin_cross_entropy(gt, probs, mask, nocs::canonical::BinCodec{bins});
        out["bin_cross_entropy"] = stats.value;
        out["clipped_bins"] = stats.clipped;
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NOCS canonicalization, rendering, mixed-reality compositing, "
                 "pose/size fitting, and evaluation toolkit"};
    app.require_subcommand(1);

    uint64_t seed = 0;
    int threads = 1;
    app.add_option("--seed", seed, "Base RNG seed (all outputs deterministic per seed)")
        ->capture_default_str();
    app.add_option("--threads", threads, "Worker threads for per-image parallelism")
        ->capture_default_str();

    // canonicalize
    auto* c_canon = app.add_subcommand("canonicalize", "Normalize an OBJ mesh into NOCS");
    std::string canon_in, canon_out;
    c_canon->add_option("--in", canon_in, "Input OBJ mesh")->required();
    c_canon->add_option("--out", canon_out, "Output canonical OBJ (+ .meta.json sidecar)")
        ->required();

    // render
    auto* c_render = app.add_subcommand("render", "Render GT maps from a scene description");
    std::string render_scene_path, render_intr, render_out;
    bool render_rgb = false;
    c_render->add_option("--scene", render_scene_path, "Scene description JSON")->required();
    c_render->add_option("--intrinsics", render_intr, "Intrinsics JSON (overrides scene)");
    c_render->add_option("--out", render_out, "Output directory")->required();
    c_render->add_flag("--rgb", render_rgb, "Also write the shaded RGB image");

    // composite
    auto* c_comp = app.add_subcommand(
        "composite", "Generate mixed-reality frames with perfect ground truth");
    std::string comp_rgb, comp_depth, comp_intr, comp_meshes, comp_cats, comp_out;
    int comp_count = 3, comp_frames = 1;
    c_comp->add_option("--background-rgb", comp_rgb, "Background RGB PNG")->required();
    c_comp->add_option("--background-depth", comp_depth, "Background 16-bit depth PNG")
        ->required();
    c_comp->add_option("--intrinsics", comp_intr, "Intrinsics JSON")->required();
    c_comp->add_option("--meshes", comp_meshes, "Mesh manifest JSON")->required();
    c_comp->add_option("--categories", comp_cats, "Category table JSON");
    c_comp->add_option("--count", comp_count, "Objects per frame")->capture_default_str();
    c_comp->add_option("--frames", comp_frames, "Number of frames")->capture_default_str();
    c_comp->add_option("--out", comp_out, "Output directory")->required();

    // fit
    auto* c_fit = app.add_subcommand("fit", "Estimate 6D pose and size from NOCS + depth");
    std::string fit_in, fit_nocs, fit_depth, fit_mask, fit_scene, fit_intr, fit_out;
    std::string fit_id = "000000";
    nocs::fit::FitConfig fit_cfg;
    c_fit->add_option("--in", fit_in, "Directory of <id>_{nocs,depth,mask}.png triples");
    c_fit->add_option("--nocs", fit_nocs, "NOCS map PNG (single-image mode)");
    c_fit->add_option("--depth", fit_depth, "Depth PNG (single-image mode)");
    c_fit->add_option("--mask", fit_mask, "Instance mask PNG (single-image mode)");
    c_fit->add_option("--scene", fit_scene, "Scene JSON for class ids and NOCS extents");
    c_fit->add_option("--image-id", fit_id, "Image id for single-image mode")
        ->capture_default_str();
    c_fit->add_option("--intrinsics", fit_intr, "Intrinsics JSON")->required();
    c_fit->add_option("--iterations", fit_cfg.ransac_iterations, "RANSAC iterations")
        ->capture_default_str();
    c_fit->add_option("--inlier-threshold", fit_cfg.inlier_threshold_m,
                      "RANSAC inlier threshold, meters")
        ->capture_default_str();
    c_fit->add_option("--confidence", fit_cfg.confidence, "RANSAC early-exit confidence")
        ->capture_default_str();
    c_fit->add_option("--out", fit_out, "Output directory for *_pred.json")->required();

    // eval
    auto* c_eval = app.add_subcommand("eval", "Score predictions against ground truth");
    std::string eval_pred, eval_gt, eval_cats, eval_out;
    nocs::eval::EvalConfig eval_cfg;
    c_eval->add_option("--pred", eval_pred, "Directory of *_pred.json")->required();
    c_eval->add_option("--gt", eval_gt, "Directory of *_scene.json")->required();
    c_eval->add_option("--categories", eval_cats, "Category table JSON");
    c_eval->add_option("--out", eval_out, "Report output directory")->required();
    c_eval->add_option("--match-iou", eval_cfg.min_match_iou, "Detection gate IoU")
        ->capture_default_str();

    // proj2d
    auto* c_proj = app.add_subcommand("proj2d", "2D projection error of matched detections");
    std::string proj_scene, proj_pred, proj_intr, proj_cats;
    c_proj->add_option("--scene", proj_scene, "Ground-truth scene JSON")->required();
    c_proj->add_option("--pred", proj_pred, "Prediction JSON")->required();
    c_proj->add_option("--intrinsics", proj_intr, "Intrinsics JSON (overrides scene)");
    c_proj->add_option("--categories", proj_cats, "Category table JSON");

    // loss
    auto* c_loss = app.add_subcommand("loss", "Reference losses between NOCS maps");
    std::string loss_gt, loss_pred, loss_mask, loss_cats, loss_probs;
    int loss_class = 1, loss_bins = 32;
    bool loss_handle_visible = false, loss_handle_hidden = false;
    c_loss->add_option("--gt", loss_gt, "Ground-truth NOCS PNG")->required();
    c_loss->add_option("--pred", loss_pred, "Predicted NOCS PNG")->required();
    c_loss->add_option("--mask", loss_mask, "ROI mask PNG")->required();
    c_loss->add_option("--categories", loss_cats, "Category table JSON");
    c_loss->add_option("--class", loss_class, "Class id for the symmetry spec")
        ->capture_default_str();
    c_loss->add_flag("--handle-visible", loss_handle_visible, "Mug handle is visible");
    c_loss->add_flag("--handle-hidden", loss_handle_hidden, "Mug handle is hidden");
    c_loss->add_option("--probs", loss_probs, "Probability tensor for cross-entropy");
    c_loss->add_option("--bins", loss_bins, "Bin count B")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*c_canon) return cmd_canonicalize(canon_in, canon_out);
        if (*c_render) return cmd_render(render_scene_path, render_intr, render_out, render_rgb);
        if (*c_comp)
            return cmd_composite(comp_rgb, comp_depth, comp_intr, comp_meshes, comp_cats,
                                 comp_count, comp_frames, seed, threads, comp_out);
        if (*c_fit) {
            fit_cfg.rng_seed = seed;
            FitJob single;
            single.id = fit_id;
            single.nocs_path = fit_nocs;
            single.depth_path = fit_depth;
            single.mask_path = fit_mask;
            single.scene_path = fit_scene;
            if (fit_in.empty() && (fit_nocs.empty() || fit_depth.empty() || fit_mask.empty()))
                throw nocs::InvalidInputError(
                    "fit: give --in DIR or all of --nocs/--depth/--mask");
            return cmd_fit(fit_in, single, fit_intr, fit_cfg, threads, fit_out);
        }
        if (*c_eval) return cmd_eval(eval_pred, eval_gt, eval_cats, eval_out, eval_cfg);
        if (*c_proj) return cmd_proj2d(proj_scene, proj_pred, proj_intr, proj_cats);
        if (*c_loss) {
            std::optional<bool> hv;
            if (loss_handle_visible) hv = true;
            if (loss_handle_hidden) hv = false;
            return cmd_loss(loss_gt, loss_pred, loss_mask, loss_cats, loss_class, hv,
                            loss_probs, loss_bins);
        }
    } catch (const nocs::MissingGroundTruthError& e) {
        emit_error("MissingGroundTruth", e.what(), e.missing_ids);
        return kExitPairing;
    } catch (const AllFitsFailed& e) {
        emit_error("FitFailed", e.what());
        return kExitFitFailed;
    } catch (const nocs::Error& e) {
        emit_error("InputError", e.what());
        return kExitInput;
    } catch (const std::exception& e) {
        emit_error("Error", e.what());
        return kExitInput;
    }
    return kExitOk;
}
