#include "nocs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

namespace nocs::eval {

namespace {

// Tolerance on threshold comparisons so exact-by-construction cases
// (identical boxes, axis-multiple rotations) are not lost to rounding.
constexpr double kThresholdEps = 1e-9;

struct ScoredEntry {
    double score = 0.0;
    bool tp = false;
    // Deterministic tie-break, independent of file ordering.
    std::string image_id;
    int det_index = -1;
};

double ap_from_entries(std::vector<ScoredEntry>& entries, int total_gt) {
    if (total_gt <= 0) return 0.0;
    if (entries.empty()) return 0.0;
    std::sort(entries.begin(), entries.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.image_id != b.image_id) return a.image_id < b.image_id;
        return a.det_index < b.det_index;
    });

    std::vector<double> precision, recall;
    precision.reserve(entries.size());
    recall.reserve(entries.size());
    int tp = 0, fp = 0;
    for (const auto& e : entries) {
        e.tp ? ++tp : ++fp;
        precision.push_back(static_cast<double>(tp) / (tp + fp));
        recall.push_back(static_cast<double>(tp) / total_gt);
    }

    // All-point interpolation: area under the precision envelope.
    for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
        precision[i] = std::max(precision[i], precision[i + 1]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t i = 0; i < precision.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

}  // namespace

geom::OrientedBox3 instance_box(const geom::SimilarityTransform& pose,
                                const Eigen::Vector3d& dimensions) {
    geom::OrientedBox3 box;
    box.center = pose.apply(Eigen::Vector3d::Constant(0.5));
    box.R = pose.R;
    box.extents = dimensions;
    return box;
}

double center_distance_cm(const geom::SimilarityTransform& a,
                          const geom::SimilarityTransform& b) {
    const Eigen::Vector3d center = Eigen::Vector3d::Constant(0.5);
    return geom::translation_error_cm(a.apply(center), b.apply(center));
}

ImageMatches match_detections(const ImageDetections& dets, const ImageGroundTruth& gts,
                              const CategoryTable& table, double min_match_iou,
                              double angular_step_deg) {
    ImageMatches out;
    out.image_id = dets.image_id;
    for (const auto& gt : gts.instances) ++out.gt_count_per_class[gt.class_id];

    std::vector<int> order(dets.detections.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double sa = dets.detections[a].score, sb = dets.detections[b].score;
        if (sa != sb) return sa > sb;
        return a < b;
    });

    std::vector<bool> gt_taken(gts.instances.size(), false);
    for (int di : order) {
        const Detection& det = dets.detections[di];
        const CategorySpec* spec = table.find(det.class_id);

        MatchRecord rec;
        rec.det_index = di;
        rec.class_id = det.class_id;
        rec.score = det.score;

        double best_iou = 0.0;
        int best_gt = -1;
        const geom::OrientedBox3 det_box = instance_box(det.pose, det.dimensions);
        for (size_t gi = 0; gi < gts.instances.size(); ++gi) {
            const GroundTruthInstance& gt = gts.instances[gi];
            if (gt_taken[gi] || gt.class_id != det.class_id) continue;
            const geom::OrientedBox3 gt_box = instance_box(gt.pose, gt.dimensions);
            const double iou =
                spec ? geom::box_iou(det_box, gt_box, *spec, gt.handle_visible,
                                     angular_step_deg)
                     : geom::box_iou(det_box, gt_box);
            if (iou > best_iou) {
                best_iou = iou;
                best_gt = static_cast<int>(gi);
            }
        }

        if (best_gt >= 0 && best_iou >= min_match_iou - kThresholdEps) {
            gt_taken[best_gt] = true;
            const GroundTruthInstance& gt = gts.instances[best_gt];
            rec.gt_index = best_gt;
            rec.iou = best_iou;
            rec.rot_err_deg =
                spec ? geom::rotation_error_deg(det.pose.R, gt.pose.R, *spec,
                                                gt.handle_visible)
                     : geom::rotation_error_deg(det.pose.R, gt.pose.R);
            rec.trans_err_cm = center_distance_cm(det.pose, gt.pose);
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

Criterion Criterion::iou(double min_iou) {
    Criterion c;
    c.kind = Kind::Iou3d;
    c.iou_min = min_iou;
    return c;
}

Criterion Criterion::pose(double max_deg, double max_cm) {
    Criterion c;
    c.kind = Kind::PoseError;
    c.rot_max_deg = max_deg;
    c.trans_max_cm = max_cm;
    return c;
}

bool Criterion::accepts(const MatchRecord& m) const {
    if (m.gt_index < 0) return false;
    if (kind == Kind::Iou3d) return m.iou >= iou_min - kThresholdEps;
    return m.rot_err_deg <= rot_max_deg + kThresholdEps &&
           m.trans_err_cm <= trans_max_cm + kThresholdEps;
}

std::string Criterion::label() const {
    std::ostringstream os;
    if (kind == Kind::Iou3d) {
        os << "iou_" << std::lround(iou_min * 100.0);
    } else {
        os << rot_max_deg << "deg_" << trans_max_cm << "cm";
    }
    return os.str();
}

std::map<int, double> average_precision(std::span<const ImageMatches> matches,
                                        const Criterion& criterion) {
    std::map<int, int> gt_totals;
    std::map<int, std::vector<ScoredEntry>> entries;
    for (const auto& im : matches) {
        for (const auto& [cls, count] : im.gt_count_per_class) gt_totals[cls] += count;
        for (const auto& rec : im.records) {
            ScoredEntry e;
            e.score = rec.score;
            e.tp = criterion.accepts(rec);
            e.image_id = im.image_id;
            e.det_index = rec.det_index;
            entries[rec.class_id].push_back(std::move(e));
        }
    }

    std::map<int, double> ap;
    for (const auto& [cls, total] : gt_totals) {
        if (total <= 0) continue;  // class absent from ground truth
        auto it = entries.find(cls);
        if (it == entries.end()) {
            ap[cls] = 0.0;
        } else {
            ap[cls] = ap_from_entries(it->second, total);
        }
    }
    return ap;
}

double EvalReport::map_at(const std::string& column_label) const {
    for (size_t i = 0; i < column_labels.size(); ++i)
        if (column_labels[i] == column_label) return mean_row[i];
    throw InvalidInputError("eval report: unknown column " + column_label);
}

EvalReport evaluate_dataset(std::span<const ImageDetections> predictions,
                            std::span<const ImageGroundTruth> ground_truth,
                            const CategoryTable& table, const EvalConfig& cfg) {
    std::map<std::string, size_t> gt_by_id;
    for (size_t i = 0; i < ground_truth.size(); ++i) {
        if (!gt_by_id.emplace(ground_truth[i].image_id, i).second)
            throw InvalidInputError("evaluate: duplicate ground-truth image id " +
                                    ground_truth[i].image_id);
    }

    std::vector<std::string> missing;
    for (const auto& pred : predictions)
        if (!gt_by_id.count(pred.image_id)) missing.push_back(pred.image_id);
    if (!missing.empty())
        throw MissingGroundTruthError("evaluate: predictions without ground truth",
                                      std::move(missing));

    std::map<std::string, const ImageDetections*> pred_by_id;
    for (const auto& pred : predictions) {
        if (!pred_by_id.emplace(pred.image_id, &pred).second)
            throw InvalidInputError("evaluate: duplicate prediction image id " +
                                    pred.image_id);
    }

    EvalReport report;
    for (const auto& gt : ground_truth) {
        const auto it = pred_by_id.find(gt.image_id);
        ImageDetections empty;
        empty.image_id = gt.image_id;
        const ImageDetections& dets = it == pred_by_id.end() ? empty : *it->second;
        report.matches.push_back(match_detections(dets, gt, table, cfg.min_match_iou,
                                                  cfg.angular_step_deg));
    }

    std::set<int> classes;
    for (const auto& im : report.matches)
        for (const auto& [cls, count] : im.gt_count_per_class)
            if (count > 0) classes.insert(cls);
    report.class_ids.assign(classes.begin(), classes.end());
    for (int cls : report.class_ids) {
        const CategorySpec* spec = table.find(cls);
        report.class_names[cls] = spec ? spec->name : ("class_" + std::to_string(cls));
    }

    std::vector<Criterion> columns;
    for (double tau : cfg.iou_thresholds) columns.push_back(Criterion::iou(tau));
    for (const auto& [deg, cm] : cfg.pose_thresholds)
        columns.push_back(Criterion::pose(deg, cm));

    for (const auto& criterion : columns) {
        report.column_labels.push_back(criterion.label());
        const auto ap = average_precision(report.matches, criterion);
        double sum = 0.0;
        for (int cls : report.class_ids) {
            const double v = ap.count(cls) ? ap.at(cls) : 0.0;
            report.table[cls].push_back(v);
            sum += v;
        }
        report.mean_row.push_back(
            report.class_ids.empty() ? 0.0 : sum / report.class_ids.size());
    }

    auto build_curve = [&](const std::string& name, double lo, double hi, double step,
                           auto make_criterion) {
        EvalReport::Curve curve;
        curve.name = name;
        for (double v = lo; v <= hi + 1e-12; v += step) {
            curve.thresholds.push_back(v);
            const auto ap = average_precision(report.matches, make_criterion(v));
            double sum = 0.0;
            for (int cls : report.class_ids) {
                const double a = ap.count(cls) ? ap.at(cls) : 0.0;
                curve.per_class[cls].push_back(a);
                sum += a;
            }
            curve.mean.push_back(report.class_ids.empty() ? 0.0
                                                          : sum / report.class_ids.size());
        }
        report.curves.push_back(std::move(curve));
    };

    constexpr double kUnbounded = 1e18;
    build_curve("iou", 0.0, 1.0, cfg.iou_curve_step,
                [](double v) { return Criterion::iou(v); });
    build_curve("rotation", 0.0, 60.0, cfg.rot_curve_step_deg,
                [&](double v) { return Criterion::pose(v, kUnbounded); });
    build_curve("translation", 0.0, 10.0, cfg.trans_curve_step_cm,
                [&](double v) { return Criterion::pose(kUnbounded, v); });
    return report;
}

void write_report_csv(const EvalReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    std::ostringstream table;
    table << "class";
    for (const auto& label : report.column_labels) table << "," << label;
    table << "\n";
    for (int cls : report.class_ids) {
        table << report.class_names.at(cls);
        for (double v : report.table.at(cls)) table << "," << v;
        table << "\n";
    }
    table << "mean";
    for (double v : report.mean_row) table << "," << v;
    table << "\n";
    io::atomic_write((fs::path(out_dir) / "map_table.csv").string(), table.str());

    for (const auto& curve : report.curves) {
        std::ostringstream os;
        os << "threshold";
        for (int cls : report.class_ids) os << "," << report.class_names.at(cls);
        os << ",mean\n";
        for (size_t i = 0; i < curve.thresholds.size(); ++i) {
            os << curve.thresholds[i];
            for (int cls : report.class_ids) os << "," << curve.per_class.at(cls)[i];
            os << "," << curve.mean[i] << "\n";
        }
        io::atomic_write((fs::path(out_dir) / ("curve_" + curve.name + ".csv")).string(),
                         os.str());
    }
}

ImageDetections from_prediction_file(const io::PredictionFile& file) {
    ImageDetections out;
    out.image_id = file.image_id;
    for (const auto& d : file.detections) {
        Detection det;
        det.class_id = d.class_id;
        det.score = d.score;
        det.pose = d.pose;
        det.dimensions = d.dimensions;
        det.box2d = d.box2d;
        out.detections.push_back(std::move(det));
    }
    return out;
}

ImageGroundTruth from_scene_metadata(const io::SceneMetadata& scene) {
    ImageGroundTruth out;
    out.image_id = scene.image_id;
    for (const auto& inst : scene.instances) {
        GroundTruthInstance gt;
        gt.class_id = inst.class_id;
        gt.pose = inst.pose;
        gt.dimensions = inst.dimensions;
        gt.handle_visible = inst.handle_visible;
        out.instances.push_back(std::move(gt));
    }
    return out;
}

}  // namespace nocs::eval
