#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nocs/category.hpp"
#include "nocs/geom.hpp"
#include "nocs/io.hpp"

namespace nocs::eval {

struct Detection {
    int class_id = 0;
    double score = 1.0;
    geom::SimilarityTransform pose;
    Eigen::Vector3d dimensions = Eigen::Vector3d::Zero();
    std::optional<std::array<double, 4>> box2d;
};

struct GroundTruthInstance {
    int class_id = 0;
    geom::SimilarityTransform pose;
    Eigen::Vector3d dimensions = Eigen::Vector3d::Zero();
    std::optional<bool> handle_visible;
};

struct ImageDetections {
    std::string image_id;
    std::vector<Detection> detections;
};

struct ImageGroundTruth {
    std::string image_id;
    std::vector<GroundTruthInstance> instances;
};

/// The oriented box a pose + dimensions describe: the NOCS cube center
/// mapped through the pose, with the pose rotation and the dimensions.
geom::OrientedBox3 instance_box(const geom::SimilarityTransform& pose,
                                const Eigen::Vector3d& dimensions);

/// Translation metric compares mapped box centers (invariant under
/// rotation about an axis through the object center).
double center_distance_cm(const geom::SimilarityTransform& a,
                          const geom::SimilarityTransform& b);

/// One detection's outcome within an image. gt_index < 0 marks a false
/// positive; matched records carry the symmetry-aware errors.
struct MatchRecord {
    int det_index = -1;
    int gt_index = -1;
    int class_id = 0;
    double score = 0.0;
    double iou = 0.0;
    double rot_err_deg = 0.0;
    double trans_err_cm = 0.0;
};

struct ImageMatches {
    std::string image_id;
    std::vector<MatchRecord> records;          // every detection, matched or not
    std::map<int, int> gt_count_per_class;     // includes unmatched ground truth
};

/// Greedy matching in descending score order within each class; a
/// detection takes the unmatched ground truth with the highest
/// symmetry-aware 3D IoU, provided IoU >= min_match_iou (the 10% gate).
ImageMatches match_detections(const ImageDetections& dets,
                              const ImageGroundTruth& gts,
                              const CategoryTable& table,
                              double min_match_iou = 0.10,
                              double angular_step_deg = 1.0);

/// Acceptance criterion for a matched detection.
struct Criterion {
    enum class Kind { Iou3d, PoseError };
    Kind kind = Kind::Iou3d;
    double iou_min = 0.5;
    double rot_max_deg = 5.0;
    double trans_max_cm = 5.0;

    static Criterion iou(double min_iou);
    static Criterion pose(double max_deg, double max_cm);
    bool accepts(const MatchRecord& m) const;
    std::string label() const;
};

/// Per-class average precision (area under the all-point-interpolated
/// precision/recall curve). Classes with zero ground truth are absent.
std::map<int, double> average_precision(std::span<const ImageMatches> matches,
                                        const Criterion& criterion);

struct EvalConfig {
    std::vector<double> iou_thresholds{0.25, 0.50};
    std::vector<std::pair<double, double>> pose_thresholds{
        {5.0, 5.0}, {10.0, 5.0}, {10.0, 10.0}};  // (deg, cm)
    double min_match_iou = 0.10;
    double angular_step_deg = 1.0;
    // Dense AP-vs-threshold curves.
    double iou_curve_step = 0.05;        // tau in [0, 1]
    double rot_curve_step_deg = 1.0;     // [0, 60] deg, translation free
    double trans_curve_step_cm = 0.5;    // [0, 10] cm, rotation free
};

struct EvalReport {
    std::vector<int> class_ids;                     // classes with ground truth
    std::map<int, std::string> class_names;
    std::vector<std::string> column_labels;         // one per configured threshold
    std::map<int, std::vector<double>> table;       // class -> AP per column
    std::vector<double> mean_row;                   // mAP per column
    struct Curve {
        std::string name;                           // "iou", "rotation", "translation"
        std::vector<double> thresholds;
        std::map<int, std::vector<double>> per_class;
        std::vector<double> mean;
    };
    std::vector<Curve> curves;
    std::vector<ImageMatches> matches;

    double map_at(const std::string& column_label) const;
};

/// Match and score a whole dataset. Every prediction image must pair with
/// a ground-truth image id; unpaired ids raise MissingGroundTruthError.
EvalReport evaluate_dataset(std::span<const ImageDetections> predictions,
                            std::span<const ImageGroundTruth> ground_truth,
                            const CategoryTable& table,
                            const EvalConfig& cfg = {});

/// CSV emission: a per-class AP table plus one file per dense curve.
void write_report_csv(const EvalReport& report, const std::string& out_dir);

/// Adapters from the file-format records.
ImageDetections from_prediction_file(const io::PredictionFile& file);
ImageGroundTruth from_scene_metadata(const io::SceneMetadata& scene);

}  // namespace nocs::eval
