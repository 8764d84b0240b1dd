#include <doctest.h>

#include <numbers>

#include "nocs/eval.hpp"
#include "nocs/random.hpp"
#include "test_support.hpp"

using namespace nocs;
using eval::Criterion;
using eval::Detection;
using eval::GroundTruthInstance;
using eval::ImageDetections;
using eval::ImageGroundTruth;

namespace {

Eigen::Matrix3d rot_deg(const Eigen::Vector3d& axis, double deg) {
    return Eigen::AngleAxisd(deg * std::numbers::pi / 180.0, axis.normalized())
        .toRotationMatrix();
}

/// Rotate an instance about its own symmetry axis through the box center:
/// R' = R Rsym, t' keeps the mapped center fixed.
geom::SimilarityTransform spin_in_place(const geom::SimilarityTransform& pose,
                                        const Eigen::Vector3d& axis, double deg) {
    const Eigen::Matrix3d rsym = rot_deg(axis, deg);
    geom::SimilarityTransform out = pose;
    out.R = pose.R * rsym;
    const Eigen::Vector3d c = Eigen::Vector3d::Constant(0.5);
    out.t = pose.t + pose.s * (pose.R * (c - rsym * c));
    return out;
}

GroundTruthInstance make_gt(Rng& rng, int class_id, std::optional<bool> handle = {}) {
    GroundTruthInstance gt;
    gt.class_id = class_id;
    gt.pose = testutil::random_transform(rng, 0.1, 0.4, 0.5);
    gt.pose.t.z() += 1.5;
    gt.dimensions = gt.pose.s * Eigen::Vector3d(uniform(rng, 0.4, 0.9),
                                                uniform(rng, 0.4, 0.9),
                                                uniform(rng, 0.4, 0.9));
    gt.handle_visible = handle;
    return gt;
}

Detection detection_from_gt(const GroundTruthInstance& gt, double score) {
    Detection det;
    det.class_id = gt.class_id;
    det.score = score;
    det.pose = gt.pose;
    det.dimensions = gt.dimensions;
    return det;
}

}  // namespace

TEST_CASE("matching: exact detections all match, low IoU stays unmatched") {
    Rng rng(1);
    const CategoryTable table = CategoryTable::defaults();

    ImageGroundTruth gts;
    gts.image_id = "img0";
    for (int c : {1, 3, 5}) gts.instances.push_back(make_gt(rng, c));

    ImageDetections dets;
    dets.image_id = "img0";
    for (const auto& gt : gts.instances) dets.detections.push_back(detection_from_gt(gt, 1.0));

    const auto matches = eval::match_detections(dets, gts, table);
    int matched = 0;
    for (const auto& rec : matches.records) {
        CHECK(rec.gt_index >= 0);
        CHECK(rec.iou == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rec.rot_err_deg < 1e-6);
        CHECK(rec.trans_err_cm < 1e-9);
        ++matched;
    }
    CHECK(matched == 3);

    // A detection far from its ground truth falls below the 10% gate.
    ImageDetections off;
    off.image_id = "img0";
    Detection d = detection_from_gt(gts.instances[0], 0.9);
    d.pose.t.x() += 10.0;
    off.detections.push_back(d);
    const auto unmatched = eval::match_detections(off, gts, table);
    CHECK(unmatched.records[0].gt_index == -1);
}

TEST_CASE("matching: higher score wins a contested ground truth") {
    Rng rng(2);
    const CategoryTable table = CategoryTable::defaults();
    ImageGroundTruth gts;
    gts.image_id = "img0";
    gts.instances.push_back(make_gt(rng, 5));

    ImageDetections dets;
    dets.image_id = "img0";
    dets.detections.push_back(detection_from_gt(gts.instances[0], 0.6));
    dets.detections.push_back(detection_from_gt(gts.instances[0], 0.9));

    const auto matches = eval::match_detections(dets, gts, table);
    REQUIRE(matches.records.size() == 2);
    // Records come out in score order: the 0.9 detection matched first.
    CHECK(matches.records[0].score == 0.9);
    CHECK(matches.records[0].gt_index == 0);
    CHECK(matches.records[1].score == 0.6);
    CHECK(matches.records[1].gt_index == -1);
}

TEST_CASE("average precision oracle: TP before FP gives 1.0, swapped gives 0.5") {
    Rng rng(3);
    const CategoryTable table = CategoryTable::defaults();
    ImageGroundTruth gts;
    gts.image_id = "img0";
    gts.instances.push_back(make_gt(rng, 5));

    auto run = [&](double tp_score, double fp_score) {
        ImageDetections dets;
        dets.image_id = "img0";
        dets.detections.push_back(detection_from_gt(gts.instances[0], tp_score));
        Detection fp = detection_from_gt(gts.instances[0], fp_score);
        fp.pose.t.x() += 10.0;  // unmatched
        dets.detections.push_back(fp);
        const auto m = eval::match_detections(dets, gts, table);
        const auto ap = eval::average_precision({&m, 1}, Criterion::iou(0.5));
        return ap.at(5);
    };
    CHECK(run(0.9, 0.8) == doctest::Approx(1.0));
    CHECK(run(0.8, 0.9) == doctest::Approx(0.5));
}

TEST_CASE("zero predictions give zero AP") {
    Rng rng(4);
    const CategoryTable table = CategoryTable::defaults();
    ImageGroundTruth gts;
    gts.image_id = "img0";
    gts.instances.push_back(make_gt(rng, 1));
    ImageDetections none;
    none.image_id = "img0";
    const auto m = eval::match_detections(none, gts, table);
    const auto ap = eval::average_precision({&m, 1}, Criterion::iou(0.25));
    CHECK(ap.at(1) == 0.0);
}

TEST_CASE("evaluate_dataset: GT as predictions scores 100% everywhere") {
    Rng rng(5);
    const CategoryTable table = CategoryTable::defaults();
    std::vector<ImageGroundTruth> gts;
    std::vector<ImageDetections> preds;
    for (int i = 0; i < 6; ++i) {
        ImageGroundTruth gt;
        gt.image_id = "img" + std::to_string(i);
        for (int c : {1, 4, 6})
            gt.instances.push_back(make_gt(rng, c, c == 6 ? std::optional<bool>(i % 2 == 0)
                                                          : std::nullopt));
        ImageDetections pred;
        pred.image_id = gt.image_id;
        for (const auto& g : gt.instances) pred.detections.push_back(detection_from_gt(g, 1.0));
        gts.push_back(std::move(gt));
        preds.push_back(std::move(pred));
    }

    const auto report = eval::evaluate_dataset(preds, gts, table);
    for (double v : report.mean_row) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& curve : report.curves)
        for (double v : curve.mean) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate_dataset: 7-degree perturbation separates the pose columns") {
    Rng rng(6);
    const CategoryTable table = CategoryTable::defaults();
    std::vector<ImageGroundTruth> gts;
    std::vector<ImageDetections> preds;
    for (int i = 0; i < 5; ++i) {
        ImageGroundTruth gt;
        gt.image_id = "img" + std::to_string(i);
        gt.instances.push_back(make_gt(rng, 1));                      // symmetric bottle
        gt.instances.push_back(make_gt(rng, 5));                      // laptop
        gt.instances.push_back(make_gt(rng, 6, std::optional(true))); // mug, handle seen

        ImageDetections pred;
        pred.image_id = gt.image_id;
        for (const auto& g : gt.instances) {
            Detection det = detection_from_gt(g, 1.0);
            // Tilt about an axis orthogonal to the category symmetry axis,
            // through the box center, so the mapped axis moves by exactly 7
            // degrees and the center stays put.
            det.pose = spin_in_place(g.pose, Eigen::Vector3d::UnitX(), 7.0);
            pred.detections.push_back(det);
        }
        gts.push_back(std::move(gt));
        preds.push_back(std::move(pred));
    }

    const auto report = eval::evaluate_dataset(preds, gts, table);
    CHECK(report.map_at("5deg_5cm") == doctest::Approx(0.0));
    CHECK(report.map_at("10deg_5cm") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report.map_at("10deg_10cm") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate_dataset: symmetric 90-degree spin changes nothing") {
    Rng rng(7);
    const CategoryTable table = CategoryTable::defaults();
    std::vector<ImageGroundTruth> gts;
    std::vector<ImageDetections> exact, spun;
    for (int i = 0; i < 4; ++i) {
        ImageGroundTruth gt;
        gt.image_id = "img" + std::to_string(i);
        gt.instances.push_back(make_gt(rng, 1));                        // bottle
        gt.instances.push_back(make_gt(rng, 4));                        // can
        gt.instances.push_back(make_gt(rng, 6, std::optional(false)));  // mug, hidden handle

        ImageDetections p_exact, p_spun;
        p_exact.image_id = p_spun.image_id = gt.image_id;
        for (const auto& g : gt.instances) {
            p_exact.detections.push_back(detection_from_gt(g, 1.0));
            Detection det = detection_from_gt(g, 1.0);
            const Eigen::Vector3d axis = table.at(g.class_id).symmetry_axis;
            det.pose = spin_in_place(g.pose, axis, 90.0);
            p_spun.detections.push_back(det);
        }
        gts.push_back(std::move(gt));
        exact.push_back(std::move(p_exact));
        spun.push_back(std::move(p_spun));
    }

    const auto base = eval::evaluate_dataset(exact, gts, table);
    const auto moved = eval::evaluate_dataset(spun, gts, table);
    REQUIRE(base.mean_row.size() == moved.mean_row.size());
    for (size_t i = 0; i < base.mean_row.size(); ++i)
        CHECK(base.mean_row[i] == doctest::Approx(moved.mean_row[i]).epsilon(1e-12));
    for (size_t c = 0; c < base.curves.size(); ++c)
        for (size_t i = 0; i < base.curves[c].mean.size(); ++i)
            CHECK(base.curves[c].mean[i] ==
                  doctest::Approx(moved.curves[c].mean[i]).epsilon(1e-12));
}

TEST_CASE("AP is monotone along the dense curves") {
    Rng rng(8);
    const CategoryTable table = CategoryTable::defaults();
    std::vector<ImageGroundTruth> gts;
    std::vector<ImageDetections> preds;
    for (int i = 0; i < 8; ++i) {
        ImageGroundTruth gt;
        gt.image_id = "img" + std::to_string(i);
        ImageDetections pred;
        pred.image_id = gt.image_id;
        for (int k = 0; k < 3; ++k) {
            gt.instances.push_back(make_gt(rng, 1 + static_cast<int>(uniform_index(rng, 5))));
            const auto& g = gt.instances.back();
            Detection det = detection_from_gt(g, uniform01(rng));
            // Mixed-quality predictions: tilt, shift, rescale.
            det.pose = spin_in_place(g.pose, Eigen::Vector3d::UnitX(),
                                     uniform(rng, 0.0, 25.0));
            det.pose.t += Eigen::Vector3d(gaussian(rng), gaussian(rng), gaussian(rng)) *
                          uniform(rng, 0.0, 0.03);
            det.dimensions *= uniform(rng, 0.8, 1.2);
            pred.detections.push_back(det);
            if (uniform01(rng) < 0.3) {  // extra false positive
                Detection fp = det;
                fp.pose.t.x() += 3.0;
                fp.score = uniform01(rng);
                pred.detections.push_back(fp);
            }
        }
        gts.push_back(std::move(gt));
        preds.push_back(std::move(pred));
    }

    const auto report = eval::evaluate_dataset(preds, gts, table);
    for (const auto& curve : report.curves) {
        for (size_t i = 1; i < curve.mean.size(); ++i) {
            if (curve.name == "iou") {
                CHECK(curve.mean[i] <= curve.mean[i - 1] + 1e-12);  // stricter with tau
            } else {
                CHECK(curve.mean[i] >= curve.mean[i - 1] - 1e-12);  // looser with error cap
            }
        }
    }
}

TEST_CASE("mug rule: hiding the handle never lowers mug AP") {
    Rng rng(9);
    const CategoryTable table = CategoryTable::defaults();

    for (int trial = 0; trial < 5; ++trial) {
        std::vector<ImageGroundTruth> shown(1), hidden(1);
        shown[0].image_id = hidden[0].image_id = "img0";
        std::vector<ImageDetections> preds(1);
        preds[0].image_id = "img0";
        for (int k = 0; k < 4; ++k) {
            GroundTruthInstance gt = make_gt(rng, 6, std::optional(true));
            Detection det = detection_from_gt(gt, uniform01(rng));
            det.pose = spin_in_place(gt.pose, table.at(6).symmetry_axis,
                                     uniform(rng, 0.0, 180.0));
            det.pose = spin_in_place(det.pose, Eigen::Vector3d::UnitX(),
                                     uniform(rng, 0.0, 10.0));
            preds[0].detections.push_back(det);
            shown[0].instances.push_back(gt);
            gt.handle_visible = false;
            hidden[0].instances.push_back(gt);
        }
        const auto report_shown = eval::evaluate_dataset(preds, shown, table);
        const auto report_hidden = eval::evaluate_dataset(preds, hidden, table);
        for (size_t i = 0; i < report_shown.mean_row.size(); ++i)
            CHECK(report_hidden.mean_row[i] >= report_shown.mean_row[i] - 1e-12);
    }
}

TEST_CASE("unpaired prediction raises MissingGroundTruth with the ids") {
    Rng rng(10);
    const CategoryTable table = CategoryTable::defaults();
    std::vector<ImageGroundTruth> gts(1);
    gts[0].image_id = "img0";
    gts[0].instances.push_back(make_gt(rng, 1));
    std::vector<ImageDetections> preds(2);
    preds[0].image_id = "img0";
    preds[1].image_id = "img_orphan";

    try {
        eval::evaluate_dataset(preds, gts, table);
        FAIL("expected MissingGroundTruthError");
    } catch (const MissingGroundTruthError& e) {
        REQUIRE(e.missing_ids.size() == 1);
        CHECK(e.missing_ids[0] == "img_orphan");
    }
}

TEST_CASE("score rescaling and file order do not change the report") {
    Rng rng(11);
    const CategoryTable table = CategoryTable::defaults();
    std::vector<ImageGroundTruth> gts(2);
    std::vector<ImageDetections> preds(2);
    for (int i = 0; i < 2; ++i) {
        gts[i].image_id = "img" + std::to_string(i);
        preds[i].image_id = gts[i].image_id;
        for (int k = 0; k < 3; ++k) {
            gts[i].instances.push_back(make_gt(rng, 1 + k));
            Detection det = detection_from_gt(gts[i].instances.back(), 0.3 + 0.2 * k);
            det.pose.t.x() += uniform(rng, 0.0, 0.01);
            preds[i].detections.push_back(det);
        }
    }

    const auto base = eval::evaluate_dataset(preds, gts, table);

    std::vector<ImageDetections> scaled = preds;
    for (auto& p : scaled)
        for (auto& d : p.detections) d.score *= 3.7;
    std::swap(scaled[0], scaled[1]);
    std::vector<ImageGroundTruth> gts_swapped = gts;
    std::swap(gts_swapped[0], gts_swapped[1]);

    const auto again = eval::evaluate_dataset(scaled, gts_swapped, table);
    REQUIRE(base.mean_row.size() == again.mean_row.size());
    for (size_t i = 0; i < base.mean_row.size(); ++i)
        CHECK(base.mean_row[i] == doctest::Approx(again.mean_row[i]).epsilon(1e-12));
}

TEST_CASE("mAP equals the arithmetic mean of per-class APs") {
    Rng rng(12);
    const CategoryTable table = CategoryTable::defaults();
    std::vector<ImageGroundTruth> gts(3);
    std::vector<ImageDetections> preds(3);
    for (int i = 0; i < 3; ++i) {
        gts[i].image_id = "img" + std::to_string(i);
        preds[i].image_id = gts[i].image_id;
        for (int c : {1, 2, 3}) {
            gts[i].instances.push_back(make_gt(rng, c));
            if (uniform01(rng) < 0.7)
                preds[i].detections.push_back(
                    detection_from_gt(gts[i].instances.back(), uniform01(rng)));
        }
    }
    const auto report = eval::evaluate_dataset(preds, gts, table);
    for (size_t col = 0; col < report.mean_row.size(); ++col) {
        double sum = 0.0;
        for (int cls : report.class_ids) sum += report.table.at(cls)[col];
        CHECK(report.mean_row[col] ==
              doctest::Approx(sum / report.class_ids.size()).epsilon(1e-12));
    }
}
