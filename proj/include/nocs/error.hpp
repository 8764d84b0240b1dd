#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nocs {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched sizes, bad dimensions, out-of-contract arguments.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// A selection produced zero 3D points.
class EmptyCloudError : public Error {
public:
    using Error::Error;
};

/// Mesh bounding box has (near) zero diagonal.
class DegenerateMeshError : public Error {
public:
    using Error::Error;
};

/// Value or index outside its admissible range.
class OutOfRangeError : public Error {
public:
    using Error::Error;
};

/// Point configuration does not determine a similarity transform.
class DegenerateConfigurationError : public Error {
public:
    using Error::Error;
};

/// Fewer correspondences than the minimal sample size.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// RANSAC found no model with enough inliers.
class FitFailedError : public Error {
public:
    using Error::Error;
};

/// A model point projects with non-positive depth.
class BehindCameraError : public Error {
public:
    using Error::Error;
};

/// Loss ROI contains no mask pixels.
class EmptyRoiError : public Error {
public:
    using Error::Error;
};

/// No plane reached the minimum support.
class NoPlaneFoundError : public Error {
public:
    using Error::Error;
};

/// Operation does not apply to this input (e.g. no handle tag).
class NotApplicableError : public Error {
public:
    using Error::Error;
};

/// Symmetry rotation moved NOCS values outside the unit cube.
class InconsistentGeometryError : public Error {
public:
    using Error::Error;
};

/// File could not be parsed (OBJ, JSON, PNG, tensor).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Prediction files without a ground-truth counterpart.
class MissingGroundTruthError : public Error {
public:
    MissingGroundTruthError(const std::string& what, std::vector<std::string> ids)
        : Error(what), missing_ids(std::move(ids)) {}
    std::vector<std::string> missing_ids;
};

}  // namespace nocs
