#pragma once

#include <opencv2/core.hpp>
#include <vector>

namespace scriptorium {

// Thin-plate-spline interpolant through a set of 2-D control point
// correspondences: the unique minimal-bending-energy map f with
// f(source_i) = target_i, built on the kernel U(r) = r^2 log r^2.
class ThinPlateSpline {
 public:
  // Throws std::invalid_argument when fewer than 3 points are given, the
  // lists differ in length, or the points are collinear (singular system).
  ThinPlateSpline(const std::vector<cv::Point2f>& source,
                  const std::vector<cv::Point2f>& target);

  cv::Point2f operator()(const cv::Point2f& p) const;

 private:
  std::vector<cv::Point2f> sites_;
  // (n+3) coefficients per output coordinate: n kernel weights + affine part
  std::vector<double> wx_, wy_;
};

// Backward-warps `image` through the TPS defined by moving source_points to
// displaced_points. Out-of-bounds lookups fill with `fill`.
cv::Mat apply_tps(const cv::Mat& image,
                  const std::vector<cv::Point2f>& source_points,
                  const std::vector<cv::Point2f>& displaced_points,
                  const cv::Scalar& fill = cv::Scalar::all(255));

}  // namespace scriptorium
