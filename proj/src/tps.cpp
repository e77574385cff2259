#include "scriptorium/tps.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

namespace scriptorium {

namespace {

double kernel(double r2) {
  return r2 > 0.0 ? r2 * std::log(r2) : 0.0;
}

}  // namespace

ThinPlateSpline::ThinPlateSpline(const std::vector<cv::Point2f>& source,
                                 const std::vector<cv::Point2f>& target) {
  if (source.size() != target.size())
    throw std::invalid_argument("tps: point lists differ in length");
  const int n = static_cast<int>(source.size());
  if (n < 3) throw std::invalid_argument("tps: need at least 3 control points");
  sites_ = source;

  // [K P; P^T 0] [w; a] = [v; 0]
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 3, n + 3);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + 3, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double dx = source[i].x - source[j].x;
      double dy = source[i].y - source[j].y;
      A(i, j) = kernel(dx * dx + dy * dy);
    }
    A(i, n) = A(n, i) = 1.0;
    A(i, n + 1) = A(n + 1, i) = source[i].x;
    A(i, n + 2) = A(n + 2, i) = source[i].y;
    b(i, 0) = target[i].x;
    b(i, 1) = target[i].y;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    throw std::invalid_argument(
        "tps: singular system (collinear or duplicate control points)");
  Eigen::MatrixXd coef = lu.solve(b);
  wx_.resize(n + 3);
  wy_.resize(n + 3);
  for (int i = 0; i < n + 3; ++i) {
    wx_[i] = coef(i, 0);
    wy_[i] = coef(i, 1);
  }
}

cv::Point2f ThinPlateSpline::operator()(const cv::Point2f& p) const {
  const int n = static_cast<int>(sites_.size());
  double x = wx_[n] + wx_[n + 1] * p.x + wx_[n + 2] * p.y;
  double y = wy_[n] + wy_[n + 1] * p.x + wy_[n + 2] * p.y;
  for (int i = 0; i < n; ++i) {
    double dx = p.x - sites_[i].x;
    double dy = p.y - sites_[i].y;
    double u = kernel(dx * dx + dy * dy);
    x += wx_[i] * u;
    y += wy_[i] * u;
  }
  return {static_cast<float>(x), static_cast<float>(y)};
}

cv::Mat apply_tps(const cv::Mat& image,
                  const std::vector<cv::Point2f>& source_points,
                  const std::vector<cv::Point2f>& displaced_points,
                  const cv::Scalar& fill) {
  // Backward map: fit displaced -> source, then sample the input at the
  // mapped location of every output pixel.
  ThinPlateSpline inverse(displaced_points, source_points);

  cv::Mat map_x(image.size(), CV_32FC1), map_y(image.size(), CV_32FC1);
  for (int y = 0; y < image.rows; ++y) {
    float* mx = map_x.ptr<float>(y);
    float* my = map_y.ptr<float>(y);
    for (int x = 0; x < image.cols; ++x) {
      cv::Point2f s = inverse(cv::Point2f(static_cast<float>(x),
                                          static_cast<float>(y)));
      mx[x] = s.x;
      my[x] = s.y;
    }
  }
  cv::Mat out;
  cv::remap(image, out, map_x, map_y, cv::INTER_LINEAR, cv::BORDER_CONSTANT,
            fill);
  return out;
}

}  // namespace scriptorium
