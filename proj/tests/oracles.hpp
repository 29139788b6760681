#pragma once

// Independent reference computations used by the tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "posecam/geom.hpp"

namespace oracle {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rodrigues' formula from a rotation vector.
inline Mat3 rodrigues(const Vec3& w) {
  const double th = w.norm();
  Mat3 k;
  k << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (th < 1e-12) return Mat3::Identity() + k;
  k /= th;
  return Mat3::Identity() + std::sin(th) * k + (1 - std::cos(th)) * k * k;
}

inline Mat3 axis_angle(const Vec3& axis, double angle) { return rodrigues(axis.normalized() * angle); }

inline Eigen::MatrixXd naive_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

struct Sim3Params {
  double log_s = 0.0;
  Vec3 w = Vec3::Zero();
  Vec3 t = Vec3::Zero();
};

inline double sim3_cost(const Sim3Params& p, const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  const Mat3 r = rodrigues(p.w);
  const double s = std::exp(p.log_s);
  double c = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) c += (s * r * src[i] + p.t - dst[i]).squaredNorm();
  return c;
}

// Levenberg-Marquardt on (log s, rotation vector, t) with a numerical
// Jacobian, restarted from a grid of initial rotations. Returns the RMSE of
// the best fit.
inline double brute_force_ate(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  const std::size_t n = src.size();
  auto residuals = [&](const Eigen::Matrix<double, 7, 1>& x) {
    Sim3Params p{x(0), x.segment<3>(1), x.segment<3>(4)};
    const Mat3 r = rodrigues(p.w);
    const double s = std::exp(p.log_s);
    Eigen::VectorXd res(3 * n);
    for (std::size_t i = 0; i < n; ++i) res.segment<3>(3 * i) = s * r * src[i] + p.t - dst[i];
    return res;
  };
  double best = INFINITY;
  const double starts[] = {0.0, 1.5, -1.5, 3.0};
  for (double ax : starts) {
    for (double ay : starts) {
      for (double az : starts) {
        Eigen::Matrix<double, 7, 1> x = Eigen::Matrix<double, 7, 1>::Zero();
        x.segment<3>(1) = Vec3(ax, ay, az);
        double lambda = 1e-3;
        Eigen::VectorXd r = residuals(x);
        double cost = r.squaredNorm();
        for (int it = 0; it < 200; ++it) {
          Eigen::MatrixXd j(3 * n, 7);
          for (int k = 0; k < 7; ++k) {
            Eigen::Matrix<double, 7, 1> xp = x, xm = x;
            xp(k) += 1e-7;
            xm(k) -= 1e-7;
            j.col(k) = (residuals(xp) - residuals(xm)) / 2e-7;
          }
          const Eigen::MatrixXd jtj = j.transpose() * j;
          const Eigen::VectorXd g = j.transpose() * r;
          Eigen::MatrixXd a = jtj;
          a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
          const Eigen::Matrix<double, 7, 1> step = a.fullPivLu().solve(-g);
          const Eigen::VectorXd r_new = residuals(x + step);
          if (r_new.squaredNorm() < cost) {
            const double gain = cost - r_new.squaredNorm();
            x += step;
            r = r_new;
            cost = r.squaredNorm();
            lambda = std::max(lambda / 10, 1e-12);
            if (gain < 1e-20 * (1 + cost)) break;
          } else {
            lambda *= 10;
            if (lambda > 1e12) break;
          }
        }
        best = std::min(best, cost);
      }
    }
  }
  return std::sqrt(best / static_cast<double>(n));
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline posecam::geom::Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return posecam::geom::Quat{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

}  // namespace oracle
