#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedunlearn {

template <typename Real>
double l2_norm(std::span<const Real> v) {
  double s = 0.0;
  for (Real x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

template <typename Real>
double l2_distance(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("l2_distance: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

/// Rescales `grad` onto the l2 ball of the given radius when it lies outside it.
template <typename Real>
std::vector<Real> clip_grad(std::span<const Real> grad, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("clip_grad: radius must be positive");
  std::vector<Real> out(grad.begin(), grad.end());
  const double norm = l2_norm(grad);
  if (norm > radius) {
    const double scale = radius / norm;
    for (auto& g : out) g = static_cast<Real>(static_cast<double>(g) * scale);
  }
  return out;
}

/// Euclidean projection of `w` onto {v : |v - center| <= delta}.
///
/// Coordinates are rounded to Real after scaling; if rounding pushes the result outside
/// the ball the scale is shrunk by a few ulps until the membership holds in double.
template <typename Real>
std::vector<Real> project_l2(std::span<const Real> w, std::span<const Real> center, double delta) {
  if (w.size() != center.size()) {
    throw std::invalid_argument("project_l2: dimension mismatch (" + std::to_string(w.size()) + " vs " +
                                std::to_string(center.size()) + ")");
  }
  if (!(delta >= 0.0)) throw std::invalid_argument("project_l2: delta must be non-negative");
  std::vector<Real> out(w.begin(), w.end());
  const double dist = l2_distance(w, center);
  if (dist <= delta) return out;
  double scale = delta / dist;
  for (int attempt = 0; attempt < 8; ++attempt) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double c = static_cast<double>(center[i]);
      out[i] = static_cast<Real>(c + scale * (static_cast<double>(w[i]) - c));
    }
    if (l2_distance(std::span<const Real>(out), center) <= delta) break;
    scale *= 1.0 - 4.0 * static_cast<double>(std::numeric_limits<Real>::epsilon());
  }
  return out;
}

}  // namespace fedunlearn
