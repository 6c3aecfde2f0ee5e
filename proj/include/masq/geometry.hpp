#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "masq/rng.hpp"

namespace masq {

/// Point in the 2- or 3-dimensional state domain.
struct Vec {
  std::array<double, 3> c{0.0, 0.0, 0.0};
  int dim = 2;

  Vec() = default;
  Vec(double x, double y) : c{x, y, 0.0}, dim(2) {}
  Vec(double x, double y, double z) : c{x, y, z}, dim(3) {}

  static Vec zero(int d) {
    Vec v;
    v.dim = d;
    return v;
  }

  double& operator[](int i) { return c[size_t(i)]; }
  double operator[](int i) const { return c[size_t(i)]; }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < dim; ++i) c[size_t(i)] += o.c[size_t(i)];
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) {
    for (int i = 0; i < a.dim; ++i) a.c[size_t(i)] -= b.c[size_t(i)];
    return a;
  }

  double squared_distance(const Vec& o) const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      const double d = c[size_t(i)] - o.c[size_t(i)];
      s += d * d;
    }
    return s;
  }
  double distance(const Vec& o) const { return std::sqrt(squared_distance(o)); }
  double norm() const { return distance(zero(dim)); }

  bool operator==(const Vec& o) const {
    if (dim != o.dim) return false;
    for (int i = 0; i < dim; ++i)
      if (c[size_t(i)] != o.c[size_t(i)]) return false;
    return true;
  }
};

/// Axis-aligned box; the state domain of an environment.
struct Box {
  Vec lo, hi;

  int dim() const { return lo.dim; }
  double extent(int i) const { return hi[i] - lo[i]; }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= extent(i);
    return v;
  }

  bool contains(const Vec& p, double eps = 1e-9) const {
    if (p.dim != dim()) return false;
    for (int i = 0; i < dim(); ++i)
      if (p[i] < lo[i] - eps || p[i] > hi[i] + eps) return false;
    return true;
  }

  Vec clamp(Vec p) const {
    for (int i = 0; i < dim(); ++i)
      p[i] = std::min(std::max(p[i], lo[i]), hi[i]);
    return p;
  }

  /// Per-axis periodic wrap onto [lo, hi).
  Vec wrap(Vec p) const {
    for (int i = 0; i < dim(); ++i) {
      const double w = extent(i);
      double x = std::fmod(p[i] - lo[i], w);
      if (x < 0.0) x += w;
      p[i] = lo[i] + x;
    }
    return p;
  }

  Vec sample(Rng& rng) const {
    Vec p = Vec::zero(dim());
    for (int i = 0; i < dim(); ++i) p[i] = rng.uniform(lo[i], hi[i]);
    return p;
  }

  void validate() const {
    if (lo.dim != hi.dim) throw std::invalid_argument("box: dim mismatch");
    for (int i = 0; i < dim(); ++i)
      if (!(hi[i] > lo[i])) throw std::invalid_argument("box: degenerate axis");
  }
};

}  // namespace masq
