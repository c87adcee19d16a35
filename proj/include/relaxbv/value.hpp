#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>

namespace relaxbv {

/// Largest value dimension M supported by the library.
inline constexpr int kMaxValueDim = 2;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Point2&) const = default;
};

inline double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }

/// A point of R^M for M in {1, 2}. Scalar use is the common case, so a
/// Value converts implicitly from double.
class Value {
 public:
  Value() = default;
  Value(double s) : c_{s, 0.0}, dim_(1) {}  // NOLINT(google-explicit-constructor)
  Value(std::initializer_list<double> comps) {
    if (comps.size() == 0 || comps.size() > static_cast<std::size_t>(kMaxValueDim)) {
      throw std::invalid_argument("Value: dimension must be 1 or 2");
    }
    dim_ = static_cast<int>(comps.size());
    int i = 0;
    for (double v : comps) c_[i++] = v;
  }

  static Value zeros(int dim) {
    if (dim < 1 || dim > kMaxValueDim) throw std::invalid_argument("Value: dimension must be 1 or 2");
    Value v;
    v.dim_ = dim;
    return v;
  }

  int dim() const { return dim_; }
  double operator[](int i) const { return c_[i]; }
  double& operator[](int i) { return c_[i]; }
  double scalar() const { return c_[0]; }

  double norm() const {
    return dim_ == 1 ? std::abs(c_[0]) : std::hypot(c_[0], c_[1]);
  }
  bool finite() const {
    for (int i = 0; i < dim_; ++i)
      if (!std::isfinite(c_[i])) return false;
    return true;
  }

  Value operator+(const Value& o) const {
    check(o);
    Value r = *this;
    for (int i = 0; i < dim_; ++i) r.c_[i] += o.c_[i];
    return r;
  }
  Value operator-(const Value& o) const {
    check(o);
    Value r = *this;
    for (int i = 0; i < dim_; ++i) r.c_[i] -= o.c_[i];
    return r;
  }
  Value operator*(double s) const {
    Value r = *this;
    for (int i = 0; i < dim_; ++i) r.c_[i] *= s;
    return r;
  }
  Value operator-() const { return *this * -1.0; }
  bool operator==(const Value& o) const {
    if (dim_ != o.dim_) return false;
    for (int i = 0; i < dim_; ++i)
      if (c_[i] != o.c_[i]) return false;
    return true;
  }

 private:
  void check(const Value& o) const {
    if (o.dim_ != dim_) throw std::invalid_argument("Value: dimension mismatch");
  }

  std::array<double, kMaxValueDim> c_{0.0, 0.0};
  int dim_ = 1;
};

inline double distance(const Value& a, const Value& b) { return (a - b).norm(); }
inline double dot(const Value& a, const Value& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

/// Neumaier-compensated running sum. Keeps reductions over large grids
/// reproducible to well below 1e-12 regardless of summation order.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace relaxbv
