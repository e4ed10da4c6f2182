#ifndef ECSKIT_POLY2_HPP
#define ECSKIT_POLY2_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ecs {

/// Dense bivariate polynomial  p(x, y) = sum c[i][j] x^i y^j.
/// Degrees stay small here (metric coefficient fields), so dense storage
/// and naive convolution products are the right tool.
class Poly2 {
 public:
  Poly2() : nx_(1), ny_(1), c_(1, 0.0) {}
  Poly2(int nx, int ny) : nx_(nx), ny_(ny), c_(std::size_t(nx) * ny, 0.0) {}

  static Poly2 constant(double v) {
    Poly2 p(1, 1);
    p.c_[0] = v;
    return p;
  }
  static Poly2 monomial(int i, int j, double v) {
    Poly2 p(i + 1, j + 1);
    p.at(i, j) = v;
    return p;
  }

  double& at(int i, int j) { return c_[std::size_t(i) * ny_ + j]; }
  double at(int i, int j) const { return c_[std::size_t(i) * ny_ + j]; }
  int deg_x() const { return nx_ - 1; }
  int deg_y() const { return ny_ - 1; }

  double operator()(double x, double y) const {
    // Horner in x, inner Horner in y.
    double r = 0.0;
    for (int i = nx_ - 1; i >= 0; --i) {
      double row = 0.0;
      for (int j = ny_ - 1; j >= 0; --j) row = row * y + at(i, j);
      r = r * x + row;
    }
    return r;
  }

  Poly2 partial(int axis) const {
    if (axis == 0) {
      if (nx_ == 1) return Poly2();
      Poly2 d(nx_ - 1, ny_);
      for (int i = 1; i < nx_; ++i)
        for (int j = 0; j < ny_; ++j) d.at(i - 1, j) = double(i) * at(i, j);
      return d;
    }
    if (ny_ == 1) return Poly2();
    Poly2 d(nx_, ny_ - 1);
    for (int i = 0; i < nx_; ++i)
      for (int j = 1; j < ny_; ++j) d.at(i, j - 1) = double(j) * at(i, j);
    return d;
  }

  /// Antiderivative in the given axis with zero constant of integration.
  Poly2 antiderivative(int axis) const {
    if (axis == 0) {
      Poly2 a(nx_ + 1, ny_);
      for (int i = 0; i < nx_; ++i)
        for (int j = 0; j < ny_; ++j) a.at(i + 1, j) = at(i, j) / double(i + 1);
      return a;
    }
    Poly2 a(nx_, ny_ + 1);
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < ny_; ++j) a.at(i, j + 1) = at(i, j) / double(j + 1);
    return a;
  }

  Poly2 operator+(const Poly2& o) const {
    Poly2 r(std::max(nx_, o.nx_), std::max(ny_, o.ny_));
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < ny_; ++j) r.at(i, j) += at(i, j);
    for (int i = 0; i < o.nx_; ++i)
      for (int j = 0; j < o.ny_; ++j) r.at(i, j) += o.at(i, j);
    return r;
  }
  Poly2 operator-(const Poly2& o) const { return *this + (o * -1.0); }
  Poly2 operator*(double s) const {
    Poly2 r = *this;
    for (auto& v : r.c_) v *= s;
    return r;
  }
  Poly2 operator*(const Poly2& o) const {
    Poly2 r(nx_ + o.nx_ - 1, ny_ + o.ny_ - 1);
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < ny_; ++j) {
        const double v = at(i, j);
        if (v == 0.0) continue;
        for (int k = 0; k < o.nx_; ++k)
          for (int l = 0; l < o.ny_; ++l) r.at(i + k, j + l) += v * o.at(k, l);
      }
    return r;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Monomial list (i, j, coeff) for serialization; skips exact zeros.
  std::vector<std::array<double, 3>> terms() const {
    std::vector<std::array<double, 3>> t;
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < ny_; ++j)
        if (at(i, j) != 0.0) t.push_back({double(i), double(j), at(i, j)});
    return t;
  }
  static Poly2 from_terms(const std::vector<std::array<double, 3>>& t) {
    int nx = 1, ny = 1;
    for (auto& e : t) {
      nx = std::max(nx, int(e[0]) + 1);
      ny = std::max(ny, int(e[1]) + 1);
    }
    Poly2 p(nx, ny);
    for (auto& e : t) p.at(int(e[0]), int(e[1])) += e[2];
    return p;
  }

 private:
  int nx_, ny_;
  std::vector<double> c_;
};

/// Sum of terms  p_k(x, y) * exp(e_k(x, y))  with polynomial p_k, e_k.
/// Closed under +, *, and partial derivatives, which covers every
/// coefficient field appearing in the cotangent-bundle metric family
/// (the area form there is an exponential of a polynomial).
class ExpPoly2 {
 public:
  ExpPoly2() = default;
  ExpPoly2(const Poly2& p) { if (p.max_abs_coeff() != 0.0) terms_.push_back({p, Poly2()}); }
  static ExpPoly2 exp_of(const Poly2& e, const Poly2& coeff = Poly2::constant(1.0)) {
    ExpPoly2 r;
    r.terms_.push_back({coeff, e});
    return r;
  }

  double operator()(double x, double y) const {
    double r = 0.0;
    for (const auto& t : terms_) r += t.coeff(x, y) * std::exp(t.expo(x, y));
    return r;
  }

  ExpPoly2 partial(int axis) const {
    ExpPoly2 r;
    for (const auto& t : terms_) {
      Poly2 dp = t.coeff.partial(axis) + t.coeff * t.expo.partial(axis);
      if (dp.max_abs_coeff() != 0.0) r.terms_.push_back({dp, t.expo});
    }
    return r;
  }

  ExpPoly2 operator+(const ExpPoly2& o) const {
    ExpPoly2 r = *this;
    for (const auto& t : o.terms_) r.terms_.push_back(t);
    return r;
  }
  ExpPoly2 operator-(const ExpPoly2& o) const { return *this + (o * -1.0); }
  ExpPoly2 operator*(double s) const {
    ExpPoly2 r = *this;
    for (auto& t : r.terms_) t.coeff = t.coeff * s;
    return r;
  }
  ExpPoly2 operator*(const ExpPoly2& o) const {
    ExpPoly2 r;
    for (const auto& a : terms_)
      for (const auto& b : o.terms_)
        r.terms_.push_back({a.coeff * b.coeff, a.expo + b.expo});
    return r;
  }

  bool empty() const { return terms_.empty(); }

 private:
  struct Term {
    Poly2 coeff;
    Poly2 expo;
  };
  std::vector<Term> terms_;
};

/// A scalar field on the chart together with its first and second partials,
/// precomputed symbolically so point evaluation is cheap and exact.
struct Fun2Jet {
  ExpPoly2 f, f1, f2, f11, f12, f22;

  Fun2Jet() = default;
  explicit Fun2Jet(const ExpPoly2& g)
      : f(g),
        f1(g.partial(0)),
        f2(g.partial(1)),
        f11(f1.partial(0)),
        f12(f1.partial(1)),
        f22(f2.partial(1)) {}

  double v(double x, double y) const { return f(x, y); }
  double d(int axis, double x, double y) const {
    return axis == 0 ? f1(x, y) : f2(x, y);
  }
  double dd(int a, int b, double x, double y) const {
    if (a > b) std::swap(a, b);
    if (a == 0 && b == 0) return f11(x, y);
    if (a == 0 && b == 1) return f12(x, y);
    return f22(x, y);
  }
};

}  // namespace ecs

#endif
