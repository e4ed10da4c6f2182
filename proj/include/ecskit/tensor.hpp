#ifndef ECSKIT_TENSOR_HPP
#define ECSKIT_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ecs {

// Small dense tensors over one chart dimension n (n <= ~10 here).
// Flat row-major storage; no algebra beyond indexing and max-norm.

class Tensor3 {
 public:
  Tensor3() : n_(0) {}
  explicit Tensor3(int n) : n_(n), v_(std::size_t(n) * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int a, int b, int c) { return v_[(std::size_t(a) * n_ + b) * n_ + c]; }
  double operator()(int a, int b, int c) const { return v_[(std::size_t(a) * n_ + b) * n_ + c]; }
  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

 private:
  int n_;
  std::vector<double> v_;
};

class Tensor4 {
 public:
  Tensor4() : n_(0) {}
  explicit Tensor4(int n) : n_(n), v_(std::size_t(n) * n * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int a, int b, int c, int d) {
    return v_[((std::size_t(a) * n_ + b) * n_ + c) * n_ + d];
  }
  double operator()(int a, int b, int c, int d) const {
    return v_[((std::size_t(a) * n_ + b) * n_ + c) * n_ + d];
  }
  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

 private:
  int n_;
  std::vector<double> v_;
};

class Tensor5 {
 public:
  Tensor5() : n_(0) {}
  explicit Tensor5(int n) : n_(n), v_(std::size_t(n) * n * n * n * n, 0.0) {}
  int dim() const { return n_; }
  double& operator()(int a, int b, int c, int d, int e) {
    return v_[(((std::size_t(a) * n_ + b) * n_ + c) * n_ + d) * n_ + e];
  }
  double operator()(int a, int b, int c, int d, int e) const {
    return v_[(((std::size_t(a) * n_ + b) * n_ + c) * n_ + d) * n_ + e];
  }
  double max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  int n_;
  std::vector<double> v_;
};

}  // namespace ecs

#endif
