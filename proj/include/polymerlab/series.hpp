#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace polymerlab {

/// c[n] = sum_{m<=n} a[m] b[n-m] for n < len. Direct for short inputs,
/// FFTW otherwise.
std::vector<double> convolve_truncated(const std::vector<double>& a,
                                       const std::vector<double>& b, std::size_t len);

/// Repeated truncated convolution against one fixed kernel. The kernel
/// transform and FFTW plans are built once.
class TruncatedConvolver {
 public:
  TruncatedConvolver(const std::vector<double>& kernel, std::size_t len);
  ~TruncatedConvolver();
  TruncatedConvolver(const TruncatedConvolver&) = delete;
  TruncatedConvolver& operator=(const TruncatedConvolver&) = delete;

  std::vector<double> apply(const std::vector<double>& c);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// First len coefficients of 1 / u(t); requires u[0] != 0.
std::vector<double> series_inverse(const std::vector<double>& u, std::size_t len);

}  // namespace polymerlab
