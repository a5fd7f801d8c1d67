#include "polymerlab/series.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

#include "polymerlab/error.hpp"

namespace polymerlab {

namespace {

constexpr std::size_t kDirectLimit = 2048;

// FFTW's planner is not thread safe.
std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

std::size_t fft_size_for(std::size_t len) {
  std::size_t n = 1;
  while (n < 2 * len) n <<= 1;
  return n;
}

std::vector<double> direct(const std::vector<double>& a, const std::vector<double>& b,
                           std::size_t len) {
  std::vector<double> c(len, 0.0);
  const std::size_t na = std::min(a.size(), len);
  for (std::size_t i = 0; i < na; ++i) {
    if (a[i] == 0.0) continue;
    const std::size_t nb = std::min(b.size(), len - i);
    for (std::size_t j = 0; j < nb; ++j) c[i + j] += a[i] * b[j];
  }
  return c;
}

}  // namespace

struct TruncatedConvolver::Impl {
  std::size_t len = 0;
  std::size_t n = 0;
  bool use_fft = false;
  std::vector<double> kernel;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_complex* kspec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
    if (kspec) fftw_free(kspec);
  }
};

TruncatedConvolver::TruncatedConvolver(const std::vector<double>& kernel, std::size_t len)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  m.len = len;
  m.kernel.assign(kernel.begin(), kernel.begin() + std::min(kernel.size(), len));
  m.use_fft = len > kDirectLimit;
  if (!m.use_fft) return;
  m.n = fft_size_for(len);
  const std::size_t nc = m.n / 2 + 1;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    m.real = fftw_alloc_real(m.n);
    m.spec = fftw_alloc_complex(nc);
    m.kspec = fftw_alloc_complex(nc);
    if (!m.real || !m.spec || !m.kspec) throw CapacityError("FFT buffer allocation failed");
    m.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(m.n), m.real, m.spec, FFTW_ESTIMATE);
    m.bwd = fftw_plan_dft_c2r_1d(static_cast<int>(m.n), m.spec, m.real, FFTW_ESTIMATE);
  }
  std::fill(m.real, m.real + m.n, 0.0);
  std::copy(m.kernel.begin(), m.kernel.end(), m.real);
  fftw_execute(m.fwd);
  std::memcpy(m.kspec, m.spec, sizeof(fftw_complex) * nc);
}

TruncatedConvolver::~TruncatedConvolver() = default;

std::vector<double> TruncatedConvolver::apply(const std::vector<double>& c) {
  auto& m = *impl_;
  if (!m.use_fft) return direct(c, m.kernel, m.len);
  const std::size_t nc = m.n / 2 + 1;
  std::fill(m.real, m.real + m.n, 0.0);
  std::copy(c.begin(), c.begin() + std::min(c.size(), m.len), m.real);
  fftw_execute(m.fwd);
  for (std::size_t i = 0; i < nc; ++i) {
    const double re = m.spec[i][0] * m.kspec[i][0] - m.spec[i][1] * m.kspec[i][1];
    const double im = m.spec[i][0] * m.kspec[i][1] + m.spec[i][1] * m.kspec[i][0];
    m.spec[i][0] = re;
    m.spec[i][1] = im;
  }
  fftw_execute(m.bwd);
  std::vector<double> out(m.len);
  const double scale = 1.0 / static_cast<double>(m.n);
  for (std::size_t i = 0; i < m.len; ++i) out[i] = m.real[i] * scale;
  return out;
}

std::vector<double> convolve_truncated(const std::vector<double>& a,
                                       const std::vector<double>& b, std::size_t len) {
  if (len <= kDirectLimit) return direct(a, b, len);
  TruncatedConvolver conv(b, len);
  return conv.apply(a);
}

std::vector<double> series_inverse(const std::vector<double>& u, std::size_t len) {
  if (u.empty() || u[0] == 0.0) throw DomainError("series_inverse: zero constant term");
  std::vector<double> g(len, 0.0);
  if (len == 0) return g;
  if (len <= kDirectLimit) {
    g[0] = 1.0 / u[0];
    for (std::size_t n = 1; n < len; ++n) {
      double s = 0.0;
      for (std::size_t m = 1; m <= n && m < u.size(); ++m) s += u[m] * g[n - m];
      g[n] = -s / u[0];
    }
    return g;
  }
  // Newton: g <- g (2 - u g), doubling the precision length each round.
  std::size_t have = std::min<std::size_t>(kDirectLimit, len);
  std::vector<double> cur = series_inverse(u, have);
  while (have < len) {
    const std::size_t next = std::min(2 * have, len);
    std::vector<double> uu(u.begin(), u.begin() + std::min(u.size(), next));
    std::vector<double> e = convolve_truncated(uu, cur, next);  // u g
    // e = u g - 1 vanishes below `have`; correction is -g (u g - 1).
    e[0] -= 1.0;
    for (std::size_t i = 0; i < have; ++i) e[i] = 0.0;
    std::vector<double> corr = convolve_truncated(cur, e, next);
    cur.resize(next, 0.0);
    for (std::size_t i = have; i < next; ++i) cur[i] = -corr[i];
    have = next;
  }
  return cur;
}

}  // namespace polymerlab
