#include "atomscope/franck_condon.hpp"

#include <cmath>

#include "atomscope/errors.hpp"
#include "atomscope/parallel.hpp"

namespace atomscope {

namespace {

void check_args(double eta, int n_trunc) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw InvalidParameterError("franck_condon_matrix: eta must be in [0, 1)");
  }
  if (eta >= 1.0) {
    throw UnsupportedRegimeError(
        "franck_condon_matrix: eta >= 1 is deep outside the Lamb-Dicke "
        "regime; the truncated-ladder model does not apply");
  }
  if (n_trunc < 2) {
    throw InvalidParameterError("franck_condon_matrix: n_trunc must be >= 2");
  }
}

// Fill the dn-th sub/superdiagonal pair: entries (m + dn, m) and (m, m + dn)
// for all m. One pass of the Laguerre recurrence in the lower index m covers
// the whole diagonal. Entries combine as
//   exp(lpre) * L^2,  lpre = -x + dn ln x + lgamma(m+1) - lgamma(m+dn+1)
// with x = eta^2; the polynomial is rescaled on the fly when it grows past
// 1e150 so L^2 cannot overflow before the tiny prefactor is applied.
void fill_diagonal(std::vector<double>& probs, int size, double x, int dn) {
  const double lx = std::log(x);
  double l_prev = 0.0;                        // L_{m-1}^{(dn)}(x)
  double l_cur = 1.0;                         // L_0^{(dn)}(x)
  double scale_log = 0.0;                     // log of the rescaling applied
  double lpre = -x + dn * lx - std::lgamma(dn + 1.0);  // m = 0 prefactor
  for (int m = 0; m + dn < size; ++m) {
    if (m > 0) {
      const double a = static_cast<double>(dn);
      const double next =
          ((2.0 * (m - 1) + 1.0 + a - x) * l_cur - (m - 1 + a) * l_prev) / m;
      l_prev = l_cur;
      l_cur = next;
      if (std::abs(l_cur) > 1e150) {
        l_cur *= 1e-150;
        l_prev *= 1e-150;
        scale_log += std::log(1e150);
      }
      // lgamma(m+1) - lgamma(m+dn+1) stepped incrementally
      lpre += std::log(static_cast<double>(m)) -
              std::log(static_cast<double>(m + dn));
    }
    double p = 0.0;
    if (l_cur != 0.0) {
      p = std::exp(lpre + 2.0 * (std::log(std::abs(l_cur)) + scale_log));
    }
    if (p > 1.0) p = 1.0;  // guard against rounding just above 1
    const std::size_t n = static_cast<std::size_t>(m) + dn;
    probs[n * size + m] = p;
    probs[static_cast<std::size_t>(m) * size + n] = p;
  }
}

FranckCondonMatrix build(double eta, int n_trunc, int workers, bool parallel) {
  check_args(eta, n_trunc);
  FranckCondonMatrix fc;
  fc.eta = eta;
  fc.size = n_trunc;
  fc.probs.assign(static_cast<std::size_t>(n_trunc) * n_trunc, 0.0);
  if (eta == 0.0) {  // D(0) = identity
    for (int n = 0; n < n_trunc; ++n) {
      fc.probs[static_cast<std::size_t>(n) * n_trunc + n] = 1.0;
    }
    return fc;
  }
  const double x = eta * eta;
  if (parallel) {
#pragma omp parallel for schedule(dynamic) num_threads(resolve_workers(workers))
    for (int dn = 0; dn < n_trunc; ++dn) {
      fill_diagonal(fc.probs, n_trunc, x, dn);
    }
  } else {
    for (int dn = 0; dn < n_trunc; ++dn) {
      fill_diagonal(fc.probs, n_trunc, x, dn);
    }
  }
  return fc;
}

}  // namespace

std::vector<double> FranckCondonMatrix::column_deficits() const {
  std::vector<double> deficits(size, 0.0);
  for (int m = 0; m < size; ++m) {
    double sum = 0.0;
    for (int n = 0; n < size; ++n) sum += (*this)(n, m);
    double d = 1.0 - sum;
    deficits[m] = d < 0.0 ? 0.0 : d;
  }
  return deficits;
}

FranckCondonMatrix franck_condon_matrix(double eta, int n_trunc, int workers) {
  return build(eta, n_trunc, workers, true);
}

FranckCondonMatrix double_kick_matrix(const FranckCondonMatrix& fc,
                                      int workers) {
  FranckCondonMatrix out;
  out.eta = fc.eta;
  out.size = fc.size;
  detail::matrix_multiply(fc.probs, fc.probs, out.probs, fc.size, workers);
  return out;
}

namespace serial {
FranckCondonMatrix franck_condon_matrix(double eta, int n_trunc) {
  return build(eta, n_trunc, 0, false);
}
}  // namespace serial

namespace detail {

double franck_condon_entry(double eta, int n, int m) {
  if (n < 0 || m < 0) throw InvalidParameterError("franck_condon_entry: negative index");
  if (eta == 0.0) return n == m ? 1.0 : 0.0;
  const double x = eta * eta;
  const int lo = n < m ? n : m;
  const int dn = std::abs(n - m);
  // L_lo^{(dn)}(x) by the same recurrence the matrix build uses
  double l_prev = 0.0, l_cur = 1.0, scale_log = 0.0;
  for (int j = 1; j <= lo; ++j) {
    const double next =
        ((2.0 * (j - 1) + 1.0 + dn - x) * l_cur - (j - 1 + dn) * l_prev) / j;
    l_prev = l_cur;
    l_cur = next;
    if (std::abs(l_cur) > 1e150) {
      l_cur *= 1e-150;
      l_prev *= 1e-150;
      scale_log += std::log(1e150);
    }
  }
  if (l_cur == 0.0) return 0.0;
  const double lpre = -x + dn * std::log(x) + std::lgamma(lo + 1.0) -
                      std::lgamma(lo + dn + 1.0);
  double p = std::exp(lpre + 2.0 * (std::log(std::abs(l_cur)) + scale_log));
  return p > 1.0 ? 1.0 : p;
}

void matrix_multiply_serial(const std::vector<double>& a,
                            const std::vector<double>& b,
                            std::vector<double>& c, int n) {
  c.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double aik = a[static_cast<std::size_t>(i) * n + k];
      if (aik == 0.0) continue;
      const double* brow = &b[static_cast<std::size_t>(k) * n];
      double* crow = &c[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matrix_multiply(const std::vector<double>& a, const std::vector<double>& b,
                     std::vector<double>& c, int n, int workers) {
  c.assign(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static) num_threads(resolve_workers(workers))
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const double aik = a[static_cast<std::size_t>(i) * n + k];
      if (aik == 0.0) continue;
      const double* brow = &b[static_cast<std::size_t>(k) * n];
      double* crow = &c[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

std::vector<double> matrix_apply(const std::vector<double>& m,
                                 const std::vector<double>& x, int n) {
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = &m[static_cast<std::size_t>(i) * n];
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
  return y;
}

}  // namespace detail

}  // namespace atomscope
