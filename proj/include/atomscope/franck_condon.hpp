#pragma once

#include <cstdint>
#include <vector>

// Franck-Condon redistribution probabilities |<n|D(eta)|m>|^2 over a
// truncated harmonic ladder. Entries use the associated-Laguerre closed
// form: for n >= m,
//   |<n|D(eta)|m>|^2 = exp(-eta^2) (m!/n!) eta^{2(n-m)} [L_m^{(n-m)}(eta^2)]^2
// with n < m filled by symmetry. The Laguerre polynomial comes from the
// three-term recurrence and the factorial ratio stays in log domain, so the
// matrix is well conditioned up to large truncations.
// The matrix is immutable after construction and safe to share.

namespace atomscope {

struct FranckCondonMatrix {
  double eta = 0.0;
  int size = 0;
  std::vector<double> probs;  // row-major; probs[n * size + m] = P(m -> n)

  double operator()(int n, int m) const { return probs[static_cast<std::size_t>(n) * size + m]; }

  // Per-column leakage 1 - sum_n P(m -> n): the probability a single
  // scattering event ejects the atom from the truncated space.
  std::vector<double> column_deficits() const;
};

FranckCondonMatrix franck_condon_matrix(double eta, int n_trunc,
                                        int workers = 0);

// Event operator for the absorption + emission double-kick variant: two
// redistribution steps per scattering event, i.e. the matrix squared.
FranckCondonMatrix double_kick_matrix(const FranckCondonMatrix& fc,
                                      int workers = 0);

namespace serial {
FranckCondonMatrix franck_condon_matrix(double eta, int n_trunc);
}

namespace detail {
// Single entry |<n|D(eta)|m>|^2, evaluated independently of the full build.
double franck_condon_entry(double eta, int n, int m);

// C = A * B for square row-major matrices.
void matrix_multiply(const std::vector<double>& a, const std::vector<double>& b,
                     std::vector<double>& c, int n, int workers);
void matrix_multiply_serial(const std::vector<double>& a,
                            const std::vector<double>& b,
                            std::vector<double>& c, int n);
// y = M * x
std::vector<double> matrix_apply(const std::vector<double>& m,
                                 const std::vector<double>& x, int n);
}  // namespace detail

}  // namespace atomscope
