// eigensolver.hpp - selected-range dense Hermitian eigensolves (LAPACK ?syevr / ?heevr)

#pragma once

#include <complex>
#include <mutex>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include <lapacke.h>

#include "rfdress/errors.hpp"

extern "C" void openblas_set_num_threads(int);

namespace rfdress {

template <class Scalar>
struct EigenRange {
    Eigen::VectorXd values;                                  // ascending
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors; // one column per value
};

namespace detail {

// Threading happens one level up (per quasimomentum); BLAS stays serial so that results are
// independent of how many solves run concurrently.
inline void serial_blas() {
    static std::once_flag once;
    std::call_once(once, [] { openblas_set_num_threads(1); });
}

template <class Scalar>
EigenRange<Scalar> eigh_impl(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> a, char range, double vl,
                             double vu, int il, int iu) {
    serial_blas();
    const lapack_int n = lapack_int(a.rows());
    if (a.cols() != n) throw DomainError("eigh: matrix must be square");
    EigenRange<Scalar> out;
    if (n == 0) return out;
    const lapack_int cols = range == 'I' ? lapack_int(iu - il + 1) : n;
    std::vector<double> w(static_cast<std::size_t>(n));
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> z(n, cols);
    std::vector<lapack_int> support(2 * std::size_t(n));
    lapack_int found = 0;
    lapack_int info = 0;
    if constexpr (std::is_same_v<Scalar, double>) {
        info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', range, 'L', n, a.data(), n, vl, vu, il + 1, iu + 1, 0.0, &found,
                              w.data(), z.data(), n, support.data());
    } else {
        info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', range, 'L', n, reinterpret_cast<lapack_complex_double*>(a.data()), n,
                              vl, vu, il + 1, iu + 1, 0.0, &found, w.data(),
                              reinterpret_cast<lapack_complex_double*>(z.data()), n, support.data());
    }
    if (info != 0) throw ConvergenceError("Hermitian eigensolve failed, LAPACK info " + std::to_string(info), double(info));
    out.values = Eigen::Map<Eigen::VectorXd>(w.data(), found);
    out.vectors = z.leftCols(found);
    return out;
}

} // namespace detail

// Eigenpairs with 0-based indices first..last (inclusive).
template <class Scalar>
EigenRange<Scalar> eigh_index_range(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a, int first, int last) {
    const int n = int(a.rows());
    if (first < 0 || last < first || last >= n) throw DomainError("eigh_index_range: bad index range");
    return detail::eigh_impl<Scalar>(a, 'I', 0.0, 0.0, first, last);
}

// Eigenpairs with eigenvalue in (lower, upper].
template <class Scalar>
EigenRange<Scalar> eigh_value_range(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a, double lower,
                                    double upper) {
    if (!(upper > lower)) throw DomainError("eigh_value_range: empty interval");
    return detail::eigh_impl<Scalar>(a, 'V', lower, upper, 0, 0);
}

template <class Scalar>
EigenRange<Scalar> eigh_all(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a) {
    return detail::eigh_impl<Scalar>(a, 'A', 0.0, 0.0, 0, 0);
}

} // namespace rfdress
