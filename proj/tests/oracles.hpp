// Independent reference implementations used only by tests. These must stay
// decoupled from the library code paths they check.
#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "risfarm/numerics.hpp"

namespace oracles {

using risfarm::CMatrix;
using risfarm::cdouble;

// plain triple loop product
inline CMatrix matmul_naive(const CMatrix& a, const CMatrix& b) {
    CMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            cdouble s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            c.at(i, j) = s;
        }
    return c;
}

inline cdouble det3(const CMatrix& m, const int r[3], const int c[3]) {
    return m.at(r[0], c[0]) * (m.at(r[1], c[1]) * m.at(r[2], c[2]) -
                               m.at(r[1], c[2]) * m.at(r[2], c[1])) -
           m.at(r[0], c[1]) * (m.at(r[1], c[0]) * m.at(r[2], c[2]) -
                               m.at(r[1], c[2]) * m.at(r[2], c[0])) +
           m.at(r[0], c[2]) * (m.at(r[1], c[0]) * m.at(r[2], c[1]) -
                               m.at(r[1], c[1]) * m.at(r[2], c[0]));
}

// cofactor-expansion inverse of a 4x4 complex matrix
inline CMatrix inverse4(const CMatrix& m) {
    if (m.rows() != 4 || m.cols() != 4) throw std::invalid_argument("inverse4: need 4x4");
    CMatrix adj(4, 4);
    cdouble det = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            int rr[3], cc[3];
            int ri = 0, ci = 0;
            for (int r = 0; r < 4; ++r)
                if (r != i) rr[ri++] = r;
            for (int c = 0; c < 4; ++c)
                if (c != j) cc[ci++] = c;
            const cdouble cof = (((i + j) % 2) ? -1.0 : 1.0) * det3(m, rr, cc);
            adj.at(j, i) = cof;  // adjugate is the cofactor transpose
            if (i == 0) det += m.at(0, j) * (((j % 2) ? -1.0 : 1.0) * det3(m, rr, cc));
        }
    }
    if (std::abs(det) == 0.0) throw std::invalid_argument("inverse4: singular");
    for (std::size_t k = 0; k < adj.size(); ++k) adj.data()[k] /= det;
    return adj;
}

inline double rel_fro_error(const CMatrix& a, const CMatrix& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a.data()[i] - b.data()[i]);
        den += std::norm(b.data()[i]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// central finite difference over one scalar parameter
inline double central_diff(const std::function<double()>& eval, double& param, double h = 1e-5) {
    const double saved = param;
    param = saved + h;
    const double up = eval();
    param = saved - h;
    const double down = eval();
    param = saved;
    return (up - down) / (2.0 * h);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

}  // namespace oracles
