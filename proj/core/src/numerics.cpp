#include "risfarm/numerics.hpp"

#include <cmath>
#include <numbers>

namespace risfarm {

bool CMatrix::all_finite() const {
    for (const auto& z : e_) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

double CMatrix::frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : e_) s += std::norm(z);
    return std::sqrt(s);
}

cdouble CMatrix::trace() const {
    cdouble t = 0.0;
    const std::size_t n = rows_ < cols_ ? rows_ : cols_;
    for (std::size_t i = 0; i < n; ++i) t += at(i, i);
    return t;
}

CMatrix& CMatrix::operator+=(const CMatrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw std::invalid_argument("CMatrix +=: shape mismatch");
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] += o.e_[i];
    return *this;
}

CMatrix& CMatrix::operator-=(const CMatrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_)
        throw std::invalid_argument("CMatrix -=: shape mismatch");
    for (std::size_t i = 0; i < e_.size(); ++i) e_[i] -= o.e_[i];
    return *this;
}

CMatrix& CMatrix::operator*=(cdouble s) {
    for (auto& z : e_) z *= s;
    return *this;
}

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    CMatrix c(a.rows(), b.cols());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        cdouble* crow = c.data() + i * n;
        const cdouble* arow = a.data() + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const cdouble al = arow[l];
            if (al == cdouble{}) continue;
            const cdouble* brow = b.data() + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += al * brow[j];
        }
    }
    return c;
}

CMatrix hermitian(const CMatrix& a) {
    CMatrix h(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) h.at(j, i) = std::conj(a.at(i, j));
    return h;
}

CMatrix add(const CMatrix& a, const CMatrix& b) {
    CMatrix c = a;
    c += b;
    return c;
}

CMatrix sub(const CMatrix& a, const CMatrix& b) {
    CMatrix c = a;
    c -= b;
    return c;
}

CMatrix scale(const CMatrix& a, cdouble s) {
    CMatrix c = a;
    c *= s;
    return c;
}

namespace {

// Lower Cholesky factor of a Hermitian matrix, in place. Returns false when
// a pivot is non-positive or non-finite.
bool cholesky(CMatrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double d = a.at(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(a.at(j, k));
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a.at(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cdouble s = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= a.at(i, k) * std::conj(a.at(j, k));
            a.at(i, j) = s / ljj;
        }
    }
    return true;
}

// Solves L * L^H * X = b given the lower factor L (strict upper ignored).
CMatrix cholesky_solve(const CMatrix& l, const CMatrix& b) {
    const std::size_t n = l.rows(), m = b.cols();
    CMatrix x = b;
    // forward: L y = b
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            cdouble s = x.at(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * x.at(k, c);
            x.at(i, c) = s / l.at(i, i).real();
        }
    }
    // backward: L^H x = y
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t c = 0; c < m; ++c) {
            cdouble s = x.at(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(l.at(k, ii)) * x.at(k, c);
            x.at(ii, c) = s / l.at(ii, ii).real();
        }
    }
    return x;
}

}  // namespace

CMatrix solve_hermitian_system(const CMatrix& a, const CMatrix& b, SolveInfo* info) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("solve_hermitian_system: matrix not square");
    if (a.rows() != b.rows())
        throw std::invalid_argument("solve_hermitian_system: rhs row count mismatch");
    if (info) *info = SolveInfo{};

    CMatrix l = a;
    if (cholesky(l)) return cholesky_solve(l, b);

    const double eps = 1e-12 * a.trace().real() / static_cast<double>(a.rows());
    CMatrix reg = a;
    for (std::size_t i = 0; i < a.rows(); ++i) reg.at(i, i) += eps;
    l = reg;
    if (cholesky(l)) {
        if (info) {
            info->regularized = true;
            info->epsilon = eps;
        }
        return cholesky_solve(l, b);
    }
    throw SingularMatrixError("solve_hermitian_system: matrix singular after regularization");
}

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : origin_(seed), state_(seed) {}

Rng Rng::stream(std::uint64_t master_seed, std::uint64_t stream_id) {
    return Rng(mix64(mix64(master_seed + kGolden) ^ mix64(stream_id * kGolden + 1)));
}

Rng Rng::split(std::uint64_t stream_id) const { return Rng::stream(origin_, stream_id); }

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - u keeps the log argument in (0, 1]
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(master + kGolden) ^ mix64(a * kGolden + 1) ^ mix64(b * kGolden + 2));
}

CMatrix draw_cn(Rng& rng, std::size_t rows, std::size_t cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("draw_cn: empty shape");
    CMatrix m(rows, cols);
    constexpr double inv_sqrt2 = 0.7071067811865476;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double re = rng.gaussian();
        const double im = rng.gaussian();
        m.data()[i] = cdouble(re * inv_sqrt2, im * inv_sqrt2);
    }
    return m;
}

}  // namespace risfarm
