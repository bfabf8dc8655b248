#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace risfarm {

using cdouble = std::complex<double>;

/// Thrown when a Hermitian solve cannot be completed even after
/// trace-scaled regularization (degenerate channel draw upstream).
struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense complex matrix, row-major. Values are immutable by convention once
/// handed to another module; all mutating helpers are for local construction.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), e_(rows * cols) {}

    static CMatrix identity(std::size_t n) {
        CMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return e_.size(); }

    cdouble& at(std::size_t i, std::size_t j) { return e_[i * cols_ + j]; }
    const cdouble& at(std::size_t i, std::size_t j) const { return e_[i * cols_ + j]; }

    cdouble* data() { return e_.data(); }
    const cdouble* data() const { return e_.data(); }

    bool all_finite() const;
    double frobenius_norm() const;
    cdouble trace() const;

    CMatrix& operator+=(const CMatrix& o);
    CMatrix& operator-=(const CMatrix& o);
    CMatrix& operator*=(cdouble s);

    bool operator==(const CMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && e_ == o.e_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<cdouble> e_;
};

CMatrix matmul(const CMatrix& a, const CMatrix& b);
CMatrix hermitian(const CMatrix& a);
CMatrix add(const CMatrix& a, const CMatrix& b);
CMatrix sub(const CMatrix& a, const CMatrix& b);
CMatrix scale(const CMatrix& a, cdouble s);

struct SolveInfo {
    bool regularized = false;  // factorization needed a trace-scaled ridge
    double epsilon = 0.0;      // ridge that was applied, 0 when none
};

/// Solve a * X = b for Hermitian positive definite a via Cholesky.
/// On factorization failure retries once with eps*I, eps = 1e-12*tr(a)/n,
/// surfacing the event through `info`; throws SingularMatrixError if the
/// regularized factorization also fails.
CMatrix solve_hermitian_system(const CMatrix& a, const CMatrix& b, SolveInfo* info = nullptr);

/// Deterministic splittable generator (SplitMix64 core). Identical seed and
/// stream id reproduce the identical integer stream on every platform.
/// Single-owner: parallel consumers each take their own split stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Independent stream derived from (master seed, stream id).
    static Rng stream(std::uint64_t master_seed, std::uint64_t stream_id);

    /// Child stream derived from this generator's origin, not its position.
    Rng split(std::uint64_t stream_id) const;

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double gaussian();                      // N(0, 1), Box-Muller with spare

    std::uint64_t origin() const { return origin_; }

private:
    std::uint64_t origin_ = 0;
    std::uint64_t state_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stateless seed derivation used to carve stream-id namespaces.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// i.i.d. CN(0,1) entries: real and imaginary parts each N(0, 1/2).
CMatrix draw_cn(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace risfarm
