#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "risfarm/numerics.hpp"

using namespace risfarm;

namespace {

CMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    CMatrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = cdouble(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    return m;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("matmul identity and unit imaginary") {
    Rng rng(7);
    const CMatrix a = random_matrix(rng, 2, 3);
    const CMatrix r = matmul(CMatrix::identity(2), a);
    CHECK(oracles::rel_fro_error(r, a) == doctest::Approx(0.0));

    CMatrix j1(1, 1), j2(1, 1);
    j1.at(0, 0) = cdouble(0, 1);
    j2.at(0, 0) = cdouble(0, 1);
    const CMatrix p = matmul(j1, j2);
    CHECK(p.at(0, 0).real() == doctest::Approx(-1.0));
    CHECK(p.at(0, 0).imag() == doctest::Approx(0.0));
}

TEST_CASE("matmul matches the triple-loop oracle") {
    Rng rng(11);
    const CMatrix a = random_matrix(rng, 3, 4);
    const CMatrix b = random_matrix(rng, 4, 2);
    CHECK(oracles::rel_fro_error(matmul(a, b), oracles::matmul_naive(a, b)) < 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes") {
    Rng rng(3);
    const CMatrix a = random_matrix(rng, 2, 3);
    const CMatrix b = random_matrix(rng, 2, 3);
    CHECK_THROWS_AS((void)matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul is associative on random triples") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const CMatrix a = random_matrix(rng, 3, 5);
        const CMatrix b = random_matrix(rng, 5, 4);
        const CMatrix c = random_matrix(rng, 4, 3);
        const CMatrix left = matmul(matmul(a, b), c);
        const CMatrix right = matmul(a, matmul(b, c));
        CHECK(oracles::rel_fro_error(left, right) < 1e-10);
    }
}

TEST_CASE("hermitian conjugates, is an involution, keeps real diagonals") {
    CMatrix m(1, 1);
    m.at(0, 0) = cdouble(1, 1);
    CHECK(hermitian(m).at(0, 0) == cdouble(1, -1));

    CMatrix d(3, 3);
    d.at(0, 0) = 1.0;
    d.at(1, 1) = 2.0;
    d.at(2, 2) = 3.0;
    CHECK(hermitian(d) == d);

    Rng rng(5);
    const CMatrix a = random_matrix(rng, 3, 4);
    CHECK(hermitian(hermitian(a)) == a);
}

TEST_CASE("solve: identity and scaled identity") {
    Rng rng(17);
    const CMatrix b = random_matrix(rng, 3, 2);
    CHECK(oracles::rel_fro_error(solve_hermitian_system(CMatrix::identity(3), b), b) < 1e-14);

    const CMatrix two_i = scale(CMatrix::identity(3), 2.0);
    const CMatrix x = solve_hermitian_system(two_i, CMatrix::identity(3));
    CHECK(oracles::rel_fro_error(x, scale(CMatrix::identity(3), 0.5)) < 1e-14);
}

TEST_CASE("solve matches the cofactor-expansion inverse oracle") {
    Rng rng(19);
    const CMatrix a = random_matrix(rng, 4, 4);
    CMatrix gram = matmul(hermitian(a), a);
    for (int i = 0; i < 4; ++i) gram.at(i, i) += 1e-3;

    const CMatrix x = solve_hermitian_system(gram, hermitian(a));
    const CMatrix expected = oracles::matmul_naive(oracles::inverse4(gram), hermitian(a));
    CHECK(oracles::rel_fro_error(x, expected) < 1e-9);
}

TEST_CASE("solve residual stays small on well-conditioned systems") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const CMatrix a = random_matrix(rng, 5, 5);
        CMatrix gram = matmul(hermitian(a), a);
        for (int i = 0; i < 5; ++i) gram.at(i, i) += 0.1;
        const CMatrix b = random_matrix(rng, 5, 3);
        const CMatrix x = solve_hermitian_system(gram, b);
        const CMatrix resid = sub(matmul(gram, x), b);
        CHECK(resid.frobenius_norm() <= 1e-9 * b.frobenius_norm());
    }
}

TEST_CASE("solve surfaces regularization and reports hard singularity") {
    // rank-1 Gram: plain Cholesky fails, the ridge lets it through
    CMatrix v(2, 1);
    v.at(0, 0) = 1.0;
    v.at(1, 0) = 1.0;
    const CMatrix gram = matmul(v, hermitian(v));
    SolveInfo info;
    const CMatrix x = solve_hermitian_system(gram, CMatrix::identity(2), &info);
    CHECK(info.regularized);
    CHECK(info.epsilon > 0.0);
    CHECK(x.all_finite());

    // all-zero matrix has a zero ridge too and must fail loudly
    CHECK_THROWS_AS((void)solve_hermitian_system(CMatrix(2, 2), CMatrix::identity(2)),
                    SingularMatrixError);
}

TEST_CASE("draw_cn moments over 1e5 scalar draws") {
    Rng rng = Rng::stream(42, 0);
    const std::size_t n = 100000;
    double sum_re = 0.0, sum_im = 0.0, sum_sq = 0.0;
    std::vector<double> re, im;
    re.reserve(n);
    im.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const CMatrix m = draw_cn(rng, 1, 1);
        const cdouble z = m.at(0, 0);
        sum_re += z.real();
        sum_im += z.imag();
        sum_sq += std::norm(z);
        re.push_back(z.real());
        im.push_back(z.imag());
    }
    const double mean_mag = std::hypot(sum_re / n, sum_im / n);
    CHECK(mean_mag <= 0.02);
    CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(oracles::variance_of(re) >= 0.48);
    CHECK(oracles::variance_of(re) <= 0.52);
    CHECK(oracles::variance_of(im) >= 0.48);
    CHECK(oracles::variance_of(im) <= 0.52);
}

TEST_CASE("identical seeds reproduce identical draws") {
    Rng a = Rng::stream(123, 5);
    Rng b = Rng::stream(123, 5);
    const CMatrix ma = draw_cn(a, 4, 3);
    const CMatrix mb = draw_cn(b, 4, 3);
    CHECK(ma == mb);

    Rng c = Rng::stream(123, 5);
    Rng d = Rng::stream(123, 5);
    for (int i = 0; i < 100; ++i) CHECK(c.next_u64() == d.next_u64());
}

TEST_CASE("distinct stream ids give distinct streams") {
    Rng a = Rng::stream(123, 1);
    Rng b = Rng::stream(123, 2);
    int differ = 0;
    for (int i = 0; i < 16; ++i)
        if (a.next_u64() != b.next_u64()) ++differ;
    CHECK(differ > 0);

    Rng parent = Rng::stream(9, 0);
    Rng s1 = parent.split(10);
    Rng s2 = parent.split(10);
    CHECK(s1.next_u64() == s2.next_u64());  // same child id, same stream
}

TEST_CASE("draw_cn rejects empty shapes") {
    Rng rng(1);
    CHECK_THROWS_AS((void)draw_cn(rng, 0, 3), std::invalid_argument);
}

}  // TEST_SUITE
