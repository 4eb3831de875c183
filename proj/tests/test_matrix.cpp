#include <catch2/catch_amalgamated.hpp>

#include "bacoun/matrix.hpp"
#include "bacoun/rng.hpp"

using namespace bacoun;

TEST_CASE("matmul small known product") {
    DenseMatrix a(2, 3);
    a(0, 0) = 1; a(0, 1) = 2; a(0, 2) = 3;
    a(1, 0) = 4; a(1, 1) = 5; a(1, 2) = 6;
    DenseMatrix b(3, 2);
    b(0, 0) = 7; b(0, 1) = 8;
    b(1, 0) = 9; b(1, 1) = 10;
    b(2, 0) = 11; b(2, 1) = 12;
    DenseMatrix c = matmul(a, b);
    REQUIRE(c.rows == 2);
    REQUIRE(c.cols == 2);
    CHECK(c(0, 0) == 58.0);
    CHECK(c(0, 1) == 64.0);
    CHECK(c(1, 0) == 139.0);
    CHECK(c(1, 1) == 154.0);
}

TEST_CASE("matmul shape mismatch throws") {
    DenseMatrix a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("narrow and wide matmul kernels agree with a naive loop") {
    Rng rng(7);
    for (std::size_t n : {2ul, 4ul, 9ul, 17ul}) {
        DenseMatrix a(5, 11), b(11, n);
        for (double& v : a.data) v = rng.normal();
        for (double& v : b.data) v = rng.normal();
        DenseMatrix c = matmul(a, b);
        for (std::size_t i = 0; i < a.rows; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
                CHECK(c(i, j) == Catch::Approx(acc).margin(1e-12));
            }
        }
    }
}

TEST_CASE("transposed products match explicit transposition") {
    Rng rng(11);
    DenseMatrix a(6, 4), b(6, 3), c(5, 4);
    for (double& v : a.data) v = rng.normal();
    for (double& v : b.data) v = rng.normal();
    for (double& v : c.data) v = rng.normal();
    CHECK(max_abs_diff(matmul_at(a, b), matmul(transpose(a), b)) < 1e-14);
    CHECK(max_abs_diff(matmul_bt(c, a), matmul(c, transpose(a))) < 1e-14);
}

TEST_CASE("take_rows and vstack round-trip") {
    DenseMatrix a(3, 2);
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = double(i);
    DenseMatrix top = take_rows(a, {0, 1});
    DenseMatrix bottom = take_rows(a, {2});
    DenseMatrix back = vstack(top, bottom);
    CHECK(max_abs_diff(a, back) == 0.0);
    CHECK(vstack(a, DenseMatrix{}).rows == 3);
}

TEST_CASE("column sums and squared norms") {
    DenseMatrix a(2, 2);
    a(0, 0) = 1; a(0, 1) = -2; a(1, 0) = 3; a(1, 1) = 4;
    DenseMatrix s = column_sums(a);
    CHECK(s(0, 0) == 4.0);
    CHECK(s(0, 1) == 2.0);
    CHECK(sum_squares(a) == 30.0);
    CHECK(row_norm(a, 1) == Catch::Approx(5.0));
}

TEST_CASE("rng substreams are order independent and deterministic") {
    Rng a = substream(42, "flow-train");
    Rng b = substream(42, "classifier-train");
    Rng a2 = substream(42, "flow-train");
    CHECK(a.next_u64() == a2.next_u64());
    CHECK(a.next_u64() == a2.next_u64());
    Rng c = substream(42, "flow-train");
    Rng d = substream(43, "flow-train");
    CHECK(c.next_u64() != d.next_u64());
    (void)b;
}

TEST_CASE("rng uniform stays inside the open unit interval") {
    Rng rng(123);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("rng normal has roughly standard moments") {
    Rng rng(5);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sq / n == Catch::Approx(1.0).margin(0.02));
}
