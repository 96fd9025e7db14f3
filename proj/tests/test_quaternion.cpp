#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "quatfm/quaternion.hpp"
#include "test_util.hpp"

using namespace quatfm;
using testutil::quat_close;
using testutil::qvec_close;
using testutil::random_qvector;
using testutil::random_quaternion;

namespace {

const Quaternion kOne{1, 0, 0, 0};
const Quaternion kI{0, 1, 0, 0};
const Quaternion kJ{0, 0, 1, 0};
const Quaternion kK{0, 0, 0, 1};

bool quat_eq(const Quaternion& x, const Quaternion& y) {
    return x.r == y.r && x.a == y.a && x.b == y.b && x.c == y.c;
}

}  // namespace

TEST_CASE("hamilton product obeys the basis rules exactly") {
    const Quaternion minus_one{-1, 0, 0, 0};
    CHECK(quat_eq(kI * kI, minus_one));
    CHECK(quat_eq(kJ * kJ, minus_one));
    CHECK(quat_eq(kK * kK, minus_one));
    CHECK(quat_eq(kI * kJ * kK, minus_one));
    CHECK(quat_eq(kI * kJ, kK));
    CHECK(quat_eq(kJ * kI, -1.0 * kK));
    CHECK(quat_eq(kJ * kK, kI));
    CHECK(quat_eq(kK * kJ, -1.0 * kI));
    CHECK(quat_eq(kK * kI, kJ));
    CHECK(quat_eq(kI * kK, -1.0 * kJ));
}

TEST_CASE("hamilton product: identity and hand-expanded value") {
    const Quaternion q{2.5, -1.5, 0.25, 7};
    CHECK(quat_eq(kOne * q, q));
    CHECK(quat_eq(q * kOne, q));

    // direct substitution of (1,2,3,4) x (5,6,7,8) into the expansion
    const Quaternion got = Quaternion{1, 2, 3, 4} * Quaternion{5, 6, 7, 8};
    CHECK(got.r == doctest::Approx(-60).epsilon(1e-15));
    CHECK(got.a == doctest::Approx(12).epsilon(1e-15));
    CHECK(got.b == doctest::Approx(30).epsilon(1e-15));
    CHECK(got.c == doctest::Approx(24).epsilon(1e-15));
}

TEST_CASE("hamilton product is associative but not commutative") {
    Rng rng(11);
    for (int t = 0; t < 1000; ++t) {
        const Quaternion q1 = random_quaternion(rng);
        const Quaternion q2 = random_quaternion(rng);
        const Quaternion q3 = random_quaternion(rng);
        CHECK(quat_close((q1 * q2) * q3, q1 * (q2 * q3), 1e-12));
    }
    // witness: IJ = -JI = K
    CHECK(quat_eq(kI * kJ, -1.0 * (kJ * kI)));
    CHECK_FALSE(quat_eq(kI * kJ, kJ * kI));
}

TEST_CASE("norm is multiplicative") {
    Rng rng(12);
    for (int t = 0; t < 1000; ++t) {
        const Quaternion q1 = random_quaternion(rng);
        const Quaternion q2 = random_quaternion(rng);
        CHECK(testutil::close(norm(q1 * q2), norm(q1) * norm(q2), 1e-12));
    }
}

TEST_CASE("normalize") {
    const Quaternion u = normalize({1, 1, 1, 1});
    CHECK(quat_eq(u, {0.5, 0.5, 0.5, 0.5}));
    const Quaternion v = normalize({3, 0, 4, 0});
    CHECK(quat_eq(v, {0.6, 0.0, 0.8, 0.0}));

    Rng rng(13);
    for (int t = 0; t < 100; ++t) {
        const Quaternion q = random_quaternion(rng);
        CHECK(norm(normalize(q)) == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(normalize({0, 0, 0, 0}), std::domain_error);
}

TEST_CASE("map_to_real averages the cores") {
    CHECK(map_to_real({1, 2, 3, 4}) == 2.5);
    CHECK(map_to_real({0, 0, 0, 0}) == 0.0);
    Rng rng(14);
    for (int t = 0; t < 20; ++t) {
        const double x = rng.normal();
        CHECK(map_to_real({x, x, x, x}) == doctest::Approx(x).epsilon(1e-15));
    }
}

TEST_CASE("inner hamilton product reduces to the scalar product at d=1") {
    QuaternionVector u(1), v(1);
    u.r[0] = 1; u.a[0] = 2; u.b[0] = 3; u.c[0] = 4;
    v.r[0] = 5; v.a[0] = 6; v.b[0] = 7; v.c[0] = 8;
    const Quaternion got = inner_hamilton_product(u, v);
    CHECK(quat_eq(got, {-60, 12, 30, 24}));
}

TEST_CASE("inner hamilton product equals the coordinate-wise sum of scalar products") {
    Rng rng(15);
    for (int t = 0; t < 50; ++t) {
        const auto u = random_qvector(rng, 4);
        const auto v = random_qvector(rng, 4);
        Quaternion want{};
        for (std::size_t k = 0; k < 4; ++k) {
            const Quaternion uk{u.r[k], u.a[k], u.b[k], u.c[k]};
            const Quaternion vk{v.r[k], v.a[k], v.b[k], v.c[k]};
            want = want + uk * vk;
        }
        CHECK(quat_close(inner_hamilton_product(u, v), want, 1e-12));
    }
}

TEST_CASE("inner hamilton product: zero argument and shape checks") {
    Rng rng(16);
    const auto u = random_qvector(rng, 3);
    const QuaternionVector zero(3);
    const Quaternion got = inner_hamilton_product(u, zero);
    CHECK(quat_eq(got, {0, 0, 0, 0}));
    CHECK_THROWS_AS(inner_hamilton_product(u, QuaternionVector(4)), std::invalid_argument);
}

TEST_CASE("bilinearity of the inner and element-wise hamilton products") {
    Rng rng(17);
    for (int t = 0; t < 50; ++t) {
        const auto u = random_qvector(rng, 3);
        const auto v = random_qvector(rng, 3);
        const auto w = random_qvector(rng, 3);
        const double alpha = rng.normal();

        const Quaternion left = inner_hamilton_product(alpha * u + v, w);
        const Quaternion right =
            alpha * inner_hamilton_product(u, w) + inner_hamilton_product(v, w);
        CHECK(quat_close(left, right, 1e-12, 1e-10));

        const Quaternion left2 = inner_hamilton_product(w, alpha * u + v);
        const Quaternion right2 =
            alpha * inner_hamilton_product(w, u) + inner_hamilton_product(w, v);
        CHECK(quat_close(left2, right2, 1e-12, 1e-10));

        const QuaternionVector eleft = elementwise_hamilton_product(alpha * u + v, w);
        QuaternionVector eright = alpha * elementwise_hamilton_product(u, w);
        add_in_place(eright, elementwise_hamilton_product(v, w));
        CHECK(qvec_close(eleft, eright, 1e-12, 1e-10));

        const QuaternionVector eleft2 = elementwise_hamilton_product(w, alpha * u + v);
        QuaternionVector eright2 = alpha * elementwise_hamilton_product(w, u);
        add_in_place(eright2, elementwise_hamilton_product(w, v));
        CHECK(qvec_close(eleft2, eright2, 1e-12, 1e-10));
    }
}

TEST_CASE("element-wise hamilton product works per coordinate") {
    Rng rng(18);
    const auto u = random_qvector(rng, 3);
    const auto v = random_qvector(rng, 3);
    const QuaternionVector got = elementwise_hamilton_product(u, v);
    for (std::size_t k = 0; k < 3; ++k) {
        const Quaternion want =
            Quaternion{u.r[k], u.a[k], u.b[k], u.c[k]} * Quaternion{v.r[k], v.a[k], v.b[k], v.c[k]};
        CHECK(got.r[k] == doctest::Approx(want.r).epsilon(1e-14));
        CHECK(got.a[k] == doctest::Approx(want.a).epsilon(1e-14));
        CHECK(got.b[k] == doctest::Approx(want.b).epsilon(1e-14));
        CHECK(got.c[k] == doctest::Approx(want.c).epsilon(1e-14));
    }

    // channel-wise identity: r=1s leaves the other vector unchanged
    QuaternionVector one(3);
    for (auto& x : one.r) x = 1.0;
    CHECK(qvec_close(elementwise_hamilton_product(one, v), v, 1e-15));
}

TEST_CASE("split relu") {
    QuaternionVector h(2);
    h.r = {-1.0, 2.0};
    h.a = {-3.0, -4.0};
    h.b = {5.0, 0.0};
    h.c = {-0.5, 1.5};
    const QuaternionVector s = split_relu(h);
    CHECK(s.r[0] == 0.0);
    CHECK(s.r[1] == 2.0);
    CHECK(s.a[0] == 0.0);
    CHECK(s.a[1] == 0.0);
    CHECK(s.b[0] == 5.0);
    CHECK(s.b[1] == 0.0);
    CHECK(s.c[0] == 0.0);
    CHECK(s.c[1] == 1.5);

    Rng rng(19);
    const auto x = random_qvector(rng, 5);
    // idempotence on mixed-sign input
    CHECK(qvec_close(split_relu(split_relu(x)), split_relu(x), 0.0, 0.0));
    // all-nonnegative input passes through, all-negative becomes zero
    const QuaternionVector nonneg = split_relu(x);
    CHECK(qvec_close(split_relu(nonneg), nonneg, 0.0, 0.0));
    const QuaternionVector nonpos = -1.0 * nonneg;
    QuaternionVector zero(5);
    const QuaternionVector relu_nonpos = split_relu(nonpos);
    CHECK(qvec_close(relu_nonpos, zero, 0.0, 0.0));
}

TEST_CASE("vector add and scale") {
    Rng rng(20);
    const auto u = random_qvector(rng, 4);
    const QuaternionVector zero(4);
    CHECK(qvec_close(u + zero, u, 0.0, 0.0));
    CHECK(qvec_close(1.0 * u, u, 0.0, 0.0));
    CHECK(qvec_close(2.0 * u, u + u, 1e-15));
    CHECK_THROWS_AS(u + QuaternionVector(5), std::invalid_argument);
}

TEST_CASE("qmat_vec: identity matrix and d=1 reduction") {
    Rng rng(21);
    QuaternionMatrix id(3, 3);
    for (std::size_t i = 0; i < 3; ++i) id.rw(i, i) = 1.0;
    const auto h = random_qvector(rng, 3);
    CHECK(qvec_close(qmat_vec(id, h), h, 1e-15));

    // 1x1 quaternion matrix acts as a scalar hamilton product from the left
    QuaternionMatrix w(1, 1);
    const Quaternion wq = random_quaternion(rng);
    w.rw(0, 0) = wq.r;
    w.aw(0, 0) = wq.a;
    w.bw(0, 0) = wq.b;
    w.cw(0, 0) = wq.c;
    QuaternionVector h1(1);
    const Quaternion hq = random_quaternion(rng);
    h1.r[0] = hq.r;
    h1.a[0] = hq.a;
    h1.b[0] = hq.b;
    h1.c[0] = hq.c;
    const QuaternionVector got = qmat_vec(w, h1);
    const Quaternion want = wq * hq;
    CHECK(got.r[0] == doctest::Approx(want.r).epsilon(1e-14));
    CHECK(got.a[0] == doctest::Approx(want.a).epsilon(1e-14));
    CHECK(got.b[0] == doctest::Approx(want.b).epsilon(1e-14));
    CHECK(got.c[0] == doctest::Approx(want.c).epsilon(1e-14));

    CHECK_THROWS_AS(qmat_vec(w, QuaternionVector(2)), std::invalid_argument);
}

TEST_CASE("qmat_vec equals the real block-matrix expansion") {
    // Build the (4*dout) x (4*din) real matrix acting on stacked core blocks
    // [r;a;b;c]: each quaternion entry contributes the 4x4 sign pattern.
    Rng rng(22);
    const std::size_t dout = 2, din = 2;
    QuaternionMatrix w(dout, din);
    for (auto* m : {&w.rw, &w.aw, &w.bw, &w.cw})
        for (auto& x : m->data) x = rng.normal();
    const auto h = random_qvector(rng, din);

    RealMatrix big(4 * dout, 4 * din);
    for (std::size_t i = 0; i < dout; ++i) {
        for (std::size_t j = 0; j < din; ++j) {
            const double rw = w.rw(i, j), aw = w.aw(i, j), bw = w.bw(i, j), cw = w.cw(i, j);
            const double block[4][4] = {
                {rw, -aw, -bw, -cw},
                {aw, rw, -cw, bw},
                {bw, cw, rw, -aw},
                {cw, -bw, aw, rw},
            };
            for (std::size_t bi = 0; bi < 4; ++bi)
                for (std::size_t bj = 0; bj < 4; ++bj)
                    big(bi * dout + i, bj * din + j) = block[bi][bj];
        }
    }
    std::vector<double> flat(4 * din);
    for (std::size_t j = 0; j < din; ++j) {
        flat[0 * din + j] = h.r[j];
        flat[1 * din + j] = h.a[j];
        flat[2 * din + j] = h.b[j];
        flat[3 * din + j] = h.c[j];
    }
    std::vector<double> want(4 * dout, 0.0);
    matvec_acc(big, flat, want, 1.0);

    const QuaternionVector got = qmat_vec(w, h);
    for (std::size_t i = 0; i < dout; ++i) {
        CHECK(got.r[i] == doctest::Approx(want[0 * dout + i]).epsilon(1e-13));
        CHECK(got.a[i] == doctest::Approx(want[1 * dout + i]).epsilon(1e-13));
        CHECK(got.b[i] == doctest::Approx(want[2 * dout + i]).epsilon(1e-13));
        CHECK(got.c[i] == doctest::Approx(want[3 * dout + i]).epsilon(1e-13));
    }
}

TEST_CASE("qmat_vec is linear in its input") {
    Rng rng(23);
    QuaternionMatrix w(3, 3);
    for (auto* m : {&w.rw, &w.aw, &w.bw, &w.cw})
        for (auto& x : m->data) x = rng.normal();
    const auto u = random_qvector(rng, 3);
    const auto v = random_qvector(rng, 3);
    const double alpha = rng.normal();
    const QuaternionVector left = qmat_vec(w, alpha * u + v);
    const QuaternionVector right = alpha * qmat_vec(w, u) + qmat_vec(w, v);
    CHECK(qvec_close(left, right, 1e-12, 1e-10));
}
