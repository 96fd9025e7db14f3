#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "quatfm/linalg.hpp"

namespace quatfm {

// Quaternion q = r + a*I + b*J + c*K. The four cores are always stored and
// serialized in (r, a, b, c) order.
struct Quaternion {
    double r = 0.0;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

// Hamilton product q1 x q2. Non-commutative; expands the distributive law
// over the unit basis rules I^2 = J^2 = K^2 = IJK = -1.
Quaternion hamilton_product(const Quaternion& q1, const Quaternion& q2);

inline Quaternion operator*(const Quaternion& q1, const Quaternion& q2) {
    return hamilton_product(q1, q2);
}
inline Quaternion operator+(const Quaternion& p, const Quaternion& q) {
    return {p.r + q.r, p.a + q.a, p.b + q.b, p.c + q.c};
}
inline Quaternion operator-(const Quaternion& p, const Quaternion& q) {
    return {p.r - q.r, p.a - q.a, p.b - q.b, p.c - q.c};
}
inline Quaternion operator*(double s, const Quaternion& q) {
    return {s * q.r, s * q.a, s * q.b, s * q.c};
}

double norm(const Quaternion& q);

// Unit quaternion q / |q|. Throws std::domain_error on zero norm.
Quaternion normalize(const Quaternion& q);

// Average pooling over the four cores: (r + a + b + c) / 4.
double map_to_real(const Quaternion& q);

// Quaternion vector in H^d: four real core vectors of common dimension d.
// Bit-for-bit this carries 4d reals, the same capacity as a vector in R^{4d}.
struct QuaternionVector {
    std::vector<double> r, a, b, c;

    QuaternionVector() = default;
    explicit QuaternionVector(std::size_t d) : r(d, 0.0), a(d, 0.0), b(d, 0.0), c(d, 0.0) {}

    std::size_t dim() const { return r.size(); }
};

void check_same_dim(const QuaternionVector& u, const QuaternionVector& v, const char* what);

QuaternionVector operator+(const QuaternionVector& u, const QuaternionVector& v);
QuaternionVector operator-(const QuaternionVector& u, const QuaternionVector& v);
QuaternionVector operator*(double s, const QuaternionVector& u);
void add_in_place(QuaternionVector& u, const QuaternionVector& v);
void scale_in_place(QuaternionVector& u, double s);

// Inner Hamilton product u (x) v: the Hamilton sign pattern applied to real
// dot products of the core vectors. Yields a quaternion scalar.
Quaternion inner_hamilton_product(const QuaternionVector& u, const QuaternionVector& v);

// Element-wise Hamilton product u (.) v: the same sign pattern applied to
// element-wise core products. Yields a quaternion vector; coordinate k equals
// hamilton_product(u[k], v[k]).
QuaternionVector elementwise_hamilton_product(const QuaternionVector& u,
                                              const QuaternionVector& v);

// Split ReLU: ReLU applied independently to each core vector. The
// subgradient at exactly 0 is taken as 0.
QuaternionVector split_relu(const QuaternionVector& h);

// Quaternion matrix in H^{d_out x d_in}: four core matrices of identical
// shape, so a layer holds 4*d_out*d_in distinct scalars rather than the
// 16*d_out*d_in of an equivalent real layer.
struct QuaternionMatrix {
    RealMatrix rw, aw, bw, cw;

    QuaternionMatrix() = default;
    QuaternionMatrix(std::size_t rows, std::size_t cols)
        : rw(rows, cols), aw(rows, cols), bw(rows, cols), cw(rows, cols) {}

    std::size_t rows() const { return rw.rows; }
    std::size_t cols() const { return rw.cols; }
};

// W x h with Hamilton composition across cores:
//   out.r = Rw h.r - Aw h.a - Bw h.b - Cw h.c
//   out.a = Rw h.a + Aw h.r + Bw h.c - Cw h.b
//   out.b = Rw h.b - Aw h.c + Bw h.r + Cw h.a
//   out.c = Rw h.c + Aw h.b - Bw h.a + Cw h.r
// Each term is a real matrix-vector product; this is the block form of the
// 4x4 real sign matrix that makes the product cost 4 weight variables per
// entry instead of 16.
QuaternionVector qmat_vec(const QuaternionMatrix& w, const QuaternionVector& h);

}  // namespace quatfm
