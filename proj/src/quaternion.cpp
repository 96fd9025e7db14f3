#include "quatfm/quaternion.hpp"

#include <cmath>
#include <stdexcept>

namespace quatfm {

Quaternion hamilton_product(const Quaternion& q1, const Quaternion& q2) {
    return {
        q1.r * q2.r - q1.a * q2.a - q1.b * q2.b - q1.c * q2.c,
        q1.r * q2.a + q1.a * q2.r + q1.b * q2.c - q1.c * q2.b,
        q1.r * q2.b - q1.a * q2.c + q1.b * q2.r + q1.c * q2.a,
        q1.r * q2.c + q1.a * q2.b - q1.b * q2.a + q1.c * q2.r,
    };
}

double norm(const Quaternion& q) {
    return std::sqrt(q.r * q.r + q.a * q.a + q.b * q.b + q.c * q.c);
}

Quaternion normalize(const Quaternion& q) {
    const double n = norm(q);
    if (n == 0.0) throw std::domain_error("normalize: zero quaternion has no unit form");
    return {q.r / n, q.a / n, q.b / n, q.c / n};
}

double map_to_real(const Quaternion& q) { return (q.r + q.a + q.b + q.c) / 4.0; }

void check_same_dim(const QuaternionVector& u, const QuaternionVector& v, const char* what) {
    if (u.dim() != v.dim())
        throw std::invalid_argument(std::string("dimension mismatch in ") + what);
}

QuaternionVector operator+(const QuaternionVector& u, const QuaternionVector& v) {
    check_same_dim(u, v, "quaternion vector add");
    QuaternionVector out(u.dim());
    for (std::size_t k = 0; k < u.dim(); ++k) {
        out.r[k] = u.r[k] + v.r[k];
        out.a[k] = u.a[k] + v.a[k];
        out.b[k] = u.b[k] + v.b[k];
        out.c[k] = u.c[k] + v.c[k];
    }
    return out;
}

QuaternionVector operator-(const QuaternionVector& u, const QuaternionVector& v) {
    check_same_dim(u, v, "quaternion vector sub");
    QuaternionVector out(u.dim());
    for (std::size_t k = 0; k < u.dim(); ++k) {
        out.r[k] = u.r[k] - v.r[k];
        out.a[k] = u.a[k] - v.a[k];
        out.b[k] = u.b[k] - v.b[k];
        out.c[k] = u.c[k] - v.c[k];
    }
    return out;
}

QuaternionVector operator*(double s, const QuaternionVector& u) {
    QuaternionVector out = u;
    scale_in_place(out, s);
    return out;
}

void add_in_place(QuaternionVector& u, const QuaternionVector& v) {
    check_same_dim(u, v, "quaternion vector add");
    for (std::size_t k = 0; k < u.dim(); ++k) {
        u.r[k] += v.r[k];
        u.a[k] += v.a[k];
        u.b[k] += v.b[k];
        u.c[k] += v.c[k];
    }
}

void scale_in_place(QuaternionVector& u, double s) {
    for (std::size_t k = 0; k < u.dim(); ++k) {
        u.r[k] *= s;
        u.a[k] *= s;
        u.b[k] *= s;
        u.c[k] *= s;
    }
}

Quaternion inner_hamilton_product(const QuaternionVector& u, const QuaternionVector& v) {
    check_same_dim(u, v, "inner_hamilton_product");
    const double rr = dot(u.r, v.r), aa = dot(u.a, v.a), bb = dot(u.b, v.b), cc = dot(u.c, v.c);
    const double ra = dot(u.r, v.a), ar = dot(u.a, v.r), bc = dot(u.b, v.c), cb = dot(u.c, v.b);
    const double rb = dot(u.r, v.b), ac = dot(u.a, v.c), br = dot(u.b, v.r), ca = dot(u.c, v.a);
    const double rc = dot(u.r, v.c), ab = dot(u.a, v.b), ba = dot(u.b, v.a), cr = dot(u.c, v.r);
    return {
        rr - aa - bb - cc,
        ra + ar + bc - cb,
        rb - ac + br + ca,
        rc + ab - ba + cr,
    };
}

QuaternionVector elementwise_hamilton_product(const QuaternionVector& u,
                                              const QuaternionVector& v) {
    check_same_dim(u, v, "elementwise_hamilton_product");
    QuaternionVector out(u.dim());
    for (std::size_t k = 0; k < u.dim(); ++k) {
        out.r[k] = u.r[k] * v.r[k] - u.a[k] * v.a[k] - u.b[k] * v.b[k] - u.c[k] * v.c[k];
        out.a[k] = u.r[k] * v.a[k] + u.a[k] * v.r[k] + u.b[k] * v.c[k] - u.c[k] * v.b[k];
        out.b[k] = u.r[k] * v.b[k] - u.a[k] * v.c[k] + u.b[k] * v.r[k] + u.c[k] * v.a[k];
        out.c[k] = u.r[k] * v.c[k] + u.a[k] * v.b[k] - u.b[k] * v.a[k] + u.c[k] * v.r[k];
    }
    return out;
}

QuaternionVector split_relu(const QuaternionVector& h) {
    QuaternionVector out(h.dim());
    for (std::size_t k = 0; k < h.dim(); ++k) {
        out.r[k] = h.r[k] > 0.0 ? h.r[k] : 0.0;
        out.a[k] = h.a[k] > 0.0 ? h.a[k] : 0.0;
        out.b[k] = h.b[k] > 0.0 ? h.b[k] : 0.0;
        out.c[k] = h.c[k] > 0.0 ? h.c[k] : 0.0;
    }
    return out;
}

QuaternionVector qmat_vec(const QuaternionMatrix& w, const QuaternionVector& h) {
    if (w.cols() != h.dim())
        throw std::invalid_argument("qmat_vec: matrix columns do not match vector dimension");
    QuaternionVector out(w.rows());
    matvec_acc(w.rw, h.r, out.r, 1.0);
    matvec_acc(w.aw, h.a, out.r, -1.0);
    matvec_acc(w.bw, h.b, out.r, -1.0);
    matvec_acc(w.cw, h.c, out.r, -1.0);

    matvec_acc(w.rw, h.a, out.a, 1.0);
    matvec_acc(w.aw, h.r, out.a, 1.0);
    matvec_acc(w.bw, h.c, out.a, 1.0);
    matvec_acc(w.cw, h.b, out.a, -1.0);

    matvec_acc(w.rw, h.b, out.b, 1.0);
    matvec_acc(w.aw, h.c, out.b, -1.0);
    matvec_acc(w.bw, h.r, out.b, 1.0);
    matvec_acc(w.cw, h.a, out.b, 1.0);

    matvec_acc(w.rw, h.c, out.c, 1.0);
    matvec_acc(w.aw, h.b, out.c, 1.0);
    matvec_acc(w.bw, h.a, out.c, -1.0);
    matvec_acc(w.cw, h.r, out.c, 1.0);
    return out;
}

}  // namespace quatfm
