#ifndef LONGREG_KERN_LOSSMATH_HPP
#define LONGREG_KERN_LOSSMATH_HPP

#include <cmath>
#include <cstddef>

namespace longreg::kern {

template <typename T>
double ssd_fwd(const T* a, const T* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dlt = double(a[i]) - double(b[i]);
        acc += dlt * dlt;
    }
    return acc / double(n);
}

template <typename T>
void ssd_bwd(const T* a, const T* b, std::size_t n, double gout, T* ga, T* gb) {
    const double k = 2.0 * gout / double(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
        const double g = k * (double(a[i]) - double(b[i]));
        if (ga) ga[i] += T(g);
        if (gb) gb[i] -= T(g);
    }
}

struct DiceSums {
    double spq = 0.0, sp = 0.0, sq = 0.0;
};

template <typename T>
DiceSums dice_sums(const T* p, const T* q, std::size_t n) {
    DiceSums s;
    for (std::size_t i = 0; i < n; ++i) {
        s.spq += double(p[i]) * double(q[i]);
        s.sp += double(p[i]);
        s.sq += double(q[i]);
    }
    return s;
}

inline double dice_from_sums(const DiceSums& s, double eps) {
    return (2.0 * s.spq + eps) / (s.sp + s.sq + eps);
}

// Gradient of soft Dice w.r.t. the (already smoothed) masks.
template <typename T>
void dice_bwd_smoothed(const T* p, const T* q, std::size_t n,
                       const DiceSums& s, double eps, double gout, T* gp,
                       T* gq) {
    const double den = s.sp + s.sq + eps;
    const double num = 2.0 * s.spq + eps;
    const double inv2 = 1.0 / (den * den);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(n); ++i) {
        if (gp) gp[i] += T(gout * (2.0 * double(q[i]) * den - num) * inv2);
        if (gq) gq[i] += T(gout * (2.0 * double(p[i]) * den - num) * inv2);
    }
}

template <typename T>
double sqdist(const T* u, const T* v, std::size_t len) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const double dlt = double(u[i]) - double(v[i]);
        acc += dlt * dlt;
    }
    return acc;
}

// k(u,v) = exp(-||u-v||^2 / (2 sigma)); the divisor is 2*sigma, not
// 2*sigma^2, so sigma carries squared-distance units.
template <typename T>
double gauss_k(const T* u, const T* v, std::size_t len, double sigma) {
    return std::exp(-sqdist(u, v, len) / (2.0 * sigma));
}

// MMD^2 over ordered pairs: (1/I^2) sum_{i != i'} k_II
//   - (2/(IJ)) sum_{i,j} k_IJ + (1/J^2) sum_{j != j'} k_JJ.
// Within-set sums are empty when the set has one element.
template <typename T>
double mmd_fwd(const T* U, std::size_t I, const T* V, std::size_t J,
               std::size_t len, double sigma) {
    double t1 = 0.0, t2 = 0.0, t3 = 0.0;
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t i2 = 0; i2 < I; ++i2)
            if (i != i2) t1 += gauss_k(U + i * len, U + i2 * len, len, sigma);
    for (std::size_t i = 0; i < I; ++i)
        for (std::size_t j = 0; j < J; ++j)
            t2 += gauss_k(U + i * len, V + j * len, len, sigma);
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t j2 = 0; j2 < J; ++j2)
            if (j != j2) t3 += gauss_k(V + j * len, V + j2 * len, len, sigma);
    return t1 / (double(I) * I) - 2.0 * t2 / (double(I) * J) +
           t3 / (double(J) * J);
}

// dk(u,v)/du = -k(u,v) * (u - v) / sigma; both ordered orientations of a
// within-set pair contribute, which doubles the within-set gradient.
template <typename T>
void mmd_bwd(const T* U, std::size_t I, const T* V, std::size_t J,
             std::size_t len, double sigma, double gout, T* gU, T* gV) {
    const double wII = 2.0 * gout / (double(I) * I * sigma);
    const double wIJ = 2.0 * gout / (double(I) * J * sigma);
    const double wJJ = 2.0 * gout / (double(J) * J * sigma);
    for (std::size_t a = 0; a < I; ++a) {
        for (std::size_t i = 0; i < I; ++i) {
            if (i == a) continue;
            const double k = gauss_k(U + a * len, U + i * len, len, sigma);
            for (std::size_t c = 0; c < len; ++c)
                gU[a * len + c] -=
                    T(wII * k * (double(U[a * len + c]) - double(U[i * len + c])));
        }
        for (std::size_t j = 0; j < J; ++j) {
            const double k = gauss_k(U + a * len, V + j * len, len, sigma);
            for (std::size_t c = 0; c < len; ++c)
                gU[a * len + c] +=
                    T(wIJ * k * (double(U[a * len + c]) - double(V[j * len + c])));
        }
    }
    for (std::size_t b = 0; b < J; ++b) {
        for (std::size_t j = 0; j < J; ++j) {
            if (j == b) continue;
            const double k = gauss_k(V + b * len, V + j * len, len, sigma);
            for (std::size_t c = 0; c < len; ++c)
                gV[b * len + c] -=
                    T(wJJ * k * (double(V[b * len + c]) - double(V[j * len + c])));
        }
        for (std::size_t i = 0; i < I; ++i) {
            const double k = gauss_k(V + b * len, U + i * len, len, sigma);
            for (std::size_t c = 0; c < len; ++c)
                gV[b * len + c] +=
                    T(wIJ * k * (double(V[b * len + c]) - double(U[i * len + c])));
        }
    }
}

} // namespace longreg::kern

#endif
