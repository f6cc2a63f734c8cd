#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace rvm {

/// Cartesian 3-vector. Used for positions, velocities and vorticity weights.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }

    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm2(a)); }
inline double norm1(const Vec3& a) { return std::abs(a.x) + std::abs(a.y) + std::abs(a.z); }
inline bool is_finite(const Vec3& a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Row-major 3x3 matrix, m(i, j) with 0-based indices.
struct Mat3 {
    std::array<double, 9> m{};

    static constexpr Mat3 identity() {
        Mat3 r;
        r.m[0] = r.m[4] = r.m[8] = 1.0;
        return r;
    }
    static constexpr Mat3 zero() { return {}; }

    constexpr double operator()(std::size_t i, std::size_t j) const { return m[3 * i + j]; }
    constexpr double& operator()(std::size_t i, std::size_t j) { return m[3 * i + j]; }

    constexpr Mat3& operator+=(const Mat3& o) {
        for (std::size_t i = 0; i < 9; ++i) m[i] += o.m[i];
        return *this;
    }
    constexpr Mat3& operator-=(const Mat3& o) {
        for (std::size_t i = 0; i < 9; ++i) m[i] -= o.m[i];
        return *this;
    }
    constexpr Mat3& operator*=(double s) {
        for (auto& v : m) v *= s;
        return *this;
    }

    friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

constexpr Mat3 operator+(Mat3 a, const Mat3& b) { return a += b; }
constexpr Mat3 operator-(Mat3 a, const Mat3& b) { return a -= b; }
constexpr Mat3 operator*(double s, Mat3 a) { return a *= s; }

constexpr Mat3 operator*(const Mat3& a, const Mat3& b) {
    Mat3 r;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
    return r;
}

constexpr Vec3 operator*(const Mat3& a, const Vec3& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
            a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

constexpr Mat3 transpose(const Mat3& a) {
    Mat3 r;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) r(i, j) = a(j, i);
    return r;
}

inline double max_abs(const Mat3& a) {
    double r = 0.0;
    for (double v : a.m) r = std::max(r, std::abs(v));
    return r;
}

inline bool is_finite(const Mat3& a) {
    for (double v : a.m)
        if (!std::isfinite(v)) return false;
    return true;
}

/// Rank-3 array h(k, j, i), 0-based. Kernels of this type are symmetric in (k, j)
/// and contract against a vector on the last index.
struct Tensor333 {
    std::array<double, 27> h{};

    constexpr double operator()(std::size_t k, std::size_t j, std::size_t i) const {
        return h[9 * k + 3 * j + i];
    }
    constexpr double& operator()(std::size_t k, std::size_t j, std::size_t i) {
        return h[9 * k + 3 * j + i];
    }

    /// Returns S with S(k, j) = sum_i h(k, j, i) v_i.
    constexpr Mat3 contract(const Vec3& v) const {
        Mat3 r;
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t j = 0; j < 3; ++j)
                r(k, j) = (*this)(k, j, 0) * v.x + (*this)(k, j, 1) * v.y + (*this)(k, j, 2) * v.z;
        return r;
    }
};

}  // namespace rvm
