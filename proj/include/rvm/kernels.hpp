#pragma once

//
// Mollified Biot-Savart kernel K and strain kernel H.
//
// Physics indices (1-based) map to storage indices (0-based) by subtracting one.
//
//   K[i][k](z) = -eps(i,l,k) z_l / (4 pi (|z|^2 + delta^2)^{3/2})
//   H[k][j][i](z) = 3 z_l (eps(k,l,i) z_j + eps(j,l,i) z_k) / (8 pi (|z|^2 + delta^2)^{5/2})
//
// H is the symmetric part of the z-gradient of the mollified K: differentiating
// (|z|^2 + delta^2)^{-3/2} z_l produces one term proportional to eps(i,j,k), which is
// antisymmetric in (i, j) and drops out of the symmetric gradient. The remaining term
// carries the regularized denominator, so the identity S = sym grad u holds for every delta.
//

#include "rvm/linalg.hpp"

namespace rvm {

/// Radial mollification radius. delta == 0 gives the singular kernels.
struct MollifyParam {
    double delta = 0.0;
};

/// Levi-Civita symbol with 1-based indices in {1, 2, 3}.
int levi_civita(int i, int j, int k);

/// Full 3x3 Biot-Savart kernel matrix at separation z.
Mat3 biot_savart_kernel(const Vec3& z, MollifyParam moll);

/// Full strain kernel tensor at separation z.
Tensor333 strain_kernel(const Vec3& z, MollifyParam moll);

namespace detail {
void check_kernel_args(const Vec3& z, MollifyParam moll);
}

// Fused contractions used in the particle sums. These equal
// biot_savart_kernel(z) * g and strain_kernel(z).contract(g) up to rounding, and
// return zero at z == 0 (the mollified kernels vanish there).

inline constexpr double kInvFourPi = 0.07957747154594767;  // 1 / (4 pi)

/// u = K(z) g = (g x z) / (4 pi s^{3/2}), s = |z|^2 + delta^2.
inline Vec3 biot_savart_apply(const Vec3& z, const Vec3& g, double delta2) {
    const double s = norm2(z) + delta2;
    if (s == 0.0) return {};
    const double inv = 1.0 / (s * std::sqrt(s));
    return (kInvFourPi * inv) * cross(g, z);
}

/// Adds S = 3 (c z^T + z c^T) / (8 pi s^{5/2}), c = z x g, to `acc`.
inline void strain_accumulate(const Vec3& z, const Vec3& g, double delta2, Mat3& acc) {
    const double s = norm2(z) + delta2;
    if (s == 0.0) return;
    const double a = 1.5 * kInvFourPi / (s * s * std::sqrt(s));
    const Vec3 c = cross(z, g);
    const double c0 = a * c.x, c1 = a * c.y, c2 = a * c.z;
    const double d00 = 2.0 * c0 * z.x, d11 = 2.0 * c1 * z.y, d22 = 2.0 * c2 * z.z;
    const double d01 = c0 * z.y + c1 * z.x;
    const double d02 = c0 * z.z + c2 * z.x;
    const double d12 = c1 * z.z + c2 * z.y;
    acc.m[0] += d00;
    acc.m[1] += d01;
    acc.m[2] += d02;
    acc.m[3] += d01;
    acc.m[4] += d11;
    acc.m[5] += d12;
    acc.m[6] += d02;
    acc.m[7] += d12;
    acc.m[8] += d22;
}

}  // namespace rvm
