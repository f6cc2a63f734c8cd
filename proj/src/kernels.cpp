#include "rvm/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rvm/errors.hpp"

namespace rvm {

int levi_civita(int i, int j, int k) {
    if (i < 1 || i > 3 || j < 1 || j > 3 || k < 1 || k > 3)
        throw ContractViolation("levi_civita: indices must lie in {1,2,3}, got (" +
                                std::to_string(i) + "," + std::to_string(j) + "," +
                                std::to_string(k) + ")");
    if (i == j || j == k || i == k) return 0;
    // (1,2,3), (2,3,1), (3,1,2) are the even permutations.
    return ((j - i + 3) % 3 == 1) ? 1 : -1;
}

namespace detail {
void check_kernel_args(const Vec3& z, MollifyParam moll) {
    if (!(moll.delta >= 0.0) || !std::isfinite(moll.delta))
        throw ContractViolation("kernel: mollification radius must be finite and >= 0");
    if (!is_finite(z)) throw ContractViolation("kernel: non-finite separation vector");
    if (moll.delta == 0.0 && norm2(z) == 0.0)
        throw SingularityError("kernel: singular kernel evaluated at z = 0 with delta = 0");
}
}  // namespace detail

namespace {
int eps0(int i, int j, int k) { return levi_civita(i + 1, j + 1, k + 1); }
}  // namespace

Mat3 biot_savart_kernel(const Vec3& z, MollifyParam moll) {
    detail::check_kernel_args(z, moll);
    const double s = norm2(z) + moll.delta * moll.delta;
    const double scale = 1.0 / (4.0 * std::numbers::pi * std::pow(s, 1.5));
    Mat3 k;
    for (int i = 0; i < 3; ++i)
        for (int kk = 0; kk < 3; ++kk) {
            double acc = 0.0;
            for (int l = 0; l < 3; ++l) acc += eps0(i, l, kk) * z[l];
            k(i, kk) = -acc * scale;
        }
    return k;
}

Tensor333 strain_kernel(const Vec3& z, MollifyParam moll) {
    detail::check_kernel_args(z, moll);
    const double s = norm2(z) + moll.delta * moll.delta;
    const double scale = 1.5 / (4.0 * std::numbers::pi * std::pow(s, 2.5));
    Tensor333 h;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 3; ++i) {
                double acc = 0.0;
                for (int l = 0; l < 3; ++l)
                    acc += z[l] * (eps0(k, l, i) * z[j] + eps0(j, l, i) * z[k]);
                h(k, j, i) = acc * scale;
            }
    return h;
}

}  // namespace rvm
