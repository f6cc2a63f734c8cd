#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "rvm/linalg.hpp"

namespace rvm {

/// Uniform partition 0 = t_0 < t_1 < ... < t_m = T.
struct TimeGrid {
    double T = 0.0;
    std::size_t m = 1;

    TimeGrid() = default;
    TimeGrid(double final_time, std::size_t steps);

    double dt() const { return T / static_cast<double>(m); }
    double t(std::size_t r) const { return static_cast<double>(r) * T / static_cast<double>(m); }
};

/// Lattice points x_k = h * k for integer k in [lo, hi] (inclusive) on every axis.
struct LatticeBox {
    std::array<long, 3> lo{};
    std::array<long, 3> hi{};
    double h = 1.0;

    std::size_t count() const;
};

/// Initial particles with pre-scaled weights w_k = h^3 omega0(x_k).
struct ParticleSet {
    std::vector<Vec3> positions;
    std::vector<Vec3> weights;
    double h = 1.0;  ///< lattice spacing; basis for the automatic mollification radius

    std::size_t size() const { return positions.size(); }
    bool all_weights_zero() const;
};

using VectorField = std::function<Vec3(const Vec3&)>;

/// Samples omega0 on the lattice. Zero-weight points are dropped unless keep_zero_weights.
ParticleSet build_particles(const LatticeBox& box, const VectorField& omega0,
                            bool keep_zero_weights = true);

/// Raw-weights mode: weights used as given, no h^3 scaling.
ParticleSet particles_from_raw(std::vector<Vec3> positions, std::vector<Vec3> weights, double h);

/// Values indexed by (time level r, particle k, copy sigma), stored [r][k][sigma].
template <typename T>
class EnsembleField {
  public:
    EnsembleField() = default;
    EnsembleField(std::size_t levels, std::size_t particles, std::size_t copies, const T& fill = T{})
        : levels_(levels), particles_(particles), copies_(copies),
          data_(levels * particles * copies, fill) {}

    std::size_t levels() const { return levels_; }
    std::size_t particles() const { return particles_; }
    std::size_t copies() const { return copies_; }
    std::size_t slots() const { return particles_ * copies_; }

    T& at(std::size_t r, std::size_t k, std::size_t sigma) { return data_[index(r, k, sigma)]; }
    const T& at(std::size_t r, std::size_t k, std::size_t sigma) const {
        return data_[index(r, k, sigma)];
    }
    /// Flat slot p = k * copies + sigma within level r.
    T& slot(std::size_t r, std::size_t p) { return data_[r * slots() + p]; }
    const T& slot(std::size_t r, std::size_t p) const { return data_[r * slots() + p]; }

    const std::vector<T>& raw() const { return data_; }
    std::vector<T>& raw() { return data_; }

    bool same_shape(const EnsembleField& o) const {
        return levels_ == o.levels_ && particles_ == o.particles_ && copies_ == o.copies_;
    }

    friend bool operator==(const EnsembleField&, const EnsembleField&) = default;

  private:
    std::size_t index(std::size_t r, std::size_t k, std::size_t sigma) const {
        return (r * particles_ + k) * copies_ + sigma;
    }

    std::size_t levels_ = 0;
    std::size_t particles_ = 0;
    std::size_t copies_ = 0;
    std::vector<T> data_;
};

/// Positions X at every grid time for every particle-copy; X[0] holds the lattice points.
using TrajectoryEnsemble = EnsembleField<Vec3>;
/// G(t_r, 0) for every grid time and particle-copy; G[0] is the identity.
using GaugeEnsemble = EnsembleField<Mat3>;

TrajectoryEnsemble make_trajectories(const ParticleSet& particles, std::size_t m, std::size_t copies);
GaugeEnsemble make_identity_gauges(std::size_t m, std::size_t n, std::size_t copies);

enum class NoiseScheme {
    Shared,       ///< one Brownian motion per copy, shared by all particles of that copy
    Independent,  ///< an independent Brownian motion per particle-copy
};

/// Gaussian increments Z[r][(k, sigma)] ~ N(0, dt I_3) for r = 0..m-1.
class NoiseStore {
  public:
    NoiseStore() = default;
    NoiseStore(TimeGrid grid, std::size_t n, std::size_t copies, NoiseScheme scheme,
               std::vector<Vec3> draws);

    const Vec3& at(std::size_t r, std::size_t k, std::size_t sigma) const;

    NoiseScheme scheme() const { return scheme_; }
    const TimeGrid& grid() const { return grid_; }
    std::size_t particles() const { return n_; }
    std::size_t copies() const { return copies_; }
    /// Distinct draws actually stored: m*N under Shared, m*n*N under Independent.
    const std::vector<Vec3>& draws() const { return draws_; }

    friend bool operator==(const NoiseStore& a, const NoiseStore& b) {
        return a.scheme_ == b.scheme_ && a.n_ == b.n_ && a.copies_ == b.copies_ &&
               a.draws_ == b.draws_;
    }

  private:
    TimeGrid grid_;
    std::size_t n_ = 0;
    std::size_t copies_ = 0;
    NoiseScheme scheme_ = NoiseScheme::Shared;
    std::vector<Vec3> draws_;
};

/// Each draw is a pure function of (seed, r, k, sigma); the shared scheme uses the k = 0
/// stream for every particle, so for n = 1 both schemes produce the same store.
NoiseStore sample_noise(const TimeGrid& grid, std::size_t n, std::size_t copies, NoiseScheme scheme,
                        std::uint64_t seed);

// Snapshot export. CSV columns: r,k,sigma then the payload (x,y,z or g11..g33 row-major).
void write_trajectories_csv(std::ostream& os, const TrajectoryEnsemble& X);
void write_gauges_csv(std::ostream& os, const GaugeEnsemble& G);

/// Binary checkpoint: magic "RVMCKPT1", u64 levels/particles/copies, then X and G as
/// little-endian float64 in [r][k][sigma] order (Mat3 row-major).
void write_checkpoint(const std::filesystem::path& path, const TrajectoryEnsemble& X,
                      const GaugeEnsemble& G);
void read_checkpoint(const std::filesystem::path& path, TrajectoryEnsemble& X, GaugeEnsemble& G);

}  // namespace rvm
