#include "rvm/ensemble.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <string>

#include "rvm/errors.hpp"
#include "rvm/format.hpp"
#include "rvm/rng.hpp"

namespace rvm {

TimeGrid::TimeGrid(double final_time, std::size_t steps) : T(final_time), m(steps) {
    if (!(final_time > 0.0) || !std::isfinite(final_time))
        throw ContractViolation("TimeGrid: final time must be finite and > 0");
    if (steps < 1) throw ContractViolation("TimeGrid: step count must be >= 1");
}

std::size_t LatticeBox::count() const {
    std::size_t c = 1;
    for (int a = 0; a < 3; ++a) {
        if (hi[a] < lo[a]) return 0;
        c *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
    }
    return c;
}

bool ParticleSet::all_weights_zero() const {
    for (const auto& w : weights)
        if (w.x != 0.0 || w.y != 0.0 || w.z != 0.0) return false;
    return true;
}

ParticleSet build_particles(const LatticeBox& box, const VectorField& omega0, bool keep_zero_weights) {
    if (!(box.h > 0.0)) throw ContractViolation("build_particles: lattice spacing must be > 0");
    if (box.count() == 0) throw ContractViolation("build_particles: empty lattice box");
    ParticleSet ps;
    ps.h = box.h;
    const double h3 = box.h * box.h * box.h;
    ps.positions.reserve(box.count());
    ps.weights.reserve(box.count());
    for (long i = box.lo[0]; i <= box.hi[0]; ++i)
        for (long j = box.lo[1]; j <= box.hi[1]; ++j)
            for (long k = box.lo[2]; k <= box.hi[2]; ++k) {
                const Vec3 x{box.h * static_cast<double>(i), box.h * static_cast<double>(j),
                             box.h * static_cast<double>(k)};
                const Vec3 w = h3 * omega0(x);
                if (!is_finite(w))
                    throw ContractViolation("build_particles: vorticity not finite on the lattice");
                const bool zero = w.x == 0.0 && w.y == 0.0 && w.z == 0.0;
                if (zero && !keep_zero_weights) continue;
                ps.positions.push_back(x);
                ps.weights.push_back(w);
            }
    if (ps.positions.empty())
        throw ContractViolation("build_particles: every lattice point had zero weight and was dropped");
    return ps;
}

ParticleSet particles_from_raw(std::vector<Vec3> positions, std::vector<Vec3> weights, double h) {
    if (positions.empty()) throw ContractViolation("particles_from_raw: no particles");
    if (positions.size() != weights.size())
        throw ContractViolation("particles_from_raw: position/weight count mismatch");
    if (!(h > 0.0)) throw ContractViolation("particles_from_raw: spacing must be > 0");
    for (std::size_t i = 0; i < positions.size(); ++i)
        if (!is_finite(positions[i]) || !is_finite(weights[i]))
            throw ContractViolation("particles_from_raw: non-finite particle " + std::to_string(i));
    ParticleSet ps;
    ps.positions = std::move(positions);
    ps.weights = std::move(weights);
    ps.h = h;
    return ps;
}

TrajectoryEnsemble make_trajectories(const ParticleSet& particles, std::size_t m, std::size_t copies) {
    TrajectoryEnsemble X(m + 1, particles.size(), copies);
    for (std::size_t k = 0; k < particles.size(); ++k)
        for (std::size_t s = 0; s < copies; ++s) X.at(0, k, s) = particles.positions[k];
    return X;
}

GaugeEnsemble make_identity_gauges(std::size_t m, std::size_t n, std::size_t copies) {
    return GaugeEnsemble(m + 1, n, copies, Mat3::identity());
}

NoiseStore::NoiseStore(TimeGrid grid, std::size_t n, std::size_t copies, NoiseScheme scheme,
                       std::vector<Vec3> draws)
    : grid_(grid), n_(n), copies_(copies), scheme_(scheme), draws_(std::move(draws)) {
    const std::size_t per_level = scheme == NoiseScheme::Shared ? copies : n * copies;
    if (draws_.size() != grid.m * per_level)
        throw ContractViolation("NoiseStore: draw count does not match (grid, n, N, scheme)");
}

const Vec3& NoiseStore::at(std::size_t r, std::size_t k, std::size_t sigma) const {
    if (scheme_ == NoiseScheme::Shared) return draws_[r * copies_ + sigma];
    return draws_[(r * n_ + k) * copies_ + sigma];
}

NoiseStore sample_noise(const TimeGrid& grid, std::size_t n, std::size_t copies, NoiseScheme scheme,
                        std::uint64_t seed) {
    if (n == 0 || copies == 0) throw ContractViolation("sample_noise: n and N must be >= 1");
    const std::size_t stream_particles = scheme == NoiseScheme::Shared ? 1 : n;
    const double sd = std::sqrt(grid.dt());
    std::vector<Vec3> draws(grid.m * stream_particles * copies);
    for (std::size_t r = 0; r < grid.m; ++r)
        for (std::size_t k = 0; k < stream_particles; ++k)
            for (std::size_t s = 0; s < copies; ++s) {
                const auto z = rng::normal3(seed, rng::Stream::SolverNoise, static_cast<std::uint32_t>(r),
                                            static_cast<std::uint32_t>(k),
                                            static_cast<std::uint32_t>(s));
                draws[(r * stream_particles + k) * copies + s] = {sd * z[0], sd * z[1], sd * z[2]};
            }
    return NoiseStore(grid, n, copies, scheme, std::move(draws));
}

void write_trajectories_csv(std::ostream& os, const TrajectoryEnsemble& X) {
    os << "r,k,sigma,x,y,z\n";
    std::string line;
    for (std::size_t r = 0; r < X.levels(); ++r)
        for (std::size_t k = 0; k < X.particles(); ++k)
            for (std::size_t s = 0; s < X.copies(); ++s) {
                const Vec3& v = X.at(r, k, s);
                line = std::to_string(r) + ',' + std::to_string(k) + ',' + std::to_string(s);
                for (int a = 0; a < 3; ++a) {
                    line += ',';
                    append_double(line, v[a]);
                }
                os << line << '\n';
            }
}

void write_gauges_csv(std::ostream& os, const GaugeEnsemble& G) {
    os << "r,k,sigma,g11,g12,g13,g21,g22,g23,g31,g32,g33\n";
    std::string line;
    for (std::size_t r = 0; r < G.levels(); ++r)
        for (std::size_t k = 0; k < G.particles(); ++k)
            for (std::size_t s = 0; s < G.copies(); ++s) {
                line = std::to_string(r) + ',' + std::to_string(k) + ',' + std::to_string(s);
                for (double v : G.at(r, k, s).m) {
                    line += ',';
                    append_double(line, v);
                }
                os << line << '\n';
            }
}

namespace {

constexpr char kMagic[8] = {'R', 'V', 'M', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put_le(std::ostream& os, T v) {
    static_assert(sizeof(T) == 8);
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    os.write(reinterpret_cast<const char*>(&bits), 8);
}

template <typename T>
T get_le(std::istream& is) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits = 0;
    if (!is.read(reinterpret_cast<char*>(&bits), 8)) throw IoError("checkpoint: truncated file");
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return std::bit_cast<T>(bits);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const TrajectoryEnsemble& X,
                      const GaugeEnsemble& G) {
    if (!X.same_shape(TrajectoryEnsemble(G.levels(), G.particles(), G.copies())))
        throw ContractViolation("write_checkpoint: trajectory and gauge shapes differ");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    put_le<std::uint64_t>(os, X.levels());
    put_le<std::uint64_t>(os, X.particles());
    put_le<std::uint64_t>(os, X.copies());
    for (const auto& v : X.raw())
        for (int a = 0; a < 3; ++a) put_le<double>(os, v[a]);
    for (const auto& g : G.raw())
        for (double v : g.m) put_le<double>(os, v);
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

void read_checkpoint(const std::filesystem::path& path, TrajectoryEnsemble& X, GaugeEnsemble& G) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    const auto levels = get_le<std::uint64_t>(is);
    const auto n = get_le<std::uint64_t>(is);
    const auto copies = get_le<std::uint64_t>(is);
    TrajectoryEnsemble x(levels, n, copies);
    GaugeEnsemble g(levels, n, copies);
    for (auto& v : x.raw())
        for (int a = 0; a < 3; ++a) v[a] = get_le<double>(is);
    for (auto& m : g.raw())
        for (double& v : m.m) v = get_le<double>(is);
    X = std::move(x);
    G = std::move(g);
}

}  // namespace rvm
