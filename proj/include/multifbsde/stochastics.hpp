#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace mfbsde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Philox4x32-10 block function. Pure: the output depends only on (counter, key).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Index-addressable random source.
///
/// A stream is identified by (seed, stream_id); `normal(i)` and `uniform(i)`
/// return the i-th draw of that stream without any hidden state, so draws can be
/// generated in any order or in parallel. Normals use the cosine branch of
/// Box-Muller on two 53-bit uniforms taken from one Philox block.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t counter) const;
    double normal(std::uint64_t counter) const;

    /// Sequential convenience: draws at the internal counter, then advances it.
    double next_normal() { return normal(counter_++); }
    double next_uniform() { return uniform(counter_++); }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::array<std::uint32_t, 4> block(std::uint64_t counter) const;

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t counter_ = 0;
};

/// Derives an independent seed for a named purpose (training data, held-out data, init, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Brownian increments stored step-major: `steps[n]` is an M x k matrix of
/// increments over [t_n, t_{n+1}].
struct BrownianBatch {
    std::vector<Matrix> steps;
    double h = 0.0;
    std::uint64_t seed = 0;

    int samples() const { return steps.empty() ? 0 : static_cast<int>(steps.front().rows()); }
    int num_steps() const { return static_cast<int>(steps.size()); }
    int dim() const { return steps.empty() ? 0 : static_cast<int>(steps.front().cols()); }

    /// Rows [first, first + count) of every step, sharing h and seed.
    BrownianBatch slice(int first, int count) const;
};

/// Entry (m, n, j) is sqrt(h) times the standard normal at stream (seed, m),
/// counter (n << 16) | j. Requires k < 2^16.
BrownianBatch sample_brownian_batch(std::uint64_t seed, int samples, int steps, int dim, double h);

/// Sums `factor` consecutive increments, giving the same Brownian paths on a grid
/// `factor` times coarser.
BrownianBatch coarsen(const BrownianBatch& fine, int factor);

/// Entry (m, j) is the standard normal at stream (seed, m), counter j.
Matrix standard_normal_matrix(std::uint64_t seed, int rows, int cols);

}  // namespace mfbsde
