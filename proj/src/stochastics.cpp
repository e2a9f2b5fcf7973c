#include "multifbsde/stochastics.hpp"

#include <cmath>
#include <numbers>

#include "multifbsde/errors.hpp"

namespace mfbsde {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// 53 random bits mapped to (0, 1).
double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(seed ^ splitmix64(tag + 0x632BE59BD9B4E019ull));
}

std::array<std::uint32_t, 4> RngStream::block(std::uint64_t counter) const {
    const std::uint64_t key = splitmix64(seed_);
    return philox4x32({static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
                       static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)},
                      {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
}

double RngStream::uniform(std::uint64_t counter) const {
    const auto b = block(counter);
    return to_open_unit(b[0], b[1]);
}

double RngStream::normal(std::uint64_t counter) const {
    const auto b = block(counter);
    const double u1 = to_open_unit(b[0], b[1]);
    const double u2 = to_open_unit(b[2], b[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

BrownianBatch BrownianBatch::slice(int first, int count) const {
    BrownianBatch out;
    out.h = h;
    out.seed = seed;
    out.steps.reserve(steps.size());
    for (const auto& s : steps) out.steps.push_back(s.middleRows(first, count));
    return out;
}

BrownianBatch sample_brownian_batch(std::uint64_t seed, int samples, int steps, int dim, double h) {
    if (samples < 1 || steps < 1 || dim < 1)
        throw ParameterError("sample_brownian_batch: counts must be positive");
    if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("sample_brownian_batch: step size must be positive");
    if (dim >= (1 << 16)) throw ParameterError("sample_brownian_batch: dimension too large");

    BrownianBatch batch;
    batch.h = h;
    batch.seed = seed;
    batch.steps.assign(steps, Matrix(samples, dim));
    const double scale = std::sqrt(h);
    for (int m = 0; m < samples; ++m) {
        const RngStream rng(seed, static_cast<std::uint64_t>(m));
        for (int n = 0; n < steps; ++n)
            for (int j = 0; j < dim; ++j)
                batch.steps[n](m, j) = scale * rng.normal((static_cast<std::uint64_t>(n) << 16) | j);
    }
    return batch;
}

BrownianBatch coarsen(const BrownianBatch& fine, int factor) {
    if (factor < 1 || fine.num_steps() % factor != 0)
        throw ParameterError("coarsen: factor must divide the number of steps");
    BrownianBatch out;
    out.h = fine.h * factor;
    out.seed = fine.seed;
    for (int n = 0; n < fine.num_steps(); n += factor) {
        Matrix sum = fine.steps[n];
        for (int i = 1; i < factor; ++i) sum += fine.steps[n + i];
        out.steps.push_back(std::move(sum));
    }
    return out;
}

Matrix standard_normal_matrix(std::uint64_t seed, int rows, int cols) {
    if (rows < 1 || cols < 1) throw ParameterError("standard_normal_matrix: counts must be positive");
    Matrix out(rows, cols);
    for (int m = 0; m < rows; ++m) {
        const RngStream rng(seed, static_cast<std::uint64_t>(m));
        for (int j = 0; j < cols; ++j) out(m, j) = rng.normal(static_cast<std::uint64_t>(j));
    }
    return out;
}

}  // namespace mfbsde
