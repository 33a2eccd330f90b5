#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace seqm::sampler {

/// A target density on R^d, evaluated in the space the sampler moves in
/// (for constrained models this already includes the log-Jacobian).
template <typename T>
concept LogDensity = requires(const T &t, std::span<const double> x) {
    { t.log_density(x) } -> std::convertible_to<double>;
};

// ---------------------------------------------------------------------------
// Random streams
//
// Every (level, purpose) pair owns an mt19937_64 seeded through std::seed_seq
// from the master seed, so results do not depend on the order in which levels
// are updated.

enum class StreamPurpose : std::uint32_t { Proposal = 1, Swap = 2, Init = 3, Simulation = 4 };

class RandomStream
{
public:
    RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                          static_cast<std::uint32_t>(index >> 32)};
        engine_.seed(seq);
    }

    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform on the open interval (lo, hi).
    double uniform_open(double lo, double hi)
    {
        double u = 0.0;
        do { u = uniform(); } while (u == 0.0);
        return lo + (hi - lo) * u;
    }

    double normal() { return normal_(engine_); }
    std::size_t index_below(std::size_t n)
    {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }
    std::mt19937_64 &engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Configuration and state

struct BlockLayout
{
    std::vector<std::size_t> coords;
    std::vector<double> initial_cov_diag;
};

struct SamplerConfig
{
    std::size_t iterations{50000};
    std::size_t burn_in{25000};
    std::size_t temperatures{10};
    std::vector<double> target_acceptance{0.23, 0.41, 0.41};
    double adapt_exponent{0.6};
    double target_swap{0.41};
    double initial_log_scale{0.1};
    double initial_rho{1.0};
    std::uint64_t seed{1};

    void validate() const
    {
        if (!(burn_in > 0 && burn_in < iterations))
        {
            throw std::invalid_argument("sampler config: need 0 < burn_in < iterations");
        }
        if (temperatures < 1)
        {
            throw std::invalid_argument("sampler config: need at least one temperature");
        }
        if (!(adapt_exponent > 0.5 && adapt_exponent <= 1.0))
        {
            throw std::invalid_argument("sampler config: adaptation exponent must be in (0.5, 1]");
        }
        const auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
        if (!in_unit(target_swap) || !std::all_of(target_acceptance.begin(), target_acceptance.end(), in_unit))
        {
            throw std::invalid_argument("sampler config: acceptance targets must be in (0, 1)");
        }
    }
};

/// Robbins-Monro stepsize (g + 1)^(-nu).
[[nodiscard]] inline double adaptation_stepsize(std::size_t g, double nu) noexcept
{
    return std::pow(static_cast<double>(g) + 1.0, -nu);
}

/// Inverse temperatures with 1/beta_{l+1} = 1/beta_l + exp(rho_l) and beta_0 = 1.
struct TemperLadder
{
    std::vector<double> rho;
    std::vector<double> betas;

    // Keeps exp(rho) finite and the gap resolvable in double precision.
    static constexpr double kRhoMin = -30.0;
    static constexpr double kRhoMax = 300.0;

    TemperLadder() = default;
    TemperLadder(std::size_t levels, double initial_rho)
        : rho(levels > 0 ? levels - 1 : 0, initial_rho), betas(levels, 1.0)
    {
        recompute();
    }

    void recompute()
    {
        double inv = 1.0;
        betas.assign(rho.size() + 1, 1.0);
        for (std::size_t l = 0; l < rho.size(); ++l)
        {
            rho[l] = std::clamp(rho[l], kRhoMin, kRhoMax);
            inv += std::exp(rho[l]);
            betas[l + 1] = 1.0 / inv;
        }
    }

    [[nodiscard]] bool is_monotone() const noexcept
    {
        if (betas.empty() || betas.front() != 1.0) { return false; }
        for (std::size_t l = 1; l < betas.size(); ++l)
        {
            if (!(betas[l] < betas[l - 1] && betas[l] > 0.0)) { return false; }
        }
        return true;
    }
};

/// Per-block, per-level adaptation statistics. `proposal_cov` = exp(log_scale) * cov.
struct AdaptState
{
    double log_scale{0.1};
    Eigen::MatrixXd cov;
    Eigen::VectorXd mean;
    Eigen::MatrixXd proposal_cov;
    Eigen::MatrixXd proposal_chol;

    AdaptState() = default;
    AdaptState(double initial_log_scale, const std::vector<double> &cov_diag, std::span<const double> start)
        : log_scale(initial_log_scale),
          cov(Eigen::VectorXd::Map(cov_diag.data(), static_cast<Eigen::Index>(cov_diag.size())).asDiagonal()),
          mean(Eigen::VectorXd::Map(start.data(), static_cast<Eigen::Index>(start.size())))
    {
        refresh();
    }

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(cov.rows()); }

    /// Recomputes the proposal covariance and its factor.
    void refresh()
    {
        constexpr double kDiagonalFloor = 1e-12;
        proposal_cov = std::exp(log_scale) * cov;
        Eigen::MatrixXd regularized = proposal_cov;
        regularized.diagonal().array() += kDiagonalFloor;
        Eigen::LLT<Eigen::MatrixXd> llt(regularized);
        if (llt.info() == Eigen::Success)
        {
            proposal_chol = llt.matrixL();
        }
        else
        {
            proposal_chol = regularized.diagonal().cwiseMax(kDiagonalFloor).cwiseSqrt().asDiagonal();
        }
    }
};

struct ChainState
{
    std::vector<double> x;
    double log_target{-std::numeric_limits<double>::infinity()};
};

// ---------------------------------------------------------------------------
// Single moves

/// min{1, exp(beta (proposed - current))}, with non-finite proposals mapped to 0.
[[nodiscard]] inline double acceptance_probability(double log_current, double log_proposed, double beta) noexcept
{
    if (std::isnan(log_proposed) || log_proposed == -std::numeric_limits<double>::infinity())
    {
        return 0.0;
    }
    if (!std::isfinite(log_current)) { return 1.0; }
    const double log_ratio = beta * (log_proposed - log_current);
    return log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
}

struct BlockStepResult
{
    bool accepted;
    double xi;
};

/// Gaussian random-walk Metropolis update of one block, tempered by `beta`.
template <LogDensity Target>
BlockStepResult mwg_block_step(ChainState &chain, const BlockLayout &block, const AdaptState &adapt,
                               double beta, const Target &target, RandomStream &rng)
{
    const auto d = static_cast<Eigen::Index>(block.coords.size());
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) { z[i] = rng.normal(); }
    const Eigen::VectorXd eps = adapt.proposal_chol * z;

    std::vector<double> proposal = chain.x;
    for (Eigen::Index i = 0; i < d; ++i)
    {
        proposal[block.coords[static_cast<std::size_t>(i)]] += eps[i];
    }
    const double log_proposed = static_cast<double>(target.log_density(proposal));
    const double xi = acceptance_probability(chain.log_target, log_proposed, beta);
    const double u = rng.uniform();
    if (u < xi)
    {
        chain.x = std::move(proposal);
        chain.log_target = log_proposed;
        return {true, xi};
    }
    return {false, xi};
}

/// Stochastic-approximation update of scale, covariance and mean at iteration g >= 1.
inline void adapt_update(AdaptState &adapt, double xi, std::span<const double> x_block, std::size_t g,
                         double target_acceptance, double nu)
{
    const double gamma = adaptation_stepsize(g, nu);
    const Eigen::VectorXd x = Eigen::VectorXd::Map(x_block.data(), static_cast<Eigen::Index>(x_block.size()));
    adapt.log_scale += gamma * (xi - target_acceptance);
    const Eigen::VectorXd centred = x - adapt.mean;
    adapt.cov = (1.0 - gamma) * adapt.cov + gamma * centred * centred.transpose();
    adapt.mean = (1.0 - gamma) * adapt.mean + gamma * x;
    adapt.refresh();
}

struct SwapResult
{
    std::size_t level; // swaps level and level + 1 (0-based)
    double omega;
    bool swapped;
};

/// Swap acceptance between levels l and l + 1 of a tempered ensemble.
[[nodiscard]] inline double swap_probability(double log_target_l, double log_target_next, double beta_l,
                                             double beta_next) noexcept
{
    return acceptance_probability(log_target_l, log_target_next, beta_l - beta_next);
}

/// Proposes exchanging the states at a uniformly chosen adjacent pair, then adapts
/// that pair's spacing and rebuilds the ladder. Adaptation state stays with its level.
inline SwapResult swap_step(std::vector<ChainState> &chains, TemperLadder &ladder, std::size_t g,
                            double target_swap, double nu, RandomStream &rng)
{
    if (chains.size() < 2) { throw std::invalid_argument("swap_step needs at least two levels"); }
    const std::size_t l = rng.index_below(chains.size() - 1);
    const double omega = swap_probability(chains[l].log_target, chains[l + 1].log_target, ladder.betas[l],
                                          ladder.betas[l + 1]);
    const bool swapped = rng.uniform() < omega;
    if (swapped) { std::swap(chains[l], chains[l + 1]); }
    ladder.rho[l] += adaptation_stepsize(g, nu) * (omega - target_swap);
    ladder.recompute();
    return {l, omega, swapped};
}

// ---------------------------------------------------------------------------
// Full run

/// Per-iteration diagnostics. Flat arrays are iteration-major.
struct Telemetry
{
    std::size_t levels{0};
    std::size_t blocks{0};
    std::vector<double> xi;                // [g][level][block]
    std::vector<std::uint8_t> accepted;    // [g][level][block]
    std::vector<std::size_t> swap_level;   // [g]
    std::vector<double> omega;             // [g]
    std::vector<std::uint8_t> swapped;     // [g]
    std::vector<double> betas;             // [g][level]

    [[nodiscard]] std::size_t iterations() const noexcept { return omega.size(); }

    [[nodiscard]] double xi_at(std::size_t g, std::size_t level, std::size_t block) const
    {
        return xi[(g * levels + level) * blocks + block];
    }
    [[nodiscard]] bool accepted_at(std::size_t g, std::size_t level, std::size_t block) const
    {
        return accepted[(g * levels + level) * blocks + block] != 0;
    }

    /// Empirical acceptance rate of one block at one level over the last `window` iterations.
    [[nodiscard]] double trailing_acceptance(std::size_t block, std::size_t level, std::size_t window) const
    {
        const std::size_t n = iterations();
        const std::size_t start = n > window ? n - window : 0;
        double hits = 0.0;
        for (std::size_t g = start; g < n; ++g) { hits += accepted_at(g, level, block) ? 1.0 : 0.0; }
        return n > start ? hits / static_cast<double>(n - start) : 0.0;
    }

    [[nodiscard]] double trailing_swap_rate(std::size_t window) const
    {
        const std::size_t n = iterations();
        const std::size_t start = n > window ? n - window : 0;
        double hits = 0.0;
        for (std::size_t g = start; g < n; ++g) { hits += swapped[g] != 0 ? 1.0 : 0.0; }
        return n > start ? hits / static_cast<double>(n - start) : 0.0;
    }
};

struct TemperedRun
{
    /// Coldest-chain states after burn-in, in the sampler's coordinates.
    std::vector<std::vector<double>> draws;
    Telemetry telemetry;
    TemperLadder ladder;
    std::vector<std::vector<AdaptState>> adapt; // [level][block]
    std::vector<ChainState> final_states;
    bool ladder_always_monotone{true};
};

/// Adaptive parallel-tempering Metropolis-within-Gibbs. `initial_states` holds one
/// starting point per temperature level; each must have a finite log density.
template <LogDensity Target>
TemperedRun run_tempered(const Target &target, const std::vector<BlockLayout> &blocks, const SamplerConfig &cfg,
                         const std::vector<std::vector<double>> &initial_states)
{
    cfg.validate();
    const std::size_t levels = cfg.temperatures;
    const std::size_t nblocks = blocks.size();
    if (initial_states.size() != levels)
    {
        throw std::invalid_argument("need one initial state per temperature level");
    }
    if (cfg.target_acceptance.size() != nblocks)
    {
        throw std::invalid_argument("need one acceptance target per block");
    }

    TemperedRun out;
    out.ladder = TemperLadder(levels, cfg.initial_rho);

    std::vector<ChainState> chains(levels);
    std::vector<RandomStream> streams;
    streams.reserve(levels);
    out.adapt.resize(levels);
    for (std::size_t l = 0; l < levels; ++l)
    {
        chains[l].x = initial_states[l];
        chains[l].log_target = static_cast<double>(target.log_density(chains[l].x));
        if (!std::isfinite(chains[l].log_target))
        {
            throw std::runtime_error("initial state at level " + std::to_string(l) +
                                     " has a non-finite log density");
        }
        streams.emplace_back(cfg.seed, StreamPurpose::Proposal, l);
        for (const auto &b : blocks)
        {
            std::vector<double> start;
            for (auto c : b.coords) { start.push_back(chains[l].x[c]); }
            out.adapt[l].emplace_back(cfg.initial_log_scale, b.initial_cov_diag, start);
        }
    }
    RandomStream swap_rng(cfg.seed, StreamPurpose::Swap);

    auto &tel = out.telemetry;
    tel.levels = levels;
    tel.blocks = nblocks;
    tel.xi.reserve(cfg.iterations * levels * nblocks);
    tel.accepted.reserve(cfg.iterations * levels * nblocks);
    tel.betas.reserve(cfg.iterations * levels);
    out.draws.reserve(cfg.iterations - cfg.burn_in);

    std::vector<double> block_values;
    for (std::size_t g = 1; g <= cfg.iterations; ++g)
    {
        for (std::size_t l = 0; l < levels; ++l)
        {
            const double beta = out.ladder.betas[l];
            for (std::size_t k = 0; k < nblocks; ++k)
            {
                auto &adapt = out.adapt[l][k];
                const auto res = mwg_block_step(chains[l], blocks[k], adapt, beta, target, streams[l]);
                block_values.clear();
                for (auto c : blocks[k].coords) { block_values.push_back(chains[l].x[c]); }
                adapt_update(adapt, res.xi, block_values, g, cfg.target_acceptance[k], cfg.adapt_exponent);
                tel.xi.push_back(res.xi);
                tel.accepted.push_back(res.accepted ? 1 : 0);
            }
        }
        if (levels >= 2)
        {
            const auto swap = swap_step(chains, out.ladder, g, cfg.target_swap, cfg.adapt_exponent, swap_rng);
            tel.swap_level.push_back(swap.level);
            tel.omega.push_back(swap.omega);
            tel.swapped.push_back(swap.swapped ? 1 : 0);
            out.ladder_always_monotone = out.ladder_always_monotone && out.ladder.is_monotone();
        }
        else
        {
            tel.swap_level.push_back(0);
            tel.omega.push_back(0.0);
            tel.swapped.push_back(0);
        }
        tel.betas.insert(tel.betas.end(), out.ladder.betas.begin(), out.ladder.betas.end());
        if (g > cfg.burn_in) { out.draws.push_back(chains.front().x); }
    }
    out.final_states = std::move(chains);
    return out;
}

} // namespace seqm::sampler
