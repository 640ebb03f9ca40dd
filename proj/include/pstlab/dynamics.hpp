#pragma once

// Tight-binding dynamics of the coupled-waveguide array.
//
// Modes are (site, polarization) pairs; the two polarization blocks never mix
// (no cross-talk terms) and are identical unless a birefringence override is
// given. Propagation along z follows |psi(z)> = exp(-i H z)|psi0>, computed
// by spectral decomposition of the real symmetric coupling matrix, so the
// propagator is unitary up to rounding.
//
// Site indices on the public surface are 1-based waveguide numbers, matching
// the device labelling; storage is 0-based with mode index site*n_pol + pol.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "pstlab/errors.hpp"
#include "pstlab/lattice_design.hpp"

namespace pstlab {

enum class Polarization { H = 0, V = 1 };

struct ModeLabel {
    int site = 1;  // 1-based waveguide number
    Polarization pol = Polarization::H;
};

/// Exponential decay constants of the evanescent coupling for one
/// polarization; used to simulate planar (birefringent) devices.
struct DecayConstants {
    double a_per_mm = 0.0;
    double b_per_um = 0.0;
};

struct BirefringenceOverride {
    DecayConstants h;
    DecayConstants v;
};

/// Hermitian (here: real symmetric) coupling matrix over (site, polarization)
/// modes, in mm^-1. Zero diagonal, zero between polarization blocks.
struct Hamiltonian {
    int n_sites = 0;
    int n_polarizations = 1;
    Eigen::MatrixXd matrix;  // dim = n_sites * n_polarizations
    std::vector<ModeLabel> basis_labels;

    int dim() const { return n_sites * n_polarizations; }
    int mode_index(int site, Polarization pol) const {
        if (site < 1 || site > n_sites)
            throw ValidationError("mode_index: site " + std::to_string(site) +
                                  " out of range 1.." + std::to_string(n_sites));
        return (site - 1) * n_polarizations + static_cast<int>(pol);
    }
    /// n_sites x n_sites coupling block of one polarization.
    Eigen::MatrixXd block(Polarization pol) const {
        const int p = static_cast<int>(pol);
        Eigen::MatrixXd b(n_sites, n_sites);
        for (int i = 0; i < n_sites; ++i)
            for (int j = 0; j < n_sites; ++j)
                b(i, j) = matrix(i * n_polarizations + p, j * n_polarizations + p);
        return b;
    }
};

/// Intensity |<site|psi(z)>|^2 (summed over polarization) on a z grid.
struct PropagationProfile {
    std::vector<double> z_grid_mm;
    Eigen::MatrixXd intensities;  // rows: z index, cols: site (0-based)
};

/// Single-photon amplitude vector over (site, polarization) modes.
struct PolarizedState {
    int n_sites = 0;
    int n_polarizations = 2;
    Eigen::VectorXcd amplitudes;
};

namespace detail {

inline std::vector<ModeLabel> make_labels(int n_sites, int n_pol) {
    std::vector<ModeLabel> labels;
    labels.reserve(static_cast<std::size_t>(n_sites) * n_pol);
    for (int s = 1; s <= n_sites; ++s)
        for (int p = 0; p < n_pol; ++p)
            labels.push_back({s, static_cast<Polarization>(p)});
    return labels;
}

inline void check_polarizations(int n_pol) {
    if (n_pol != 1 && n_pol != 2)
        throw ValidationError("polarizations must be 1 or 2, got " +
                              std::to_string(n_pol));
}

/// Scatter per-polarization site blocks into the interleaved mode matrix.
inline Hamiltonian assemble(int n_sites, const std::vector<Eigen::MatrixXd>& blocks) {
    const int n_pol = static_cast<int>(blocks.size());
    Hamiltonian h;
    h.n_sites = n_sites;
    h.n_polarizations = n_pol;
    h.matrix = Eigen::MatrixXd::Zero(n_sites * n_pol, n_sites * n_pol);
    for (int p = 0; p < n_pol; ++p)
        for (int i = 0; i < n_sites; ++i)
            for (int j = 0; j < n_sites; ++j)
                h.matrix(i * n_pol + p, j * n_pol + p) = blocks[p](i, j);
    h.basis_labels = make_labels(n_sites, n_pol);
    return h;
}

}  // namespace detail

/// Nearest-neighbour Hamiltonian from a coupling spectrum: tridiagonal per
/// polarization block, block-diagonal over polarization, zero diagonal.
inline Hamiltonian build_nn_hamiltonian(const CouplingSpectrum& spectrum,
                                        int polarizations = 1) {
    detail::check_polarizations(polarizations);
    const int n = spectrum.n_sites();
    if (n < 2) throw InvalidDesignError("build_nn_hamiltonian: need at least 2 sites");
    for (double c : spectrum.couplings_per_mm)
        if (!(c > 0.0))
            throw InvalidDesignError("build_nn_hamiltonian: couplings must be positive");
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i)
        block(i, i + 1) = block(i + 1, i) = spectrum.couplings_per_mm[i];
    return detail::assemble(n, std::vector<Eigen::MatrixXd>(polarizations, block));
}

/// All-pairs Hamiltonian from the physical geometry: every pair of guides is
/// coupled through the decay law at its centre-to-centre separation. This is
/// what degrades PST on real devices (next-nearest-neighbour coupling).
inline Hamiltonian build_full_hamiltonian(
    const ArrayDesign& design, int polarizations = 1,
    const std::optional<BirefringenceOverride>& birefringence = std::nullopt) {
    detail::check_polarizations(polarizations);
    if (design.n_sites < 2 ||
        static_cast<int>(design.positions_um.size()) != design.n_sites)
        throw InvalidDesignError("build_full_hamiltonian: malformed design");
    if (birefringence && polarizations != 2)
        throw ValidationError(
            "build_full_hamiltonian: birefringence override requires 2 polarizations");

    const int n = design.n_sites;
    auto block_for = [&](const DecayConstants& decay) {
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double d = std::abs(design.positions_um[j] - design.positions_um[i]);
                block(i, j) = block(j, i) =
                    coupling_from_distance(d, decay.a_per_mm, decay.b_per_um);
            }
        return block;
    };

    const DecayConstants design_decay{design.decay_a_per_mm, design.decay_b_per_um};
    std::vector<Eigen::MatrixXd> blocks;
    if (birefringence) {
        blocks.push_back(block_for(birefringence->h));
        blocks.push_back(block_for(birefringence->v));
    } else {
        blocks.assign(polarizations, block_for(design_decay));
    }
    return detail::assemble(n, blocks);
}

namespace detail {

struct BlockSpectralData {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

inline void check_hamiltonian(const Hamiltonian& h) {
    if (h.dim() < 1 || h.matrix.rows() != h.dim() || h.matrix.cols() != h.dim())
        throw InvalidHamiltonianError("hamiltonian has inconsistent dimensions");
    const double asym = (h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12)
        throw InvalidHamiltonianError("hamiltonian is not symmetric (max asymmetry " +
                                      std::to_string(asym) + ")");
}

/// Decompose each polarization block; identical blocks share one
/// decomposition so their propagators come out bitwise equal.
inline std::vector<BlockSpectralData> decompose_blocks(const Hamiltonian& h) {
    std::vector<BlockSpectralData> out(h.n_polarizations);
    const Eigen::MatrixXd block0 = h.block(Polarization::H);
    for (int p = 0; p < h.n_polarizations; ++p) {
        const Eigen::MatrixXd block = h.block(static_cast<Polarization>(p));
        if (p > 0 && (block.array() == block0.array()).all()) {
            out[p] = out[0];
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block);
        if (solver.info() != Eigen::Success)
            throw NumericalError("eigendecomposition failed");
        out[p] = {solver.eigenvalues(), solver.eigenvectors()};
    }
    return out;
}

inline Eigen::VectorXcd phase_vector(const Eigen::VectorXd& eigenvalues, double z_mm) {
    Eigen::VectorXcd phases(eigenvalues.size());
    for (Eigen::Index k = 0; k < eigenvalues.size(); ++k)
        phases(k) = std::exp(std::complex<double>(0.0, -eigenvalues(k) * z_mm));
    return phases;
}

inline Eigen::MatrixXcd block_propagator(const BlockSpectralData& s, double z_mm) {
    const Eigen::MatrixXcd v = s.eigenvectors.cast<std::complex<double>>();
    return v * phase_vector(s.eigenvalues, z_mm).asDiagonal() * v.transpose();
}

}  // namespace detail

/// U(z) = exp(-i H z). Unitary to ~1e-14; identical polarization blocks give
/// bitwise-identical block propagators.
inline Eigen::MatrixXcd propagator(const Hamiltonian& h, double z_mm) {
    detail::check_hamiltonian(h);
    if (z_mm < 0.0) throw ValidationError("propagator: z must be >= 0");
    const auto spectral = detail::decompose_blocks(h);
    const int np = h.n_polarizations;
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(h.dim(), h.dim());
    for (int p = 0; p < np; ++p) {
        const Eigen::MatrixXcd ub = detail::block_propagator(spectral[p], z_mm);
        for (int i = 0; i < h.n_sites; ++i)
            for (int j = 0; j < h.n_sites; ++j)
                u(i * np + p, j * np + p) = ub(i, j);
    }
    return u;
}

/// |U[to][from]|^2 between two sites (same polarization, H block).
inline double transfer_probability(const Hamiltonian& h, double z_mm, int from_site,
                                   int to_site) {
    const int from = h.mode_index(from_site, Polarization::H);
    const int to = h.mode_index(to_site, Polarization::H);
    const Eigen::MatrixXcd u = propagator(h, z_mm);
    // unitarity holds to ~1e-15, so |u|^2 can land a few ulp above 1
    return std::min(std::norm(u(to, from)), 1.0);
}

/// Optional uniform propagation loss. Applied as a scalar intensity factor
/// exp(-gamma z) outside the unitary; cancels in post-selected probabilities.
struct LossModel {
    double db_per_cm = 0.0;
    double gamma_per_mm() const {
        // 10^( -dB(z)/10 ) = exp(-gamma z)
        return db_per_cm * 0.1 * std::numbers::ln10 / 10.0;
    }
};

/// Site intensities on a uniform z grid (endpoints included). Lossless rows
/// sum to 1; with loss they decay as exp(-gamma z).
inline PropagationProfile propagation_profile(const Hamiltonian& h, double z_max_mm,
                                              int n_steps, int input_site,
                                              const LossModel& loss = {}) {
    detail::check_hamiltonian(h);
    if (!(z_max_mm > 0.0)) throw ValidationError("propagation_profile: z_max must be > 0");
    if (n_steps < 2) throw ValidationError("propagation_profile: need n_steps >= 2");
    const int from = h.mode_index(input_site, Polarization::H);

    const auto spectral = detail::decompose_blocks(h);
    const int np = h.n_polarizations;
    const int p_in = from % np;
    const int site_in = from / np;
    // Input lives in one polarization block; amplitudes never leave it.
    const auto& s = spectral[p_in];
    const Eigen::VectorXd weights_base = s.eigenvectors.row(site_in).transpose();

    PropagationProfile profile;
    profile.z_grid_mm.resize(n_steps);
    profile.intensities.resize(n_steps, h.n_sites);
    const double gamma = loss.gamma_per_mm();
    for (int i = 0; i < n_steps; ++i) {
        const double z = z_max_mm * i / (n_steps - 1);
        profile.z_grid_mm[i] = z;
        const Eigen::VectorXcd phases = detail::phase_vector(s.eigenvalues, z);
        const Eigen::VectorXcd psi =
            s.eigenvectors.cast<std::complex<double>>() *
            phases.cwiseProduct(weights_base.cast<std::complex<double>>());
        const double attenuation = std::exp(-gamma * z);
        for (int site = 0; site < h.n_sites; ++site)
            profile.intensities(i, site) =
                attenuation * std::min(std::norm(psi(site)), 1.0);
    }
    return profile;
}

struct FirstPeak {
    double z_mm = 0.0;
    double probability = 0.0;
};

/// First local maximum of P(z) = |U[to][from](z)|^2 for z > 0.
///
/// Coarse scan with step 1e-3/C_max brackets the first maximum (ignoring
/// numerical noise below 1e-15), then golden-section refinement narrows the
/// bracket to 1e-6/C_max. Throws SearchFailureError when nothing is found
/// within z in (0, 10 * pi sqrt(N^2-1)/(4 C_max)].
inline FirstPeak first_peak_max(const Hamiltonian& h, int from_site, int to_site) {
    detail::check_hamiltonian(h);
    const int from = h.mode_index(from_site, Polarization::H);
    const int to = h.mode_index(to_site, Polarization::H);
    const int np = h.n_polarizations;
    if (from % np != to % np)
        throw ValidationError("first_peak_max: sites must share a polarization block");

    double c_max = 0.0;
    for (int i = 0; i < h.dim(); ++i)
        for (int j = i + 1; j < h.dim(); ++j)
            c_max = std::max(c_max, std::abs(h.matrix(i, j)));
    if (!(c_max > 0.0))
        throw SearchFailureError("first_peak_max: hamiltonian has no couplings");

    const auto spectral = detail::decompose_blocks(h);
    const auto& s = spectral[from % np];
    const Eigen::VectorXd weights =
        s.eigenvectors.row(to / np).cwiseProduct(s.eigenvectors.row(from / np));
    const Eigen::VectorXd& lambda = s.eigenvalues;

    auto probability_at = [&](double z) {
        std::complex<double> amp(0.0, 0.0);
        for (int k = 0; k < lambda.size(); ++k)
            amp += weights(k) * std::exp(std::complex<double>(0.0, -lambda(k) * z));
        return std::min(std::norm(amp), 1.0);
    };

    const double dz = 1e-3 / c_max;
    const double z_limit =
        10.0 * std::numbers::pi *
        std::sqrt(static_cast<double>(h.n_sites) * h.n_sites - 1.0) / (4.0 * c_max);
    constexpr double noise_floor = 1e-15;

    double p_prev = probability_at(0.0);
    double p_curr = probability_at(dz);
    double bracket_lo = 0.0, bracket_hi = 0.0;
    bool found = false;
    for (long j = 2; j * dz <= z_limit; ++j) {
        const double p_next = probability_at(j * dz);
        if (p_curr > noise_floor && p_curr >= p_prev && p_curr >= p_next) {
            bracket_lo = (j - 2) * dz;
            bracket_hi = j * dz;
            found = true;
            break;
        }
        p_prev = p_curr;
        p_curr = p_next;
    }
    if (!found)
        throw SearchFailureError("first_peak_max: no local maximum within (0, " +
                                 std::to_string(z_limit) + "] mm");

    // Golden-section search for the maximum on the bracket.
    constexpr double inv_phi = 0.6180339887498949;
    double a = bracket_lo, b = bracket_hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = probability_at(x1), f2 = probability_at(x2);
    const double tol = 1e-6 / c_max;
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = probability_at(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = probability_at(x1);
        }
    }
    const double z_star = 0.5 * (a + b);
    return {z_star, probability_at(z_star)};
}

}  // namespace pstlab
