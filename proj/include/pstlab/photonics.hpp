#pragma once

// Jones-calculus optics and the two-photon experiment pipeline.
//
// Photon 1 carries (site, polarization) modes inside the array; photon 2
// keeps only its polarization and rides along in fibre (modeled as identity
// transport; any residual fibre phase enters through prepare_bell). Joint
// basis index = 4*(site-1) + 2*pol1 + pol2, i.e. photon-1 modes are the slow
// axis and the state evolves under U_array (x) I_2.
//
// Jones convention, fixed once here: phase(phi) = diag(1, e^{i phi}) and a
// retarder with fast axis at angle theta is R(theta) diag(1, e^{i delta})
// R(-theta), which makes HWP(22.5 deg)|H> = |D> exactly and HWP(0)|V> = -|V>
// (the global sign on fast-axis eigenstates is part of the convention).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "pstlab/dynamics.hpp"
#include "pstlab/errors.hpp"

namespace pstlab {

enum class JonesKind { HalfWave, QuarterWave, Phase, PbsProjector };

/// One polarization optic. `angle_rad` is the fast-axis angle for waveplates,
/// the applied phase for Phase, and the transmission axis for PbsProjector.
struct JonesElement {
    JonesKind kind = JonesKind::HalfWave;
    double angle_rad = 0.0;
};

namespace detail {

inline Eigen::Matrix2cd rotation2(double theta) {
    Eigen::Matrix2cd r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

inline Eigen::Matrix2cd retarder(double theta, double delta) {
    Eigen::Matrix2cd d = Eigen::Matrix2cd::Identity();
    d(1, 1) = std::exp(std::complex<double>(0.0, delta));
    return rotation2(theta) * d * rotation2(-theta);
}

}  // namespace detail

/// 2x2 Jones matrix of an optic. Waveplates are unitary; the PBS projector is
/// the rank-1 projector onto its transmission axis (idempotent, not unitary).
inline Eigen::Matrix2cd jones_matrix(const JonesElement& element) {
    switch (element.kind) {
        case JonesKind::HalfWave:
            return detail::retarder(element.angle_rad, std::numbers::pi);
        case JonesKind::QuarterWave:
            return detail::retarder(element.angle_rad, std::numbers::pi / 2.0);
        case JonesKind::Phase: {
            Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
            m(1, 1) = std::exp(std::complex<double>(0.0, element.angle_rad));
            return m;
        }
        case JonesKind::PbsProjector: {
            const double c = std::cos(element.angle_rad);
            const double s = std::sin(element.angle_rad);
            Eigen::Matrix2cd m;
            m << c * c, c * s, c * s, s * s;
            return m;
        }
    }
    throw ValidationError("jones_matrix: unknown element kind");
}

/// Gaussian wavepacket with a path-length delay on one polarization
/// component. Identical H/V envelopes; everything is in micrometers.
struct Wavepacket {
    double coherence_length_um = 90.0;
    double delay_um = 0.0;
};

/// Overlap gamma(tau) = exp(-tau^2 / (2 L_c^2)) of the delayed and undelayed
/// envelopes: 1 at zero delay, falling to 0 for disjoint packets.
inline double wavepacket_overlap(const Wavepacket& w) {
    if (!(w.coherence_length_um > 0.0))
        throw ValidationError("wavepacket_overlap: coherence length must be > 0");
    const double x = w.delay_um / w.coherence_length_um;
    return std::exp(-0.5 * x * x);
}

/// Joint state of photon 1 (site x polarization) and photon 2 (polarization).
/// Pure states keep an amplitude vector; anything decohered switches to the
/// density form. Exactly one representation is populated.
struct TwoPhotonState {
    int n_sites = 1;
    Eigen::VectorXcd amplitudes;      // size 4*n_sites when pure, else 0
    Eigen::MatrixXcd density_matrix;  // 4n x 4n when mixed, else 0x0

    int dim() const { return 4 * n_sites; }
    bool is_pure() const { return amplitudes.size() > 0; }

    int index(int site, Polarization p1, Polarization p2) const {
        if (site < 1 || site > n_sites)
            throw ValidationError("TwoPhotonState: site " + std::to_string(site) +
                                  " out of range 1.." + std::to_string(n_sites));
        return 4 * (site - 1) + 2 * static_cast<int>(p1) + static_cast<int>(p2);
    }

    /// Density operator regardless of representation.
    Eigen::MatrixXcd density() const {
        if (is_pure()) return amplitudes * amplitudes.adjoint();
        return density_matrix;
    }
};

/// Post-selected SPDC source output: (|H1 V2> + e^{i phi}|V1 H2>)/sqrt(2)
/// with phi = 4*(hwp_theta + residual_phase). Zero angles give the target
/// Bell state; theta = pi/4 flips the sign. Photon 1 is not yet in the array
/// (n_sites = 1).
inline TwoPhotonState prepare_bell(double residual_phase_rad, double hwp_theta_rad) {
    const double phi = 4.0 * (hwp_theta_rad + residual_phase_rad);
    TwoPhotonState state;
    state.n_sites = 1;
    state.amplitudes = Eigen::VectorXcd::Zero(4);
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    state.amplitudes(state.index(1, Polarization::H, Polarization::V)) = inv_sqrt2;
    state.amplitudes(state.index(1, Polarization::V, Polarization::H)) =
        inv_sqrt2 * std::exp(std::complex<double>(0.0, phi));
    return state;
}

/// Place photon 1 of a single-site state into waveguide `input_site` of an
/// n_sites array (all other sites empty).
inline TwoPhotonState inject(const TwoPhotonState& source, int n_sites, int input_site) {
    if (source.n_sites != 1)
        throw ValidationError("inject: source state must have a single site");
    if (input_site < 1 || input_site > n_sites)
        throw ValidationError("inject: input site out of range");
    TwoPhotonState state;
    state.n_sites = n_sites;
    const int offset = 4 * (input_site - 1);
    if (source.is_pure()) {
        state.amplitudes = Eigen::VectorXcd::Zero(4 * n_sites);
        state.amplitudes.segment(offset, 4) = source.amplitudes;
    } else {
        state.density_matrix = Eigen::MatrixXcd::Zero(4 * n_sites, 4 * n_sites);
        state.density_matrix.block(offset, offset, 4, 4) = source.density_matrix;
    }
    return state;
}

/// Apply an array unitary to photon 1, identity to photon 2: (U (x) I_2).
/// `u_array` acts on photon-1 (site x polarization) modes, dim 2*n_sites.
inline TwoPhotonState evolve_two_photon(const TwoPhotonState& state,
                                        const Eigen::MatrixXcd& u_array) {
    const int m = 2 * state.n_sites;
    if (u_array.rows() != m || u_array.cols() != m)
        throw ValidationError("evolve_two_photon: unitary is " +
                              std::to_string(u_array.rows()) + "x" +
                              std::to_string(u_array.cols()) + ", expected " +
                              std::to_string(m) + "x" + std::to_string(m));
    Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            w(2 * i, 2 * j) = u_array(i, j);
            w(2 * i + 1, 2 * j + 1) = u_array(i, j);
        }
    TwoPhotonState out;
    out.n_sites = state.n_sites;
    if (state.is_pure())
        out.amplitudes = w * state.amplitudes;
    else
        out.density_matrix = w * state.density_matrix * w.adjoint();
    return out;
}

/// Pure dephasing from a path delay: coherences between the delayed photon's
/// H and V sectors shrink by gamma(tau); populations and trace untouched.
/// Output is always in density form.
inline TwoPhotonState apply_delay_decoherence(const TwoPhotonState& state,
                                              const Wavepacket& w, int which_photon) {
    if (which_photon != 1 && which_photon != 2)
        throw ValidationError("apply_delay_decoherence: photon must be 1 or 2");
    const double gamma = wavepacket_overlap(w);
    Eigen::MatrixXcd rho = state.density();
    const int d = state.dim();
    auto pol_of = [&](int idx) {
        return which_photon == 1 ? (idx % 4) / 2 : idx % 2;
    };
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (pol_of(i) != pol_of(j)) rho(i, j) *= gamma;
    TwoPhotonState out;
    out.n_sites = state.n_sites;
    out.density_matrix = std::move(rho);
    return out;
}

/// Probability of finding photon 1 at each site (summed over polarizations).
inline Eigen::VectorXd site_distribution(const TwoPhotonState& state) {
    const Eigen::MatrixXcd rho = state.density();
    Eigen::VectorXd p = Eigen::VectorXd::Zero(state.n_sites);
    for (int s = 0; s < state.n_sites; ++s)
        for (int k = 0; k < 4; ++k) p(s) += rho(4 * s + k, 4 * s + k).real();
    return p;
}

/// Reduced polarization state of photon 2 (trace over photon-1 modes).
inline Eigen::Matrix2cd reduced_photon2(const TwoPhotonState& state) {
    const Eigen::MatrixXcd rho = state.density();
    Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
    for (int m1 = 0; m1 < 2 * state.n_sites; ++m1)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) r(a, b) += rho(2 * m1 + a, 2 * m1 + b);
    return r;
}

struct PostselectedState {
    Eigen::Matrix4cd rho;  // two-qubit polarization state, basis HH,HV,VH,VV
    double probability = 0.0;
};

/// Project photon 1 onto one output site, keeping both photons'
/// polarizations. Returns the renormalized 4x4 density matrix and the
/// probability of the projection succeeding.
inline PostselectedState postselect_site(const TwoPhotonState& state, int site) {
    if (site < 1 || site > state.n_sites)
        throw ValidationError("postselect_site: site out of range");
    const Eigen::MatrixXcd rho = state.density();
    const int offset = 4 * (site - 1);
    Eigen::Matrix4cd block = rho.block(offset, offset, 4, 4);
    const double probability = block.trace().real();
    if (probability < 1e-12)
        throw EmptyPostselectionError(
            "postselect_site: no amplitude at site " + std::to_string(site) +
            " (probability " + std::to_string(probability) + ")");
    // roundoff can push the trace a few ulp past 1; report a true probability
    return {block / probability, std::min(probability, 1.0)};
}

}  // namespace pstlab
