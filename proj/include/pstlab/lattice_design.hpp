#pragma once

// Waveguide-array design for perfect state transfer (PST).
//
// A chain of N evanescently coupled waveguides supports perfect transfer of
// the amplitude at site n to site N-n+1 when the nearest-neighbour coupling
// spectrum follows C_{n,n+1} = C0 * sqrt(n(N-n)) and the state evolves for
// z_PST = pi/(2 C0). Couplings are realised physically by choosing the gap
// between adjacent guides, using the measured exponential decay of the
// evanescent coupling with separation, C(d) = a * exp(-b d).
//
// Units: gaps/positions in micrometers, couplings in mm^-1, propagation
// distance z in millimeters. Conversions happen inside each function.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pstlab/errors.hpp"

namespace pstlab {

/// Nearest-neighbour coupling spectrum of an N-site chain, in mm^-1.
struct CouplingSpectrum {
    double c0_per_mm = 0.0;                // PST rate constant C0
    std::vector<double> couplings_per_mm;  // C_{n,n+1}, n = 1..N-1
    double c_max_per_mm = 0.0;             // largest entry

    int n_sites() const { return static_cast<int>(couplings_per_mm.size()) + 1; }
};

/// Fabrication-level description of a designed array. Positions are the
/// cumulative sums of the gaps with position_1 = 0.
struct ArrayDesign {
    int n_sites = 0;
    double d_min_um = 0.0;
    double decay_a_per_mm = 0.0;
    double decay_b_per_um = 0.0;
    std::vector<double> spacings_um;   // N-1 gaps, mirror symmetric
    std::vector<double> positions_um;  // N absolute coordinates

    double c_max_per_mm() const;  // C(d_min)
};

/// C_{n,n+1} = c0 * sqrt(n(N-n)).
inline CouplingSpectrum pst_coupling_spectrum(int n_sites, double c0_per_mm) {
    if (n_sites < 2)
        throw InvalidDesignError("pst_coupling_spectrum: need at least 2 sites, got " +
                                 std::to_string(n_sites));
    if (!(c0_per_mm > 0.0))
        throw InvalidDesignError("pst_coupling_spectrum: c0 must be positive");
    CouplingSpectrum spec;
    spec.c0_per_mm = c0_per_mm;
    spec.couplings_per_mm.resize(n_sites - 1);
    for (int n = 1; n < n_sites; ++n)
        spec.couplings_per_mm[n - 1] =
            c0_per_mm * std::sqrt(static_cast<double>(n) * (n_sites - n));
    spec.c_max_per_mm = *std::max_element(spec.couplings_per_mm.begin(),
                                          spec.couplings_per_mm.end());
    return spec;
}

/// Equal couplings everywhere; does not support PST beyond 3 sites but is the
/// natural baseline for comparison.
inline CouplingSpectrum uniform_coupling_spectrum(int n_sites, double c_per_mm) {
    if (n_sites < 2)
        throw InvalidDesignError("uniform_coupling_spectrum: need at least 2 sites");
    if (!(c_per_mm > 0.0))
        throw InvalidDesignError("uniform_coupling_spectrum: coupling must be positive");
    CouplingSpectrum spec;
    spec.c0_per_mm = c_per_mm;
    spec.couplings_per_mm.assign(n_sites - 1, c_per_mm);
    spec.c_max_per_mm = c_per_mm;
    return spec;
}

/// Transfer length z_PST = pi/(2 C0) in mm. Plays the role of the evolution
/// time (coupling * length is the dimensionless phase).
inline double pst_time(double c0_per_mm) {
    if (!(c0_per_mm > 0.0))
        throw InvalidDesignError("pst_time: c0 must be positive");
    return std::numbers::pi / (2.0 * c0_per_mm);
}

/// Evanescent coupling vs gap: C(d) = a * exp(-b d), result in mm^-1.
inline double coupling_from_distance(double d_um, double decay_a_per_mm,
                                     double decay_b_per_um) {
    if (d_um < 0.0)
        throw ValidationError("coupling_from_distance: negative separation");
    return decay_a_per_mm * std::exp(-decay_b_per_um * d_um);
}

/// Gap between sites n and n+1 realising the PST spectrum:
///   d_n = d_min + (1/b) ln[ (1/2) sqrt((N^2-1)/(n(N-n))) ].
/// Defined for odd N only; the central gap attains d_min.
inline double spacing_from_coupling(int n, int n_sites, double d_min_um,
                                    double decay_b_per_um) {
    if (n_sites < 2)
        throw InvalidDesignError("spacing_from_coupling: need at least 2 sites");
    if (n_sites % 2 == 0)
        throw UnsupportedParametrizationError(
            "spacing_from_coupling: spacing parametrization requires odd N, got " +
            std::to_string(n_sites));
    if (n < 1 || n > n_sites - 1)
        throw ValidationError("spacing_from_coupling: gap index " + std::to_string(n) +
                              " out of range 1.." + std::to_string(n_sites - 1));
    if (!(decay_b_per_um > 0.0))
        throw InvalidDesignError("spacing_from_coupling: decay b must be positive");
    const double ratio =
        (static_cast<double>(n_sites) * n_sites - 1.0) /
        (static_cast<double>(n) * (n_sites - n));
    return d_min_um + std::log(0.5 * std::sqrt(ratio)) / decay_b_per_um;
}

/// Transfer length from the largest coupling: z_PST = pi sqrt(N^2-1)/(4 C_max).
/// Algebraically identical to pst_time(2 C_max / sqrt(N^2-1)).
inline double z_pst(int n_sites, double c_max_per_mm) {
    if (n_sites < 2)
        throw InvalidDesignError("z_pst: need at least 2 sites");
    if (!(c_max_per_mm > 0.0))
        throw InvalidDesignError("z_pst: c_max must be positive");
    return std::numbers::pi *
           std::sqrt(static_cast<double>(n_sites) * n_sites - 1.0) /
           (4.0 * c_max_per_mm);
}

inline double ArrayDesign::c_max_per_mm() const {
    return coupling_from_distance(d_min_um, decay_a_per_mm, decay_b_per_um);
}

/// Full design: gaps from the spacing parametrization, positions cumulative.
inline ArrayDesign design_array(int n_sites, double d_min_um, double decay_a_per_mm,
                                double decay_b_per_um) {
    if (n_sites < 2)
        throw InvalidDesignError("design_array: need at least 2 sites");
    if (n_sites % 2 == 0)
        throw UnsupportedParametrizationError("design_array: odd N required, got " +
                                              std::to_string(n_sites));
    if (!(d_min_um > 0.0))
        throw InvalidDesignError("design_array: d_min must be positive");
    if (!(decay_a_per_mm > 0.0) || !(decay_b_per_um > 0.0))
        throw InvalidDesignError("design_array: decay constants must be positive");

    ArrayDesign design;
    design.n_sites = n_sites;
    design.d_min_um = d_min_um;
    design.decay_a_per_mm = decay_a_per_mm;
    design.decay_b_per_um = decay_b_per_um;
    design.spacings_um.resize(n_sites - 1);
    design.positions_um.resize(n_sites);
    design.positions_um[0] = 0.0;
    for (int n = 1; n < n_sites; ++n) {
        design.spacings_um[n - 1] =
            spacing_from_coupling(n, n_sites, d_min_um, decay_b_per_um);
        design.positions_um[n] = design.positions_um[n - 1] + design.spacings_um[n - 1];
    }
    return design;
}

/// Coupling spectrum the design realises, evaluated through the decay law.
/// Matches pst_coupling_spectrum with c0 = 2 C_max / sqrt(N^2-1) to ~1e-12
/// relative (closed-form round trip; only rounding error accumulates).
inline CouplingSpectrum realized_spectrum(const ArrayDesign& design) {
    CouplingSpectrum spec;
    const double n2 = static_cast<double>(design.n_sites) * design.n_sites;
    spec.c0_per_mm = 2.0 * design.c_max_per_mm() / std::sqrt(n2 - 1.0);
    spec.couplings_per_mm.resize(design.spacings_um.size());
    for (std::size_t i = 0; i < design.spacings_um.size(); ++i)
        spec.couplings_per_mm[i] = coupling_from_distance(
            design.spacings_um[i], design.decay_a_per_mm, design.decay_b_per_um);
    spec.c_max_per_mm = *std::max_element(spec.couplings_per_mm.begin(),
                                          spec.couplings_per_mm.end());
    return spec;
}

}  // namespace pstlab
