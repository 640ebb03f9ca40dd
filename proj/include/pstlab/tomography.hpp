#pragma once

// Measurement simulation and tomographic reconstruction.
//
// States are reconstructed by linear inversion over the Pauli basis from the
// {H, V, D, R} projector family (4 settings for one qubit, all 16 tensor
// pairs for two), followed by a physical projection that clips negative
// eigenvalues and renormalizes the trace. Linear inversion is exact on
// noiseless probabilities, which keeps every reconstruction testable against
// closed-form states; maximum-likelihood refinement is deliberately out of
// scope.
//
// Process matrices chi are expressed in the Pauli operator basis (I, X, Y, Z)
// normalized so the identity process is chi_00 = 1; process fidelity is then
// the trace product Tr(chi_a chi_b).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "pstlab/errors.hpp"

namespace pstlab {

/// One tomography setting: label like "D" or "HV" and either raw counts or,
/// for exact (infinite-shot) runs, a Born-rule probability.
struct MeasurementRecord {
    std::string setting;
    double counts = 0.0;
};

struct LabeledProjector {
    std::string label;
    Eigen::MatrixXcd projector;
};

struct CompensationSetting {
    double hwp_deg = 0.0;    // half-wave plate angle, (-45, 45]
    double phase_deg = 0.0;  // polarization phase, (-180, 180]
};

namespace detail {

template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(
        a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace detail

inline Eigen::Matrix2cd pauli(int i) {
    using namespace std::complex_literals;
    Eigen::Matrix2cd s;
    switch (i) {
        case 0: s << 1, 0, 0, 1; break;
        case 1: s << 0, 1, 1, 0; break;
        case 2: s << 0, -1i, 1i, 0; break;
        case 3: s << 1, 0, 0, -1; break;
        default: throw ValidationError("pauli: index must be 0..3");
    }
    return s;
}

/// Kets of the tomography family: H, V, D = (H+V)/sqrt2, R = (H+iV)/sqrt2.
inline Eigen::Vector2cd polarization_ket(char label) {
    using namespace std::complex_literals;
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    switch (label) {
        case 'H': return {1.0, 0.0};
        case 'V': return {0.0, 1.0};
        case 'D': return {inv_sqrt2, inv_sqrt2};
        case 'R': return {inv_sqrt2, 1i * inv_sqrt2};
        default:
            throw ValidationError(std::string("polarization_ket: unknown label '") +
                                  label + "'");
    }
}

/// The four rank-1 projectors {H, V, D, R} used for every reconstruction.
inline std::vector<LabeledProjector> projector_set_single() {
    std::vector<LabeledProjector> out;
    for (char c : {'H', 'V', 'D', 'R'}) {
        const Eigen::Vector2cd k = polarization_ket(c);
        out.push_back({std::string(1, c), k * k.adjoint()});
    }
    return out;
}

/// All 16 tensor pairs, labeled photon-1 projector then photon-2 projector.
inline std::vector<LabeledProjector> projector_set_two_qubit() {
    const auto single = projector_set_single();
    std::vector<LabeledProjector> out;
    for (const auto& a : single)
        for (const auto& b : single)
            out.push_back({a.label + b.label, detail::kron(a.projector, b.projector)});
    return out;
}

namespace diag {

/// Count of out-of-range fidelity/probability values clamped so far; each
/// clamp also prints one line to stderr. Exposed so tests can assert on it.
inline std::size_t& clamp_count() {
    static std::size_t count = 0;
    return count;
}

inline double clamp_unit(double value, const char* where) {
    if (value < 0.0 || value > 1.0) {
        ++clamp_count();
        std::cerr << "pstlab: clamped " << where << " value " << value
                  << " into [0, 1]\n";
    }
    return std::clamp(value, 0.0, 1.0);
}

}  // namespace diag

/// Hermitize, clip negative eigenvalues to zero, renormalize to unit trace.
/// Idempotent; used on every reconstructed state and process matrix.
inline Eigen::MatrixXcd project_physical(const Eigen::MatrixXcd& matrix) {
    const Eigen::MatrixXcd herm = 0.5 * (matrix + matrix.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm);
    if (solver.info() != Eigen::Success)
        throw NumericalError("project_physical: eigendecomposition failed");
    Eigen::VectorXd ev = solver.eigenvalues().cwiseMax(0.0);
    const double trace = ev.sum();
    if (trace <= 0.0)
        throw NumericalError("project_physical: matrix has no positive weight");
    ev /= trace;
    return solver.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<std::complex<double>>() *
           solver.eigenvectors().adjoint();
}

/// Born-rule sampling of a projector family. shots = 0 returns the exact
/// probabilities; otherwise each setting is an independent Poisson draw with
/// mean shots*(Tr(P rho) + dark_rate), reproducible from the seed.
inline std::vector<MeasurementRecord> simulate_counts(
    const Eigen::MatrixXcd& rho, const std::vector<LabeledProjector>& projectors,
    long shots, std::uint64_t seed = 0, double dark_rate = 0.0) {
    if (shots < 0) throw ValidationError("simulate_counts: shots must be >= 0");
    if (dark_rate < 0.0) throw ValidationError("simulate_counts: dark rate must be >= 0");
    std::mt19937_64 rng(seed);
    std::vector<MeasurementRecord> records;
    records.reserve(projectors.size());
    for (const auto& p : projectors) {
        if (p.projector.rows() != rho.rows() || p.projector.cols() != rho.cols())
            throw ValidationError("simulate_counts: projector '" + p.label +
                                  "' does not match state dimension");
        const double born = diag::clamp_unit((p.projector * rho).trace().real(),
                                             "Born probability");
        if (shots == 0) {
            records.push_back({p.label, born});
        } else {
            std::poisson_distribution<long> poisson(shots * (born + dark_rate));
            records.push_back({p.label, static_cast<double>(poisson(rng))});
        }
    }
    return records;
}

namespace detail {

/// Rows map Pauli coefficients to (unscaled) setting probabilities:
/// Tr(P_s sigma_i) for s in (H, V, D, R).
inline Eigen::Matrix4d tomography_design_matrix() {
    Eigen::Matrix4d a;
    a << 1, 0, 0, 1,   // H
         1, 0, 0, -1,  // V
         1, 1, 0, 0,   // D
         1, 0, 1, 0;   // R
    return a;
}

inline int setting_row(char label) {
    switch (label) {
        case 'H': return 0;
        case 'V': return 1;
        case 'D': return 2;
        case 'R': return 3;
        default:
            throw InvalidRecordError(std::string("unknown setting label '") + label +
                                     "'");
    }
}

/// Order records into the canonical (H,V,D,R)^{x q} probability vector,
/// rejecting duplicates, gaps, and malformed labels.
inline Eigen::VectorXd collect_probabilities(
    const std::vector<MeasurementRecord>& records, int n_qubits) {
    const std::size_t expected = n_qubits == 1 ? 4 : 16;
    if (records.size() != expected)
        throw InvalidRecordError("expected " + std::to_string(expected) +
                                 " settings, got " + std::to_string(records.size()));
    Eigen::VectorXd p = Eigen::VectorXd::Constant(static_cast<int>(expected), -1.0);
    for (const auto& r : records) {
        if (static_cast<int>(r.setting.size()) != n_qubits)
            throw InvalidRecordError("setting '" + r.setting + "' does not name " +
                                     std::to_string(n_qubits) + " projector(s)");
        int idx = 0;
        for (char c : r.setting) idx = 4 * idx + setting_row(c);
        if (p(idx) >= 0.0)
            throw InvalidRecordError("duplicate setting '" + r.setting + "'");
        if (r.counts < 0.0)
            throw InvalidRecordError("negative counts for setting '" + r.setting + "'");
        p(idx) = r.counts;
    }
    return p;
}

}  // namespace detail

/// Linear-inversion state tomography from a complete {H,V,D,R} (or tensor
/// pair) record set. Count normalization is implicit: the recovered identity
/// coefficient is scaled to 1, so raw counts and exact probabilities both
/// work. Finishes with the physical projection.
inline Eigen::MatrixXcd reconstruct_state(const std::vector<MeasurementRecord>& records,
                                          int dim) {
    if (dim != 2 && dim != 4)
        throw ValidationError("reconstruct_state: dim must be 2 or 4");
    const int n_qubits = dim == 2 ? 1 : 2;
    const Eigen::VectorXd p = detail::collect_probabilities(records, n_qubits);

    const Eigen::Matrix4d a = detail::tomography_design_matrix();
    Eigen::MatrixXd design;
    if (n_qubits == 1)
        design = a;
    else
        design = detail::kron(a, a);
    Eigen::VectorXd c = design.fullPivLu().solve(p);
    if (std::abs(c(0)) < 1e-300)
        throw InvalidRecordError("records carry no total intensity");
    c /= c(0);

    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    if (n_qubits == 1) {
        for (int i = 0; i < 4; ++i) rho += 0.5 * c(i) * pauli(i);
    } else {
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                rho += 0.25 * c(4 * i + j) * detail::kron(pauli(i), pauli(j));
    }
    return project_physical(rho);
}

/// The standard QPT input family {H, V, D, R} as density matrices.
inline std::vector<Eigen::Matrix2cd> qpt_input_states() {
    std::vector<Eigen::Matrix2cd> out;
    for (char c : {'H', 'V', 'D', 'R'}) {
        const Eigen::Vector2cd k = polarization_ket(c);
        out.push_back(k * k.adjoint());
    }
    return out;
}

/// Single-qubit process tomography: given E(rho_j) for a tomographically
/// complete input set, recover chi with E(rho) = sum_mn chi_mn sigma_m rho
/// sigma_n. Inputs are first recombined into the process's action on each
/// Pauli operator, then a 16x16 linear system pins the chi entries; the
/// result gets the same physical projection as states.
inline Eigen::Matrix4cd reconstruct_process(
    const std::vector<Eigen::Matrix2cd>& input_states,
    const std::vector<Eigen::Matrix2cd>& output_states) {
    if (input_states.size() != output_states.size() || input_states.size() != 4)
        throw InvalidRecordError("reconstruct_process: need exactly 4 input/output pairs");

    // sigma_i = sum_j w_ij rho_j  (solved over vectorized inputs).
    Eigen::Matrix4cd basis_from_inputs;
    for (int j = 0; j < 4; ++j) {
        const Eigen::Matrix2cd& r = input_states[static_cast<std::size_t>(j)];
        basis_from_inputs.col(j) << r(0, 0), r(0, 1), r(1, 0), r(1, 1);
    }
    Eigen::FullPivLU<Eigen::Matrix4cd> lu(basis_from_inputs);
    if (lu.rank() < 4)
        throw InvalidRecordError(
            "reconstruct_process: input states are not tomographically complete");

    std::array<Eigen::Matrix2cd, 4> e_of_pauli;
    for (int i = 0; i < 4; ++i) {
        const Eigen::Matrix2cd s = pauli(i);
        Eigen::Vector4cd vec_sigma;
        vec_sigma << s(0, 0), s(0, 1), s(1, 0), s(1, 1);
        const Eigen::Vector4cd w = lu.solve(vec_sigma);
        e_of_pauli[static_cast<std::size_t>(i)] = Eigen::Matrix2cd::Zero();
        for (int j = 0; j < 4; ++j)
            e_of_pauli[static_cast<std::size_t>(i)] +=
                w(j) * output_states[static_cast<std::size_t>(j)];
    }

    // Rows: (input Pauli i, matrix entry r, c); columns: chi entry (m, n).
    Eigen::MatrixXcd system(16, 16);
    Eigen::VectorXcd rhs(16);
    for (int i = 0; i < 4; ++i) {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                const int row = 4 * i + 2 * r + c;
                rhs(row) = e_of_pauli[static_cast<std::size_t>(i)](r, c);
                for (int m = 0; m < 4; ++m)
                    for (int n = 0; n < 4; ++n) {
                        const Eigen::Matrix2cd op = pauli(m) * pauli(i) * pauli(n);
                        system(row, 4 * m + n) = op(r, c);
                    }
            }
    }
    const Eigen::VectorXcd chi_vec = system.colPivHouseholderQr().solve(rhs);
    Eigen::Matrix4cd chi;
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) chi(m, n) = chi_vec(4 * m + n);
    return project_physical(chi);
}

/// Run a (single-qubit) process given by chi: rho -> sum chi_mn s_m rho s_n.
inline Eigen::Matrix2cd apply_process(const Eigen::Matrix4cd& chi,
                                      const Eigen::Matrix2cd& rho) {
    Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n)
            out += chi(m, n) * pauli(m) * rho * pauli(n);
    return out;
}

/// F = Re Tr(chi_a chi_b), clamped into [0, 1] (clamps are logged). With the
/// chi_00 = 1 identity normalization this is 1 iff the processes agree.
inline double process_fidelity(const Eigen::Matrix4cd& chi_a,
                               const Eigen::Matrix4cd& chi_b) {
    return diag::clamp_unit((chi_a * chi_b).trace().real(), "process fidelity");
}

namespace detail {

/// Process fidelity to identity after appending the compensation unitary
/// C = phase(phi) * rotation(2 theta): F = sum_mn chi_mn t_m conj(t_n) with
/// t_m = Tr(sigma_m C)/2. Avoids rebuilding chi for every grid point.
inline double compensated_identity_fidelity(const Eigen::Matrix4cd& chi,
                                            double theta_rad, double phi_rad) {
    const double c = std::cos(2.0 * theta_rad);
    const double s = std::sin(2.0 * theta_rad);
    const std::complex<double> eip = std::exp(std::complex<double>(0.0, phi_rad));
    // C = diag(1, e^{i phi}) * [[c, -s], [s, c]]
    const std::complex<double> t0 = 0.5 * (c + eip * c);
    const std::complex<double> t1 = 0.5 * (-s + eip * s);
    const std::complex<double> t2 =
        0.5 * (std::complex<double>(0.0, -1.0) * (s + eip * s));
    const std::complex<double> t3 = 0.5 * (c - eip * c);
    const std::array<std::complex<double>, 4> t{t0, t1, t2, t3};
    std::complex<double> f(0.0, 0.0);
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) f += chi(m, n) * t[static_cast<std::size_t>(m)] * std::conj(t[static_cast<std::size_t>(n)]);
    return f.real();
}

}  // namespace detail

/// The compensation unitary itself, angles in degrees.
inline Eigen::Matrix2cd compensation_unitary(const CompensationSetting& setting) {
    const double theta = setting.hwp_deg * std::numbers::pi / 180.0;
    const double phi = setting.phase_deg * std::numbers::pi / 180.0;
    Eigen::Matrix2cd rot;
    rot << std::cos(2.0 * theta), -std::sin(2.0 * theta), std::sin(2.0 * theta),
        std::cos(2.0 * theta);
    Eigen::Matrix2cd phase = Eigen::Matrix2cd::Identity();
    phase(1, 1) = std::exp(std::complex<double>(0.0, phi));
    return phase * rot;
}

/// Best waveplate compensation for a measured process: maximize the fidelity
/// of (compensation after process) to identity over theta in (-45, 45] and
/// phi in (-180, 180] degrees. 0.1-degree grid, ties broken toward the
/// smallest |theta| then |phi|, then local grid refinement to ~1e-4 degrees.
inline std::pair<CompensationSetting, double> fit_compensation(
    const Eigen::Matrix4cd& chi) {
    constexpr double deg = std::numbers::pi / 180.0;
    double best_theta = 0.0, best_phi = 0.0;
    double best_f = -1.0;
    auto consider = [&](double theta_deg, double phi_deg) {
        // refinement steps near the window edge would leave the legal range
        if (theta_deg < -45.0 - 1e-9 || theta_deg > 45.0 + 1e-9) return;
        if (phi_deg < -180.0 - 1e-9 || phi_deg > 180.0 + 1e-9) return;
        const double f =
            detail::compensated_identity_fidelity(chi, theta_deg * deg, phi_deg * deg);
        constexpr double tie = 1e-12;
        const bool better =
            f > best_f + tie ||
            (f > best_f - tie &&
             (std::abs(theta_deg) < std::abs(best_theta) - 1e-15 ||
              (std::abs(theta_deg) <= std::abs(best_theta) + 1e-15 &&
               std::abs(phi_deg) < std::abs(best_phi) - 1e-15)));
        if (better) {
            best_f = f;
            best_theta = theta_deg;
            best_phi = phi_deg;
        }
    };

    for (int i = -449; i <= 450; ++i)
        for (int j = -1799; j <= 1800; ++j) consider(0.1 * i, 0.1 * j);

    // Shrink a local grid around the winner; each pass narrows 10x.
    double step = 0.1;
    for (int pass = 0; pass < 3; ++pass) {
        step /= 10.0;
        const double t0 = best_theta, p0 = best_phi;
        for (int i = -10; i <= 10; ++i)
            for (int j = -10; j <= 10; ++j) consider(t0 + step * i, p0 + step * j);
    }

    CompensationSetting setting;
    setting.hwp_deg = best_theta;
    setting.phase_deg = best_phi;
    return {setting, diag::clamp_unit(best_f, "compensated fidelity")};
}

/// Bhattacharyya-squared fidelity between two discrete distributions,
/// F = (sum_n sqrt(p_n q_n))^2. Inputs are normalized internally.
inline double distribution_fidelity(std::vector<double> p, std::vector<double> q) {
    if (p.size() != q.size())
        throw ValidationError("distribution_fidelity: length mismatch");
    if (p.empty()) throw ValidationError("distribution_fidelity: empty distributions");
    auto normalize = [](std::vector<double>& v) {
        double total = 0.0;
        for (double& x : v) {
            if (x < -1e-12)
                throw ValidationError("distribution_fidelity: negative entry");
            x = std::max(x, 0.0);
            total += x;
        }
        if (total <= 0.0)
            throw ValidationError("distribution_fidelity: all-zero distribution");
        for (double& x : v) x /= total;
    };
    normalize(p);
    normalize(q);
    double bhat = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) bhat += std::sqrt(p[i] * q[i]);
    return diag::clamp_unit(bhat * bhat, "distribution fidelity");
}

namespace detail {

/// PSD square root via spectral decomposition (negative rounding clipped).
inline Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (m + m.adjoint()));
    if (solver.info() != Eigen::Success)
        throw NumericalError("psd_sqrt: eigendecomposition failed");
    const Eigen::VectorXd ev = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() *
           ev.asDiagonal().toDenseMatrix().cast<std::complex<double>>() *
           solver.eigenvectors().adjoint();
}

}  // namespace detail

/// Uhlmann fidelity F = (Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2.
inline double state_fidelity(const Eigen::MatrixXcd& rho1, const Eigen::MatrixXcd& rho2) {
    if (rho1.rows() != rho2.rows() || rho1.cols() != rho2.cols())
        throw ValidationError("state_fidelity: dimension mismatch");
    const Eigen::MatrixXcd root = detail::psd_sqrt(rho1);
    const Eigen::MatrixXcd inner = detail::psd_sqrt(root * rho2 * root);
    const double tr = inner.trace().real();
    return diag::clamp_unit(tr * tr, "state fidelity");
}

/// Fidelity between a measured state and a model prediction — the same
/// Uhlmann formula, named for how it is reported.
inline double similarity(const Eigen::MatrixXcd& measured,
                         const Eigen::MatrixXcd& predicted) {
    return state_fidelity(measured, predicted);
}

inline double purity(const Eigen::MatrixXcd& rho) {
    return (rho * rho).trace().real();
}

struct BootstrapResult {
    double mean = 0.0;
    double stddev = 0.0;
    int n_resamples = 0;
};

/// Parametric bootstrap: treat observed counts as Poisson means, resample,
/// recompute the statistic. Resample k uses seed + k + 1 so runs are
/// reproducible and independent of execution order.
inline BootstrapResult bootstrap(
    const std::vector<MeasurementRecord>& records, int n_resamples, std::uint64_t seed,
    const std::function<double(const std::vector<MeasurementRecord>&)>& statistic) {
    if (n_resamples < 2) throw ValidationError("bootstrap: need at least 2 resamples");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n_resamples));
    for (int k = 0; k < n_resamples; ++k) {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(k) + 1);
        std::vector<MeasurementRecord> resampled = records;
        for (auto& r : resampled) {
            if (r.counts > 0.0) {
                std::poisson_distribution<long> poisson(r.counts);
                r.counts = static_cast<double>(poisson(rng));
            }
        }
        values.push_back(statistic(resampled));
    }
    const double mean =
        std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= (values.size() - 1);
    return {mean, std::sqrt(var), n_resamples};
}

}  // namespace pstlab
