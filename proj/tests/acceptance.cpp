// Acceptance gate for the toolkit. Eight end-to-end checks, each printed as
// one PASS/FAIL line with the measured values; a check also fails when it
// blows past its runtime budget. The exit code is the number of failures.
//
// Check 5 deliberately asserts a finite-count tomography target that linear
// inversion cannot reach (see the note printed with the result); it reports
// the measured rate instead of relaxing the threshold.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pstlab/dynamics.hpp"
#include "pstlab/lattice_design.hpp"
#include "pstlab/photonics.hpp"
#include "pstlab/scenarios.hpp"
#include "pstlab/tomography.hpp"

#include "test_support.hpp"

namespace {

int g_failures = 0;

void report(int index, bool ok, const std::string& detail, double seconds,
            double budget_s) {
    std::ostringstream line;
    line << "criterion " << index << "  " << (ok ? "PASS" : "FAIL") << "  " << detail
         << "  [" << std::fixed << std::setprecision(2) << seconds << " s";
    if (budget_s > 0.0)
        line << " / budget " << std::setprecision(0) << budget_s << " s";
    line << "]";
    std::cout << line.str() << std::endl;
    if (!ok) ++g_failures;
}

template <typename Body>
void criterion(int index, double budget_s, Body body) {
    const auto start = std::chrono::steady_clock::now();
    std::pair<bool, std::string> result;
    try {
        result = body();
    } catch (const std::exception& e) {
        result = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool within_budget = budget_s <= 0.0 || seconds < budget_s;
    report(index, result.first && within_budget, result.second, seconds, budget_s);
}

std::string sci(double value) {
    std::ostringstream out;
    out << std::scientific << std::setprecision(1) << value;
    return out.str();
}

std::string fixed(double value, int precision = 4) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(precision) << value;
    return out.str();
}

Eigen::MatrixXcd ginibre_state(int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXcd g(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            g(r, c) = std::complex<double>(normal(rng), normal(rng));
    Eigen::MatrixXcd rho = g * g.adjoint();
    return rho / rho.trace().real();
}

Eigen::Matrix2cd random_unitary(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Matrix2cd g;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) g(r, c) = std::complex<double>(normal(rng), normal(rng));
    return Eigen::HouseholderQR<Eigen::Matrix2cd>(g).householderQ();
}

std::vector<pstlab::MeasurementRecord> exact_records(
    const Eigen::MatrixXcd& rho, const std::vector<pstlab::LabeledProjector>& projectors) {
    std::vector<pstlab::MeasurementRecord> records;
    for (const auto& p : projectors)
        records.push_back({p.label, (p.projector * rho).trace().real()});
    return records;
}

std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
    std::map<std::string, std::string> bytes;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file())
            bytes[entry.path().filename().string()] = testsupport::read_file(entry.path());
    return bytes;
}

}  // namespace

int main() {
    std::cout << "pstlab acceptance checks\n";

    // 1. The default 11-guide engineered array refocuses near 23 mm.
    criterion(1, 1.0, [] {
        const auto design = pstlab::design_array(11, 12.0, 3.6, 0.19);
        const double z = pstlab::z_pst(11, design.c_max_per_mm());
        const bool ok = std::abs(z - 23.0) <= 0.02 * 23.0;
        return std::pair<bool, std::string>(
            ok, "engineered-array transfer length z_PST = " + fixed(z) +
                    " mm, within 2% of 23 mm");
    });

    // 2. First transfer peak of the 11-guide uniform chain.
    criterion(2, 5.0, [] {
        const auto spectrum =
            pstlab::uniform_coupling_spectrum(11, 0.36822314417593477);
        const auto h = pstlab::build_nn_hamiltonian(spectrum);
        const auto peak = pstlab::first_peak_max(h, 1, 11);
        const bool ok = std::abs(peak.probability - 0.781) <= 0.005;
        return std::pair<bool, std::string>(
            ok, "uniform-chain first-peak transfer probability = " +
                    fixed(peak.probability) + ", expected 0.781 +/- 0.005");
    });

    // 3. Engineered couplings give an exact mirror transfer at z_PST for
    //    every chain length 2..25, including the global phase (-i)^(N-1).
    criterion(3, 10.0, [] {
        double min_transfer = 1.0;
        double max_deviation = 0.0;
        for (int n_sites = 2; n_sites <= 25; ++n_sites) {
            const auto spectrum = pstlab::pst_coupling_spectrum(n_sites, 0.1);
            const auto h = pstlab::build_nn_hamiltonian(spectrum);
            const Eigen::MatrixXcd u = pstlab::propagator(h, pstlab::pst_time(0.1));
            const std::complex<double> phase =
                std::pow(std::complex<double>(0.0, -1.0), n_sites - 1);
            for (int col = 0; col < n_sites; ++col) {
                const int mirror_row = n_sites - 1 - col;
                min_transfer = std::min(min_transfer, std::abs(u(mirror_row, col)));
                for (int row = 0; row < n_sites; ++row) {
                    const std::complex<double> expected =
                        row == mirror_row ? phase : std::complex<double>(0.0, 0.0);
                    max_deviation = std::max(max_deviation, std::abs(u(row, col) - expected));
                }
            }
        }
        const bool ok = min_transfer >= 1.0 - 1e-9 && max_deviation <= 1e-9;
        return std::pair<bool, std::string>(
            ok, "N = 2..25, all inputs: min mirror amplitude = 1 - " +
                    sci(1.0 - min_transfer) + ", max deviation from phased mirror = " +
                    sci(max_deviation) + " (tol 1e-9)");
    });

    // 4. With all-pairs couplings the transfer degrades more for central
    //    inputs than for edge inputs.
    criterion(4, 0.0, [] {
        const auto design = pstlab::design_array(11, 12.0, 3.6, 0.19);
        const auto h = pstlab::build_full_hamiltonian(design);
        const double z = pstlab::z_pst(11, design.c_max_per_mm());
        const double p_edge = pstlab::transfer_probability(h, z, 1, 11);
        const double p_centre = pstlab::transfer_probability(h, z, 6, 6);
        const bool ok = p_centre < p_edge;
        return std::pair<bool, std::string>(
            ok, "all-pairs model at z_PST: centre input P(6->6) = " + fixed(p_centre) +
                    " < edge input P(1->11) = " + fixed(p_edge));
    });

    // 5. Tomography: exact round-trips for 100 random states and 100 random
    //    unitary processes, then a 100-seed Poisson-count calibration.
    criterion(5, 60.0, [] {
        const auto single = pstlab::projector_set_single();
        const auto pairs = pstlab::projector_set_two_qubit();
        const auto inputs = pstlab::qpt_input_states();

        double state_err = 0.0;
        double process_err = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const Eigen::MatrixXcd rho2 = ginibre_state(2, seed);
            const Eigen::MatrixXcd rec2 =
                pstlab::reconstruct_state(exact_records(rho2, single), 2);
            state_err = std::max(state_err, (rec2 - rho2).cwiseAbs().maxCoeff());

            const Eigen::MatrixXcd rho4 = ginibre_state(4, 1000 + seed);
            const Eigen::MatrixXcd rec4 =
                pstlab::reconstruct_state(exact_records(rho4, pairs), 4);
            state_err = std::max(state_err, (rec4 - rho4).cwiseAbs().maxCoeff());

            const Eigen::Matrix2cd u = random_unitary(2000 + seed);
            std::vector<Eigen::Matrix2cd> outputs;
            for (const auto& in : inputs) outputs.push_back(u * in * u.adjoint());
            const Eigen::Matrix4cd chi = pstlab::reconstruct_process(inputs, outputs);
            Eigen::Vector4cd v;
            for (int m = 0; m < 4; ++m) v(m) = (pstlab::pauli(m) * u).trace() / 2.0;
            const Eigen::Matrix4cd chi_true = v * v.adjoint();
            process_err = std::max(process_err, (chi - chi_true).cwiseAbs().maxCoeff());
        }
        const bool noiseless_ok = state_err <= 1e-6 && process_err <= 1e-6;

        Eigen::MatrixXcd bell = Eigen::MatrixXcd::Zero(4, 4);
        bell(1, 1) = bell(2, 2) = bell(1, 2) = bell(2, 1) = 0.5;
        int reached = 0;
        double fidelity_sum = 0.0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            const auto records = pstlab::simulate_counts(bell, pairs, 10000, seed);
            const Eigen::MatrixXcd rho_hat = pstlab::reconstruct_state(records, 4);
            const double f = pstlab::state_fidelity(bell, rho_hat);
            fidelity_sum += f;
            if (f >= 0.99) ++reached;
        }
        const bool counts_ok = reached >= 95;

        return std::pair<bool, std::string>(
            noiseless_ok && counts_ok,
            "noiseless round-trips: state err " + sci(state_err) + ", process err " +
                sci(process_err) + " (tol 1e-6); Bell fidelity >= 0.99 with 1e4 "
                "counts/setting in " +
                std::to_string(reached) + "/100 seeds (need >= 95), mean F = " +
                fixed(fidelity_sum / 100.0));
    });

    // 6. Ideal device: entangled transfer and compensated process tomography
    //    are both exact for the default input set.
    criterion(6, 0.0, [] {
        testsupport::TempDir dir;
        pstlab::ScenarioConfig bell_cfg;
        bell_cfg.scenario = "bell";
        bell_cfg.output_dir = (dir.path() / "bell").string();
        const auto bell_record = pstlab::run_scenario(bell_cfg);
        double min_fidelity = 1.0;
        for (const auto& row : bell_record.metrics["transfers"])
            min_fidelity = std::min(min_fidelity, row["fidelity"].get<double>());

        pstlab::ScenarioConfig qpt_cfg;
        qpt_cfg.scenario = "qpt";
        qpt_cfg.output_dir = (dir.path() / "qpt").string();
        const auto qpt_record = pstlab::run_scenario(qpt_cfg);
        double min_process = 1.0;
        for (const auto& row : qpt_record.metrics["transfers"])
            min_process =
                std::min(min_process, row["compensated_process_fidelity"].get<double>());

        const bool ok = min_fidelity >= 1.0 - 1e-6 && min_process >= 1.0 - 1e-6;
        return std::pair<bool, std::string>(
            ok, "ideal device: min Bell fidelity = 1 - " + sci(1.0 - min_fidelity) +
                    ", min compensated process fidelity = 1 - " + sci(1.0 - min_process) +
                    " (tol 1e-6)");
    });

    // 7. Delay sweep: purity falls monotonically with delay, starts at 1,
    //    and the simulated measurement agrees with the model prediction.
    criterion(7, 0.0, [] {
        testsupport::TempDir dir;
        pstlab::ScenarioConfig cfg;
        cfg.scenario = "decohere";
        cfg.output_dir = dir.str();
        const auto record = pstlab::run_scenario(cfg);
        const auto& sweep = record.metrics["sweep"];

        std::vector<double> purities;
        double min_similarity = 1.0;
        for (const auto& row : sweep) {
            purities.push_back(row["purity"].get<double>());
            min_similarity = std::min(min_similarity, row["similarity"].get<double>());
        }
        bool decreasing = purities.size() == 4;
        for (std::size_t k = 1; k < purities.size(); ++k)
            decreasing = decreasing && purities[k] < purities[k - 1];
        const bool ok =
            decreasing && purities.at(0) >= 0.999 && min_similarity >= 1.0 - 1e-6;
        return std::pair<bool, std::string>(
            ok, "delay sweep purities " + fixed(purities.at(0)) + " > " +
                    fixed(purities.at(1)) + " > " + fixed(purities.at(2)) + " > " +
                    fixed(purities.at(3)) + " strictly decreasing; min similarity = 1 - " +
                    sci(1.0 - min_similarity) + " (tol 1e-6)");
    });

    // 8. Rerunning a counted scenario with the same config and seed
    //    reproduces every artifact byte for byte.
    criterion(8, 0.0, [] {
        testsupport::TempDir dir;
        pstlab::ScenarioConfig cfg;
        cfg.scenario = "bell";
        cfg.shots = 5000;
        cfg.seed = 7;
        cfg.bootstrap_resamples = 50;
        cfg.output_dir = dir.str();

        const auto first = pstlab::run_scenario(cfg);
        pstlab::write_run_record(first, cfg.output_dir);
        const auto before = snapshot(dir.path());

        const auto second = pstlab::run_scenario(cfg);
        pstlab::write_run_record(second, cfg.output_dir);
        const auto after = snapshot(dir.path());

        bool identical = before.size() == after.size();
        int compared = 0;
        for (const auto& [name, bytes] : before) {
            if (name == "run_record.json") continue;  // wall-clock field varies
            const auto it = after.find(name);
            identical = identical && it != after.end() && it->second == bytes;
            ++compared;
        }
        nlohmann::json record_a = first.to_json();
        nlohmann::json record_b = second.to_json();
        record_a.erase("wall_clock_ms");
        record_b.erase("wall_clock_ms");
        identical = identical && record_a == record_b;

        return std::pair<bool, std::string>(
            identical, "bell rerun with shots=5000 seed=7: " + std::to_string(compared) +
                           " artifacts byte-identical; run records match up to "
                           "wall_clock_ms");
    });

    std::cout << 8 - g_failures << "/8 criteria passed\n";
    if (g_failures > 0)
        std::cout << "note: the finite-count half of criterion 5 asks for Bell fidelity"
                     " >= 0.99 in 95% of seeds at 1e4 counts per setting. Linear-inversion"
                     " tomography has ~1e-2 statistical spread at that count level and the"
                     " physical projection biases pure-state fidelity downward, so the"
                     " achievable rate is far lower (mean F ~ 0.976). The check reports the"
                     " measured rate rather than relaxing the threshold.\n";
    return g_failures == 0 ? 0 : 1;
}
