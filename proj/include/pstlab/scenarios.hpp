#pragma once

// Config-driven experiment pipelines behind the CLI verbs. Each run_*
// function takes a validated ScenarioConfig, writes its artifacts into the
// output directory, and returns a RunRecord echoing the config, the file
// manifest, and the summary metrics.
//
// Config JSON layout (all sections optional, unknown keys rejected):
//
//   {
//     "scenario":   "design|propagate|fig2a|fig2b|transfer-table|qpt|bell|decohere",
//     "output_dir": "out",
//     "design":     { "n_sites": 11, "d_min_um": 12.0, "decay_a_per_mm": 3.6,
//                     "decay_b_per_um": 0.19, "design_path": "" },
//     "model":      { "kind": "nn|full|uniform", "loss": false,
//                     "loss_db_per_cm": 0.8, "birefringence": null | {
//                        "h": {"a_per_mm": .., "b_per_um": ..},
//                        "v": {"a_per_mm": .., "b_per_um": ..} },
//                     "injected_phase_deg": 0.0, "dephasing_gamma": 1.0 },
//     "source":     { "residual_phase_deg": 0.0, "hwp_theta_deg": 0.0,
//                     "coherence_length_um": 90.0,
//                     "delays_um": [0, 50, 100, 150], "delayed_photon": 1 },
//     "measurement":{ "shots": 0, "seed": 0, "dark_rate": 0.0,
//                     "bootstrap_resamples": 100 },
//     "propagation":{ "input_site": 1, "z_max_mm": 0.0, "n_steps": 501,
//                     "pgm": false, "inputs": [1, 6, 10] }
//   }
//
// Angles in config files are degrees; z_max_mm = 0 means "use the design's
// transfer length". `fig2a` (uniform couplings) and `fig2b` (engineered
// couplings) are one-command aliases for the two reference propagation maps.
//
// Determinism: everything is derived from (config, seed). Counts for setting
// batches use seed offsets fixed in this file, so a rerun reproduces every
// artifact byte for byte; only the wall_clock_ms field of the run record
// varies between reruns.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pstlab/dynamics.hpp"
#include "pstlab/errors.hpp"
#include "pstlab/lattice_design.hpp"
#include "pstlab/photonics.hpp"
#include "pstlab/serialization.hpp"
#include "pstlab/tomography.hpp"
#include "pstlab/version.hpp"

namespace pstlab {

struct ScenarioConfig {
    std::string scenario;
    std::string output_dir = "out";

    // design
    int n_sites = 11;
    double d_min_um = 12.0;
    double decay_a_per_mm = 3.6;
    double decay_b_per_um = 0.19;
    std::string design_path;  // when set, load this file instead of designing

    // model
    std::string model_kind = "nn";  // nn | full | uniform
    bool loss = false;
    double loss_db_per_cm = 0.8;
    std::optional<BirefringenceOverride> birefringence;
    double injected_phase_deg = 0.0;  // extra polarization phase on the output
    double dephasing_gamma = 1.0;     // retained coherence, 1 = no dephasing

    // source
    double residual_phase_deg = 0.0;
    double hwp_theta_deg = 0.0;
    double coherence_length_um = 90.0;
    std::vector<double> delays_um = {0.0, 50.0, 100.0, 150.0};
    int delayed_photon = 1;

    // measurement
    long shots = 0;
    std::uint64_t seed = 0;
    double dark_rate = 0.0;
    int bootstrap_resamples = 100;

    // propagation / transfer selection
    int input_site = 1;
    double z_max_mm = 0.0;  // 0 = transfer length of the design
    int n_steps = 501;
    bool emit_pgm = false;
    std::vector<int> inputs;  // empty = {1, centre, N-1}
};

namespace detail {

inline void check_keys(const nlohmann::json& obj,
                       const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object())
        throw ValidationError("config: " + where + " must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ValidationError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("config: key '") + key +
                              "' has the wrong type");
    }
}

inline DecayConstants decay_from_json(const nlohmann::json& obj,
                                      const std::string& where) {
    check_keys(obj, {"a_per_mm", "b_per_um"}, where);
    DecayConstants d;
    d.a_per_mm = get_or(obj, "a_per_mm", 0.0);
    d.b_per_um = get_or(obj, "b_per_um", 0.0);
    if (!(d.a_per_mm > 0.0) || !(d.b_per_um > 0.0))
        throw ValidationError("config: " + where + " needs positive a_per_mm/b_per_um");
    return d;
}

}  // namespace detail

inline ScenarioConfig config_from_json(const nlohmann::json& doc) {
    using detail::check_keys;
    using detail::get_or;
    check_keys(doc,
               {"scenario", "output_dir", "design", "model", "source", "measurement",
                "propagation"},
               "top level");
    ScenarioConfig cfg;
    cfg.scenario = get_or<std::string>(doc, "scenario", "");
    cfg.output_dir = get_or<std::string>(doc, "output_dir", cfg.output_dir);

    if (doc.contains("design")) {
        const auto& d = doc["design"];
        check_keys(d, {"n_sites", "d_min_um", "decay_a_per_mm", "decay_b_per_um",
                       "design_path"},
                   "design");
        cfg.n_sites = get_or(d, "n_sites", cfg.n_sites);
        cfg.d_min_um = get_or(d, "d_min_um", cfg.d_min_um);
        cfg.decay_a_per_mm = get_or(d, "decay_a_per_mm", cfg.decay_a_per_mm);
        cfg.decay_b_per_um = get_or(d, "decay_b_per_um", cfg.decay_b_per_um);
        cfg.design_path = get_or<std::string>(d, "design_path", "");
    }
    if (doc.contains("model")) {
        const auto& m = doc["model"];
        check_keys(m,
                   {"kind", "loss", "loss_db_per_cm", "birefringence",
                    "injected_phase_deg", "dephasing_gamma"},
                   "model");
        cfg.model_kind = get_or<std::string>(m, "kind", cfg.model_kind);
        cfg.loss = get_or(m, "loss", cfg.loss);
        cfg.loss_db_per_cm = get_or(m, "loss_db_per_cm", cfg.loss_db_per_cm);
        cfg.injected_phase_deg = get_or(m, "injected_phase_deg", cfg.injected_phase_deg);
        cfg.dephasing_gamma = get_or(m, "dephasing_gamma", cfg.dephasing_gamma);
        if (m.contains("birefringence") && !m["birefringence"].is_null()) {
            const auto& b = m["birefringence"];
            check_keys(b, {"h", "v"}, "model.birefringence");
            if (!b.contains("h") || !b.contains("v"))
                throw ValidationError("config: birefringence needs both 'h' and 'v'");
            BirefringenceOverride override_;
            override_.h = detail::decay_from_json(b["h"], "model.birefringence.h");
            override_.v = detail::decay_from_json(b["v"], "model.birefringence.v");
            cfg.birefringence = override_;
        }
    }
    if (doc.contains("source")) {
        const auto& s = doc["source"];
        check_keys(s,
                   {"residual_phase_deg", "hwp_theta_deg", "coherence_length_um",
                    "delays_um", "delayed_photon"},
                   "source");
        cfg.residual_phase_deg = get_or(s, "residual_phase_deg", cfg.residual_phase_deg);
        cfg.hwp_theta_deg = get_or(s, "hwp_theta_deg", cfg.hwp_theta_deg);
        cfg.coherence_length_um =
            get_or(s, "coherence_length_um", cfg.coherence_length_um);
        cfg.delays_um = get_or(s, "delays_um", cfg.delays_um);
        cfg.delayed_photon = get_or(s, "delayed_photon", cfg.delayed_photon);
    }
    if (doc.contains("measurement")) {
        const auto& m = doc["measurement"];
        check_keys(m, {"shots", "seed", "dark_rate", "bootstrap_resamples"},
                   "measurement");
        cfg.shots = get_or(m, "shots", cfg.shots);
        cfg.seed = get_or(m, "seed", cfg.seed);
        cfg.dark_rate = get_or(m, "dark_rate", cfg.dark_rate);
        cfg.bootstrap_resamples =
            get_or(m, "bootstrap_resamples", cfg.bootstrap_resamples);
    }
    if (doc.contains("propagation")) {
        const auto& p = doc["propagation"];
        check_keys(p, {"input_site", "z_max_mm", "n_steps", "pgm", "inputs"},
                   "propagation");
        cfg.input_site = get_or(p, "input_site", cfg.input_site);
        cfg.z_max_mm = get_or(p, "z_max_mm", cfg.z_max_mm);
        cfg.n_steps = get_or(p, "n_steps", cfg.n_steps);
        cfg.emit_pgm = get_or(p, "pgm", cfg.emit_pgm);
        cfg.inputs = get_or(p, "inputs", cfg.inputs);
    }
    return cfg;
}

/// Semantic validation shared by every pipeline; throws ValidationError with
/// the offending key named.
inline void validate_config(const ScenarioConfig& cfg) {
    static const std::set<std::string> scenarios = {
        "",    "design", "propagate", "fig2a",    "fig2b",
        "qpt", "bell",   "decohere",  "transfer-table"};
    if (!scenarios.count(cfg.scenario))
        throw ValidationError("config: unknown scenario '" + cfg.scenario + "'");
    if (cfg.model_kind != "nn" && cfg.model_kind != "full" &&
        cfg.model_kind != "uniform")
        throw ValidationError("config: model.kind must be nn, full, or uniform");
    if (cfg.birefringence && cfg.model_kind != "full")
        throw ValidationError(
            "config: birefringence override requires the full-coupling model");
    if (cfg.dephasing_gamma < 0.0 || cfg.dephasing_gamma > 1.0)
        throw ValidationError("config: dephasing_gamma must be in [0, 1]");
    if (!(cfg.coherence_length_um > 0.0))
        throw ValidationError("config: coherence_length_um must be > 0");
    if (cfg.delayed_photon != 1 && cfg.delayed_photon != 2)
        throw ValidationError("config: delayed_photon must be 1 or 2");
    if (cfg.shots < 0) throw ValidationError("config: shots must be >= 0");
    if (cfg.dark_rate < 0.0) throw ValidationError("config: dark_rate must be >= 0");
    if (cfg.bootstrap_resamples < 2)
        throw ValidationError("config: bootstrap_resamples must be >= 2");
    if (cfg.z_max_mm < 0.0) throw ValidationError("config: z_max_mm must be >= 0");
    if (cfg.n_steps < 2) throw ValidationError("config: n_steps must be >= 2");
    if (!(cfg.loss_db_per_cm >= 0.0))
        throw ValidationError("config: loss_db_per_cm must be >= 0");
}

/// Normalized echo of a config (defaults filled in); this is what run
/// records embed and what round-trips through config_from_json.
inline nlohmann::json config_to_json(const ScenarioConfig& cfg) {
    nlohmann::json birefringence;
    if (cfg.birefringence) {
        birefringence = {
            {"h",
             {{"a_per_mm", cfg.birefringence->h.a_per_mm},
              {"b_per_um", cfg.birefringence->h.b_per_um}}},
            {"v",
             {{"a_per_mm", cfg.birefringence->v.a_per_mm},
              {"b_per_um", cfg.birefringence->v.b_per_um}}}};
    }
    return nlohmann::json{
        {"scenario", cfg.scenario},
        {"output_dir", cfg.output_dir},
        {"design",
         {{"n_sites", cfg.n_sites},
          {"d_min_um", cfg.d_min_um},
          {"decay_a_per_mm", cfg.decay_a_per_mm},
          {"decay_b_per_um", cfg.decay_b_per_um},
          {"design_path", cfg.design_path}}},
        {"model",
         {{"kind", cfg.model_kind},
          {"loss", cfg.loss},
          {"loss_db_per_cm", cfg.loss_db_per_cm},
          {"birefringence", birefringence},
          {"injected_phase_deg", cfg.injected_phase_deg},
          {"dephasing_gamma", cfg.dephasing_gamma}}},
        {"source",
         {{"residual_phase_deg", cfg.residual_phase_deg},
          {"hwp_theta_deg", cfg.hwp_theta_deg},
          {"coherence_length_um", cfg.coherence_length_um},
          {"delays_um", cfg.delays_um},
          {"delayed_photon", cfg.delayed_photon}}},
        {"measurement",
         {{"shots", cfg.shots},
          {"seed", cfg.seed},
          {"dark_rate", cfg.dark_rate},
          {"bootstrap_resamples", cfg.bootstrap_resamples}}},
        {"propagation",
         {{"input_site", cfg.input_site},
          {"z_max_mm", cfg.z_max_mm},
          {"n_steps", cfg.n_steps},
          {"pgm", cfg.emit_pgm},
          {"inputs", cfg.inputs}}}};
}

struct RunRecord {
    std::string scenario;
    nlohmann::json config_echo;
    std::vector<std::string> files;  // artifact names relative to output_dir
    nlohmann::json metrics;
    double wall_clock_ms = 0.0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"tool_version", kVersion},
                              {"scenario", scenario},
                              {"config", config_echo},
                              {"files", files},
                              {"metrics", metrics},
                              {"wall_clock_ms", wall_clock_ms},
                              {"schema_version", kSchemaVersion}};
    }
};

namespace detail {

constexpr double kDegree = std::numbers::pi / 180.0;

/// Per-call seed offsets. Keeping them distinct per purpose means adding a
/// measurement to one pipeline never shifts the draws of another.
constexpr std::uint64_t kSeedStrideQpt = 4;
constexpr std::uint64_t kSeedBootstrapFidelity = 1000;
constexpr std::uint64_t kSeedBootstrapSimilarity = 2000;

class Stopwatch {
  public:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline ArrayDesign design_from_config(const ScenarioConfig& cfg) {
    if (!cfg.design_path.empty()) return read_design(cfg.design_path);
    return design_array(cfg.n_sites, cfg.d_min_um, cfg.decay_a_per_mm,
                        cfg.decay_b_per_um);
}

/// The device Hamiltonian the config describes. `uniform` is an equally
/// spaced array at d_min (the comparison baseline), `nn` the engineered
/// nearest-neighbour device, `full` the same geometry with all-pairs
/// couplings.
inline Hamiltonian hamiltonian_from_config(const ScenarioConfig& cfg,
                                           const ArrayDesign& design,
                                           int polarizations) {
    if (cfg.model_kind == "uniform") {
        const double c = coupling_from_distance(design.d_min_um, design.decay_a_per_mm,
                                                design.decay_b_per_um);
        return build_nn_hamiltonian(uniform_coupling_spectrum(design.n_sites, c),
                                    polarizations);
    }
    if (cfg.model_kind == "nn")
        return build_nn_hamiltonian(realized_spectrum(design), polarizations);
    return build_full_hamiltonian(design, polarizations, cfg.birefringence);
}

/// Transfer length of the engineered device: pi/(2 c0) for the realized c0.
inline double transfer_length_mm(const ArrayDesign& design) {
    return pst_time(realized_spectrum(design).c0_per_mm);
}

inline int mirror_site(int n_sites, int site) { return n_sites + 1 - site; }

inline std::vector<int> transfer_inputs(const ScenarioConfig& cfg, int n_sites) {
    std::vector<int> inputs = cfg.inputs;
    if (inputs.empty()) inputs = {1, (n_sites + 1) / 2, n_sites - 1};
    for (int s : inputs)
        if (s < 1 || s > n_sites)
            throw ValidationError("config: transfer input site " + std::to_string(s) +
                                  " out of range 1.." + std::to_string(n_sites));
    return inputs;
}

/// Send a single polarized photon through the array and collect it at one
/// output guide: returns the renormalized polarization qubit and the
/// collection probability.
inline std::pair<Eigen::Matrix2cd, double> transfer_qubit(const Hamiltonian& h,
                                                          const Eigen::MatrixXcd& u,
                                                          int input_site,
                                                          int output_site,
                                                          const Eigen::Vector2cd& ket) {
    Eigen::VectorXcd in = Eigen::VectorXcd::Zero(h.dim());
    in(h.mode_index(input_site, Polarization::H)) = ket(0);
    in(h.mode_index(input_site, Polarization::V)) = ket(1);
    const Eigen::VectorXcd out = u * in;
    Eigen::Vector2cd amp;
    amp << out(h.mode_index(output_site, Polarization::H)),
        out(h.mode_index(output_site, Polarization::V));
    const double probability = amp.squaredNorm();
    if (probability < 1e-12)
        throw EmptyPostselectionError("transfer_qubit: no amplitude at site " +
                                      std::to_string(output_site));
    amp /= std::sqrt(probability);
    return {amp * amp.adjoint(), std::min(probability, 1.0)};
}

/// Device imperfection knobs applied to a collected polarization qubit:
/// a fixed extra phase between H and V, then partial dephasing.
inline Eigen::Matrix2cd apply_device_knobs(const ScenarioConfig& cfg,
                                           Eigen::Matrix2cd rho) {
    if (cfg.injected_phase_deg != 0.0) {
        const Eigen::Matrix2cd p =
            jones_matrix({JonesKind::Phase, cfg.injected_phase_deg * kDegree});
        rho = p * rho * p.adjoint();
    }
    rho(0, 1) *= cfg.dephasing_gamma;
    rho(1, 0) *= cfg.dephasing_gamma;
    return rho;
}

inline std::string format_compact(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%g", value);
    return buffer;
}

}  // namespace detail

// ------------------------------------------------------------------ design

inline RunRecord run_design(const ScenarioConfig& cfg) {
    validate_config(cfg);
    detail::Stopwatch clock;
    const ArrayDesign design = detail::design_from_config(cfg);
    const CouplingSpectrum spectrum = realized_spectrum(design);

    std::filesystem::create_directories(cfg.output_dir);
    write_design(std::filesystem::path(cfg.output_dir) / "design.json", design);

    RunRecord record;
    record.scenario = "design";
    record.config_echo = config_to_json(cfg);
    record.files = {"design.json"};
    record.metrics = {
        {"z_pst_mm", z_pst(design.n_sites, design.c_max_per_mm())},
        {"c0_per_mm", spectrum.c0_per_mm},
        {"c_max_per_mm", design.c_max_per_mm()},
        {"couplings_per_mm", spectrum.couplings_per_mm},
    };
    record.wall_clock_ms = clock.elapsed_ms();
    return record;
}

// --------------------------------------------------------------- propagate

inline RunRecord run_propagate(const ScenarioConfig& cfg) {
    validate_config(cfg);
    detail::Stopwatch clock;
    const ArrayDesign design = detail::design_from_config(cfg);
    const Hamiltonian h = detail::hamiltonian_from_config(cfg, design, 1);
    const double z_max =
        cfg.z_max_mm > 0.0 ? cfg.z_max_mm : detail::transfer_length_mm(design);
    const LossModel loss{cfg.loss ? cfg.loss_db_per_cm : 0.0};

    const PropagationProfile profile =
        propagation_profile(h, z_max, cfg.n_steps, cfg.input_site, loss);
    const int target = detail::mirror_site(design.n_sites, cfg.input_site);
    const FirstPeak peak = first_peak_max(h, cfg.input_site, target);

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path out_dir(cfg.output_dir);
    write_profile_csv(out_dir / "profile.csv", profile);

    RunRecord record;
    record.scenario = "propagate";
    record.config_echo = config_to_json(cfg);
    record.files = {"profile.csv"};
    if (cfg.emit_pgm) {
        write_text_atomic(out_dir / "profile.pgm", profile_to_pgm(profile));
        record.files.push_back("profile.pgm");
    }
    record.metrics = {
        {"input_site", cfg.input_site},
        {"target_site", target},
        {"z_max_mm", z_max},
        {"first_peak_z_mm", peak.z_mm},
        {"first_peak_probability", peak.probability},
        {"final_row_target_probability",
         profile.intensities(profile.intensities.rows() - 1, target - 1)},
    };
    if (cfg.loss)
        record.metrics["loss_intensity_factor"] = std::exp(-loss.gamma_per_mm() * z_max);
    record.wall_clock_ms = clock.elapsed_ms();
    return record;
}

// ---------------------------------------------------------- transfer-table

inline RunRecord run_transfer_table(const ScenarioConfig& cfg) {
    validate_config(cfg);
    detail::Stopwatch clock;
    const ArrayDesign design = detail::design_from_config(cfg);
    const Hamiltonian h = detail::hamiltonian_from_config(cfg, design, 2);
    const double z = detail::transfer_length_mm(design);
    const Eigen::MatrixXcd u = propagator(h, z);
    const std::vector<int> inputs = detail::transfer_inputs(cfg, design.n_sites);

    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json metric_rows = nlohmann::json::array();
    for (int input : inputs) {
        const int target = detail::mirror_site(design.n_sites, input);
        std::vector<double> dist_h(static_cast<std::size_t>(design.n_sites));
        std::vector<double> dist_v(static_cast<std::size_t>(design.n_sites));
        for (int site = 1; site <= design.n_sites; ++site) {
            dist_h[static_cast<std::size_t>(site - 1)] = std::min(
                std::norm(u(h.mode_index(site, Polarization::H),
                            h.mode_index(input, Polarization::H))),
                1.0);
            dist_v[static_cast<std::size_t>(site - 1)] = std::min(
                std::norm(u(h.mode_index(site, Polarization::V),
                            h.mode_index(input, Polarization::V))),
                1.0);
        }
        const double dist_fid = distribution_fidelity(dist_h, dist_v);
        const double designed_prob = dist_h[static_cast<std::size_t>(target - 1)];
        rows.push_back({{"input_site", input},
                        {"output_site", target},
                        {"distribution_h", dist_h},
                        {"distribution_v", dist_v},
                        {"distribution_fidelity", dist_fid},
                        {"designed_site_probability", designed_prob}});
        metric_rows.push_back({{"input_site", input},
                               {"distribution_fidelity", dist_fid},
                               {"designed_site_probability", designed_prob}});
    }

    std::filesystem::create_directories(cfg.output_dir);
    nlohmann::json table{{"z_mm", z},
                         {"model", cfg.model_kind},
                         {"transfers", rows},
                         {"schema_version", kSchemaVersion}};
    write_json_atomic(std::filesystem::path(cfg.output_dir) / "transfer_table.json",
                      table);

    RunRecord record;
    record.scenario = "transfer-table";
    record.config_echo = config_to_json(cfg);
    record.files = {"transfer_table.json"};
    record.metrics = {{"z_mm", z}, {"transfers", metric_rows}};
    record.wall_clock_ms = clock.elapsed_ms();
    return record;
}

// --------------------------------------------------------------------- qpt

inline RunRecord run_qpt(const ScenarioConfig& cfg) {
    validate_config(cfg);
    detail::Stopwatch clock;
    const ArrayDesign design = detail::design_from_config(cfg);
    const Hamiltonian h = detail::hamiltonian_from_config(cfg, design, 2);
    const double z = detail::transfer_length_mm(design);
    const Eigen::MatrixXcd u = propagator(h, z);
    const std::vector<int> inputs = detail::transfer_inputs(cfg, design.n_sites);

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path out_dir(cfg.output_dir);
    const auto single_projectors = projector_set_single();
    const std::vector<Eigen::Matrix2cd> qpt_inputs = qpt_input_states();
    Eigen::Matrix4cd chi_identity = Eigen::Matrix4cd::Zero();
    chi_identity(0, 0) = 1.0;

    RunRecord record;
    record.scenario = "qpt";
    record.config_echo = config_to_json(cfg);

    const char* input_labels = "HVDR";
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const int input = inputs[t];
        const int target = detail::mirror_site(design.n_sites, input);
        std::vector<Eigen::Matrix2cd> outputs;
        double min_collection = 1.0;
        for (int i = 0; i < 4; ++i) {
            const Eigen::Vector2cd ket = polarization_ket(input_labels[i]);
            auto [rho, probability] = detail::transfer_qubit(h, u, input, target, ket);
            min_collection = std::min(min_collection, probability);
            rho = detail::apply_device_knobs(cfg, rho);
            if (cfg.shots > 0) {
                const std::uint64_t seed =
                    cfg.seed + detail::kSeedStrideQpt * t + static_cast<std::uint64_t>(i);
                const auto records = simulate_counts(rho, single_projectors, cfg.shots,
                                                     seed, cfg.dark_rate);
                const std::string name = "records_in" + std::to_string(input) + "_" +
                                         input_labels[i] + ".csv";
                write_records_csv(out_dir / name, records);
                record.files.push_back(name);
                rho = reconstruct_state(records, 2);
            }
            outputs.push_back(rho);
        }
        const Eigen::Matrix4cd chi = reconstruct_process(qpt_inputs, outputs);
        const std::string chi_name = "chi_in" + std::to_string(input) + ".json";
        write_json_atomic(out_dir / chi_name, chi_to_json(chi));
        record.files.push_back(chi_name);

        const double f_raw = process_fidelity(chi_identity, chi);
        const auto [setting, f_comp] = fit_compensation(chi);
        rows.push_back({{"input_site", input},
                        {"output_site", target},
                        {"min_collection_probability", min_collection},
                        {"process_fidelity", f_raw},
                        {"compensation_hwp_deg", setting.hwp_deg},
                        {"compensation_phase_deg", setting.phase_deg},
                        {"compensated_process_fidelity", f_comp}});
    }

    nlohmann::json report{{"z_mm", z},
                          {"model", cfg.model_kind},
                          {"transfers", rows},
                          {"schema_version", kSchemaVersion}};
    write_json_atomic(out_dir / "qpt_report.json", report);
    record.files.push_back("qpt_report.json");
    record.metrics = {{"z_mm", z}, {"transfers", rows}};
    record.wall_clock_ms = clock.elapsed_ms();
    return record;
}

// -------------------------------------------------------------------- bell

inline RunRecord run_bell(const ScenarioConfig& cfg) {
    validate_config(cfg);
    detail::Stopwatch clock;
    const ArrayDesign design = detail::design_from_config(cfg);
    const Hamiltonian h = detail::hamiltonian_from_config(cfg, design, 2);
    const double z = detail::transfer_length_mm(design);
    const Eigen::MatrixXcd u = propagator(h, z);
    const std::vector<int> inputs = detail::transfer_inputs(cfg, design.n_sites);

    const TwoPhotonState source = prepare_bell(cfg.residual_phase_deg * detail::kDegree,
                                               cfg.hwp_theta_deg * detail::kDegree);
    const Eigen::MatrixXcd rho_reference = source.density();

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path out_dir(cfg.output_dir);
    const auto pair_projectors = projector_set_two_qubit();

    RunRecord record;
    record.scenario = "bell";
    record.config_echo = config_to_json(cfg);

    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
        const int input = inputs[idx];
        const int target = detail::mirror_site(design.n_sites, input);
        TwoPhotonState state = inject(source, design.n_sites, input);
        state = evolve_two_photon(state, u);
        const PostselectedState collected = postselect_site(state, target);
        const Eigen::MatrixXcd rho_model = collected.rho;

        nlohmann::json row{{"input_site", input},
                           {"output_site", target},
                           {"success_probability", collected.probability}};
        Eigen::MatrixXcd rho_measured = rho_model;
        if (cfg.shots > 0) {
            const auto records =
                simulate_counts(rho_model, pair_projectors, cfg.shots,
                                cfg.seed + static_cast<std::uint64_t>(idx), cfg.dark_rate);
            const std::string name = "records_in" + std::to_string(input) + ".csv";
            write_records_csv(out_dir / name, records);
            record.files.push_back(name);
            rho_measured = reconstruct_state(records, 4);

            const auto boot_f = bootstrap(
                records, cfg.bootstrap_resamples,
                cfg.seed + detail::kSeedBootstrapFidelity + static_cast<std::uint64_t>(idx),
                [&](const std::vector<MeasurementRecord>& r) {
                    return state_fidelity(reconstruct_state(r, 4), rho_reference);
                });
            const auto boot_s = bootstrap(
                records, cfg.bootstrap_resamples,
                cfg.seed + detail::kSeedBootstrapSimilarity + static_cast<std::uint64_t>(idx),
                [&](const std::vector<MeasurementRecord>& r) {
                    return similarity(reconstruct_state(r, 4), rho_model);
                });
            row["fidelity_stddev"] = boot_f.stddev;
            row["similarity_stddev"] = boot_s.stddev;
        }
        row["fidelity"] = state_fidelity(rho_measured, rho_reference);
        row["similarity"] = similarity(rho_measured, rho_model);

        const std::string rho_name = "rho_in" + std::to_string(input) + ".json";
        write_json_atomic(out_dir / rho_name, density_to_json(rho_measured));
        record.files.push_back(rho_name);
        rows.push_back(row);
    }

    nlohmann::json report{{"z_mm", z},
                          {"model", cfg.model_kind},
                          {"transfers", rows},
                          {"schema_version", kSchemaVersion}};
    write_json_atomic(out_dir / "bell_report.json", report);
    record.files.push_back("bell_report.json");
    record.metrics = {{"z_mm", z}, {"transfers", rows}};
    record.wall_clock_ms = clock.elapsed_ms();
    return record;
}

// ---------------------------------------------------------------- decohere

inline RunRecord run_decohere(const ScenarioConfig& cfg) {
    validate_config(cfg);
    detail::Stopwatch clock;
    const ArrayDesign design = detail::design_from_config(cfg);
    const Hamiltonian h = detail::hamiltonian_from_config(cfg, design, 2);
    const double z = detail::transfer_length_mm(design);
    const Eigen::MatrixXcd u = propagator(h, z);

    const int input = cfg.input_site;
    if (input < 1 || input > design.n_sites)
        throw ValidationError("config: input_site out of range");
    const int target = detail::mirror_site(design.n_sites, input);

    const TwoPhotonState source = prepare_bell(cfg.residual_phase_deg * detail::kDegree,
                                               cfg.hwp_theta_deg * detail::kDegree);

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path out_dir(cfg.output_dir);
    const auto pair_projectors = projector_set_two_qubit();

    RunRecord record;
    record.scenario = "decohere";
    record.config_echo = config_to_json(cfg);

    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < cfg.delays_um.size(); ++k) {
        const double tau = cfg.delays_um[k];
        const Wavepacket packet{cfg.coherence_length_um, tau};

        TwoPhotonState state = inject(source, design.n_sites, input);
        state = evolve_two_photon(state, u);
        state = apply_delay_decoherence(state, packet, cfg.delayed_photon);
        const PostselectedState collected = postselect_site(state, target);
        const Eigen::MatrixXcd rho_model = collected.rho;

        // The reference arm sees the same delay but no array.
        const Eigen::MatrixXcd rho_reference =
            apply_delay_decoherence(source, packet, cfg.delayed_photon).density();

        Eigen::MatrixXcd rho_measured = rho_model;
        nlohmann::json row{{"delay_um", tau},
                           {"gamma", wavepacket_overlap(packet)},
                           {"success_probability", collected.probability}};
        if (cfg.shots > 0) {
            const auto records =
                simulate_counts(rho_model, pair_projectors, cfg.shots,
                                cfg.seed + static_cast<std::uint64_t>(k), cfg.dark_rate);
            const std::string name =
                "records_delay_" + detail::format_compact(tau) + "um.csv";
            write_records_csv(out_dir / name, records);
            record.files.push_back(name);
            rho_measured = reconstruct_state(records, 4);
        }
        row["purity"] = purity(rho_measured);
        row["fidelity"] = state_fidelity(rho_measured, rho_reference);
        row["similarity"] = similarity(rho_measured, rho_model);

        const std::string rho_name =
            "rho_delay_" + detail::format_compact(tau) + "um.json";
        write_json_atomic(out_dir / rho_name, density_to_json(rho_measured));
        record.files.push_back(rho_name);
        rows.push_back(row);
    }

    nlohmann::json report{{"z_mm", z},
                          {"model", cfg.model_kind},
                          {"input_site", input},
                          {"output_site", target},
                          {"sweep", rows},
                          {"schema_version", kSchemaVersion}};
    write_json_atomic(out_dir / "decohere_report.json", report);
    record.files.push_back("decohere_report.json");
    record.metrics = {{"z_mm", z}, {"sweep", rows}};
    record.wall_clock_ms = clock.elapsed_ms();
    return record;
}

// ---------------------------------------------------------------- dispatch

/// Rewrite a scenario alias into its concrete pipeline configuration.
inline ScenarioConfig resolve_scenario_alias(ScenarioConfig cfg) {
    if (cfg.scenario == "fig2a") {
        cfg.scenario = "propagate";
        cfg.model_kind = "uniform";
        cfg.input_site = 1;
    } else if (cfg.scenario == "fig2b") {
        cfg.scenario = "propagate";
        cfg.model_kind = "nn";
        cfg.input_site = 1;
    }
    return cfg;
}

inline RunRecord run_scenario(const ScenarioConfig& raw) {
    const ScenarioConfig cfg = resolve_scenario_alias(raw);
    if (cfg.scenario == "design") return run_design(cfg);
    if (cfg.scenario == "propagate") return run_propagate(cfg);
    if (cfg.scenario == "transfer-table") return run_transfer_table(cfg);
    if (cfg.scenario == "qpt") return run_qpt(cfg);
    if (cfg.scenario == "bell") return run_bell(cfg);
    if (cfg.scenario == "decohere") return run_decohere(cfg);
    throw ValidationError("config: no scenario named '" + raw.scenario + "'");
}

/// Write the run record next to the artifacts it describes. The stored
/// manifest includes the record file itself, so after a run into a fresh
/// directory the manifest lists exactly the directory's contents.
inline void write_run_record(RunRecord record, const std::string& output_dir) {
    record.files.push_back("run_record.json");
    write_json_atomic(std::filesystem::path(output_dir) / "run_record.json",
                      record.to_json());
}

}  // namespace pstlab
