// Command-line surface over the pipeline library. Every verb reads an
// optional --config JSON, applies flag overrides, runs one pipeline, writes
// its artifacts plus a run_record.json into the output directory, and prints
// a short summary.
//
// Exit codes: 0 success, 2 usage or validation problem, 3 numerical failure
// (no peak found, empty post-selection), 1 anything unexpected.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pstlab/errors.hpp"
#include "pstlab/scenarios.hpp"
#include "pstlab/version.hpp"

namespace {

pstlab::ScenarioConfig load_base_config(const std::string& config_path) {
    pstlab::ScenarioConfig cfg;
    const char* env_out = std::getenv("PSTLAB_OUT");
    if (env_out && *env_out) cfg.output_dir = env_out;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in)
            throw pstlab::ValidationError("cannot open config file " + config_path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw pstlab::ValidationError("config file " + config_path + ": " +
                                          e.what());
        }
        const std::string default_out = cfg.output_dir;
        cfg = pstlab::config_from_json(doc);
        if (!doc.contains("output_dir")) cfg.output_dir = default_out;
    }
    return cfg;
}

void print_metric_table(const nlohmann::json& rows, const std::string& key_field) {
    for (const auto& row : rows) {
        std::cout << "  ";
        bool first = true;
        for (const auto& [key, value] : row.items()) {
            if (!first) std::cout << "  ";
            first = false;
            std::cout << key << "=" << value.dump();
        }
        std::cout << "\n";
        (void)key_field;
    }
}

void print_summary(const pstlab::RunRecord& record) {
    std::cout << std::setprecision(10);
    const auto& m = record.metrics;
    if (record.scenario == "design") {
        std::cout << "z_PST = " << m["z_pst_mm"].get<double>() << " mm\n"
                  << "C_max = " << m["c_max_per_mm"].get<double>() << " mm^-1, c0 = "
                  << m["c0_per_mm"].get<double>() << " mm^-1\n"
                  << "couplings (mm^-1):";
        for (const auto& c : m["couplings_per_mm"]) std::cout << " " << c.get<double>();
        std::cout << "\n";
    } else if (record.scenario == "propagate") {
        std::cout << "input site " << m["input_site"] << " -> target site "
                  << m["target_site"] << "\n"
                  << "first peak: P = " << m["first_peak_probability"].get<double>()
                  << " at z = " << m["first_peak_z_mm"].get<double>() << " mm\n"
                  << "final row target probability = "
                  << m["final_row_target_probability"].get<double>() << "\n";
    } else if (m.contains("transfers")) {
        print_metric_table(m["transfers"], "input_site");
    } else if (m.contains("sweep")) {
        print_metric_table(m["sweep"], "delay_um");
    }
    std::cout << "artifacts in " << record.config_echo["output_dir"].get<std::string>()
              << ":";
    for (const auto& f : record.files) std::cout << " " << f;
    std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Waveguide-lattice state-transfer designer and simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(pstlab::kVersion));

    // Global flags, usable before or after the verb.
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    long shots = 0;
    std::string model;
    app.add_option("--config", config_path, "JSON config file");
    auto* opt_out = app.add_option("--out", out_dir, "output directory");
    auto* opt_seed = app.add_option("--seed", seed, "RNG seed");
    auto* opt_shots = app.add_option("--shots", shots, "counts per setting (0 = exact)");
    auto* opt_model =
        app.add_option("--model", model, "coupling model")->check(CLI::IsMember({"nn", "full"}));

    // Design geometry flags shared by every verb that can build a design.
    int sites = 0;
    double dmin_um = 0.0, a_per_mm = 0.0, b_per_um = 0.0;
    std::string design_path;
    auto add_design_flags = [&](CLI::App* cmd) {
        cmd->add_option("--sites", sites, "number of waveguides");
        cmd->add_option("--dmin-um", dmin_um, "minimum gap in um");
        cmd->add_option("--a-per-mm", a_per_mm, "coupling prefactor in mm^-1");
        cmd->add_option("--b-per-um", b_per_um, "coupling decay constant in um^-1");
        cmd->add_option("--design", design_path, "existing design JSON to load");
    };

    auto* cmd_design = app.add_subcommand("design", "engineer the coupling geometry");
    add_design_flags(cmd_design);

    std::string alias;
    int input_site = 0;
    double z_max_mm = 0.0;
    int steps = 0;
    bool pgm = false, loss = false;
    auto* cmd_propagate =
        app.add_subcommand("propagate", "site intensities along the array");
    add_design_flags(cmd_propagate);
    cmd_propagate->add_option("--scenario", alias, "alias: fig2a (uniform) or fig2b")
        ->check(CLI::IsMember({"fig2a", "fig2b"}));
    cmd_propagate->add_option("--input", input_site, "input waveguide (1-based)");
    cmd_propagate->add_option("--z-max-mm", z_max_mm, "propagation length");
    cmd_propagate->add_option("--steps", steps, "z-grid points");
    cmd_propagate->add_flag("--pgm", pgm, "also write a PGM heatmap");
    cmd_propagate->add_flag("--loss", loss, "apply uniform propagation loss");

    auto* cmd_table =
        app.add_subcommand("transfer-table", "per-polarization transfer summary");
    add_design_flags(cmd_table);

    double injected_phase_deg = 0.0, dephasing_gamma = 1.0;
    auto* cmd_qpt = app.add_subcommand("qpt", "process tomography of each transfer");
    add_design_flags(cmd_qpt);
    auto* opt_phase = cmd_qpt->add_option("--injected-phase-deg", injected_phase_deg,
                                          "extra H/V phase at the output");
    auto* opt_gamma = cmd_qpt->add_option("--dephasing-gamma", dephasing_gamma,
                                          "retained coherence in [0, 1]");

    double residual_phase_deg = 0.0, hwp_theta_deg = 0.0;
    auto* cmd_bell = app.add_subcommand("bell", "entangled-state transfer");
    add_design_flags(cmd_bell);
    auto* opt_eps = cmd_bell->add_option("--residual-phase-deg", residual_phase_deg,
                                         "source residual phase");
    auto* opt_theta =
        cmd_bell->add_option("--hwp-deg", hwp_theta_deg, "source half-wave plate angle");

    double coherence_length_um = 0.0;
    std::vector<double> delays_um;
    auto* cmd_decohere =
        app.add_subcommand("decohere", "delay sweep of the transferred Bell state");
    add_design_flags(cmd_decohere);
    auto* opt_input_d =
        cmd_decohere->add_option("--input", input_site, "input waveguide (1-based)");
    auto* opt_lc = cmd_decohere->add_option("--coherence-length-um", coherence_length_um,
                                            "wavepacket coherence length");
    auto* opt_delays =
        cmd_decohere->add_option("--delays-um", delays_um, "delay sweep values");

    auto* cmd_scenario =
        app.add_subcommand("scenario", "run the scenario named in --config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        pstlab::ScenarioConfig cfg = load_base_config(config_path);
        if (opt_out->count() > 0) cfg.output_dir = out_dir;
        if (opt_seed->count() > 0) cfg.seed = seed;
        if (opt_shots->count() > 0) cfg.shots = shots;
        if (opt_model->count() > 0) cfg.model_kind = model;
        if (sites > 0) cfg.n_sites = sites;
        if (dmin_um > 0.0) cfg.d_min_um = dmin_um;
        if (a_per_mm > 0.0) cfg.decay_a_per_mm = a_per_mm;
        if (b_per_um > 0.0) cfg.decay_b_per_um = b_per_um;
        if (!design_path.empty()) cfg.design_path = design_path;

        if (cmd_design->parsed()) {
            cfg.scenario = "design";
        } else if (cmd_propagate->parsed()) {
            cfg.scenario = alias.empty() ? "propagate" : alias;
            if (input_site > 0) cfg.input_site = input_site;
            if (cmd_propagate->count("--z-max-mm") > 0) {
                if (!(z_max_mm > 0.0))
                    throw pstlab::ValidationError("propagate: z-max-mm must be > 0");
                cfg.z_max_mm = z_max_mm;
            }
            if (steps > 0) cfg.n_steps = steps;
            if (pgm) cfg.emit_pgm = true;
            if (loss) cfg.loss = true;
            // alias resolution may override the model; explicit --model wins
            if (opt_model->count() > 0) {
                cfg = pstlab::resolve_scenario_alias(cfg);
                cfg.model_kind = model;
            }
        } else if (cmd_table->parsed()) {
            cfg.scenario = "transfer-table";
        } else if (cmd_qpt->parsed()) {
            cfg.scenario = "qpt";
            if (opt_phase->count() > 0) cfg.injected_phase_deg = injected_phase_deg;
            if (opt_gamma->count() > 0) cfg.dephasing_gamma = dephasing_gamma;
        } else if (cmd_bell->parsed()) {
            cfg.scenario = "bell";
            if (opt_eps->count() > 0) cfg.residual_phase_deg = residual_phase_deg;
            if (opt_theta->count() > 0) cfg.hwp_theta_deg = hwp_theta_deg;
        } else if (cmd_decohere->parsed()) {
            cfg.scenario = "decohere";
            if (opt_input_d->count() > 0) cfg.input_site = input_site;
            if (opt_lc->count() > 0) cfg.coherence_length_um = coherence_length_um;
            if (opt_delays->count() > 0) cfg.delays_um = delays_um;
        } else if (cmd_scenario->parsed()) {
            if (cfg.scenario.empty())
                throw pstlab::ValidationError(
                    "scenario: --config with a 'scenario' key is required");
        }

        const pstlab::RunRecord record = pstlab::run_scenario(cfg);
        pstlab::write_run_record(record, cfg.output_dir);
        print_summary(record);
        return 0;
    } catch (const pstlab::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const pstlab::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
