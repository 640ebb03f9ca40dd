#pragma once

// File formats for every artifact the tools emit:
//
//   - array designs      JSON, fixed key set, schema_version stamped
//   - propagation maps   CSV `z_mm,site_1,...,site_N`, 17 significant digits
//   - density matrices   JSON, key `rho`, flat row-major list of [re, im]
//   - process matrices   JSON, key `chi`, same layout, basis I,X,Y,Z
//   - measurement data   CSV `setting,counts`
//   - heatmap preview    plain-text PGM (P2), optional, for quick viewing
//
// All writes go through an atomic temp-file + rename so a crashed run never
// leaves a half-written artifact, and identical inputs produce byte-identical
// files (doubles are printed shortest-round-trip by the JSON library and
// %.17g in CSV).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pstlab/dynamics.hpp"
#include "pstlab/errors.hpp"
#include "pstlab/lattice_design.hpp"
#include "pstlab/tomography.hpp"

namespace pstlab {

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string format_full(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

}  // namespace detail

/// Write a file atomically: contents land under a temporary name in the same
/// directory and are renamed into place, so readers never see partial data.
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NumericalError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw NumericalError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_json_atomic(const std::filesystem::path& path,
                              const nlohmann::json& doc) {
    write_text_atomic(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------- designs

inline nlohmann::json design_to_json(const ArrayDesign& design) {
    return nlohmann::json{{"n_sites", design.n_sites},
                          {"d_min_um", design.d_min_um},
                          {"decay_a_per_mm", design.decay_a_per_mm},
                          {"decay_b_per_um", design.decay_b_per_um},
                          {"spacings_um", design.spacings_um},
                          {"positions_um", design.positions_um},
                          {"schema_version", kSchemaVersion}};
}

inline ArrayDesign design_from_json(const nlohmann::json& doc) {
    static const std::vector<std::string> keys = {
        "n_sites",     "d_min_um",     "decay_a_per_mm", "decay_b_per_um",
        "spacings_um", "positions_um", "schema_version"};
    if (!doc.is_object()) throw ValidationError("design document is not a JSON object");
    for (const auto& key : keys)
        if (!doc.contains(key))
            throw ValidationError("design document missing key '" + key + "'");
    for (const auto& [key, value] : doc.items())
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ValidationError("design document has unknown key '" + key + "'");
    if (doc["schema_version"].get<int>() != kSchemaVersion)
        throw ValidationError("unsupported design schema_version");

    ArrayDesign design;
    design.n_sites = doc["n_sites"].get<int>();
    design.d_min_um = doc["d_min_um"].get<double>();
    design.decay_a_per_mm = doc["decay_a_per_mm"].get<double>();
    design.decay_b_per_um = doc["decay_b_per_um"].get<double>();
    design.spacings_um = doc["spacings_um"].get<std::vector<double>>();
    design.positions_um = doc["positions_um"].get<std::vector<double>>();
    if (static_cast<int>(design.positions_um.size()) != design.n_sites ||
        static_cast<int>(design.spacings_um.size()) != design.n_sites - 1)
        throw ValidationError("design arrays do not match n_sites");
    return design;
}

inline void write_design(const std::filesystem::path& path, const ArrayDesign& design) {
    write_json_atomic(path, design_to_json(design));
}

inline ArrayDesign read_design(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open design file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("design file " + path.string() + ": " + e.what());
    }
    return design_from_json(doc);
}

// --------------------------------------------------------------- profiles

inline std::string profile_to_csv(const PropagationProfile& profile) {
    const Eigen::Index n_sites = profile.intensities.cols();
    std::string out = "z_mm";
    for (Eigen::Index s = 0; s < n_sites; ++s)
        out += ",site_" + std::to_string(s + 1);
    out += "\n";
    for (std::size_t i = 0; i < profile.z_grid_mm.size(); ++i) {
        out += detail::format_full(profile.z_grid_mm[i]);
        for (Eigen::Index s = 0; s < n_sites; ++s)
            out += "," + detail::format_full(profile.intensities(static_cast<Eigen::Index>(i), s));
        out += "\n";
    }
    return out;
}

inline void write_profile_csv(const std::filesystem::path& path,
                              const PropagationProfile& profile) {
    write_text_atomic(path, profile_to_csv(profile));
}

/// Plain-text grayscale heatmap (PGM "P2"): rows are sites, columns z steps,
/// white = highest intensity in the profile. Meant for eyeballing only; the
/// CSV is the quantitative artifact.
inline std::string profile_to_pgm(const PropagationProfile& profile) {
    const Eigen::Index n_z = profile.intensities.rows();
    const Eigen::Index n_sites = profile.intensities.cols();
    const double peak = profile.intensities.maxCoeff();
    std::string out = "P2\n" + std::to_string(n_z) + " " + std::to_string(n_sites) +
                      "\n255\n";
    for (Eigen::Index s = 0; s < n_sites; ++s) {
        for (Eigen::Index i = 0; i < n_z; ++i) {
            const int level =
                peak > 0.0
                    ? static_cast<int>(255.0 * profile.intensities(i, s) / peak + 0.5)
                    : 0;
            out += std::to_string(level);
            out += i + 1 < n_z ? ' ' : '\n';
        }
    }
    return out;
}

// --------------------------------------------------- density / chi matrices

namespace detail {

inline nlohmann::json complex_matrix_to_json(const Eigen::MatrixXcd& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            entries.push_back({m(r, c).real(), m(r, c).imag()});
    return entries;
}

inline Eigen::MatrixXcd complex_matrix_from_json(const nlohmann::json& entries,
                                                 int dim) {
    if (!entries.is_array() || static_cast<int>(entries.size()) != dim * dim)
        throw ValidationError("matrix entry list must have dim^2 [re, im] pairs");
    Eigen::MatrixXcd m(dim, dim);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
            const auto& pair = entries[static_cast<std::size_t>(r * dim + c)];
            if (!pair.is_array() || pair.size() != 2)
                throw ValidationError("matrix entries must be [re, im] pairs");
            m(r, c) = {pair[0].get<double>(), pair[1].get<double>()};
        }
    return m;
}

inline std::vector<std::string> density_basis(int dim) {
    if (dim == 2) return {"H", "V"};
    if (dim == 4) return {"HH", "HV", "VH", "VV"};
    throw ValidationError("density matrices are 2x2 or 4x4");
}

}  // namespace detail

inline nlohmann::json density_to_json(const Eigen::MatrixXcd& rho) {
    const int dim = static_cast<int>(rho.rows());
    return nlohmann::json{{"basis", detail::density_basis(dim)},
                          {"rho", detail::complex_matrix_to_json(rho)},
                          {"schema_version", kSchemaVersion}};
}

inline Eigen::MatrixXcd density_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("rho") || !doc.contains("basis"))
        throw ValidationError("density document needs 'basis' and 'rho'");
    const int dim = static_cast<int>(doc["basis"].size());
    detail::density_basis(dim);  // validates the dimension
    return detail::complex_matrix_from_json(doc["rho"], dim);
}

inline nlohmann::json chi_to_json(const Eigen::Matrix4cd& chi) {
    return nlohmann::json{{"basis", {"I", "X", "Y", "Z"}},
                          {"chi", detail::complex_matrix_to_json(chi)},
                          {"schema_version", kSchemaVersion}};
}

inline Eigen::Matrix4cd chi_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("chi"))
        throw ValidationError("process document needs 'chi'");
    return detail::complex_matrix_from_json(doc["chi"], 4);
}

// ----------------------------------------------------------------- records

inline std::string records_to_csv(const std::vector<MeasurementRecord>& records) {
    std::string out = "setting,counts\n";
    for (const auto& r : records)
        out += r.setting + "," + detail::format_full(r.counts) + "\n";
    return out;
}

inline void write_records_csv(const std::filesystem::path& path,
                              const std::vector<MeasurementRecord>& records) {
    write_text_atomic(path, records_to_csv(records));
}

}  // namespace pstlab
