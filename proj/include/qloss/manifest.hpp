#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qloss/pipeline.hpp"
#include "qloss/s21.hpp"

namespace qloss {

struct ManifestEntry {
    std::string file;          // path relative to the manifest
    double temperature_K = 0.0;
    double power_dbm = 0.0;    // at chip
};

/// One resonator's measurement campaign: the power x temperature grid of
/// spectra plus the material/geometry context needed to analyze it.
struct DatasetManifest {
    int schema_version = 1;
    std::string resonator_id;
    std::string material;        // key into material_config
    std::string material_config; // JSON registry text (geometry reference)
    double f_r_hint = 0.0;       // Hz, nominal resonance
    std::vector<ManifestEntry> entries;

    void validate() const; // unique (T, P) pairs, fields present
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// Spectrum CSV round trip; header `frequency_hz,s21_real,s21_imag`, LF
/// endings. Bath temperature and power live in the manifest entry.
Spectrum read_spectrum_csv(const std::filesystem::path& path);
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& sp);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// FNV-1a 64-bit content hash, hex encoded; stable across platforms.
std::string content_hash(const std::string& text);

inline constexpr const char* kToolVersion = "0.1.0";

// JSON adapters for the result types (bundles are plain nlohmann documents
// assembled from these).
void to_json(nlohmann::json& j, const S21Params& p);
void from_json(const nlohmann::json& j, S21Params& p);
void to_json(nlohmann::json& j, const ExtractionRecord& r);
void from_json(const nlohmann::json& j, ExtractionRecord& r);
void to_json(nlohmann::json& j, const TlsOnlyFit& f);
void from_json(const nlohmann::json& j, TlsOnlyFit& f);
void to_json(nlohmann::json& j, const ModelFit& f);
void from_json(const nlohmann::json& j, ModelFit& f);

} // namespace qloss
