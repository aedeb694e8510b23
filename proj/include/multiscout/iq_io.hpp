#pragma once

#include <filesystem>
#include <span>

#include <json.hpp>

#include "multiscout/common.hpp"

namespace multiscout {

// Interleaved I/Q as little-endian IEEE-754 float32: I0 Q0 I1 Q1 ...
void write_iq_file(const std::filesystem::path& path, std::span<const Complex> samples);
ComplexVector read_iq_file(const std::filesystem::path& path);

// Writes `<path>.json` next to an I/Q file. `metadata` is stored under
// "config"; sample count and format fields are added.
void write_iq_sidecar(const std::filesystem::path& iq_path, std::size_t num_samples,
                      double sample_rate_hz, const nlohmann::json& metadata);

}  // namespace multiscout
