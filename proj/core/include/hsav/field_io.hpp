#pragma once

#include "hsav/spectral.hpp"

#include <array>
#include <filesystem>

namespace hsav {

/// Snapshot layout: 32-byte header then Nx*Ny little-endian float64, x-major.
///
///   bytes  0..7   magic "HSAVFLD1"
///   bytes  8..11  Nx (uint32 LE)
///   bytes 12..15  Ny (uint32 LE)
///   bytes 16..23  Lx (float64 LE)
///   bytes 24..31  Ly (float64 LE)
inline constexpr std::array<char, 8> kSnapshotMagic = {'H', 'S', 'A', 'V', 'F', 'L', 'D', '1'};
inline constexpr std::size_t kSnapshotHeaderBytes = 32;

void write_snapshot(const std::filesystem::path& path, const Field& field);
/// Reads a snapshot; the grid origin is not stored and comes back as (0, 0).
Field read_snapshot(const std::filesystem::path& path);

/// Node-listed CSV (x, y, phi) for inspecting small grids.
void write_field_csv(const std::filesystem::path& path, const Field& field);

}  // namespace hsav
