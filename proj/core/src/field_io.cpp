#include "hsav/field_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <string>

namespace hsav {

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) throw std::runtime_error("snapshot: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Field& field) {
    const auto& g = field.grid();
    if (g.nx() > std::numeric_limits<std::uint32_t>::max() ||
        g.ny() > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("snapshot: grid too large for the header");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("snapshot: cannot open " + path.string() + " for writing");
    out.write(kSnapshotMagic.data(), kSnapshotMagic.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.nx()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.ny()));
    put_le<double>(out, g.lx());
    put_le<double>(out, g.ly());
    for (double v : field.values()) put_le<double>(out, v);
    if (!out) throw std::runtime_error("snapshot: write failed for " + path.string());
}

Field read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("snapshot: cannot open " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kSnapshotMagic) {
        throw std::runtime_error("snapshot: bad magic in " + path.string());
    }
    const auto nx = get_le<std::uint32_t>(in);
    const auto ny = get_le<std::uint32_t>(in);
    const auto lx = get_le<double>(in);
    const auto ly = get_le<double>(in);
    Grid2D grid(nx, ny, lx, ly);
    Field field(grid);
    for (double& v : field.values()) v = get_le<double>(in);
    if (in.peek() != std::char_traits<char>::eof()) {
        throw std::runtime_error("snapshot: trailing bytes in " + path.string());
    }
    return field;
}

void write_field_csv(const std::filesystem::path& path, const Field& field) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("csv: cannot open " + path.string() + " for writing");
    const auto& g = field.grid();
    out << "x,y,phi\n" << std::setprecision(17);
    for (std::size_t j = 0; j < g.nx(); ++j) {
        for (std::size_t k = 0; k < g.ny(); ++k) {
            out << g.x(j) << ',' << g.y(k) << ',' << field(j, k) << '\n';
        }
    }
    if (!out) throw std::runtime_error("csv: write failed for " + path.string());
}

}  // namespace hsav
