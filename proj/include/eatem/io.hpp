#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eatem {

/// Shortest round-trip decimal representation (locale independent).
std::string format_double(double x);
std::string format_int(std::uint64_t x);
std::string format_int(std::int64_t x);
inline std::string format_int(int x) { return format_int(static_cast<std::int64_t>(x)); }

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t x);

/// RFC-4180 writer: CRLF record separators, fields quoted when they contain
/// a comma, quote, CR or LF.
class CsvWriter {
public:
    void row(std::initializer_list<std::string_view> fields);
    void row(std::span<const std::string> fields);

    const std::string& str() const { return m_out; }

private:
    void field(std::string_view f, bool first);

    std::string m_out;
};

/// Parses RFC-4180 text (CRLF or LF) into records.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Real-valued raster, row-major.
struct Raster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

struct PgmScale {
    double min = 0.0;
    double max = 0.0;
};

/// Binary PGM (P5), maxval 65535, big-endian samples. Values are mapped
/// linearly from [min, max] onto [0, 65535]; the mapping is returned so it
/// can be written to a sidecar.
std::string encode_pgm16(const Raster& raster, PgmScale* scale_out = nullptr);
Raster decode_pgm16(std::string_view bytes, const PgmScale& scale);

std::string encode_scale_sidecar(const PgmScale& scale);
PgmScale decode_scale_sidecar(std::string_view text);

}  // namespace eatem
