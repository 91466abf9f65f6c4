#include "eatem/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "eatem/error.hpp"

namespace eatem {

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string format_int(std::uint64_t x) {
    return std::to_string(x);
}

std::string format_int(std::int64_t x) {
    return std::to_string(x);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t x) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[x & 0xF];
        x >>= 4;
    }
    return s;
}

void CsvWriter::field(std::string_view f, bool first) {
    if (!first) {
        m_out.push_back(',');
    }
    if (f.find_first_of(",\"\r\n") == std::string_view::npos) {
        m_out.append(f);
        return;
    }
    m_out.push_back('"');
    for (char c : f) {
        if (c == '"') {
            m_out.push_back('"');
        }
        m_out.push_back(c);
    }
    m_out.push_back('"');
}

void CsvWriter::row(std::initializer_list<std::string_view> fields) {
    bool first = true;
    for (auto f : fields) {
        field(f, first);
        first = false;
    }
    m_out.append("\r\n");
}

void CsvWriter::row(std::span<const std::string> fields) {
    bool first = true;
    for (const auto& f : fields) {
        field(f, first);
        first = false;
    }
    m_out.append("\r\n");
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cur;
    bool quoted = false;
    bool field_started = false;
    auto end_field = [&] {
        row.push_back(std::move(cur));
        cur.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) {
            rows.push_back(std::move(row));
        }
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\r') {
            continue;
        } else if (c == '\n') {
            end_row();
        } else {
            cur.push_back(c);
            field_started = true;
        }
    }
    if (quoted) {
        throw Error(ErrorKind::io, "unterminated quoted CSV field");
    }
    if (!cur.empty() || !row.empty()) {
        end_row();
    }
    return rows;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string encode_pgm16(const Raster& raster, PgmScale* scale_out) {
    if (raster.values.size() != raster.width * raster.height || raster.values.empty()) {
        throw Error(ErrorKind::shape, "raster dimensions do not match its data");
    }
    PgmScale scale{raster.values[0], raster.values[0]};
    for (double v : raster.values) {
        if (std::isfinite(v)) {
            scale.min = std::isfinite(scale.min) ? std::min(scale.min, v) : v;
            scale.max = std::isfinite(scale.max) ? std::max(scale.max, v) : v;
        }
    }
    if (!std::isfinite(scale.min)) {
        scale = {0.0, 0.0};
    }
    const double span = scale.max - scale.min;
    std::string out = "P5\n" + std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n65535\n";
    out.reserve(out.size() + 2 * raster.values.size());
    for (double v : raster.values) {
        double t = (span > 0.0 && std::isfinite(v)) ? (v - scale.min) / span : 0.0;
        const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        out.push_back(static_cast<char>(s >> 8));
        out.push_back(static_cast<char>(s & 0xFF));
    }
    if (scale_out != nullptr) {
        *scale_out = scale;
    }
    return out;
}

namespace {

std::size_t read_header_token(std::string_view bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
        } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    std::size_t value = 0;
    auto res = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
    if (res.ec != std::errc()) {
        throw Error(ErrorKind::io, "malformed PGM header");
    }
    pos = static_cast<std::size_t>(res.ptr - bytes.data());
    return value;
}

}  // namespace

Raster decode_pgm16(std::string_view bytes, const PgmScale& scale) {
    if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") {
        throw Error(ErrorKind::io, "not a binary PGM (P5) file");
    }
    std::size_t pos = 2;
    Raster r;
    r.width = read_header_token(bytes, pos);
    r.height = read_header_token(bytes, pos);
    const std::size_t maxval = read_header_token(bytes, pos);
    if (maxval == 0 || maxval > 65535) {
        throw Error(ErrorKind::io, "PGM maxval out of range");
    }
    ++pos;  // single whitespace before the raster
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const std::size_t count = r.width * r.height;
    if (bytes.size() < pos + count * bpp) {
        throw Error(ErrorKind::io, "truncated PGM raster");
    }
    r.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t s = static_cast<unsigned char>(bytes[pos + i * bpp]);
        if (bpp == 2) {
            s = (s << 8) | static_cast<unsigned char>(bytes[pos + i * bpp + 1]);
        }
        r.values[i] = scale.min + (scale.max - scale.min) * static_cast<double>(s) / static_cast<double>(maxval);
    }
    return r;
}

std::string encode_scale_sidecar(const PgmScale& scale) {
    return "min = " + format_double(scale.min) + "\nmax = " + format_double(scale.max) + "\n";
}

PgmScale decode_scale_sidecar(std::string_view text) {
    PgmScale scale;
    bool have_min = false;
    bool have_max = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
        try {
            if (key == "min") {
                scale.min = std::stod(value);
                have_min = true;
            } else if (key == "max") {
                scale.max = std::stod(value);
                have_max = true;
            }
        } catch (const std::exception&) {
            throw Error(ErrorKind::io, "malformed scale sidecar value for '" + key + "'");
        }
    }
    if (!have_min || !have_max) {
        throw Error(ErrorKind::io, "scale sidecar needs both min and max");
    }
    return scale;
}

}  // namespace eatem
