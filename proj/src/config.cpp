#include "eatem/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "eatem/error.hpp"
#include "eatem/io.hpp"

namespace eatem {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

double parse_number(std::string_view text, std::size_t& consumed) {
    const std::string s(text);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    consumed = static_cast<std::size_t>(end - s.c_str());
    if (consumed == 0 || !std::isfinite(v)) {
        throw Error(ErrorKind::config, "'" + s + "' is not a number");
    }
    return v;
}

const char* base_unit(ValueKind kind) {
    switch (kind) {
        case ValueKind::length:
        case ValueKind::optional_length: return "m";
        case ValueKind::energy: return "eV";
        case ValueKind::time: return "s";
        case ValueKind::frequency: return "Hz";
        case ValueKind::permeability: return "H/m";
        default: return "";
    }
}

// Decimal exponent of an SI prefix; nullopt when unknown.
std::optional<int> prefix_exponent(std::string_view prefix) {
    if (prefix.empty()) return 0;
    if (prefix == "p") return -12;
    if (prefix == "n") return -9;
    if (prefix == "u" || prefix == "\xC2\xB5") return -6;
    if (prefix == "m") return -3;
    if (prefix == "c") return -2;
    if (prefix == "k") return 3;
    if (prefix == "M") return 6;
    if (prefix == "G") return 9;
    return std::nullopt;
}

long long parse_int(std::string_view text) {
    const std::string s = trim(text);
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(ErrorKind::config, "'" + s + "' is not an integer");
    }
    return v;
}

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> items;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!trim(cur).empty() || !items.empty()) {
        items.push_back(trim(cur));
    }
    return items;
}

void validate_value(const KeySpec& spec, const std::string& value) {
    switch (spec.kind) {
        case ValueKind::real: {
            std::size_t used = 0;
            parse_number(value, used);
            if (used != value.size()) {
                throw Error(ErrorKind::config, "'" + value + "' is not a plain number");
            }
            break;
        }
        case ValueKind::integer: parse_int(value); break;
        case ValueKind::boolean:
            if (value != "true" && value != "false") {
                throw Error(ErrorKind::config, "expected true or false, got '" + value + "'");
            }
            break;
        case ValueKind::text: break;
        case ValueKind::choice:
            if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
                std::string allowed;
                for (const auto& c : spec.choices) {
                    allowed += (allowed.empty() ? "" : "|") + c;
                }
                throw Error(ErrorKind::config, "'" + value + "' is not one of " + allowed);
            }
            break;
        case ValueKind::real_list:
            for (const auto& item : split_list(value)) {
                std::size_t used = 0;
                parse_number(item, used);
                if (used != item.size()) {
                    throw Error(ErrorKind::config, "'" + item + "' is not a number");
                }
            }
            break;
        case ValueKind::int_list:
            for (const auto& item : split_list(value)) {
                parse_int(item);
            }
            break;
        case ValueKind::optional_length:
            if (value == "none") {
                break;
            }
            parse_quantity(value, spec.kind);
            break;
        default: parse_quantity(value, spec.kind); break;
    }
}

const KeySpec& find_key(const std::string& key) {
    const auto& s = Config::schema();
    auto it = std::find_if(s.begin(), s.end(), [&](const KeySpec& k) { return k.name == key; });
    if (it == s.end()) {
        throw Error(ErrorKind::config, "unknown key '" + key + "'");
    }
    return *it;
}

}  // namespace

double parse_quantity(std::string_view text, ValueKind kind) {
    const std::string s = trim(text);
    std::size_t used = 0;
    const double v = parse_number(s, used);
    const std::string unit = trim(std::string_view(s).substr(used));
    if (unit.empty()) {
        return v;
    }
    const std::string base = base_unit(kind);
    if (base.empty() || unit.size() < base.size() || unit.compare(unit.size() - base.size(), base.size(), base) != 0) {
        throw Error(ErrorKind::config, "unit '" + unit + "' not valid here (expected " + base + ")");
    }
    const auto exponent = prefix_exponent(std::string_view(unit).substr(0, unit.size() - base.size()));
    if (!exponent) {
        throw Error(ErrorKind::config, "unknown unit prefix in '" + unit + "'");
    }
    const double power = std::pow(10.0, std::abs(*exponent));
    return *exponent < 0 ? v / power : v * power;
}

const std::vector<KeySpec>& Config::schema() {
    using V = ValueKind;
    static const std::vector<KeySpec> keys = {
        {"run.seed", V::integer, "1", {}},
        {"beam.energy", V::energy, "300keV", {}},
        {"beam.waist", V::length, "10um", {}},
        {"beam.coherence_width", V::length, "10um", {}},
        {"squid.d", V::length, "1mm", {}},
        {"squid.mu", V::permeability, "1.25663706212e-6", {}},
        {"squid.log_factor", V::real, "1", {}},
        {"squid.l", V::length, "1mm", {}},
        {"squid.lateral_size", V::length, "10um", {}},
        {"squid.turns", V::integer, "1", {}},
        {"timing.group_duration", V::time, "10ns", {}},
        {"timing.mqc_frequency", V::frequency, "1MHz", {}},
        {"timing.required_margin", V::real, "10", {}},
        {"optics.grid", V::integer, "128", {}},
        {"optics.diffraction_pitch", V::length, "100nm", {}},
        {"optics.image_pitch", V::length, "0.05nm", {}},
        {"optics.illumination_width", V::length, "0", {}},
        {"optics.balance_split", V::boolean, "true", {}},
        {"optics.aperture_radius", V::optional_length, "2nm", {}},
        {"optics.objective_aperture", V::optional_length, "none", {}},
        {"mask.pattern", V::choice, "annular_segments", {"annular_segments", "custom_bitmap"}},
        {"mask.bitmap", V::text, "", {}},
        {"mask.central_radius", V::length, "1.1um", {}},
        {"mask.inner_radius", V::length, "1.9um", {}},
        {"mask.outer_radius", V::length, "2.25um", {}},
        {"mask.gap_angles_deg", V::real_list, "90,270", {}},
        {"mask.gap_width_deg", V::real, "10", {}},
        {"ring.inner", V::length, "1.3um", {}},
        {"ring.outer", V::length, "1.7um", {}},
        {"ring.flux_fraction", V::real, "1", {}},
        {"ring.turns", V::integer, "1", {}},
        {"detector.tolerance", V::real, "1e-6", {}},
        {"detector.dominance", V::real, "10", {}},
        {"detector.boundary_warning", V::real, "0.05", {}},
        {"protocol.k", V::integer, "5", {}},
        {"protocol.delta_phi", V::real, "0.1", {}},
        {"protocol.sigma0", V::real, "0", {}},
        {"protocol.repetitions", V::integer, "10000", {}},
        {"protocol.detector", V::choice, "optics", {"optics", "uniform"}},
        {"protocol.uniform_pixels", V::integer, "16", {}},
        {"protocol.basis", V::choice, "quadrature", {"quadrature", "symmetric_antisymmetric"}},
        {"protocol.group_mode", V::choice, "fixed", {"fixed", "poisson"}},
        {"protocol.boundary_policy", V::choice, "discard", {"discard", "abort"}},
        {"protocol.coherence_electrons", V::real, "0", {}},
        {"protocol.record_trials", V::integer, "100", {}},
        {"estimation.k", V::integer, "8", {}},
        {"estimation.detector", V::choice, "optics", {"optics", "uniform"}},
        {"estimation.per_pair_budget", V::integer, "8000", {}},
        {"estimation.total_budget", V::integer, "0", {}},
        {"image.specimen", V::choice, "synthetic", {"synthetic", "file"}},
        {"image.phase_file", V::text, "", {}},
        {"image.pairs_file", V::text, "", {}},
        {"image.cells", V::integer, "4", {}},
        {"image.cell_size", V::integer, "2", {}},
        {"image.level", V::real, "0.05", {}},
        {"image.repetitions", V::integer, "100", {}},
        {"scaling.delta_phi", V::real, "0.05", {}},
        {"scaling.k_list", V::int_list, "1,2,4,8", {}},
        {"scaling.target_std", V::real, "0.02", {}},
        {"scaling.repetitions", V::integer, "400", {}},
        {"scaling.detector", V::choice, "optics", {"optics", "uniform"}},
    };
    return keys;
}

Config Config::defaults() {
    Config c;
    for (const auto& k : schema()) {
        c.m_values[k.name] = k.default_value;
    }
    return c;
}

void Config::set_value(const std::string& key, const std::string& value, std::string_view where) {
    try {
        const KeySpec& spec = find_key(key);
        validate_value(spec, value);
    } catch (const Error& e) {
        std::string msg = e.what();
        const std::string prefix = "config: ";
        if (msg.rfind(prefix, 0) == 0) {
            msg = msg.substr(prefix.size());
        }
        if (msg.find("unknown key") == std::string::npos) {
            msg = "bad value for '" + key + "': " + msg;
        }
        throw Error(ErrorKind::config, std::string(where) + ": " + msg);
    }
    m_values[key] = value;
}

void Config::set(std::string_view assignment, std::string_view source) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw Error(ErrorKind::config, std::string(source) + ": expected key=value, got '" + std::string(assignment) + "'");
    }
    set_value(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), source);
}

void Config::load_text(std::string_view text, std::string_view source) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string t = trim(line);
        const std::string where = std::string(source) + ":" + std::to_string(number);
        if (t.empty()) {
            continue;
        }
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw Error(ErrorKind::config, where + ": malformed section header '" + t + "'");
            }
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::config, where + ": expected key = value, got '" + t + "'");
        }
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) {
            throw Error(ErrorKind::config, where + ": missing key before '='");
        }
        if (!section.empty()) {
            key = section + "." + key;
        }
        set_value(key, trim(std::string_view(t).substr(eq + 1)), where);
    }
}

const std::string& Config::raw(const std::string& key) const {
    auto it = m_values.find(key);
    if (it == m_values.end()) {
        throw Error(ErrorKind::config, "unknown key '" + key + "'");
    }
    return it->second;
}

double Config::real(const std::string& key) const {
    std::size_t used = 0;
    return parse_number(raw(key), used);
}

std::int64_t Config::integer(const std::string& key) const {
    return parse_int(raw(key));
}

bool Config::flag(const std::string& key) const {
    return raw(key) == "true";
}

double Config::quantity(const std::string& key) const {
    return parse_quantity(raw(key), find_key(key).kind);
}

std::optional<double> Config::optional_quantity(const std::string& key) const {
    if (raw(key) == "none") {
        return std::nullopt;
    }
    return quantity(key);
}

std::vector<double> Config::real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(raw(key))) {
        std::size_t used = 0;
        out.push_back(parse_number(item, used));
    }
    return out;
}

std::vector<int> Config::int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& item : split_list(raw(key))) {
        out.push_back(static_cast<int>(parse_int(item)));
    }
    return out;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : m_values) {
        out += k + " = " + v + "\n";
    }
    return out;
}

std::uint64_t Config::hash() const {
    return fnv1a64(canonical());
}

}  // namespace eatem
