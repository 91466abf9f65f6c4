#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eatem {

enum class ValueKind {
    real,
    integer,
    boolean,
    text,
    choice,
    real_list,
    int_list,
    length,
    optional_length,
    energy,
    time,
    frequency,
    permeability,
};

struct KeySpec {
    std::string name;
    ValueKind kind;
    std::string default_value;
    std::vector<std::string> choices;
};

/// Flat `key = value` configuration with dotted keys. Files may also group
/// keys under `[section]` headers. Dimensioned values accept SI-prefixed
/// unit suffixes (`2mm`, `300keV`, `10ns`, `1MHz`); a bare number is SI.
class Config {
public:
    static const std::vector<KeySpec>& schema();
    static Config defaults();

    /// Throws config errors naming the line and key.
    void load_text(std::string_view text, std::string_view source = "config");
    /// Applies one `key=value` override.
    void set(std::string_view assignment, std::string_view source = "--set");
    void set_value(const std::string& key, const std::string& value, std::string_view where);

    const std::string& raw(const std::string& key) const;
    double real(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    /// Dimensioned value in SI units.
    double quantity(const std::string& key) const;
    std::optional<double> optional_quantity(const std::string& key) const;
    std::vector<double> real_list(const std::string& key) const;
    std::vector<int> int_list(const std::string& key) const;

    /// Sorted `key = value` lines of the effective configuration.
    std::string canonical() const;
    std::uint64_t hash() const;

private:
    std::map<std::string, std::string> m_values;
};

/// Parses "<number>[prefix]<unit>" for the given dimension; exposed for tests.
double parse_quantity(std::string_view text, ValueKind kind);

}  // namespace eatem
