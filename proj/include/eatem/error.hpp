#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eatem {

enum class ErrorKind {
    invalid_argument,
    invalid_state,
    boundary_event,
    invalid_geometry,
    empty_field,
    plane_mismatch,
    shape,
    divergent_dose,
    ambiguity,
    budget,
    config,
    io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it onto an exit code.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

}  // namespace eatem
