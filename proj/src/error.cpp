#include "eatem/error.hpp"

namespace eatem {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::invalid_state: return "invalid-state";
        case ErrorKind::boundary_event: return "boundary-event";
        case ErrorKind::invalid_geometry: return "invalid-geometry";
        case ErrorKind::empty_field: return "empty-field";
        case ErrorKind::plane_mismatch: return "plane-mismatch";
        case ErrorKind::shape: return "shape";
        case ErrorKind::divergent_dose: return "divergent-dose";
        case ErrorKind::ambiguity: return "ambiguity";
        case ErrorKind::budget: return "budget";
        case ErrorKind::config: return "config";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

}  // namespace eatem
