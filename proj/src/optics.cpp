#include "eatem/optics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "eatem/error.hpp"
#include "eatem/phase.hpp"

namespace eatem {

namespace {

bool is_power_of_two(std::size_t n) {
    return n >= 2 && (n & (n - 1)) == 0;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t count)
        : ptr(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count))) {
        if (ptr == nullptr) {
            throw std::bad_alloc();
        }
    }
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;

    cplx* as_complex() { return reinterpret_cast<cplx*>(ptr); }

    fftw_complex* ptr;
};

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

void require_kind(const WaveField& field, PlaneKind kind, const char* op) {
    if (field.kind() != kind) {
        throw Error(ErrorKind::plane_mismatch,
            std::string(op) + " expects a " + (kind == PlaneKind::image ? "image" : "diffraction") + "-plane field");
    }
}

}  // namespace

WaveField::WaveField(std::size_t n, double pitch, PlaneKind kind)
    : m_n(n), m_pitch(pitch), m_kind(kind), m_data(n * n) {
    if (!is_power_of_two(n)) {
        throw Error(ErrorKind::invalid_geometry, "grid size must be a power of two");
    }
    if (!(pitch > 0.0) || !std::isfinite(pitch)) {
        throw Error(ErrorKind::invalid_geometry, "pixel pitch must be positive");
    }
}

double WaveField::radius(std::size_t x, std::size_t y) const {
    return std::hypot(coord(x), coord(y));
}

double WaveField::power() const {
    double p = 0.0;
    for (const auto& v : m_data) {
        p += std::norm(v);
    }
    return p;
}

Raster WaveField::intensity() const {
    Raster r{m_n, m_n, std::vector<double>(m_data.size())};
    for (std::size_t i = 0; i < m_data.size(); ++i) {
        r.values[i] = std::norm(m_data[i]);
    }
    return r;
}

void RingSpec::validate() const {
    if (!(ring_inner > 0.0) || !(ring_outer > ring_inner)) {
        throw Error(ErrorKind::invalid_geometry, "ring requires 0 < ring_inner < ring_outer");
    }
    if (!(flux_fraction >= 0.0) || !std::isfinite(flux_fraction)) {
        throw Error(ErrorKind::invalid_argument, "flux fraction must be non-negative");
    }
    if (turns < 1) {
        throw Error(ErrorKind::invalid_argument, "ring needs at least one turn");
    }
}

double RingSpec::ab_phase() const {
    return pi * flux_fraction * static_cast<double>(turns);
}

WaveField build_mask(const MaskSpec& spec, std::size_t n, double pitch) {
    WaveField field(n, pitch, PlaneKind::diffraction);
    if (spec.pattern == MaskPattern::custom_bitmap) {
        if (spec.bitmap.size() != n * n) {
            throw Error(ErrorKind::invalid_geometry, "custom mask bitmap does not match the grid");
        }
        for (std::size_t i = 0; i < spec.bitmap.size(); ++i) {
            if (spec.bitmap[i] > 1) {
                throw Error(ErrorKind::invalid_argument, "stencil transmission must be 0 or 1");
            }
            field.data()[i] = cplx(spec.bitmap[i], 0.0);
        }
        return field;
    }

    const double limit = (static_cast<double>(n / 2) - 1.0) * pitch;
    if (spec.central_radius < 0.0 || spec.inner_radius < 0.0 || spec.outer_radius < spec.inner_radius) {
        throw Error(ErrorKind::invalid_geometry, "mask radii must satisfy 0 <= inner <= outer");
    }
    if (spec.outer_radius > limit || spec.central_radius > limit) {
        throw Error(ErrorKind::invalid_geometry, "mask exceeds the simulation grid");
    }
    if (spec.gap_width < 0.0) {
        throw Error(ErrorKind::invalid_geometry, "gap width must be non-negative");
    }
    const bool has_annulus = spec.outer_radius > spec.inner_radius;
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const double r = field.radius(x, y);
            bool open = r <= spec.central_radius && spec.central_radius > 0.0;
            if (!open && has_annulus && r >= spec.inner_radius && r <= spec.outer_radius) {
                open = true;
                const double theta = std::atan2(field.coord(y), field.coord(x));
                for (double g : spec.gap_angles) {
                    if (phase_distance(theta, g) <= spec.gap_width / 2) {
                        open = false;
                        break;
                    }
                }
            }
            if (open) {
                field.at(x, y) = 1.0;
            }
        }
    }
    return field;
}

WaveField propagate(const WaveField& field, std::optional<double> out_pitch) {
    const double power = field.power();
    if (!(power > 0.0)) {
        throw Error(ErrorKind::empty_field, "cannot propagate a field with zero power");
    }
    const std::size_t n = field.n();
    const std::size_t half = n / 2;
    FftwBuffer in(n * n);
    FftwBuffer out(n * n);
    std::unique_ptr<fftw_plan_s, PlanDeleter> plan(
        fftw_plan_dft_2d(static_cast<int>(n), static_cast<int>(n), in.ptr, out.ptr, FFTW_FORWARD, FFTW_ESTIMATE));

    auto src = field.data();
    cplx* buf = in.as_complex();
    // Swap quadrants so the optical axis sits at index 0 for the transform.
    for (std::size_t y = 0; y < n; ++y) {
        const std::size_t ys = (y + half) % n;
        for (std::size_t x = 0; x < n; ++x) {
            buf[ys * n + (x + half) % n] = src[y * n + x];
        }
    }
    fftw_execute(plan.get());

    const double pitch = out_pitch.value_or(1.0 / (static_cast<double>(n) * field.pitch()));
    WaveField result(n, pitch, field.kind() == PlaneKind::diffraction ? PlaneKind::image : PlaneKind::diffraction);
    auto dst = result.data();
    const cplx* res = out.as_complex();
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t y = 0; y < n; ++y) {
        const std::size_t ys = (y + half) % n;
        for (std::size_t x = 0; x < n; ++x) {
            dst[ys * n + (x + half) % n] = res[y * n + x] * scale;
        }
    }
    return result;
}

WaveField reflect(const WaveField& field) {
    const std::size_t n = field.n();
    WaveField result(n, field.pitch(), field.kind());
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            result.at((n - x) % n, (n - y) % n) = field.at(x, y);
        }
    }
    return result;
}

WaveField apply_aperture(const WaveField& field, double radius) {
    require_kind(field, PlaneKind::image, "apply_aperture");
    if (radius < 0.0) {
        throw Error(ErrorKind::invalid_geometry, "aperture radius must be non-negative");
    }
    WaveField result = field;
    if (radius >= static_cast<double>(field.n() / 2) * field.pitch()) {
        return result;
    }
    for (std::size_t y = 0; y < field.n(); ++y) {
        for (std::size_t x = 0; x < field.n(); ++x) {
            if (field.radius(x, y) > radius) {
                result.at(x, y) = 0.0;
            }
        }
    }
    return result;
}

WaveField illuminate(const WaveField& field, double width) {
    WaveField result = field;
    if (!(width > 0.0)) {
        return result;
    }
    const double inv = 1.0 / (2.0 * width * width);
    for (std::size_t y = 0; y < field.n(); ++y) {
        for (std::size_t x = 0; x < field.n(); ++x) {
            const double r = field.radius(x, y);
            result.at(x, y) *= std::exp(-r * r * inv);
        }
    }
    return result;
}

WaveField apply_ab_phase(const WaveField& field, const RingSpec& ring, int qubit_branch) {
    require_kind(field, PlaneKind::diffraction, "apply_ab_phase");
    ring.validate();
    if (qubit_branch != 0 && qubit_branch != 1) {
        throw Error(ErrorKind::invalid_argument, "qubit branch must be 0 or 1");
    }
    const double phase = ring.ab_phase();
    const bool shift = qubit_branch == 1 && phase != 0.0;
    const cplx factor = std::polar(1.0, phase);
    WaveField result = field;
    for (std::size_t y = 0; y < field.n(); ++y) {
        for (std::size_t x = 0; x < field.n(); ++x) {
            const double r = field.radius(x, y);
            if (r >= ring.ring_inner && r <= ring.ring_outer) {
                result.at(x, y) = 0.0;
            } else if (shift && r < ring.ring_inner) {
                result.at(x, y) *= factor;
            }
        }
    }
    return result;
}

WaveField weak_phase_specimen(std::span<const double> phase, const WaveField& field) {
    require_kind(field, PlaneKind::image, "weak_phase_specimen");
    if (phase.size() != field.data().size()) {
        throw Error(ErrorKind::shape, "specimen phase map does not match the field grid");
    }
    WaveField result = field;
    auto d = result.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (phase[i] != 0.0) {
            d[i] *= std::polar(1.0, phase[i]);
        }
    }
    return result;
}

SplitPower split_power(const WaveField& qubit_plane, const RingSpec& ring) {
    SplitPower s;
    for (std::size_t y = 0; y < qubit_plane.n(); ++y) {
        for (std::size_t x = 0; x < qubit_plane.n(); ++x) {
            const double r = qubit_plane.radius(x, y);
            const double p = std::norm(qubit_plane.at(x, y));
            if (r < ring.ring_inner) {
                s.inside += p;
            } else if (r <= ring.ring_outer) {
                s.blocked += p;
            } else {
                s.outside += p;
            }
        }
    }
    return s;
}

cplx normalized_overlap(const WaveField& f0, const WaveField& f1) {
    if (f0.n() != f1.n()) {
        throw Error(ErrorKind::shape, "fields differ in grid size");
    }
    cplx acc = 0.0;
    auto a = f0.data();
    auto b = f1.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += std::conj(a[i]) * b[i];
    }
    const double norm = std::sqrt(f0.power() * f1.power());
    if (!(norm > 0.0)) {
        throw Error(ErrorKind::empty_field, "overlap of an empty field");
    }
    return acc / norm;
}

double relative_total_variation(const Raster& m) {
    double tv = 0.0;
    double total = 0.0;
    for (std::size_t y = 0; y < m.height; ++y) {
        for (std::size_t x = 0; x < m.width; ++x) {
            const double v = m.at(x, y);
            total += v;
            if (x + 1 < m.width) {
                tv += std::abs(m.at(x + 1, y) - v);
            }
            if (y + 1 < m.height) {
                tv += std::abs(m.at(x, y + 1) - v);
            }
        }
    }
    return total > 0.0 ? tv / total : 0.0;
}

double normalized_cross_correlation(const Raster& m0, const Raster& m1) {
    if (m0.values.size() != m1.values.size() || m0.values.empty()) {
        throw Error(ErrorKind::shape, "rasters differ in size");
    }
    const double count = static_cast<double>(m0.values.size());
    double mean0 = 0.0;
    double mean1 = 0.0;
    for (std::size_t i = 0; i < m0.values.size(); ++i) {
        mean0 += m0.values[i];
        mean1 += m1.values[i];
    }
    mean0 /= count;
    mean1 /= count;
    double cov = 0.0;
    double var0 = 0.0;
    double var1 = 0.0;
    for (std::size_t i = 0; i < m0.values.size(); ++i) {
        const double d0 = m0.values[i] - mean0;
        const double d1 = m1.values[i] - mean1;
        cov += d0 * d1;
        var0 += d0 * d0;
        var1 += d1 * d1;
    }
    if (var0 == 0.0 && var1 == 0.0) {
        return 1.0;
    }
    return cov / std::sqrt(var0 * var1);
}

std::size_t peak_index(const Raster& m) {
    return static_cast<std::size_t>(std::max_element(m.values.begin(), m.values.end()) - m.values.begin());
}

OpticsConfig OpticsConfig::defaults() {
    OpticsConfig c;
    c.grid = 128;
    c.diffraction_pitch = 1e-7;
    c.image_pitch = 5e-11;
    c.mask.pattern = MaskPattern::annular_segments;
    c.mask.central_radius = 1.1e-6;
    c.mask.inner_radius = 1.9e-6;
    c.mask.outer_radius = 2.25e-6;
    c.mask.gap_angles = {pi / 2, -pi / 2};
    c.mask.gap_width = 10.0 * pi / 180.0;
    c.aperture_radius = 2e-9;
    c.ring.ring_inner = 1.3e-6;
    c.ring.ring_outer = 1.7e-6;
    c.ring.flux_fraction = 1.0;
    c.ring.turns = 1;
    return c;
}

QubitPlane qubit_plane_field(const OpticsConfig& config, double illumination_width) {
    WaveField mask = build_mask(config.mask, config.grid, config.diffraction_pitch);
    WaveField image = propagate(illuminate(mask, illumination_width), config.image_pitch);
    if (config.aperture_radius) {
        image = apply_aperture(image, *config.aperture_radius);
    }
    return {propagate(image, config.diffraction_pitch), illumination_width};
}

QubitPlane qubit_plane_field(const OpticsConfig& config) {
    if (!config.balance_split) {
        return qubit_plane_field(config, config.illumination_width);
    }
    auto imbalance = [&](const QubitPlane& qp) {
        const auto s = split_power(qp.field, config.ring);
        return (s.outside - s.inside) / (s.outside + s.inside);
    };
    // Narrowing the envelope moves power from the outer annulus to the
    // central disc; bisect the width (on a log scale) for equal split.
    QubitPlane hi = qubit_plane_field(config, config.illumination_width);
    double f_hi = imbalance(hi);
    if (f_hi == 0.0) {
        return hi;
    }
    if (f_hi < 0.0) {
        throw Error(ErrorKind::invalid_geometry,
            "cannot balance the ring split: the inside already carries more power than the outside");
    }
    double w_hi = config.illumination_width > 0.0 ? config.illumination_width
                                                  : 1e3 * static_cast<double>(config.grid) * config.diffraction_pitch;
    double w_lo = config.diffraction_pitch;
    QubitPlane lo = qubit_plane_field(config, w_lo);
    double f_lo = imbalance(lo);
    if (!(f_lo < 0.0)) {
        throw Error(ErrorKind::invalid_geometry, "cannot balance the ring split: no central opening");
    }
    hi = qubit_plane_field(config, w_hi);
    f_hi = imbalance(hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double w_mid = std::sqrt(w_lo * w_hi);
        if (!(w_mid > w_lo && w_mid < w_hi)) {
            break;
        }
        QubitPlane mid = qubit_plane_field(config, w_mid);
        const double f_mid = imbalance(mid);
        if (f_mid == 0.0) {
            return mid;
        }
        if (f_mid < 0.0) {
            w_lo = w_mid;
            lo = std::move(mid);
            f_lo = f_mid;
        } else {
            w_hi = w_mid;
            hi = std::move(mid);
            f_hi = f_mid;
        }
    }
    return std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
}

BranchFields qubit_branches(const OpticsConfig& config) {
    const QubitPlane qp = qubit_plane_field(config);
    return {apply_ab_phase(qp.field, config.ring, 0), apply_ab_phase(qp.field, config.ring, 1)};
}

namespace {

Raster unit_power(Raster r) {
    double total = 0.0;
    for (double v : r.values) {
        total += v;
    }
    if (!(total > 0.0)) {
        throw Error(ErrorKind::empty_field, "specimen-plane intensity is empty");
    }
    for (double& v : r.values) {
        v /= total;
    }
    return r;
}

// Specimen plane to detector plane, including the optional objective aperture.
WaveField to_detector(const WaveField& specimen_plane, const OpticsConfig& config) {
    WaveField f = specimen_plane;
    if (config.objective_aperture) {
        f = apply_aperture(f, *config.objective_aperture);
    }
    return propagate(f, config.diffraction_pitch);
}

std::vector<cplx> restrict_disc(const WaveField& f, const RingSpec& ring, bool inside) {
    std::vector<cplx> out(f.data().begin(), f.data().end());
    for (std::size_t y = 0; y < f.n(); ++y) {
        for (std::size_t x = 0; x < f.n(); ++x) {
            if ((f.radius(x, y) < ring.ring_inner) != inside) {
                out[y * f.n() + x] = 0.0;
            }
        }
    }
    return out;
}

}  // namespace

SpecimenMaps specimen_intensity(const OpticsConfig& config) {
    const BranchFields branches = qubit_branches(config);
    return {unit_power(propagate(branches.field0, config.image_pitch).intensity()),
        unit_power(propagate(branches.field1, config.image_pitch).intensity())};
}

DetectorBuild build_detector_from_field(const WaveField& incident, const OpticsConfig& config) {
    require_kind(incident, PlaneKind::diffraction, "build_detector");
    const RingSpec& ring = config.ring;
    const WaveField blocked = apply_ab_phase(incident, ring, 0);
    const std::size_t n = blocked.n();

    WaveField inner(n, blocked.pitch(), PlaneKind::diffraction);
    WaveField outer(n, blocked.pitch(), PlaneKind::diffraction);
    {
        auto in_part = restrict_disc(blocked, ring, true);
        auto out_part = restrict_disc(blocked, ring, false);
        std::copy(in_part.begin(), in_part.end(), inner.data().begin());
        std::copy(out_part.begin(), out_part.end(), outer.data().begin());
    }
    // The detector re-images the qubit plane; without an objective aperture
    // the map is an exact point reflection.
    auto image_detector = [&](const WaveField& f) {
        if (f.power() == 0.0) {
            return WaveField(n, f.pitch(), PlaneKind::diffraction);
        }
        if (!config.objective_aperture) {
            return reflect(f);
        }
        return to_detector(propagate(f, config.image_pitch), config);
    };
    const WaveField u = image_detector(inner);
    const WaveField v = image_detector(outer);
    if (u.power() == 0.0 && v.power() == 0.0) {
        throw Error(ErrorKind::empty_field, "no power reaches the detector");
    }

    const double theta = ring.ab_phase();
    const cplx factor = theta != 0.0 ? std::polar(1.0, theta) : cplx(1.0, 0.0);
    const double inside_beta = wrap_phase(theta);
    std::vector<cplx> a(n * n);
    std::vector<cplx> b(n * n);
    std::vector<Region> regions(n * n);
    double peak = 0.0;
    for (std::size_t j = 0; j < n * n; ++j) {
        peak = std::max(peak, std::norm(u.data()[j]) + std::norm(v.data()[j]));
    }
    for (std::size_t j = 0; j < n * n; ++j) {
        const cplx uj = u.data()[j];
        const cplx vj = v.data()[j];
        a[j] = uj + vj;
        b[j] = factor * uj + vj;
        const double pu = std::norm(uj);
        const double pv = std::norm(vj);
        Region r = Region::boundary;
        if (pu == 0.0 && pv == 0.0) {
            r = Region::outside_shadow;
        } else if (pu >= config.dominance * pv) {
            r = Region::inside_shadow;
        } else if (pv >= config.dominance * pu) {
            r = Region::outside_shadow;
        }
        if (r != Region::boundary && (pu > 0.0 || pv > 0.0)) {
            const double beta = wrap_phase(std::arg(b[j]) - std::arg(a[j]));
            const double expected = r == Region::inside_shadow ? inside_beta : 0.0;
            if (phase_distance(beta, expected) > 1e-6) {
                r = Region::boundary;
            }
        }
        regions[j] = r;
    }
    DetectorBuild build{
        DetectorModel::from_amplitudes(std::move(a), std::move(b), config.detector_tolerance, std::move(regions))};
    build.boundary_power = build.model.boundary_power_fraction();
    build.boundary_pixels = build.model.boundary_count();
    build.quality_warning = build.boundary_power > config.boundary_warning;
    return build;
}

DetectorBuild build_detector(const OpticsConfig& config) {
    return build_detector_from_field(qubit_plane_field(config).field, config);
}

DetectorModel specimen_detector(const OpticsConfig& config, std::span<const double> phase) {
    const BranchFields branches = qubit_branches(config);
    auto through = [&](const WaveField& f) {
        const WaveField at_specimen = weak_phase_specimen(phase, propagate(f, config.image_pitch));
        const WaveField det = to_detector(at_specimen, config);
        return std::vector<cplx>(det.data().begin(), det.data().end());
    };
    return DetectorModel::from_amplitudes(through(branches.field0), through(branches.field1), 1.0);
}

double effective_phase(const SpecimenMaps& maps, std::span<const double> phase) {
    if (phase.size() != maps.map0.values.size()) {
        throw Error(ErrorKind::shape, "phase map does not match the specimen maps");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < phase.size(); ++i) {
        acc += phase[i] * (maps.map1.values[i] - maps.map0.values[i]);
    }
    return acc;
}

}  // namespace eatem
