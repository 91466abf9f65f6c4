#pragma once

// Scalar Fourier optics of the beam path: stencil mask (diffraction plane),
// aperture (image plane), SQUID ring with Aharonov-Bohm phase (diffraction
// plane), specimen (image plane) and the area detector, which re-images the
// qubit plane. Successive planes are related by a unitary, centered 2D DFT.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "eatem/detector.hpp"
#include "eatem/io.hpp"

namespace eatem {

enum class PlaneKind { diffraction, image };

/// N x N complex field, row-major, with the optical axis at pixel (N/2, N/2).
class WaveField {
public:
    WaveField(std::size_t n, double pitch, PlaneKind kind);

    std::size_t n() const { return m_n; }
    double pitch() const { return m_pitch; }
    PlaneKind kind() const { return m_kind; }

    std::span<cplx> data() { return m_data; }
    std::span<const cplx> data() const { return m_data; }
    cplx& at(std::size_t x, std::size_t y) { return m_data[y * m_n + x]; }
    const cplx& at(std::size_t x, std::size_t y) const { return m_data[y * m_n + x]; }

    /// Physical coordinate of pixel index i along either axis.
    double coord(std::size_t i) const {
        return (static_cast<double>(i) - static_cast<double>(m_n / 2)) * m_pitch;
    }
    double radius(std::size_t x, std::size_t y) const;

    double power() const;
    Raster intensity() const;

    void set_pitch(double pitch) { m_pitch = pitch; }
    void set_kind(PlaneKind kind) { m_kind = kind; }

private:
    std::size_t m_n;
    double m_pitch;
    PlaneKind m_kind;
    std::vector<cplx> m_data;
};

enum class MaskPattern { annular_segments, custom_bitmap };

/// Binary stencil. annular_segments opens an optional central disc plus the
/// annulus [inner_radius, outer_radius] minus strut gaps of angular width
/// gap_width centred on each of gap_angles.
struct MaskSpec {
    MaskPattern pattern = MaskPattern::annular_segments;
    double central_radius = 0.0;
    double inner_radius = 0.0;
    double outer_radius = 0.0;
    std::vector<double> gap_angles;
    double gap_width = 0.0;
    std::vector<std::uint8_t> bitmap;
};

/// SQUID body: the annulus [ring_inner, ring_outer] is opaque; the disc
/// inside it encloses flux_fraction flux quanta per turn.
struct RingSpec {
    double ring_inner = 0.0;
    double ring_outer = 0.0;
    double flux_fraction = 1.0;
    int turns = 1;

    void validate() const;
    double ab_phase() const;
};

WaveField build_mask(const MaskSpec& spec, std::size_t n, double pitch);

/// Unitary centered DFT; toggles the plane kind. The output pitch defaults
/// to the reciprocal grid spacing 1 / (N * pitch).
WaveField propagate(const WaveField& field, std::optional<double> out_pitch = std::nullopt);

/// Exact point reflection through the optical axis, i.e. the result of two
/// ideal propagations without rounding.
WaveField reflect(const WaveField& field);

/// Hard circular low-pass in an image plane. A radius at or beyond the grid
/// half-width leaves the field untouched.
WaveField apply_aperture(const WaveField& field, double radius);

/// Gaussian amplitude envelope exp(-r^2 / (2 width^2)) of the illuminating
/// beam; width <= 0 means uniform illumination.
WaveField illuminate(const WaveField& field, double width);

/// Blocks the ring body; for qubit branch 1 also imprints exp(i * ab_phase)
/// on the enclosed disc.
WaveField apply_ab_phase(const WaveField& field, const RingSpec& ring, int qubit_branch);

/// Multiplies an image-plane field by exp(i phi(x)).
WaveField weak_phase_specimen(std::span<const double> phase, const WaveField& field);

struct SplitPower {
    double inside = 0.0;
    double outside = 0.0;
    double blocked = 0.0;
};

SplitPower split_power(const WaveField& qubit_plane, const RingSpec& ring);

/// <f0|f1> / (|f0| |f1|).
cplx normalized_overlap(const WaveField& f0, const WaveField& f1);

/// Sum of absolute neighbour differences divided by the total intensity.
double relative_total_variation(const Raster& intensity);

/// Zero-lag Pearson correlation of two equally sized rasters.
double normalized_cross_correlation(const Raster& m0, const Raster& m1);
std::size_t peak_index(const Raster& m);

struct OpticsConfig {
    std::size_t grid = 128;
    double diffraction_pitch = 1e-7;
    double image_pitch = 5e-11;
    MaskSpec mask;
    /// Illumination envelope width at the mask; <= 0 is uniform.
    double illumination_width = 0.0;
    /// Choose the illumination width so the inside and outside ring powers
    /// at the qubit plane are equal.
    bool balance_split = true;
    std::optional<double> aperture_radius;
    /// Optional objective aperture in the specimen plane; blurs the shadow.
    std::optional<double> objective_aperture;
    RingSpec ring;
    double detector_tolerance = 1e-6;
    double dominance = 10.0;
    double boundary_warning = 0.05;

    static OpticsConfig defaults();
};

/// Field incident on the SQUID (before the ring acts), plus the illumination
/// width actually used.
struct QubitPlane {
    WaveField field;
    double illumination_width = 0.0;
};

QubitPlane qubit_plane_field(const OpticsConfig& config);
QubitPlane qubit_plane_field(const OpticsConfig& config, double illumination_width);

struct BranchFields {
    WaveField field0;
    WaveField field1;
};

BranchFields qubit_branches(const OpticsConfig& config);

struct SpecimenMaps {
    Raster map0;
    Raster map1;
};

/// Unit-power specimen-plane intensities for the two qubit branches.
SpecimenMaps specimen_intensity(const OpticsConfig& config);

struct DetectorBuild {
    DetectorModel model;
    double boundary_power = 0.0;
    std::size_t boundary_pixels = 0;
    bool quality_warning = false;
};

/// Detector amplitudes for the reference (specimen-free) path, with shadow
/// classification by inside/outside component dominance.
DetectorBuild build_detector(const OpticsConfig& config);
DetectorBuild build_detector_from_field(const WaveField& incident, const OpticsConfig& config);

/// Detector amplitudes actually produced when a weak phase specimen sits in
/// the specimen plane. Regions are not meaningful here; pair it with the
/// reference detector for compensation.
DetectorModel specimen_detector(const OpticsConfig& config, std::span<const double> phase);

/// <phi>_1 - <phi>_0 under the two unit-power specimen maps.
double effective_phase(const SpecimenMaps& maps, std::span<const double> phase);

}  // namespace eatem
