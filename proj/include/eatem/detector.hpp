#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace eatem {

using cplx = std::complex<double>;

enum class Region : std::uint8_t { outside_shadow, inside_shadow, boundary };

std::string_view to_string(Region region);

/// Area-detector model: a_j = <d_j|0>, b_j = <d_j|1> and the known
/// compensation angle beta_j = arg(b_j) - arg(a_j) for every pixel.
///
/// Both amplitude columns are normalized on construction. A pixel whose
/// moduli differ by more than tolerance * max|a| is always classed as
/// boundary; callers may additionally supply their own region map (the
/// optics builder does, from the inside/outside component powers).
class DetectorModel {
public:
    static DetectorModel from_amplitudes(
        std::vector<cplx> a, std::vector<cplx> b, double tolerance = 1e-6, std::vector<Region> regions = {});

    /// `pixels` pixels with a_j = b_j = 1/sqrt(pixels); beta = 0 everywhere.
    static DetectorModel uniform(std::size_t pixels);

    std::size_t size() const { return m_a.size(); }
    std::span<const cplx> a() const { return m_a; }
    std::span<const cplx> b() const { return m_b; }
    std::span<const double> beta() const { return m_beta; }
    std::span<const Region> region() const { return m_region; }
    double tolerance() const { return m_tolerance; }

    bool moduli_match(std::size_t j) const;
    bool is_boundary(std::size_t j) const { return m_region[j] == Region::boundary; }

    /// Draws a pixel from |a_j|^2 (branch 0) or |b_j|^2 (branch 1) given a
    /// uniform variate in [0, 1).
    std::size_t sample_pixel(int branch, double u) const;

    /// Fraction of the detected power (mean of |a|^2 and |b|^2) landing on
    /// boundary pixels.
    double boundary_power_fraction() const;
    std::size_t boundary_count() const;

private:
    std::vector<cplx> m_a;
    std::vector<cplx> m_b;
    std::vector<double> m_beta;
    std::vector<Region> m_region;
    std::vector<double> m_cdf_a;
    std::vector<double> m_cdf_b;
    double m_tolerance = 0.0;
    double m_max_abs_a = 0.0;
};

}  // namespace eatem
