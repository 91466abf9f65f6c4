#include "eatem/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eatem/error.hpp"
#include "eatem/phase.hpp"

namespace eatem {

std::string_view to_string(Region region) {
    switch (region) {
        case Region::outside_shadow: return "outside";
        case Region::inside_shadow: return "inside";
        case Region::boundary: return "boundary";
    }
    return "unknown";
}

namespace {

void normalize(std::vector<cplx>& v, const char* name) {
    double power = 0.0;
    for (const auto& x : v) {
        power += std::norm(x);
    }
    if (!(power > 0.0) || !std::isfinite(power)) {
        throw Error(ErrorKind::invalid_argument, std::string("detector column ") + name + " has no power");
    }
    const double scale = 1.0 / std::sqrt(power);
    for (auto& x : v) {
        x *= scale;
    }
}

std::vector<double> cumulative_power(const std::vector<cplx>& v) {
    std::vector<double> cdf(v.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
        acc += std::norm(v[j]);
        cdf[j] = acc;
    }
    return cdf;
}

}  // namespace

DetectorModel DetectorModel::from_amplitudes(
    std::vector<cplx> a, std::vector<cplx> b, double tolerance, std::vector<Region> regions) {
    if (a.empty() || a.size() != b.size()) {
        throw Error(ErrorKind::shape, "detector columns must be non-empty and of equal length");
    }
    if (!regions.empty() && regions.size() != a.size()) {
        throw Error(ErrorKind::shape, "region map length does not match detector");
    }
    if (!(tolerance >= 0.0)) {
        throw Error(ErrorKind::invalid_argument, "detector tolerance must be non-negative");
    }
    normalize(a, "a");
    normalize(b, "b");

    DetectorModel det;
    det.m_tolerance = tolerance;
    det.m_max_abs_a = 0.0;
    for (const auto& x : a) {
        det.m_max_abs_a = std::max(det.m_max_abs_a, std::abs(x));
    }
    det.m_beta.resize(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        det.m_beta[j] = wrap_phase(std::arg(b[j]) - std::arg(a[j]));
    }
    det.m_a = std::move(a);
    det.m_b = std::move(b);

    det.m_region.resize(det.m_a.size());
    for (std::size_t j = 0; j < det.m_a.size(); ++j) {
        Region r;
        if (!det.moduli_match(j)) {
            r = Region::boundary;
        } else if (!regions.empty()) {
            r = regions[j];
        } else {
            r = std::abs(det.m_beta[j]) > pi / 2 ? Region::inside_shadow : Region::outside_shadow;
        }
        det.m_region[j] = r;
    }
    det.m_cdf_a = cumulative_power(det.m_a);
    det.m_cdf_b = cumulative_power(det.m_b);
    return det;
}

DetectorModel DetectorModel::uniform(std::size_t pixels) {
    if (pixels == 0) {
        throw Error(ErrorKind::invalid_argument, "uniform detector needs at least one pixel");
    }
    std::vector<cplx> a(pixels, cplx(1.0, 0.0));
    return from_amplitudes(a, a);
}

bool DetectorModel::moduli_match(std::size_t j) const {
    return std::abs(std::abs(m_a[j]) - std::abs(m_b[j])) <= m_tolerance * m_max_abs_a;
}

std::size_t DetectorModel::sample_pixel(int branch, double u) const {
    const auto& cdf = branch == 0 ? m_cdf_a : m_cdf_b;
    const double target = u * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.end()) {
        --it;
        // Walk back over trailing zero-power pixels left by rounding.
        while (it != cdf.begin() && *(it - 1) == *it) {
            --it;
        }
    }
    return static_cast<std::size_t>(it - cdf.begin());
}

double DetectorModel::boundary_power_fraction() const {
    double boundary = 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < size(); ++j) {
        const double p = 0.5 * (std::norm(m_a[j]) + std::norm(m_b[j]));
        total += p;
        if (m_region[j] == Region::boundary) {
            boundary += p;
        }
    }
    return total > 0.0 ? boundary / total : 0.0;
}

std::size_t DetectorModel::boundary_count() const {
    return static_cast<std::size_t>(std::count(m_region.begin(), m_region.end(), Region::boundary));
}

}  // namespace eatem
