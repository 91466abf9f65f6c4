#include "eatem/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "eatem/error.hpp"
#include "eatem/io.hpp"
#include "eatem/phase.hpp"

namespace eatem {

namespace {

constexpr double norm_tolerance = 1e-12;
const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

void require_normalized(double norm, const char* what) {
    if (!(std::abs(norm - 1.0) <= norm_tolerance)) {
        throw Error(ErrorKind::invalid_state, std::string(what) + " is not normalized");
    }
}

}  // namespace

QubitState QubitState::from_amplitudes(cplx amp0, cplx amp1) {
    const double n = std::norm(amp0) + std::norm(amp1);
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw Error(ErrorKind::invalid_state, "qubit amplitudes have no norm");
    }
    const double scale = 1.0 / std::sqrt(n);
    amp0 *= scale;
    amp1 *= scale;
    // Rotate the global phase so amp0 is real and non-negative (amp1 when amp0 vanishes).
    const cplx pivot = std::abs(amp0) > 0.0 ? amp0 : amp1;
    const cplx undo = std::conj(pivot) / std::abs(pivot);
    amp0 *= undo;
    amp1 *= undo;
    amp0 = cplx(amp0.real(), 0.0);
    if (std::abs(amp0) == 0.0) {
        amp1 = cplx(amp1.real(), 0.0);
    }
    return QubitState(amp0, amp1);
}

double QubitState::relative_phase() const {
    if (std::abs(m_amp0) == 0.0 || std::abs(m_amp1) == 0.0) {
        return 0.0;
    }
    return wrap_phase(std::arg(m_amp1) - std::arg(m_amp0));
}

double JointState::norm() const {
    double n = 0.0;
    for (const auto& row : c) {
        for (const auto& x : row) {
            n += std::norm(x);
        }
    }
    return n;
}

void GroupPlan::validate() const {
    if (k < 1) {
        throw Error(ErrorKind::invalid_argument, "group size k must be >= 1");
    }
    if (!std::isfinite(delta_phi) || !(delta_phi > -pi && delta_phi <= pi)) {
        throw Error(ErrorKind::invalid_argument, "delta_phi must lie in (-pi, pi]");
    }
    if (!std::isfinite(sigma0)) {
        throw Error(ErrorKind::invalid_argument, "sigma0 must be finite");
    }
}

QubitState prepare_symmetric(double sigma) {
    if (!std::isfinite(sigma)) {
        throw Error(ErrorKind::invalid_argument, "sigma must be finite");
    }
    return QubitState::from_amplitudes(std::polar(inv_sqrt2, -sigma / 2), std::polar(inv_sqrt2, sigma / 2));
}

JointState entangle(const QubitState& qubit) {
    require_normalized(qubit.norm(), "qubit");
    JointState joint;
    joint.c[0][0] = qubit.amp0();
    joint.c[1][1] = qubit.amp1();
    return joint;
}

JointState apply_specimen(const JointState& joint, double delta_phi) {
    require_normalized(joint.norm(), "joint state");
    if (!std::isfinite(delta_phi)) {
        throw Error(ErrorKind::invalid_argument, "delta_phi must be finite");
    }
    if (delta_phi == 0.0) {
        return joint;
    }
    const cplx lower = std::polar(1.0, -delta_phi / 2);
    const cplx upper = std::polar(1.0, delta_phi / 2);
    JointState out = joint;
    for (int q = 0; q < 2; ++q) {
        out.c[0][q] *= lower;
        out.c[1][q] *= upper;
    }
    return out;
}

std::vector<double> detection_probabilities(const JointState& joint, const DetectorModel& det) {
    std::vector<double> p(det.size());
    const auto a = det.a();
    const auto b = det.b();
    for (std::size_t j = 0; j < det.size(); ++j) {
        const cplx q0 = a[j] * joint.c[0][0] + b[j] * joint.c[1][0];
        const cplx q1 = a[j] * joint.c[0][1] + b[j] * joint.c[1][1];
        p[j] = std::norm(q0) + std::norm(q1);
    }
    return p;
}

QubitState collapse_at(const JointState& joint, const DetectorModel& det, std::size_t pixel) {
    if (pixel >= det.size()) {
        throw Error(ErrorKind::invalid_argument, "pixel index out of range");
    }
    const cplx a = det.a()[pixel];
    const cplx b = det.b()[pixel];
    return QubitState::from_amplitudes(
        a * joint.c[0][0] + b * joint.c[1][0], a * joint.c[0][1] + b * joint.c[1][1]);
}

namespace {

std::size_t draw_pixel(const JointState& joint, const DetectorModel& det, RandomStream& rng) {
    if (!joint.has_cross_terms()) {
        // P(j) = |c00|^2 |a_j|^2 + |c11|^2 |b_j|^2 is a two-component mixture.
        const double w0 = std::norm(joint.c[0][0]);
        const double w1 = std::norm(joint.c[1][1]);
        const int branch = rng.uniform() * (w0 + w1) < w0 ? 0 : 1;
        return det.sample_pixel(branch, rng.uniform());
    }
    const auto p = detection_probabilities(joint, det);
    double total = 0.0;
    for (double x : p) {
        total += x;
    }
    double target = rng.uniform() * total;
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (target < p[j]) {
            return j;
        }
        target -= p[j];
    }
    return p.size() - 1;
}

DetectionRecord detect(
    const JointState& joint, const DetectorModel& physical, const DetectorModel& reference, RandomStream& rng) {
    if (physical.size() != reference.size()) {
        throw Error(ErrorKind::shape, "physical and reference detectors differ in size");
    }
    DetectionRecord rec;
    rec.pixel_index = draw_pixel(joint, physical, rng);
    rec.beta_j = reference.beta()[rec.pixel_index];
    rec.boundary = reference.is_boundary(rec.pixel_index);
    if (!rec.boundary) {
        rec.posterior = collapse_at(joint, physical, rec.pixel_index);
    }
    return rec;
}

}  // namespace

DetectionRecord collapse_on_detection(
    const JointState& joint, const DetectorModel& physical, const DetectorModel& reference, RandomStream& rng) {
    require_normalized(joint.norm(), "joint state");
    auto rec = detect(joint, physical, reference, rng);
    if (rec.boundary) {
        throw Error(ErrorKind::boundary_event, "electron detected on boundary pixel " + std::to_string(rec.pixel_index));
    }
    return rec;
}

DetectionRecord collapse_on_detection(const JointState& joint, const DetectorModel& det, RandomStream& rng) {
    return collapse_on_detection(joint, det, det, rng);
}

GroupResult run_group(const GroupPlan& plan, const DetectorModel& det, RandomStream& rng, const GroupOptions& options) {
    plan.validate();
    const DetectorModel& reference = options.reference != nullptr ? *options.reference : det;
    int electrons = plan.k;
    if (plan.size_mode == GroupSizeMode::poisson) {
        electrons = static_cast<int>(rng.poisson(static_cast<double>(plan.k)));
    }

    GroupResult result;
    result.qubit = prepare_symmetric(plan.sigma0);
    if (options.keep_records) {
        result.records.reserve(static_cast<std::size_t>(electrons));
    }
    for (int step = 0; step < electrons; ++step) {
        const JointState joint = apply_specimen(entangle(result.qubit), plan.delta_phi);
        int attempts = 0;
        for (;;) {
            auto rec = detect(joint, det, reference, rng);
            if (!rec.boundary) {
                result.sum_beta += rec.beta_j;
                result.qubit = rec.posterior;
                ++result.detected;
                if (options.keep_records) {
                    result.records.push_back(std::move(rec));
                }
                break;
            }
            if (options.boundary_policy == BoundaryPolicy::abort) {
                throw Error(ErrorKind::boundary_event,
                    "electron detected on boundary pixel " + std::to_string(rec.pixel_index));
            }
            // Discarded electrons count against the dose; the qubit is left as it was.
            ++result.discards;
            rec.posterior = result.qubit;
            if (options.keep_records) {
                result.records.push_back(std::move(rec));
            }
            if (++attempts > options.max_resamples) {
                throw Error(ErrorKind::boundary_event, "boundary resampling limit exceeded");
            }
        }
    }
    if (options.coherence_electrons > 0.0) {
        result.coherence = std::exp(-static_cast<double>(result.detected) / options.coherence_electrons);
    }
    return result;
}

QubitState compensate(const QubitState& qubit, double sum_beta) {
    if (sum_beta == 0.0) {
        return qubit;
    }
    return QubitState::from_amplitudes(
        qubit.amp0() * std::polar(1.0, sum_beta / 2), qubit.amp1() * std::polar(1.0, -sum_beta / 2));
}

double outcome_probability(const QubitState& qubit, Basis basis, double coherence) {
    require_normalized(qubit.norm(), "qubit");
    // Projector onto v = (v0, v1): P = sum_ij conj(v_i) rho_ij v_j.
    cplx v0 = inv_sqrt2;
    cplx v1 = basis == Basis::symmetric_antisymmetric ? cplx(-inv_sqrt2, 0.0) : cplx(0.0, inv_sqrt2);
    const cplx r00 = std::norm(qubit.amp0());
    const cplx r11 = std::norm(qubit.amp1());
    const cplx r01 = coherence * qubit.amp0() * std::conj(qubit.amp1());
    const cplx p = std::conj(v0) * r00 * v0 + std::conj(v1) * r11 * v1 + std::conj(v0) * r01 * v1 +
                   std::conj(v1) * std::conj(r01) * v0;
    return std::clamp(p.real(), 0.0, 1.0);
}

bool measure_qubit(const QubitState& qubit, Basis basis, RandomStream& rng, double coherence) {
    return rng.bernoulli(outcome_probability(qubit, basis, coherence));
}

bool conventional_trial(double delta_phi, RandomStream& rng) {
    const QubitState electron = prepare_symmetric(delta_phi);
    return measure_qubit(electron, Basis::symmetric_antisymmetric, rng);
}

void write_record_header(CsvWriter& csv) {
    csv.row({"trial", "step", "pixel", "beta_j", "boundary_flag"});
}

void write_records(CsvWriter& csv, std::uint64_t trial, const std::vector<DetectionRecord>& records) {
    for (std::size_t step = 0; step < records.size(); ++step) {
        const auto& r = records[step];
        csv.row({format_int(trial), format_int(step), format_int(r.pixel_index), format_double(r.beta_j),
            r.boundary ? "1" : "0"});
    }
}

}  // namespace eatem
