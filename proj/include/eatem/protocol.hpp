#pragma once

// Exact state-vector model of one entanglement-assisted measurement group:
// symmetric qubit preparation, electron/qubit entanglement, specimen phase,
// far-field detection with known compensation angles, classical cancellation
// of the accumulated beta phases and the final qubit readout.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "eatem/detector.hpp"
#include "eatem/random.hpp"

namespace eatem {

class CsvWriter;

/// Pure two-level qubit state with the global phase fixed so amp0 is real
/// and non-negative.
class QubitState {
public:
    QubitState() = default;

    /// Normalizes and canonicalizes; throws invalid-state on a zero vector.
    static QubitState from_amplitudes(cplx amp0, cplx amp1);

    cplx amp0() const { return m_amp0; }
    cplx amp1() const { return m_amp1; }

    /// arg(amp1) - arg(amp0) in (-pi, pi].
    double relative_phase() const;
    double norm() const { return std::norm(m_amp0) + std::norm(m_amp1); }

private:
    QubitState(cplx amp0, cplx amp1) : m_amp0(amp0), m_amp1(amp1) {}

    cplx m_amp0{1.0, 0.0};
    cplx m_amp1{0.0, 0.0};
};

/// Electron (first index) x qubit (second index) amplitude table.
struct JointState {
    std::array<std::array<cplx, 2>, 2> c{};

    double norm() const;
    bool has_cross_terms() const { return c[0][1] != cplx{} || c[1][0] != cplx{}; }
};

struct DetectionRecord {
    std::size_t pixel_index = 0;
    double beta_j = 0.0;
    QubitState posterior;
    bool boundary = false;
};

enum class GroupSizeMode { fixed, poisson };
enum class BoundaryPolicy { discard, abort };
enum class Basis { symmetric_antisymmetric, quadrature };

struct GroupPlan {
    int k = 1;
    double delta_phi = 0.0;
    double sigma0 = 0.0;
    /// In poisson mode the number of electrons admitted by the blanker is
    /// drawn from Poisson(k) for every group.
    GroupSizeMode size_mode = GroupSizeMode::fixed;

    void validate() const;
};

struct GroupOptions {
    BoundaryPolicy boundary_policy = BoundaryPolicy::discard;
    /// Pure-dephasing scale in electrons; coherence = exp(-k / coherence_electrons).
    /// Zero disables dephasing.
    double coherence_electrons = 0.0;
    int max_resamples = 10000;
    bool keep_records = true;
    /// Detector whose beta_j and region map the experimenter uses for
    /// compensation and boundary rejection. Defaults to the physical one.
    const DetectorModel* reference = nullptr;
};

struct GroupResult {
    QubitState qubit;
    double sum_beta = 0.0;
    std::vector<DetectionRecord> records;
    int detected = 0;
    int discards = 0;
    double coherence = 1.0;

    int electrons() const { return detected + discards; }
};

QubitState prepare_symmetric(double sigma);
JointState entangle(const QubitState& qubit);
JointState apply_specimen(const JointState& joint, double delta_phi);

/// Branch-wise Born probabilities of every detector pixel.
std::vector<double> detection_probabilities(const JointState& joint, const DetectorModel& det);

/// Qubit state conditioned on the electron landing on `pixel`.
QubitState collapse_at(const JointState& joint, const DetectorModel& det, std::size_t pixel);

/// Samples a pixel and returns the conditional qubit state. A drawn pixel
/// whose moduli disagree beyond tolerance raises boundary-event.
DetectionRecord collapse_on_detection(const JointState& joint, const DetectorModel& det, RandomStream& rng);

/// Same as above but sampling from `physical` amplitudes while taking beta_j
/// and the boundary classification from `reference`.
DetectionRecord collapse_on_detection(
    const JointState& joint, const DetectorModel& physical, const DetectorModel& reference, RandomStream& rng);

GroupResult run_group(
    const GroupPlan& plan, const DetectorModel& det, RandomStream& rng, const GroupOptions& options = {});

/// Removes `sum_beta` from the relative phase.
QubitState compensate(const QubitState& qubit, double sum_beta);

/// Probability of outcome bit 1: antisymmetric in the {s, a} basis, the
/// (|0> + i|1>)/sqrt(2) state in the quadrature basis. `coherence` scales
/// the off-diagonal density-matrix elements.
double outcome_probability(const QubitState& qubit, Basis basis, double coherence = 1.0);
bool measure_qubit(const QubitState& qubit, Basis basis, RandomStream& rng, double coherence = 1.0);

/// One unentangled electron measured in the {s, a} basis; true = antisymmetric.
bool conventional_trial(double delta_phi, RandomStream& rng);

/// CSV columns: trial, step, pixel, beta_j, boundary_flag.
void write_record_header(CsvWriter& csv);
void write_records(CsvWriter& csv, std::uint64_t trial, const std::vector<DetectionRecord>& records);

}  // namespace eatem
