#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eatem/detector.hpp"
#include "eatem/io.hpp"
#include "eatem/protocol.hpp"
#include "eatem/random.hpp"

namespace eatem {

struct DoseReport {
    double delta_phi = 0.0;
    int k = 1;
    std::uint64_t n_conventional = 0;
    std::uint64_t n_entangled = 0;
    double advantage = 1.0;
};

/// ceil((2 / delta_phi)^2).
std::uint64_t required_electrons_conventional(double delta_phi);
/// ceil((1 / k) (2 / delta_phi)^2).
std::uint64_t required_electrons_entangled(double delta_phi, int k);
/// Smallest k with k >= 2 / |delta_phi|, the group size at which N' = k.
int heisenberg_k(double delta_phi);

/// Closed-form dose comparison; advantage is the unrounded ratio (= k).
DoseReport dose_report(double delta_phi, int k);

enum class EstimationKind { conventional, entangled };

struct EstimationMode {
    EstimationKind kind = EstimationKind::conventional;
    int k = 1;

    static EstimationMode conventional() { return {EstimationKind::conventional, 1}; }
    static EstimationMode entangled(int k) { return {EstimationKind::entangled, k}; }
    std::string name() const;
};

struct EstimationResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t electrons_used = 0;
    std::uint64_t boundary_discards = 0;
};

/// Maximum-likelihood phase estimate from `electron_budget` electrons.
///
/// Conventional mode counts antisymmetric outcomes of single electrons,
/// P = sin^2(dphi / 2), and inverts to |dphi|. Entangled mode runs groups of
/// k electrons, compensates the accumulated beta_j and reads the qubit in the
/// quadrature basis, P(+) = (1 + sin(k dphi)) / 2, so the sign is recovered.
/// Entangled mode requires |k dphi| < pi/2.
EstimationResult estimate_phase(const EstimationMode& mode, double true_delta_phi, std::uint64_t electron_budget,
    const DetectorModel& det, RandomStream& rng, const GroupOptions& options = {});

struct ScalingRow {
    int k = 1;
    std::uint64_t groups = 0;
    std::uint64_t electrons = 0;
    double achieved_std = 0.0;
    double predicted_electrons = 0.0;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct ScalingResult {
    std::vector<ScalingRow> rows;
    std::optional<LineFit> fit;
};

/// Electrons needed to bring the empirical estimator spread below
/// `target_std`, found by doubling and then bisecting the number of groups.
ScalingResult dose_scaling_experiment(double delta_phi, const std::vector<int>& k_list, double target_std,
    int repetitions, const DetectorModel& det, RandomStream& rng, const GroupOptions& options = {});

/// Least squares of log(electrons) on log(k) with a 95% Student-t interval.
LineFit fit_log_log(const std::vector<double>& k, const std::vector<double>& electrons);

struct RegionPair {
    std::vector<std::size_t> s0;
    std::vector<std::size_t> s1;
};

struct SpecimenMap {
    Raster phase;
    std::vector<RegionPair> pairs;

    /// mean phase over S1 minus mean phase over S0 for every pair.
    std::vector<double> pair_differences() const;
    /// Throws on malformed pairs; returns weak-phase warnings.
    std::vector<std::string> validate() const;
};

/// cells x cells board of `cell_size`-pixel squares alternating 0 and
/// `level`; each horizontally adjacent pair of cells forms one (S0, S1)
/// pair oriented so S1 is the raised cell.
SpecimenMap checkerboard_specimen(std::size_t cells, std::size_t cell_size, double level);

struct ImageScanResult {
    std::vector<double> truth;
    std::vector<double> estimates;
    std::vector<double> std_errors;
    Raster estimate_map;
    double rmse = 0.0;
    std::uint64_t total_dose = 0;
    std::uint64_t boundary_discards = 0;
    std::size_t completed = 0;
    bool incomplete = false;
};

/// Runs estimate_phase for every pair. With a non-zero total_budget the scan
/// stops once the remaining dose cannot cover another pair and flags the
/// result incomplete; unfinished pairs are NaN.
ImageScanResult image_scan(const SpecimenMap& spec, const EstimationMode& mode, std::uint64_t per_pair_budget,
    const DetectorModel& det, RandomStream& rng, const GroupOptions& options = {}, std::uint64_t total_budget = 0);

}  // namespace eatem
