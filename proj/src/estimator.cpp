#include "eatem/estimator.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "eatem/error.hpp"
#include "eatem/phase.hpp"

namespace eatem {

namespace {

void require_dose_phase(double delta_phi) {
    if (!std::isfinite(delta_phi) || delta_phi == 0.0) {
        throw Error(ErrorKind::divergent_dose, "delta_phi = 0 needs an unbounded number of electrons");
    }
    if (!(std::abs(delta_phi) < pi)) {
        throw Error(ErrorKind::invalid_argument, "dose formulas need 0 < |delta_phi| < pi");
    }
}

// ceil() that ignores representation error in values meant to be integral,
// e.g. (2 / 0.02)^2 evaluating to 10000.000000000002.
std::uint64_t ceil_count(double x) {
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, nearest)) {
        return static_cast<std::uint64_t>(nearest);
    }
    return static_cast<std::uint64_t>(std::ceil(x));
}

}  // namespace

std::uint64_t required_electrons_conventional(double delta_phi) {
    require_dose_phase(delta_phi);
    const double r = 2.0 / delta_phi;
    return ceil_count(r * r);
}

std::uint64_t required_electrons_entangled(double delta_phi, int k) {
    require_dose_phase(delta_phi);
    if (k < 1) {
        throw Error(ErrorKind::invalid_argument, "group size k must be >= 1");
    }
    const double r = 2.0 / delta_phi;
    return ceil_count(r * r / static_cast<double>(k));
}

int heisenberg_k(double delta_phi) {
    require_dose_phase(delta_phi);
    return static_cast<int>(std::max<std::uint64_t>(1, ceil_count(2.0 / std::abs(delta_phi))));
}

DoseReport dose_report(double delta_phi, int k) {
    DoseReport r;
    r.delta_phi = delta_phi;
    r.k = k;
    r.n_conventional = required_electrons_conventional(delta_phi);
    r.n_entangled = required_electrons_entangled(delta_phi, k);
    const double r2 = (2.0 / delta_phi) * (2.0 / delta_phi);
    r.advantage = r2 / (r2 / static_cast<double>(k));
    return r;
}

std::string EstimationMode::name() const {
    return kind == EstimationKind::conventional ? "conventional" : "entangled";
}

EstimationResult estimate_phase(const EstimationMode& mode, double true_delta_phi, std::uint64_t electron_budget,
    const DetectorModel& det, RandomStream& rng, const GroupOptions& options) {
    if (!std::isfinite(true_delta_phi)) {
        throw Error(ErrorKind::invalid_argument, "delta_phi must be finite");
    }
    EstimationResult res;
    if (mode.kind == EstimationKind::conventional) {
        if (electron_budget == 0) {
            throw Error(ErrorKind::budget, "conventional estimate needs at least one electron");
        }
        const double p = outcome_probability(prepare_symmetric(true_delta_phi), Basis::symmetric_antisymmetric);
        std::uint64_t antisymmetric = 0;
        for (std::uint64_t i = 0; i < electron_budget; ++i) {
            antisymmetric += rng.bernoulli(p) ? 1 : 0;
        }
        const double n = static_cast<double>(electron_budget);
        res.estimate = 2.0 * std::asin(std::sqrt(static_cast<double>(antisymmetric) / n));
        // Fisher information of sin^2(dphi/2) is 1 per electron at every dphi.
        res.std_error = 1.0 / std::sqrt(n);
        res.trials = electron_budget;
        res.electrons_used = electron_budget;
        return res;
    }

    const int k = mode.k;
    if (k < 1) {
        throw Error(ErrorKind::invalid_argument, "group size k must be >= 1");
    }
    if (!(std::abs(static_cast<double>(k) * true_delta_phi) < pi / 2)) {
        throw Error(ErrorKind::ambiguity,
            "|k * delta_phi| = " + format_double(std::abs(k * true_delta_phi)) + " >= pi/2 for k = " + format_int(k));
    }
    if (electron_budget < static_cast<std::uint64_t>(k)) {
        throw Error(ErrorKind::budget, "budget of " + format_int(electron_budget) + " electrons is below k = " +
                                           format_int(k));
    }
    GroupPlan plan;
    plan.k = k;
    plan.delta_phi = true_delta_phi;
    GroupOptions opts = options;
    opts.keep_records = false;

    std::uint64_t plus = 0;
    double coherence = 1.0;
    while (res.electrons_used + static_cast<std::uint64_t>(k) <= electron_budget) {
        const GroupResult g = run_group(plan, det, rng, opts);
        const QubitState q = compensate(g.qubit, g.sum_beta);
        plus += measure_qubit(q, Basis::quadrature, rng, g.coherence) ? 1 : 0;
        coherence = g.coherence;
        res.electrons_used += static_cast<std::uint64_t>(g.electrons());
        res.boundary_discards += static_cast<std::uint64_t>(g.discards);
        ++res.trials;
    }
    const double groups = static_cast<double>(res.trials);
    const double p_hat = static_cast<double>(plus) / groups;
    const double x = std::asin(std::clamp((2.0 * p_hat - 1.0) / coherence, -1.0, 1.0));
    res.estimate = x / k;
    const double c = std::cos(x);
    const double s = std::sin(x);
    // Delta-method error at the estimate; at the clamped edges fall back to
    // the bound at x = 0.
    const double slope = coherence * c;
    if (slope > 1e-12) {
        res.std_error = std::sqrt(std::max(0.0, 1.0 - coherence * coherence * s * s)) / (slope * k * std::sqrt(groups));
    } else {
        res.std_error = 1.0 / (coherence * k * std::sqrt(groups));
    }
    return res;
}

LineFit fit_log_log(const std::vector<double>& k, const std::vector<double>& electrons) {
    if (k.size() != electrons.size() || k.size() < 2) {
        throw Error(ErrorKind::invalid_argument, "log-log fit needs at least two points");
    }
    const double n = static_cast<double>(k.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        mx += std::log(k[i]);
        my += std::log(electrons[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double dx = std::log(k[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(electrons[i]) - my);
    }
    if (!(sxx > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "log-log fit needs at least two distinct k");
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (k.size() > 2) {
        double sse = 0.0;
        for (std::size_t i = 0; i < k.size(); ++i) {
            const double r = std::log(electrons[i]) - (fit.intercept + fit.slope * std::log(k[i]));
            sse += r * r;
        }
        fit.slope_stderr = std::sqrt(sse / (n - 2.0) / sxx);
        const boost::math::students_t dist(n - 2.0);
        const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
        fit.ci_low = fit.slope - t * fit.slope_stderr;
        fit.ci_high = fit.slope + t * fit.slope_stderr;
    } else {
        fit.slope_stderr = std::numeric_limits<double>::quiet_NaN();
        fit.ci_low = fit.ci_high = std::numeric_limits<double>::quiet_NaN();
    }
    return fit;
}

namespace {

double spread_of_estimates(int k, std::uint64_t groups, double delta_phi, int repetitions, const DetectorModel& det,
    const RandomStream& base, const GroupOptions& options) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int rep = 0; rep < repetitions; ++rep) {
        // Same stream per repetition at every budget (common random numbers).
        RandomStream rng = base.derive(static_cast<std::uint64_t>(rep));
        const auto r = estimate_phase(EstimationMode::entangled(k), delta_phi,
            groups * static_cast<std::uint64_t>(k), det, rng, options);
        sum += r.estimate;
        sum_sq += r.estimate * r.estimate;
    }
    const double n = static_cast<double>(repetitions);
    const double mean = sum / n;
    return std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)));
}

}  // namespace

ScalingResult dose_scaling_experiment(double delta_phi, const std::vector<int>& k_list, double target_std,
    int repetitions, const DetectorModel& det, RandomStream& rng, const GroupOptions& options) {
    if (k_list.empty()) {
        throw Error(ErrorKind::invalid_argument, "k list is empty");
    }
    if (!(target_std > 0.0) || repetitions < 2) {
        throw Error(ErrorKind::invalid_argument, "scaling needs target_std > 0 and at least two repetitions");
    }
    for (int k : k_list) {
        if (k < 1) {
            throw Error(ErrorKind::invalid_argument, "group size k must be >= 1");
        }
        if (!(std::abs(k * delta_phi) < pi / 2)) {
            throw Error(ErrorKind::ambiguity, "k = " + format_int(k) + " gives |k * delta_phi| >= pi/2");
        }
    }
    ScalingResult result;
    constexpr std::uint64_t max_groups = std::uint64_t{1} << 26;
    for (std::size_t i = 0; i < k_list.size(); ++i) {
        const int k = k_list[i];
        const RandomStream base = rng.derive(static_cast<std::uint64_t>(k));
        auto spread = [&](std::uint64_t g) { return spread_of_estimates(k, g, delta_phi, repetitions, det, base, options); };

        std::uint64_t hi = 1;
        double hi_std = spread(hi);
        while (hi_std > target_std) {
            if (hi >= max_groups) {
                throw Error(ErrorKind::budget, "target spread not reached within the group limit");
            }
            hi *= 2;
            hi_std = spread(hi);
        }
        std::uint64_t lo = hi / 2;
        while (hi - lo > 1) {
            const std::uint64_t mid = lo + (hi - lo) / 2;
            const double s = spread(mid);
            if (s <= target_std) {
                hi = mid;
                hi_std = s;
            } else {
                lo = mid;
            }
        }
        ScalingRow row;
        row.k = k;
        row.groups = hi;
        row.electrons = hi * static_cast<std::uint64_t>(k);
        row.achieved_std = hi_std;
        row.predicted_electrons = 1.0 / (static_cast<double>(k) * target_std * target_std);
        result.rows.push_back(row);
    }
    std::set<int> distinct(k_list.begin(), k_list.end());
    if (distinct.size() >= 2) {
        std::vector<double> ks;
        std::vector<double> ns;
        for (const auto& r : result.rows) {
            ks.push_back(r.k);
            ns.push_back(static_cast<double>(r.electrons));
        }
        result.fit = fit_log_log(ks, ns);
    }
    return result;
}

std::vector<double> SpecimenMap::pair_differences() const {
    std::vector<double> d;
    d.reserve(pairs.size());
    auto mean = [&](const std::vector<std::size_t>& px) {
        double s = 0.0;
        for (auto i : px) {
            s += phase.values[i];
        }
        return s / static_cast<double>(px.size());
    };
    for (const auto& p : pairs) {
        d.push_back(mean(p.s1) - mean(p.s0));
    }
    return d;
}

std::vector<std::string> SpecimenMap::validate() const {
    if (phase.values.size() != phase.width * phase.height) {
        throw Error(ErrorKind::shape, "specimen phase raster is malformed");
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        if (p.s0.empty() || p.s1.empty()) {
            throw Error(ErrorKind::invalid_argument, "pair " + format_int(i) + " has an empty region");
        }
        std::set<std::size_t> s0(p.s0.begin(), p.s0.end());
        for (auto px : p.s0) {
            if (px >= phase.values.size()) {
                throw Error(ErrorKind::invalid_argument, "pair " + format_int(i) + " references a pixel off the map");
            }
        }
        for (auto px : p.s1) {
            if (px >= phase.values.size()) {
                throw Error(ErrorKind::invalid_argument, "pair " + format_int(i) + " references a pixel off the map");
            }
            if (s0.count(px) != 0) {
                throw Error(ErrorKind::invalid_argument, "pair " + format_int(i) + " regions overlap");
            }
        }
    }
    std::vector<std::string> warnings;
    double worst = 0.0;
    for (double v : phase.values) {
        worst = std::max(worst, std::abs(v));
    }
    if (worst > 0.5) {
        warnings.push_back("specimen phase reaches " + format_double(worst) + " rad; weak-phase model may not hold");
    }
    return warnings;
}

SpecimenMap checkerboard_specimen(std::size_t cells, std::size_t cell_size, double level) {
    if (cells < 2 || cell_size < 1) {
        throw Error(ErrorKind::invalid_argument, "checkerboard needs at least 2 cells of at least 1 pixel");
    }
    SpecimenMap spec;
    const std::size_t side = cells * cell_size;
    spec.phase = Raster{side, side, std::vector<double>(side * side, 0.0)};
    auto raised = [](std::size_t cx, std::size_t cy) { return (cx + cy) % 2 == 1; };
    auto cell_pixels = [&](std::size_t cx, std::size_t cy) {
        std::vector<std::size_t> px;
        for (std::size_t y = cy * cell_size; y < (cy + 1) * cell_size; ++y) {
            for (std::size_t x = cx * cell_size; x < (cx + 1) * cell_size; ++x) {
                px.push_back(y * side + x);
            }
        }
        return px;
    };
    for (std::size_t cy = 0; cy < cells; ++cy) {
        for (std::size_t cx = 0; cx < cells; ++cx) {
            if (raised(cx, cy)) {
                for (auto i : cell_pixels(cx, cy)) {
                    spec.phase.values[i] = level;
                }
            }
        }
    }
    for (std::size_t cy = 0; cy < cells; ++cy) {
        for (std::size_t cx = 0; cx + 1 < cells; ++cx) {
            RegionPair pair;
            if (raised(cx + 1, cy)) {
                pair.s0 = cell_pixels(cx, cy);
                pair.s1 = cell_pixels(cx + 1, cy);
            } else {
                pair.s0 = cell_pixels(cx + 1, cy);
                pair.s1 = cell_pixels(cx, cy);
            }
            spec.pairs.push_back(std::move(pair));
        }
    }
    return spec;
}

ImageScanResult image_scan(const SpecimenMap& spec, const EstimationMode& mode, std::uint64_t per_pair_budget,
    const DetectorModel& det, RandomStream& rng, const GroupOptions& options, std::uint64_t total_budget) {
    spec.validate();
    if (spec.pairs.empty()) {
        throw Error(ErrorKind::invalid_argument, "specimen has no region pairs");
    }
    if (per_pair_budget == 0) {
        throw Error(ErrorKind::budget, "per-pair budget is zero");
    }
    ImageScanResult res;
    res.truth = spec.pair_differences();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    res.estimates.assign(spec.pairs.size(), nan);
    res.std_errors.assign(spec.pairs.size(), nan);
    res.estimate_map = Raster{spec.phase.width, spec.phase.height, std::vector<double>(spec.phase.values.size(), nan)};

    double sq = 0.0;
    for (std::size_t i = 0; i < spec.pairs.size(); ++i) {
        if (total_budget != 0 && res.total_dose + per_pair_budget > total_budget) {
            res.incomplete = true;
            break;
        }
        RandomStream pair_rng = rng.derive(i);
        const auto r = estimate_phase(mode, res.truth[i], per_pair_budget, det, pair_rng, options);
        res.estimates[i] = r.estimate;
        res.std_errors[i] = r.std_error;
        res.total_dose += r.electrons_used;
        res.boundary_discards += r.boundary_discards;
        for (auto px : spec.pairs[i].s1) {
            res.estimate_map.values[px] = r.estimate;
        }
        const double e = r.estimate - res.truth[i];
        sq += e * e;
        ++res.completed;
    }
    res.rmse = res.completed > 0 ? std::sqrt(sq / static_cast<double>(res.completed)) : nan;
    return res;
}

}  // namespace eatem
