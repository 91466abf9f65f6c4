// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "eatem/cli.hpp"
#include "eatem/config.hpp"
#include "eatem/device.hpp"
#include "eatem/estimator.hpp"
#include "eatem/io.hpp"
#include "eatem/optics.hpp"
#include "eatem/phase.hpp"
#include "eatem/protocol.hpp"

using namespace eatem;

namespace {

int g_failures = 0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

void criterion(int id, const std::string& name, double time_limit, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream timing;
    timing << seconds << " s";
    if (time_limit > 0.0) {
        timing << " / limit " << time_limit << " s";
        if (seconds >= time_limit) {
            o.pass = false;
        }
    }
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << o.detail << " (" << timing.str()
              << ")" << std::endl;
    if (!o.pass) {
        ++g_failures;
    }
}

std::string num(double x) {
    return format_double(x);
}

double binomial_z(std::uint64_t hits, std::uint64_t n, double p) {
    const double nn = static_cast<double>(n);
    return (static_cast<double>(hits) - nn * p) / std::sqrt(nn * p * (1.0 - p));
}

DetectorModel random_phase_detector(std::size_t pixels, RandomStream& rng) {
    std::vector<cplx> a(pixels);
    std::vector<cplx> b(pixels);
    for (std::size_t j = 0; j < pixels; ++j) {
        const double m = 0.1 + rng.uniform();
        a[j] = std::polar(m, 2.0 * pi * rng.uniform());
        b[j] = std::polar(m, 2.0 * pi * rng.uniform());
    }
    return DetectorModel::from_amplitudes(a, b);
}

Outcome phase_bookkeeping() {
    const DetectorModel optical = build_detector(OpticsConfig::defaults()).model;
    RandomStream rng(20240601);
    const DetectorModel scrambled = random_phase_detector(64, rng);
    double worst = 0.0;
    int cases = 0;
    for (const DetectorModel* det : {&optical, &scrambled}) {
        for (int i = 0; i < 1000; ++i) {
            GroupPlan plan;
            plan.sigma0 = pi * (2.0 * rng.uniform() - 1.0);
            plan.delta_phi = pi * (2.0 * rng.uniform() - 1.0);
            plan.k = 1 + static_cast<int>(rng.uniform() * 64.0);
            GroupOptions options;
            options.keep_records = false;
            const GroupResult g = run_group(plan, *det, rng, options);
            const double expected = plan.sigma0 + g.sum_beta + plan.k * plan.delta_phi;
            worst = std::max(worst, phase_distance(g.qubit.relative_phase(), expected));
            ++cases;
        }
    }
    return {worst < 1e-9, std::to_string(cases) + " cases, max deviation " + num(worst)};
}

Outcome conventional_baseline() {
    RandomStream rng(7);
    const std::uint64_t n = 1000000;
    std::uint64_t anti = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        anti += conventional_trial(0.2, rng) ? 1 : 0;
    }
    const double p = std::sin(0.1) * std::sin(0.1);
    const double z = binomial_z(anti, n, p);
    return {std::abs(z) <= 3.0,
        "rate " + num(static_cast<double>(anti) / n) + " vs sin^2(0.1) = " + num(p) + ", z = " + num(z)};
}

Outcome dose_scaling() {
    const DetectorModel det = build_detector(OpticsConfig::defaults()).model;
    RandomStream rng(11);
    const ScalingResult r = dose_scaling_experiment(0.05, {1, 2, 4, 8}, 0.02, 400, det, rng);
    if (!r.fit) {
        return {false, "no fit"};
    }
    std::string detail = "slope " + num(r.fit->slope) + " CI95 [" + num(r.fit->ci_low) + ", " +
                         num(r.fit->ci_high) + "], electrons";
    for (const auto& row : r.rows) {
        detail += " " + std::to_string(row.electrons);
    }
    return {std::abs(r.fit->slope + 1.0) <= 0.1, detail + ", 400 repetitions"};
}

Outcome heisenberg_point() {
    const int k = heisenberg_k(0.02);
    if (k != 100) {
        return {false, "heisenberg_k(0.02) = " + std::to_string(k)};
    }
    const DetectorModel det = build_detector(OpticsConfig::defaults()).model;
    GroupPlan plan;
    plan.k = k;
    plan.delta_phi = 0.02;
    GroupOptions options;
    options.keep_records = false;
    const RandomStream master(100);
    const std::uint64_t groups = 100000;
    std::uint64_t plus = 0;
    for (std::uint64_t i = 0; i < groups; ++i) {
        RandomStream rng = master.derive(i);
        const GroupResult g = run_group(plan, det, rng, options);
        plus += measure_qubit(compensate(g.qubit, g.sum_beta), Basis::quadrature, rng) ? 1 : 0;
    }
    const double p = (1.0 + std::sin(2.0)) / 2.0;
    const double z = binomial_z(plus, groups, p);
    return {std::abs(z) <= 3.0, "k = 100, P(+) " + num(static_cast<double>(plus) / groups) + " vs " + num(p) +
                                    ", z = " + num(z)};
}

Outcome optics_unitarity() {
    const OpticsConfig oc = OpticsConfig::defaults();
    const QubitPlane qp = qubit_plane_field(oc);
    double worst = 0.0;
    auto step = [&](const WaveField& in, std::optional<double> pitch) {
        WaveField out = propagate(in, pitch);
        worst = std::max(worst, std::abs(out.power() - in.power()) / in.power());
        return out;
    };
    const WaveField source = illuminate(build_mask(oc.mask, oc.grid, oc.diffraction_pitch), qp.illumination_width);
    const WaveField image = step(source, oc.image_pitch);
    const WaveField qubit = step(apply_aperture(image, *oc.aperture_radius), oc.diffraction_pitch);
    const WaveField specimen = step(apply_ab_phase(qubit, oc.ring, 1), oc.image_pitch);
    step(specimen, oc.diffraction_pitch);

    double inversion = 0.0;
    for (const WaveField* f : {&source, &qubit, &specimen}) {
        const WaveField twice = propagate(propagate(*f));
        const WaveField mirrored = reflect(*f);
        double diff = 0.0;
        for (std::size_t i = 0; i < twice.data().size(); ++i) {
            diff += std::norm(twice.data()[i] - mirrored.data()[i]);
        }
        inversion = std::max(inversion, std::sqrt(diff / f->power()));
    }
    return {worst <= 1e-10 && inversion <= 1e-10,
        "Parseval max relative error " + num(worst) + ", double-transform error " + num(inversion)};
}

Outcome beta_law() {
    const OpticsConfig oc = OpticsConfig::defaults();
    const DetectorBuild build = build_detector(oc);
    const DetectorModel& det = build.model;
    double worst_beta = 0.0;
    double worst_relation = 0.0;
    std::size_t checked = 0;
    for (std::size_t j = 0; j < det.size(); ++j) {
        if (det.is_boundary(j)) {
            continue;
        }
        const double a = std::abs(det.a()[j]);
        if (a == 0.0) {
            continue;
        }
        ++checked;
        worst_beta =
            std::max(worst_beta, std::min(phase_distance(det.beta()[j], 0.0), phase_distance(det.beta()[j], pi)));
        worst_relation =
            std::max(worst_relation, std::abs(det.a()[j] - det.b()[j] * std::polar(1.0, -det.beta()[j])) / a);
    }
    const double boundary = det.boundary_power_fraction();
    return {worst_beta <= 1e-6 && worst_relation <= 1e-6 && boundary <= 0.05,
        std::to_string(checked) + " pixels, max beta deviation " + num(worst_beta) + ", relation error " +
            num(worst_relation) + ", boundary power " + num(boundary)};
}

Outcome branch_orthogonality() {
    const OpticsConfig oc = OpticsConfig::defaults();
    const QubitPlane qp = qubit_plane_field(oc);
    const SplitPower split = split_power(qp.field, oc.ring);
    const BranchFields branches = qubit_branches(oc);
    const double overlap = std::abs(normalized_overlap(branches.field0, branches.field1));
    const double imbalance = std::abs(split.inside - split.outside) / (split.inside + split.outside);
    return {overlap < 1e-10, "inside/outside imbalance " + num(imbalance) + ", |<f0|f1>| " + num(overlap)};
}

Outcome specimen_maps() {
    OpticsConfig oc = OpticsConfig::defaults();
    const SpecimenMaps maps = specimen_intensity(oc);
    const double ncc = normalized_cross_correlation(maps.map0, maps.map1);
    const std::size_t p0 = peak_index(maps.map0);
    const std::size_t p1 = peak_index(maps.map1);
    oc.ring.flux_fraction = 0.0;
    const SpecimenMaps flat = specimen_intensity(oc);
    const bool identical = flat.map0.values == flat.map1.values;
    return {ncc < 0.9 && p0 != p1 && identical, "ncc " + num(ncc) + ", peaks " + std::to_string(p0) + " / " +
                                                    std::to_string(p1) + ", f = 0 identical: " +
                                                    (identical ? "yes" : "no")};
}

Outcome device_numbers() {
    const BeamSpec beam = beam_from_energy(300e3, 10e-6);
    const SquidSpec squid = squid_sizing(1e-3, PhysicalConstants::mu0);
    const FluxDeflection flux = flux_deflection(beam);
    const double lorentz = lorentz_consistency(beam, squid.flux_path_length);
    const double lorentz_rel = std::abs(lorentz - flux.theta_d) / flux.theta_d;
    const double charge = charge_deflection(beam);
    const double ic = squid.critical_current;
    const bool pass = ic >= 1e-6 && ic <= 2e-6 && std::abs(flux.ratio - 0.5) <= 1e-15 && lorentz_rel <= 1e-12 &&
                      10.0 * charge <= flux.theta_d;
    return {pass, "i_c " + num(ic) + " A, theta_d/theta_b " + num(flux.ratio) + ", Lorentz rel " + num(lorentz_rel) +
                      ", charge/flux " + num(charge / flux.theta_d)};
}

Outcome end_to_end_imaging() {
    const SpecimenMap spec = checkerboard_specimen(4, 2, 0.05);
    const DetectorModel det = build_detector(OpticsConfig::defaults()).model;
    const int k = 8;
    const std::uint64_t budget = 8000;
    const RandomStream master(2718);
    double rmse[2] = {0.0, 0.0};
    std::uint64_t dose[2] = {0, 0};
    const EstimationMode modes[2] = {EstimationMode::conventional(), EstimationMode::entangled(k)};
    for (int m = 0; m < 2; ++m) {
        double sq = 0.0;
        std::uint64_t n = 0;
        for (std::uint64_t rep = 0; rep < 200; ++rep) {
            RandomStream rng = master.derive(static_cast<std::uint64_t>(m)).derive(rep);
            const ImageScanResult r = image_scan(spec, modes[m], budget, det, rng);
            for (std::size_t i = 0; i < r.completed; ++i) {
                const double e = r.estimates[i] - r.truth[i];
                sq += e * e;
                ++n;
            }
            dose[m] += r.total_dose;
        }
        rmse[m] = std::sqrt(sq / static_cast<double>(n));
    }
    const double ratio = rmse[1] / rmse[0];
    const double target = 1.0 / std::sqrt(8.0);
    return {std::abs(ratio / target - 1.0) <= 0.2 && dose[0] == dose[1],
        "RMSE " + num(rmse[1]) + " / " + num(rmse[0]) + " = " + num(ratio) + " vs 1/sqrt(8) = " + num(target) +
            ", dose " + std::to_string(dose[0]) + " / " + std::to_string(dose[1]) + ", 200 repetitions"};
}

Outcome reproducibility() {
    const auto root = std::filesystem::temp_directory_path() / "eatem_acceptance_repro";
    std::filesystem::remove_all(root);
    const Config config = Config::defaults();
    std::string detail;
    bool pass = true;
    for (const char* command : {"design", "optics", "protocol", "image", "scaling"}) {
        std::ostringstream sink;
        const auto a = root / (std::string(command) + "_a");
        const auto b = root / (std::string(command) + "_b");
        const int ca = cli::run(command, config, a, false, sink, sink);
        const int cb = cli::run(command, config, b, false, sink, sink);
        std::size_t files = 0;
        bool same = ca == 0 && cb == 0;
        for (const auto& entry : std::filesystem::recursive_directory_iterator(a)) {
            if (!entry.is_regular_file()) {
                continue;
            }
            const auto other = b / std::filesystem::relative(entry.path(), a);
            same = same && std::filesystem::exists(other) && read_file(entry.path()) == read_file(other);
            ++files;
        }
        for (const auto& entry : std::filesystem::recursive_directory_iterator(b)) {
            same = same && std::filesystem::exists(a / std::filesystem::relative(entry.path(), b));
        }
        pass = pass && same && files > 0;
        detail += std::string(detail.empty() ? "" : ", ") + command + " " + std::to_string(files) + " files " +
                  (same ? "identical" : "DIFFER");
    }
    std::filesystem::remove_all(root);
    return {pass, detail};
}

}  // namespace

int main() {
    criterion(1, "phase bookkeeping", 10.0, phase_bookkeeping);
    criterion(2, "conventional baseline", 30.0, conventional_baseline);
    criterion(3, "dose scaling slope", 300.0, dose_scaling);
    criterion(4, "Heisenberg point", 0.0, heisenberg_point);
    criterion(5, "optics unitarity", 0.0, optics_unitarity);
    criterion(6, "beta-map law", 0.0, beta_law);
    criterion(7, "branch orthogonality", 0.0, branch_orthogonality);
    criterion(8, "two-branch specimen maps", 0.0, specimen_maps);
    criterion(9, "device numbers", 0.0, device_numbers);
    criterion(10, "end-to-end imaging", 300.0, end_to_end_imaging);
    criterion(11, "reproducibility", 0.0, reproducibility);
    std::cout << (g_failures == 0 ? "all 11 criteria passed" : std::to_string(g_failures) + " criteria failed")
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
