#include "eatem/cli.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "eatem/device.hpp"
#include "eatem/error.hpp"
#include "eatem/estimator.hpp"
#include "eatem/io.hpp"
#include "eatem/phase.hpp"
#include "eatem/protocol.hpp"

namespace eatem::cli {

void OutputTree::add(const std::string& name, std::string bytes) {
    m_files[name] = std::move(bytes);
}

void OutputTree::note(const std::string& key, const std::string& value) {
    m_notes.emplace_back(key, value);
}

std::string OutputTree::manifest(const std::string& command, const Config& config) const {
    std::string m;
    m += "command = " + command + "\n";
    m += "seed = " + config.raw("run.seed") + "\n";
    m += "config_hash = " + hex64(config.hash()) + "\n";
    m += "\n[config]\n" + config.canonical();
    m += "\n[notes]\n";
    for (const auto& [k, v] : m_notes) {
        m += k + " = " + v + "\n";
    }
    m += "\n[files]\n";
    for (const auto& [name, bytes] : m_files) {
        m += name + " = " + hex64(fnv1a64(bytes)) + " " + std::to_string(bytes.size()) + "\n";
    }
    return m;
}

void OutputTree::write(const std::filesystem::path& dir, const std::string& command, const Config& config) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, bytes] : m_files) {
        write_file(dir / name, bytes);
    }
    write_file(dir / "manifest.txt", manifest(command, config));
}

namespace {

RandomStream master_stream(const Config& config) {
    return RandomStream(static_cast<std::uint64_t>(config.integer("run.seed")));
}

void add_pgm(OutputTree& tree, const std::string& stem, const Raster& raster) {
    PgmScale scale;
    tree.add(stem + ".pgm", encode_pgm16(raster, &scale));
    tree.add(stem + ".txt", encode_scale_sidecar(scale));
}

std::string metrics_csv(const std::vector<std::pair<std::string, std::string>>& metrics) {
    CsvWriter w;
    w.row({"metric", "value"});
    for (const auto& [k, v] : metrics) {
        w.row({k, v});
    }
    return w.str();
}

std::vector<std::uint8_t> load_bitmap(const std::string& path, std::size_t grid) {
    if (path.empty()) {
        throw Error(ErrorKind::config, "mask.pattern = custom_bitmap needs mask.bitmap");
    }
    const Raster r = decode_pgm16(read_file(path), PgmScale{0.0, 1.0});
    if (r.width != grid || r.height != grid) {
        throw Error(ErrorKind::io, "mask bitmap '" + path + "' is not " + std::to_string(grid) + "x" +
                                       std::to_string(grid));
    }
    std::vector<std::uint8_t> bits(r.values.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        bits[i] = r.values[i] > 0.5 ? 1 : 0;
    }
    return bits;
}

DetectorModel make_detector(const Config& config, const std::string& choice_key) {
    if (config.raw(choice_key) == "uniform") {
        const auto pixels = config.integer("protocol.uniform_pixels");
        if (pixels < 1) {
            throw Error(ErrorKind::config, "protocol.uniform_pixels must be >= 1");
        }
        return DetectorModel::uniform(static_cast<std::size_t>(pixels));
    }
    return build_detector(optics_config(config)).model;
}

GroupOptions group_options(const Config& config) {
    GroupOptions o;
    o.boundary_policy =
        config.raw("protocol.boundary_policy") == "abort" ? BoundaryPolicy::abort : BoundaryPolicy::discard;
    o.coherence_electrons = config.real("protocol.coherence_electrons");
    return o;
}

Raster phase_from_file(const std::string& path) {
    if (path.empty()) {
        throw Error(ErrorKind::config, "image.specimen = file needs image.phase_file");
    }
    const std::filesystem::path p(path);
    if (p.extension() == ".pgm") {
        std::filesystem::path sidecar = p;
        sidecar.replace_extension(".txt");
        return decode_pgm16(read_file(p), decode_scale_sidecar(read_file(sidecar)));
    }
    const auto rows = parse_csv(read_file(p));
    Raster r;
    r.height = rows.size();
    for (std::size_t y = 0; y < rows.size(); ++y) {
        if (y == 0) {
            r.width = rows[0].size();
        } else if (rows[y].size() != r.width) {
            throw Error(ErrorKind::io, path + ": row " + std::to_string(y + 1) + " has " +
                                           std::to_string(rows[y].size()) + " values, expected " +
                                           std::to_string(r.width));
        }
        for (const auto& cell : rows[y]) {
            try {
                std::size_t used = 0;
                r.values.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw Error(ErrorKind::io, path + ": row " + std::to_string(y + 1) + ": '" + cell + "' is not a number");
            }
        }
    }
    if (r.values.empty()) {
        throw Error(ErrorKind::io, path + ": empty phase map");
    }
    return r;
}

// Columns: pair, region (0 or 1), x, y.
std::vector<RegionPair> pairs_from_file(const std::string& path, const Raster& phase) {
    std::vector<RegionPair> pairs;
    if (path.empty()) {
        return pairs;
    }
    const auto rows = parse_csv(read_file(path));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (i == 0 && !row.empty() && row[0] == "pair") {
            continue;
        }
        const std::string where = path + ":" + std::to_string(i + 1);
        if (row.size() != 4) {
            throw Error(ErrorKind::io, where + ": expected pair,region,x,y");
        }
        std::size_t pair = 0;
        int region = 0;
        std::size_t x = 0;
        std::size_t y = 0;
        try {
            pair = std::stoul(row[0]);
            region = std::stoi(row[1]);
            x = std::stoul(row[2]);
            y = std::stoul(row[3]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::io, where + ": non-integer field");
        }
        if (region != 0 && region != 1) {
            throw Error(ErrorKind::io, where + ": region must be 0 or 1");
        }
        if (x >= phase.width || y >= phase.height) {
            throw Error(ErrorKind::io, where + ": pixel outside the phase map");
        }
        if (pair >= pairs.size()) {
            pairs.resize(pair + 1);
        }
        (region == 0 ? pairs[pair].s0 : pairs[pair].s1).push_back(y * phase.width + x);
    }
    return pairs;
}

}  // namespace

OpticsConfig optics_config(const Config& config) {
    OpticsConfig oc;
    const auto grid = config.integer("optics.grid");
    if (grid < 2) {
        throw Error(ErrorKind::invalid_geometry, "optics.grid must be a power of two >= 2");
    }
    oc.grid = static_cast<std::size_t>(grid);
    oc.diffraction_pitch = config.quantity("optics.diffraction_pitch");
    oc.image_pitch = config.quantity("optics.image_pitch");
    oc.illumination_width = config.quantity("optics.illumination_width");
    oc.balance_split = config.flag("optics.balance_split");
    oc.aperture_radius = config.optional_quantity("optics.aperture_radius");
    oc.objective_aperture = config.optional_quantity("optics.objective_aperture");
    if (config.raw("mask.pattern") == "custom_bitmap") {
        oc.mask.pattern = MaskPattern::custom_bitmap;
        oc.mask.bitmap = load_bitmap(config.raw("mask.bitmap"), oc.grid);
    } else {
        oc.mask.pattern = MaskPattern::annular_segments;
        oc.mask.central_radius = config.quantity("mask.central_radius");
        oc.mask.inner_radius = config.quantity("mask.inner_radius");
        oc.mask.outer_radius = config.quantity("mask.outer_radius");
        for (double deg : config.real_list("mask.gap_angles_deg")) {
            oc.mask.gap_angles.push_back(deg * pi / 180.0);
        }
        oc.mask.gap_width = config.real("mask.gap_width_deg") * pi / 180.0;
    }
    oc.ring.ring_inner = config.quantity("ring.inner");
    oc.ring.ring_outer = config.quantity("ring.outer");
    oc.ring.flux_fraction = config.real("ring.flux_fraction");
    oc.ring.turns = static_cast<int>(config.integer("ring.turns"));
    oc.detector_tolerance = config.real("detector.tolerance");
    oc.dominance = config.real("detector.dominance");
    oc.boundary_warning = config.real("detector.boundary_warning");
    return oc;
}

CommandOutput cmd_design(const Config& config) {
    CommandOutput out;
    const BeamSpec beam = beam_from_energy(config.quantity("beam.energy"), config.quantity("beam.waist"));
    SquidSpec squid =
        squid_sizing(config.quantity("squid.d"), config.quantity("squid.mu"), config.real("squid.log_factor"));
    squid.flux_path_length = config.quantity("squid.l");
    squid.lateral_size = config.quantity("squid.lateral_size");
    squid.turns = static_cast<int>(config.integer("squid.turns"));
    GroupTiming timing;
    timing.group_duration = config.quantity("timing.group_duration");
    timing.mqc_frequency = config.quantity("timing.mqc_frequency");
    timing.required_margin = config.real("timing.required_margin");
    timing.coherence_width = config.quantity("beam.coherence_width");

    const DesignReport report = design_report(beam, squid, timing);
    out.tree.add("design_report.csv", report.csv());
    out.tree.add("design_report.txt", report.text());
    out.tree.note("timing", report.timing_ok ? "pass" : "flagged");
    out.tree.note("coherence", report.coherence_ok ? "pass" : "warning");
    for (const auto& w : report.warnings) {
        out.messages.push_back("warning: " + w);
    }
    out.messages.push_back(report.text());

    const FluxDeflection flux = flux_deflection(beam);
    const double lorentz = lorentz_consistency(beam, squid.flux_path_length);
    const double charge = charge_deflection(beam);
    const double ic = squid.critical_current;
    out.checks.push_back({"critical current in [1, 2] uA", ic >= 1e-6 && ic <= 2e-6, format_double(ic) + " A"});
    out.checks.push_back({"theta_d / theta_b = 1/2", std::abs(flux.ratio - 0.5) <= 1e-15, format_double(flux.ratio)});
    const double rel = std::abs(lorentz - flux.theta_d) / flux.theta_d;
    out.checks.push_back({"Lorentz impulse matches h/(2pa)", rel <= 1e-12, "relative difference " + format_double(rel)});
    out.checks.push_back({"charge-qubit deflection >= 10x smaller", charge * 10.0 <= flux.theta_d,
        "ratio " + format_double(charge / flux.theta_d)});
    return out;
}

CommandOutput cmd_optics(const Config& config) {
    CommandOutput out;
    const OpticsConfig oc = optics_config(config);
    const WaveField mask = build_mask(oc.mask, oc.grid, oc.diffraction_pitch);
    add_pgm(out.tree, "mask", mask.intensity());

    const QubitPlane qp = qubit_plane_field(oc);
    add_pgm(out.tree, "qubit_plane", qp.field.intensity());

    // Power bookkeeping through every transform of the chain.
    double parseval = 0.0;
    auto track = [&](const WaveField& before, const WaveField& after) {
        parseval = std::max(parseval, std::abs(after.power() - before.power()) / before.power());
    };
    const WaveField source = illuminate(mask, qp.illumination_width);
    const WaveField image = propagate(source, oc.image_pitch);
    track(source, image);
    const WaveField apertured = oc.aperture_radius ? apply_aperture(image, *oc.aperture_radius) : image;
    const WaveField qubit = propagate(apertured, oc.diffraction_pitch);
    track(apertured, qubit);
    const WaveField f0 = apply_ab_phase(qubit, oc.ring, 0);
    const WaveField f1 = apply_ab_phase(qubit, oc.ring, 1);
    const WaveField s0 = propagate(f0, oc.image_pitch);
    const WaveField s1 = propagate(f1, oc.image_pitch);
    track(f0, s0);
    track(f1, s1);
    const WaveField d0 = propagate(s0, oc.diffraction_pitch);
    const WaveField d1 = propagate(s1, oc.diffraction_pitch);
    track(s0, d0);
    track(s1, d1);
    double inversion = 0.0;
    {
        const WaveField twice = propagate(propagate(source));
        const WaveField mirrored = reflect(source);
        double diff = 0.0;
        for (std::size_t i = 0; i < twice.data().size(); ++i) {
            diff += std::norm(twice.data()[i] - mirrored.data()[i]);
        }
        inversion = std::sqrt(diff / source.power());
    }

    const SpecimenMaps maps = specimen_intensity(oc);
    add_pgm(out.tree, "specimen_q0", maps.map0);
    add_pgm(out.tree, "specimen_q1", maps.map1);

    const DetectorBuild det = build_detector_from_field(qp.field, oc);
    const auto& model = det.model;
    {
        CsvWriter w;
        w.row({"pixel", "re_a", "im_a", "re_b", "im_b", "beta", "region"});
        for (std::size_t j = 0; j < model.size(); ++j) {
            w.row({format_int(j), format_double(model.a()[j].real()), format_double(model.a()[j].imag()),
                format_double(model.b()[j].real()), format_double(model.b()[j].imag()), format_double(model.beta()[j]),
                std::string(to_string(model.region()[j]))});
        }
        out.tree.add("detector.csv", w.str());
        add_pgm(out.tree, "beta_map", Raster{oc.grid, oc.grid, std::vector<double>(model.beta().begin(), model.beta().end())});
    }

    // Shadow rule: non-boundary pixels carry beta = 0 outside and the AB
    // phase inside, and a_j = b_j exp(-i beta_j).
    const double inside_beta = wrap_phase(oc.ring.ab_phase());
    double worst_beta = 0.0;
    double worst_relation = 0.0;
    for (std::size_t j = 0; j < model.size(); ++j) {
        if (model.is_boundary(j)) {
            continue;
        }
        const double expected = model.region()[j] == Region::inside_shadow ? inside_beta : 0.0;
        const double a = std::abs(model.a()[j]);
        if (a > 0.0) {
            worst_beta = std::max(worst_beta, phase_distance(model.beta()[j], expected));
            worst_relation = std::max(worst_relation,
                std::abs(model.a()[j] - model.b()[j] * std::polar(1.0, -model.beta()[j])) / a);
        }
    }
    const SplitPower split = split_power(qp.field, oc.ring);
    const double overlap = std::abs(normalized_overlap(f0, f1));
    const double ncc = normalized_cross_correlation(maps.map0, maps.map1);
    const bool peaks_differ = peak_index(maps.map0) != peak_index(maps.map1);
    const bool maps_identical = maps.map0.values == maps.map1.values;

    out.tree.add("optics_summary.csv",
        metrics_csv({
            {"grid", format_int(static_cast<std::uint64_t>(oc.grid))},
            {"illumination_width", format_double(qp.illumination_width)},
            {"power_inside", format_double(split.inside)},
            {"power_outside", format_double(split.outside)},
            {"power_blocked", format_double(split.blocked)},
            {"qubit_plane_overlap", format_double(overlap)},
            {"parseval_max_relative_error", format_double(parseval)},
            {"double_transform_error", format_double(inversion)},
            {"boundary_pixels", format_int(static_cast<std::uint64_t>(det.boundary_pixels))},
            {"boundary_power_fraction", format_double(det.boundary_power)},
            {"beta_max_deviation", format_double(worst_beta)},
            {"beta_relation_max_error", format_double(worst_relation)},
            {"specimen_map_ncc", format_double(ncc)},
            {"specimen_peak_q0", format_int(static_cast<std::uint64_t>(peak_index(maps.map0)))},
            {"specimen_peak_q1", format_int(static_cast<std::uint64_t>(peak_index(maps.map1)))},
            {"detector_quality_warning", det.quality_warning ? "true" : "false"},
        }));
    out.tree.note("boundary_power_fraction", format_double(det.boundary_power));
    if (det.quality_warning) {
        out.tree.note("detector_quality", "warning");
        out.messages.push_back("warning: boundary pixels carry " + format_double(det.boundary_power) +
                               " of the detected power");
    }
    out.messages.push_back("illumination width " + format_double(qp.illumination_width) + ", overlap " +
                           format_double(overlap) + ", ncc " + format_double(ncc) + ", boundary power " +
                           format_double(det.boundary_power));

    out.checks.push_back({"Parseval through the chain", parseval <= 1e-10, format_double(parseval)});
    out.checks.push_back({"double transform = reflection", inversion <= 1e-10, format_double(inversion)});
    out.checks.push_back({"beta law on non-boundary pixels", worst_beta <= 1e-6 && worst_relation <= 1e-6,
        "max beta deviation " + format_double(worst_beta) + ", relation error " + format_double(worst_relation)});
    out.checks.push_back({"boundary power <= " + format_double(oc.boundary_warning),
        det.boundary_power <= oc.boundary_warning, format_double(det.boundary_power)});
    if (oc.balance_split && phase_distance(inside_beta, pi) == 0.0) {
        out.checks.push_back({"qubit-plane branch orthogonality", overlap < 1e-10, format_double(overlap)});
    }
    if (oc.ring.ab_phase() == 0.0) {
        out.checks.push_back({"no flux gives identical specimen maps", maps_identical, ""});
    } else {
        out.checks.push_back({"specimen maps distinct", ncc < 0.9 && peaks_differ,
            "ncc " + format_double(ncc) + ", peaks " + (peaks_differ ? "differ" : "coincide")});
    }
    return out;
}

CommandOutput cmd_protocol(const Config& config) {
    CommandOutput out;
    const DetectorModel det = make_detector(config, "protocol.detector");
    GroupPlan plan;
    plan.k = static_cast<int>(config.integer("protocol.k"));
    plan.delta_phi = config.real("protocol.delta_phi");
    plan.sigma0 = config.real("protocol.sigma0");
    plan.size_mode = config.raw("protocol.group_mode") == "poisson" ? GroupSizeMode::poisson : GroupSizeMode::fixed;
    plan.validate();
    const Basis basis =
        config.raw("protocol.basis") == "quadrature" ? Basis::quadrature : Basis::symmetric_antisymmetric;
    GroupOptions options = group_options(config);
    const auto repetitions = config.integer("protocol.repetitions");
    const auto record_trials = config.integer("protocol.record_trials");
    if (repetitions < 1) {
        throw Error(ErrorKind::invalid_argument, "protocol.repetitions must be >= 1");
    }

    const RandomStream master = master_stream(config);
    CsvWriter records;
    write_record_header(records);
    CsvWriter outcomes;
    outcomes.row({"trial", "electrons", "discards", "sum_beta", "relative_phase", "compensated_phase", "p_one",
        "outcome"});
    double audit = 0.0;
    double compensated_audit = 0.0;
    std::uint64_t ones = 0;
    std::uint64_t discards = 0;
    std::uint64_t electrons = 0;
    double expected = 0.0;
    double variance = 0.0;
    for (std::int64_t rep = 0; rep < repetitions; ++rep) {
        RandomStream rng = master.derive(static_cast<std::uint64_t>(rep));
        options.keep_records = rep < record_trials;
        const GroupResult g = run_group(plan, det, rng, options);
        const double bookkeeping = plan.sigma0 + g.sum_beta + g.detected * plan.delta_phi;
        audit = std::max(audit, phase_distance(g.qubit.relative_phase(), bookkeeping));
        const QubitState q = compensate(g.qubit, g.sum_beta);
        compensated_audit = std::max(compensated_audit,
            phase_distance(q.relative_phase(), plan.sigma0 + g.detected * plan.delta_phi));
        const double p = outcome_probability(q, basis, g.coherence);
        const bool bit = measure_qubit(q, basis, rng, g.coherence);
        ones += bit ? 1 : 0;
        expected += p;
        variance += p * (1.0 - p);
        discards += static_cast<std::uint64_t>(g.discards);
        electrons += static_cast<std::uint64_t>(g.electrons());
        if (options.keep_records) {
            write_records(records, static_cast<std::uint64_t>(rep), g.records);
        }
        outcomes.row({format_int(rep), format_int(g.electrons()), format_int(g.discards), format_double(g.sum_beta),
            format_double(g.qubit.relative_phase()), format_double(q.relative_phase()), format_double(p),
            bit ? "1" : "0"});
    }
    const double n = static_cast<double>(repetitions);
    const double z = variance > 0.0 ? (static_cast<double>(ones) - expected) / std::sqrt(variance)
                                    : (static_cast<double>(ones) == expected ? 0.0 : std::numeric_limits<double>::infinity());
    out.tree.add("records.csv", records.str());
    out.tree.add("outcomes.csv", outcomes.str());
    out.tree.add("protocol_stats.csv",
        metrics_csv({
            {"repetitions", format_int(repetitions)},
            {"k", format_int(plan.k)},
            {"delta_phi", format_double(plan.delta_phi)},
            {"basis", config.raw("protocol.basis")},
            {"electrons", format_int(electrons)},
            {"boundary_discards", format_int(discards)},
            {"outcome_ones", format_int(ones)},
            {"empirical_p_one", format_double(static_cast<double>(ones) / n)},
            {"predicted_p_one", format_double(expected / n)},
            {"binomial_sigma", format_double(std::sqrt(variance) / n)},
            {"z_score", format_double(z)},
            {"audit_max_deviation", format_double(audit)},
            {"compensated_max_deviation", format_double(compensated_audit)},
        }));
    out.tree.add("audit.txt", "max |relative phase - (sigma0 + sum beta + k dphi)| = " + format_double(audit) +
                                  "\nmax |compensated phase - (sigma0 + k dphi)| = " + format_double(compensated_audit) +
                                  "\n");
    out.tree.note("boundary_discards", format_int(discards));
    out.messages.push_back("P(1) empirical " + format_double(static_cast<double>(ones) / n) + " predicted " +
                           format_double(expected / n) + " (z = " + format_double(z) + "), audit " +
                           format_double(audit));
    out.checks.push_back({"phase bookkeeping < 1e-9", audit < 1e-9 && compensated_audit < 1e-9, format_double(audit)});
    out.checks.push_back({"outcome rate within 3 sigma", std::abs(z) <= 3.0, "z = " + format_double(z)});
    return out;
}

CommandOutput cmd_image(const Config& config) {
    CommandOutput out;
    SpecimenMap spec;
    if (config.raw("image.specimen") == "synthetic") {
        spec = checkerboard_specimen(static_cast<std::size_t>(config.integer("image.cells")),
            static_cast<std::size_t>(config.integer("image.cell_size")), config.real("image.level"));
    } else {
        spec.phase = phase_from_file(config.raw("image.phase_file"));
        spec.pairs = pairs_from_file(config.raw("image.pairs_file"), spec.phase);
    }
    for (const auto& w : spec.validate()) {
        out.messages.push_back("warning: " + w);
        out.tree.note("warning", w);
    }
    if (spec.pairs.empty()) {
        out.messages.push_back("warning: specimen has no region pairs; nothing to scan");
        out.tree.note("status", "empty pair list");
        return out;
    }

    const DetectorModel det = make_detector(config, "estimation.detector");
    const GroupOptions options = group_options(config);
    const int k = static_cast<int>(config.integer("estimation.k"));
    const auto per_pair = config.integer("estimation.per_pair_budget");
    const auto total = config.integer("estimation.total_budget");
    const auto repetitions = config.integer("image.repetitions");
    if (per_pair < 0 || total < 0 || repetitions < 1) {
        throw Error(ErrorKind::invalid_argument, "budgets must be non-negative and repetitions >= 1");
    }
    const RandomStream master = master_stream(config);

    CsvWriter raw;
    raw.row({"mode", "repetition", "pair", "truth", "estimate", "std_error"});
    CsvWriter ledger;
    ledger.row({"mode", "repetition", "total_dose", "boundary_discards", "completed_pairs", "incomplete"});
    CsvWriter rmse_csv;
    rmse_csv.row({"mode", "k", "per_pair_budget", "repetitions", "samples", "rmse", "predicted_rmse"});
    std::vector<double> truth = spec.pair_differences();
    std::vector<std::vector<double>> means;
    double rmse_by_mode[2] = {0.0, 0.0};
    bool any_incomplete = false;

    const EstimationMode modes[2] = {EstimationMode::conventional(), EstimationMode::entangled(k)};
    for (int m = 0; m < 2; ++m) {
        const EstimationMode& mode = modes[m];
        const RandomStream mode_stream = master.derive(static_cast<std::uint64_t>(m));
        std::vector<double> sum(spec.pairs.size(), 0.0);
        std::vector<std::uint64_t> count(spec.pairs.size(), 0);
        double sq = 0.0;
        std::uint64_t samples = 0;
        for (std::int64_t rep = 0; rep < repetitions; ++rep) {
            RandomStream rng = mode_stream.derive(static_cast<std::uint64_t>(rep));
            const ImageScanResult r = image_scan(spec, mode, static_cast<std::uint64_t>(per_pair), det, rng, options,
                static_cast<std::uint64_t>(total));
            any_incomplete = any_incomplete || r.incomplete;
            for (std::size_t i = 0; i < r.completed; ++i) {
                sum[i] += r.estimates[i];
                ++count[i];
                const double e = r.estimates[i] - truth[i];
                sq += e * e;
                ++samples;
                raw.row({mode.name(), format_int(rep), format_int(static_cast<std::uint64_t>(i)), format_double(truth[i]),
                    format_double(r.estimates[i]), format_double(r.std_errors[i])});
            }
            ledger.row({mode.name(), format_int(rep), format_int(r.total_dose), format_int(r.boundary_discards),
                format_int(static_cast<std::uint64_t>(r.completed)), r.incomplete ? "true" : "false"});
        }
        const double rmse = samples > 0 ? std::sqrt(sq / static_cast<double>(samples)) : std::nan("");
        rmse_by_mode[m] = rmse;
        const double budget = static_cast<double>(per_pair);
        const double predicted = mode.kind == EstimationKind::conventional
                                     ? 1.0 / std::sqrt(budget)
                                     : 1.0 / (k * std::sqrt(std::floor(budget / k)));
        rmse_csv.row({mode.name(), format_int(mode.k), format_int(per_pair), format_int(repetitions),
            format_int(samples), format_double(rmse), format_double(predicted)});

        Raster map{spec.phase.width, spec.phase.height,
            std::vector<double>(spec.phase.values.size(), std::numeric_limits<double>::quiet_NaN())};
        std::vector<double> pair_mean(spec.pairs.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < spec.pairs.size(); ++i) {
            if (count[i] > 0) {
                pair_mean[i] = sum[i] / static_cast<double>(count[i]);
                for (auto px : spec.pairs[i].s1) {
                    map.values[px] = pair_mean[i];
                }
            }
        }
        add_pgm(out.tree, "estimates_" + mode.name(), map);
        means.push_back(std::move(pair_mean));
    }
    {
        CsvWriter pairs;
        pairs.row({"pair", "truth", "conventional_mean", "entangled_mean"});
        for (std::size_t i = 0; i < truth.size(); ++i) {
            pairs.row({format_int(static_cast<std::uint64_t>(i)), format_double(truth[i]), format_double(means[0][i]),
                format_double(means[1][i])});
        }
        out.tree.add("pairs.csv", pairs.str());
    }
    add_pgm(out.tree, "specimen_phase", spec.phase);
    out.tree.add("estimates.csv", raw.str());
    out.tree.add("dose_ledger.csv", ledger.str());
    out.tree.add("rmse.csv", rmse_csv.str());
    out.tree.note("incomplete", any_incomplete ? "true" : "false");
    if (any_incomplete) {
        out.messages.push_back("warning: total budget exhausted mid-scan; maps are partial");
    }

    const double ratio = rmse_by_mode[1] / rmse_by_mode[0];
    const double target = 1.0 / std::sqrt(static_cast<double>(k));
    out.messages.push_back("RMSE conventional " + format_double(rmse_by_mode[0]) + ", entangled " +
                           format_double(rmse_by_mode[1]) + ", ratio " + format_double(ratio) + " (1/sqrt(k) = " +
                           format_double(target) + ")");
    out.checks.push_back({"RMSE ratio = 1/sqrt(k) within 20%", std::abs(ratio / target - 1.0) <= 0.2,
        "ratio " + format_double(ratio) + " vs " + format_double(target)});
    return out;
}

CommandOutput cmd_scaling(const Config& config) {
    CommandOutput out;
    const double delta_phi = config.real("scaling.delta_phi");
    const std::vector<int> k_list = config.int_list("scaling.k_list");
    const DetectorModel det = make_detector(config, "scaling.detector");
    RandomStream rng = master_stream(config);
    const ScalingResult result = dose_scaling_experiment(delta_phi, k_list, config.real("scaling.target_std"),
        static_cast<int>(config.integer("scaling.repetitions")), det, rng, group_options(config));

    CsvWriter table;
    table.row({"k", "groups", "electrons", "log_k", "log_electrons", "achieved_std", "predicted_electrons"});
    for (const auto& r : result.rows) {
        table.row({format_int(r.k), format_int(r.groups), format_int(r.electrons), format_double(std::log(r.k)),
            format_double(std::log(static_cast<double>(r.electrons))), format_double(r.achieved_std),
            format_double(r.predicted_electrons)});
    }
    out.tree.add("scaling.csv", table.str());

    std::string fit_text;
    if (result.fit) {
        const auto& f = *result.fit;
        fit_text = "slope = " + format_double(f.slope) + "\nintercept = " + format_double(f.intercept) +
                   "\nslope_stderr = " + format_double(f.slope_stderr) + "\nslope_ci95_low = " +
                   format_double(f.ci_low) + "\nslope_ci95_high = " + format_double(f.ci_high) + "\n";
        out.messages.push_back("fitted slope " + format_double(f.slope) + " [" + format_double(f.ci_low) + ", " +
                               format_double(f.ci_high) + "]");
    } else {
        fit_text = "slope = none (fewer than two distinct k)\n";
        out.messages.push_back("single k: table only, no fit");
    }
    out.tree.add("fit.txt", fit_text);

    const int kh = heisenberg_k(delta_phi);
    const auto n_h = required_electrons_entangled(delta_phi, kh);
    CsvWriter h;
    h.row({"delta_phi", "heisenberg_k", "n_entangled", "n_over_k", "k_delta_phi", "estimator_guard_ok"});
    h.row({format_double(delta_phi), format_int(kh), format_int(n_h),
        format_double(static_cast<double>(n_h) / kh), format_double(kh * delta_phi),
        std::abs(kh * delta_phi) < pi / 2 ? "true" : "false"});
    out.tree.add("heisenberg.csv", h.str());

    const bool slope_ok = result.fit && std::abs(result.fit->slope + 1.0) <= 0.1;
    out.checks.push_back({"log-log slope = -1 +/- 0.1", slope_ok,
        result.fit ? format_double(result.fit->slope) : std::string("no fit")});
    return out;
}

int run(std::string_view command, const Config& config, const std::filesystem::path& out_dir, bool check,
    std::ostream& out, std::ostream& err) {
    CommandOutput result;
    try {
        if (command == "design") {
            result = cmd_design(config);
        } else if (command == "optics") {
            result = cmd_optics(config);
        } else if (command == "protocol") {
            result = cmd_protocol(config);
        } else if (command == "image") {
            result = cmd_image(config);
        } else if (command == "scaling") {
            result = cmd_scaling(config);
        } else {
            err << "error: unknown command '" << command << "'\n";
            return exit_config;
        }
        result.tree.write(out_dir, std::string(command), config);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::config: return exit_config;
            case ErrorKind::io: return exit_failure;
            default: return exit_precondition;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
    for (const auto& m : result.messages) {
        out << m << (m.empty() || m.back() != '\n' ? "\n" : "");
    }
    if (!check) {
        return exit_ok;
    }
    bool all = true;
    for (const auto& c : result.checks) {
        out << (c.pass ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
        all = all && c.pass;
    }
    return all ? exit_ok : exit_check_failed;
}

}  // namespace eatem::cli
