#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "eatem/detector.hpp"
#include "eatem/error.hpp"
#include "eatem/phase.hpp"
#include "eatem/protocol.hpp"
#include "eatem/random.hpp"

using namespace eatem;

namespace {

DetectorModel random_detector(std::size_t pixels, std::uint64_t seed, bool equal_moduli) {
    RandomStream rng(seed);
    std::vector<cplx> a(pixels);
    std::vector<cplx> b(pixels);
    for (std::size_t j = 0; j < pixels; ++j) {
        const double ma = 0.2 + rng.uniform();
        const double mb = equal_moduli ? ma : 0.2 + rng.uniform();
        a[j] = std::polar(ma, 2.0 * pi * rng.uniform());
        b[j] = std::polar(mb, 2.0 * pi * rng.uniform());
    }
    return DetectorModel::from_amplitudes(a, b, equal_moduli ? 1e-6 : 10.0);
}

// Enumerates every pixel sequence of length k with hand-written amplitude
// products; returns sum over sequences of P(seq) * f(compensated qubit).
double brute_force(const DetectorModel& det, cplx amp0, cplx amp1, double dphi, int k,
    const std::function<double(cplx, cplx)>& f, double* total_probability) {
    double a_norm = 0.0;
    double b_norm = 0.0;
    for (std::size_t j = 0; j < det.size(); ++j) {
        a_norm += std::norm(det.a()[j]);
        b_norm += std::norm(det.b()[j]);
    }
    const std::size_t m = det.size();
    std::size_t sequences = 1;
    for (int i = 0; i < k; ++i) {
        sequences *= m;
    }
    const double n0 = std::sqrt(std::norm(amp0) + std::norm(amp1));
    double acc = 0.0;
    double total = 0.0;
    for (std::size_t s = 0; s < sequences; ++s) {
        cplx u0 = amp0 / n0;
        cplx u1 = amp1 / n0;
        double beta_sum = 0.0;
        std::size_t code = s;
        for (int i = 0; i < k; ++i) {
            const std::size_t j = code % m;
            code /= m;
            u0 *= det.a()[j] / std::sqrt(a_norm) * std::polar(1.0, -dphi / 2.0);
            u1 *= det.b()[j] / std::sqrt(b_norm) * std::polar(1.0, dphi / 2.0);
            beta_sum += std::arg(det.b()[j]) - std::arg(det.a()[j]);
        }
        const double p = std::norm(u0) + std::norm(u1);
        total += p;
        const cplx c1 = u1 * std::polar(1.0, -beta_sum);
        acc += p * f(u0 / std::sqrt(p), c1 / std::sqrt(p));
    }
    *total_probability = total;
    return acc;
}

// Same sum through the library's one-electron primitives.
double library_chain(const DetectorModel& det, const QubitState& q, double dphi, int k, double beta_sum,
    const std::function<double(cplx, cplx)>& f) {
    if (k == 0) {
        const QubitState c = compensate(q, beta_sum);
        return f(c.amp0(), c.amp1());
    }
    const JointState joint = apply_specimen(entangle(q), dphi);
    const std::vector<double> p = detection_probabilities(joint, det);
    double acc = 0.0;
    for (std::size_t j = 0; j < det.size(); ++j) {
        if (p[j] > 0.0) {
            acc += p[j] * library_chain(det, collapse_at(joint, det, j), dphi, k - 1, beta_sum + det.beta()[j], f);
        }
    }
    return acc;
}

double quadrature_one(cplx c0, cplx c1) {
    const cplx o = (c0 - cplx(0.0, 1.0) * c1) / std::sqrt(2.0);
    return std::norm(o);
}

double antisymmetric_one(cplx c0, cplx c1) {
    return std::norm((c0 - c1) / std::sqrt(2.0));
}

}  // namespace

TEST(QubitState, CanonicalGlobalPhase) {
    const QubitState q = QubitState::from_amplitudes(std::polar(2.0, 1.0), std::polar(2.0, 1.7));
    EXPECT_NEAR(q.norm(), 1.0, 1e-15);
    EXPECT_EQ(q.amp0().imag(), 0.0);
    EXPECT_GE(q.amp0().real(), 0.0);
    EXPECT_NEAR(q.relative_phase(), 0.7, 1e-14);
    EXPECT_THROW(QubitState::from_amplitudes(0.0, 0.0), Error);
}

TEST(Protocol, EntanglementHasNoCrossTerms) {
    const JointState j = apply_specimen(entangle(prepare_symmetric(0.3)), 0.2);
    EXPECT_FALSE(j.has_cross_terms());
    EXPECT_NEAR(j.norm(), 1.0, 1e-15);
    EXPECT_NEAR(std::arg(j.c[1][1] / j.c[0][0]), 0.5, 1e-14);
}

TEST(Protocol, BruteForceEnumerationMatchesLibrary) {
    for (bool equal : {true, false}) {
        for (std::size_t pixels = 1; pixels <= 4; ++pixels) {
            const DetectorModel det = random_detector(pixels, 100 + pixels, equal);
            for (int k = 1; k <= 3; ++k) {
                const cplx amp0 = 0.8;
                const cplx amp1 = std::polar(0.6, 0.4);
                const double dphi = 0.17;
                for (const auto& f : {std::function<double(cplx, cplx)>(quadrature_one),
                         std::function<double(cplx, cplx)>(antisymmetric_one)}) {
                    double total = 0.0;
                    const double oracle = brute_force(det, amp0, amp1, dphi, k, f, &total);
                    const double lib =
                        library_chain(det, QubitState::from_amplitudes(amp0, amp1), dphi, k, 0.0, f);
                    EXPECT_NEAR(total, 1.0, 1e-10);
                    EXPECT_NEAR(lib, oracle, 1e-10) << "pixels " << pixels << " k " << k << " equal " << equal;
                    if (equal) {
                        const QubitState ideal = QubitState::from_amplitudes(amp0, amp1 * std::polar(1.0, k * dphi));
                        EXPECT_NEAR(oracle, f(ideal.amp0(), ideal.amp1()), 1e-10);
                    }
                }
            }
        }
    }
}

TEST(Protocol, OutcomeProbabilityLaws) {
    for (double sigma : {-2.5, -0.4, 0.0, 0.3, 1.2, 3.0}) {
        const QubitState q = prepare_symmetric(sigma);
        EXPECT_NEAR(outcome_probability(q, Basis::quadrature), (1.0 + std::sin(sigma)) / 2.0, 1e-14);
        EXPECT_NEAR(outcome_probability(q, Basis::symmetric_antisymmetric), std::pow(std::sin(sigma / 2.0), 2), 1e-14);
        EXPECT_NEAR(outcome_probability(q, Basis::quadrature, 0.6), (1.0 + 0.6 * std::sin(sigma)) / 2.0, 1e-14);
        EXPECT_NEAR(outcome_probability(q, Basis::symmetric_antisymmetric, 0.6),
            (1.0 - 0.6 * std::cos(sigma)) / 2.0, 1e-14);
    }
}

TEST(Protocol, PhaseBookkeepingProperty) {
    const DetectorModel det = random_detector(32, 5, true);
    RandomStream rng(42);
    for (int i = 0; i < 300; ++i) {
        GroupPlan plan;
        plan.k = 1 + static_cast<int>(rng.uniform() * 64);
        plan.delta_phi = pi * (2.0 * rng.uniform() - 1.0);
        plan.sigma0 = pi * (2.0 * rng.uniform() - 1.0);
        const GroupResult g = run_group(plan, det, rng);
        ASSERT_EQ(g.detected, plan.k);
        ASSERT_EQ(g.records.size(), static_cast<std::size_t>(plan.k));
        double sum_beta = 0.0;
        for (const auto& r : g.records) {
            sum_beta += r.beta_j;
            EXPECT_EQ(r.beta_j, det.beta()[r.pixel_index]);
        }
        EXPECT_LT(phase_distance(g.qubit.relative_phase(), plan.sigma0 + sum_beta + plan.k * plan.delta_phi), 1e-9);
        EXPECT_LT(phase_distance(compensate(g.qubit, g.sum_beta).relative_phase(), plan.sigma0 + plan.k * plan.delta_phi),
            1e-9);
    }
}

TEST(Protocol, SampledPixelFrequenciesFollowBornRule) {
    const DetectorModel det = random_detector(3, 9, false);
    const JointState joint = apply_specimen(entangle(prepare_symmetric(0.0)), 0.3);
    const std::vector<double> p = detection_probabilities(joint, det);
    RandomStream rng(3);
    std::vector<int> counts(3, 0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const int branch = rng.uniform() < 0.5 ? 0 : 1;
        ++counts[det.sample_pixel(branch, rng.uniform())];
    }
    for (std::size_t j = 0; j < 3; ++j) {
        const double sigma = std::sqrt(p[j] * (1.0 - p[j]) / n);
        EXPECT_NEAR(counts[j] / static_cast<double>(n), p[j], 5.0 * sigma);
    }
}

TEST(Protocol, BoundaryPolicies) {
    std::vector<cplx> a = {1.0, 1.0, 0.0};
    std::vector<cplx> b = {1.0, 0.0, 1.0};
    const DetectorModel det = DetectorModel::from_amplitudes(a, b);
    ASSERT_TRUE(det.is_boundary(1));
    GroupPlan plan;
    plan.k = 50;
    RandomStream rng(1);
    const GroupResult g = run_group(plan, det, rng);
    EXPECT_EQ(g.detected, 50);
    EXPECT_GT(g.discards, 0);
    for (const auto& r : g.records) {
        if (r.boundary) {
            EXPECT_NE(r.pixel_index, 0u);
        }
    }
    EXPECT_NEAR(g.qubit.relative_phase(), 0.0, 1e-12);
    GroupOptions abort;
    abort.boundary_policy = BoundaryPolicy::abort;
    EXPECT_THROW(
        {
            for (int i = 0; i < 20; ++i) {
                run_group(plan, det, rng, abort);
            }
        },
        Error);
}

TEST(Protocol, PoissonGroupSizes) {
    const DetectorModel det = DetectorModel::uniform(4);
    GroupPlan plan;
    plan.k = 6;
    plan.size_mode = GroupSizeMode::poisson;
    RandomStream rng(8);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        sum += run_group(plan, det, rng).detected;
    }
    EXPECT_NEAR(sum / n, 6.0, 5.0 * std::sqrt(6.0 / n));
}

TEST(Protocol, CoherenceDecay) {
    const DetectorModel det = DetectorModel::uniform(2);
    GroupPlan plan;
    plan.k = 4;
    GroupOptions o;
    o.coherence_electrons = 8.0;
    RandomStream rng(1);
    EXPECT_NEAR(run_group(plan, det, rng, o).coherence, std::exp(-0.5), 1e-15);
}

TEST(Protocol, ConventionalTrialRate) {
    RandomStream rng(12);
    const int n = 200000;
    int anti = 0;
    for (int i = 0; i < n; ++i) {
        anti += conventional_trial(0.6, rng) ? 1 : 0;
    }
    const double p = std::pow(std::sin(0.3), 2);
    EXPECT_NEAR(anti / static_cast<double>(n), p, 5.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Protocol, InvalidPlans) {
    GroupPlan plan;
    plan.k = 0;
    EXPECT_THROW(plan.validate(), Error);
    plan.k = 1;
    plan.delta_phi = std::nan("");
    EXPECT_THROW(plan.validate(), Error);
}
