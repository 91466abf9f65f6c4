#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "eatem/detector.hpp"
#include "eatem/error.hpp"
#include "eatem/estimator.hpp"
#include "eatem/random.hpp"

using namespace eatem;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
    double mean_reported_std = 0.0;
};

Moments repeat(const EstimationMode& mode, double dphi, std::uint64_t budget, int reps, std::uint64_t seed) {
    const DetectorModel det = DetectorModel::uniform(8);
    const RandomStream master(seed);
    std::vector<double> xs;
    Moments m;
    for (int i = 0; i < reps; ++i) {
        RandomStream rng = master.derive(static_cast<std::uint64_t>(i));
        const EstimationResult r = estimate_phase(mode, dphi, budget, det, rng);
        xs.push_back(r.estimate);
        m.mean += r.estimate;
        m.mean_reported_std += r.std_error;
    }
    m.mean /= reps;
    m.mean_reported_std /= reps;
    for (double x : xs) {
        m.var += (x - m.mean) * (x - m.mean);
    }
    m.var /= (reps - 1);
    return m;
}

}  // namespace

TEST(ClosedForm, RequiredElectrons) {
    EXPECT_EQ(required_electrons_conventional(0.02), 10000u);
    EXPECT_EQ(required_electrons_entangled(0.02, 1), 10000u);
    EXPECT_EQ(required_electrons_entangled(0.02, 100), 100u);
    EXPECT_EQ(required_electrons_conventional(0.1), 400u);
    EXPECT_EQ(required_electrons_entangled(0.1, 8), 50u);
    EXPECT_THROW(required_electrons_conventional(0.0), Error);
    EXPECT_THROW(required_electrons_entangled(0.0, 4), Error);
}

TEST(ClosedForm, HeisenbergPoint) {
    EXPECT_EQ(heisenberg_k(0.02), 100);
    EXPECT_EQ(heisenberg_k(0.05), 40);
    const DoseReport d = dose_report(0.02, 100);
    EXPECT_EQ(d.n_conventional, 10000u);
    EXPECT_EQ(d.n_entangled, 100u);
    EXPECT_NEAR(d.advantage, 100.0, 1e-12);
}

TEST(Estimator, ConventionalFisherVariance) {
    const Moments m = repeat(EstimationMode::conventional(), 0.1, 4000, 600, 1);
    EXPECT_NEAR(m.mean, 0.1, 4.0 * std::sqrt(m.var / 600));
    EXPECT_NEAR(m.var * 4000, 1.0, 0.15);
    EXPECT_NEAR(m.mean_reported_std, 1.0 / std::sqrt(4000.0), 1e-12);
}

TEST(Estimator, EntangledVarianceRatioIsK) {
    const int k = 8;
    const std::uint64_t budget = 8000;
    const Moments conv = repeat(EstimationMode::conventional(), 0.05, budget, 600, 2);
    const Moments ent = repeat(EstimationMode::entangled(k), 0.05, budget, 600, 3);
    EXPECT_NEAR(conv.var / ent.var, static_cast<double>(k), 0.25 * k);
    EXPECT_NEAR(ent.mean, 0.05, 4.0 * std::sqrt(ent.var / 600));
    EXPECT_NEAR(std::sqrt(ent.var) / ent.mean_reported_std, 1.0, 0.1);
}

TEST(Estimator, GuardAndBudget) {
    const DetectorModel det = DetectorModel::uniform(4);
    RandomStream rng(1);
    EXPECT_THROW(estimate_phase(EstimationMode::entangled(64), 0.05, 6400, det, rng), Error);
    EXPECT_THROW(estimate_phase(EstimationMode::entangled(8), 0.05, 4, det, rng), Error);
    EXPECT_THROW(estimate_phase(EstimationMode::conventional(), 0.05, 0, det, rng), Error);
    const EstimationResult r = estimate_phase(EstimationMode::entangled(8), 0.05, 1003, det, rng);
    EXPECT_EQ(r.electrons_used, 1000u);
    EXPECT_EQ(r.trials, 125u);
}

TEST(Estimator, ScalingAmbiguityNamesK) {
    const DetectorModel det = DetectorModel::uniform(4);
    RandomStream rng(1);
    try {
        dose_scaling_experiment(0.05, {1, 64}, 0.02, 10, det, rng);
        FAIL() << "expected ambiguity";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ambiguity);
        EXPECT_NE(std::string(e.what()).find("64"), std::string::npos);
    }
}

TEST(Estimator, ScalingSingleKHasNoFit) {
    const DetectorModel det = DetectorModel::uniform(4);
    RandomStream rng(1);
    const ScalingResult r = dose_scaling_experiment(0.05, {4}, 0.05, 50, det, rng);
    EXPECT_EQ(r.rows.size(), 1u);
    EXPECT_FALSE(r.fit.has_value());
}

TEST(LogLogFit, ExactPowerLaw) {
    const std::vector<double> k = {1, 2, 4, 8};
    std::vector<double> n;
    for (double x : k) {
        n.push_back(2500.0 / x);
    }
    const LineFit f = fit_log_log(k, n);
    EXPECT_NEAR(f.slope, -1.0, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(2500.0), 1e-10);
    EXPECT_NEAR(f.slope_stderr, 0.0, 1e-10);
}

TEST(LogLogFit, ConfidenceIntervalUsesStudentT) {
    const std::vector<double> k = {1, 2, 4, 8};
    const std::vector<double> n = {2600, 1200, 640, 300};
    const LineFit f = fit_log_log(k, n);
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < k.size(); ++i) {
        x.push_back(std::log(k[i]));
        y.push_back(std::log(n[i]));
    }
    const double mx = (x[0] + x[1] + x[2] + x[3]) / 4;
    const double my = (y[0] + y[1] + y[2] + y[3]) / 4;
    double sxx = 0;
    double sxy = 0;
    for (int i = 0; i < 4; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    double rss = 0;
    for (int i = 0; i < 4; ++i) {
        const double r = y[i] - (my + slope * (x[i] - mx));
        rss += r * r;
    }
    const double se = std::sqrt(rss / 2 / sxx);
    const double t975_df2 = 0.95 * std::sqrt(2.0 / (4.0 * 0.975 * 0.025));
    EXPECT_NEAR(f.slope, slope, 1e-12);
    EXPECT_NEAR(f.slope_stderr, se, 1e-12);
    EXPECT_NEAR(f.ci_low, slope - t975_df2 * se, 1e-9);
    EXPECT_NEAR(f.ci_high, slope + t975_df2 * se, 1e-9);
}

TEST(SpecimenMap, CheckerboardPairs) {
    const SpecimenMap s = checkerboard_specimen(4, 2, 0.05);
    EXPECT_EQ(s.phase.width, 8u);
    EXPECT_EQ(s.pairs.size(), 12u);
    for (double d : s.pair_differences()) {
        EXPECT_NEAR(d, 0.05, 1e-15);
    }
    EXPECT_TRUE(s.validate().empty());
}

TEST(SpecimenMap, ValidationRules) {
    SpecimenMap s;
    s.phase = Raster{2, 1, {0.0, 0.8}};
    s.pairs = {RegionPair{{0}, {1}}};
    EXPECT_FALSE(s.validate().empty());
    s.pairs = {RegionPair{{0}, {0}}};
    EXPECT_THROW(s.validate(), Error);
    s.pairs = {RegionPair{{0}, {5}}};
    EXPECT_THROW(s.validate(), Error);
    s.pairs = {RegionPair{{}, {1}}};
    EXPECT_THROW(s.validate(), Error);
}

TEST(ImageScan, TotalBudgetMarksIncomplete) {
    const SpecimenMap s = checkerboard_specimen(2, 1, 0.05);
    const DetectorModel det = DetectorModel::uniform(4);
    RandomStream rng(5);
    const ImageScanResult full = image_scan(s, EstimationMode::entangled(4), 400, det, rng);
    EXPECT_FALSE(full.incomplete);
    EXPECT_EQ(full.completed, s.pairs.size());
    EXPECT_EQ(full.total_dose, 400u * s.pairs.size());
    const ImageScanResult cut = image_scan(s, EstimationMode::entangled(4), 400, det, rng, {}, 500);
    EXPECT_TRUE(cut.incomplete);
    EXPECT_LT(cut.completed, s.pairs.size());
    EXPECT_LE(cut.total_dose, 500u);
    EXPECT_TRUE(std::isnan(cut.estimates.back()));
    EXPECT_THROW(image_scan(s, EstimationMode::entangled(4), 0, det, rng), Error);
}

TEST(ImageScan, Deterministic) {
    const SpecimenMap s = checkerboard_specimen(2, 2, 0.05);
    const DetectorModel det = DetectorModel::uniform(4);
    RandomStream a(9);
    RandomStream b(9);
    const auto ra = image_scan(s, EstimationMode::entangled(4), 800, det, a);
    const auto rb = image_scan(s, EstimationMode::entangled(4), 800, det, b);
    EXPECT_EQ(ra.estimates, rb.estimates);
}
