#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hcspmm/cost_model.hpp"
#include "hcspmm/selector.hpp"
#include "hcspmm/timing.hpp"

using namespace hcspmm;

namespace {

const CostParams kParams = CostParams::defaults();

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(EstimateScalar, EmptyWindowCostsFixedFloor) {
    EXPECT_EQ(estimate_scalar(WindowFeatures::from_counts(0, 0), 32, kParams), kParams.alpha_scalar);
}

TEST(EstimateScalar, VariableCostLinearInNnz) {
    const double v1 = estimate_scalar(WindowFeatures::from_counts(40, 20), 32, kParams) - kParams.alpha_scalar;
    const double v2 = estimate_scalar(WindowFeatures::from_counts(80, 20), 32, kParams) - kParams.alpha_scalar;
    EXPECT_LT(rel(v2, 2 * v1), 1e-12);
}

TEST(EstimateScalar, InvariantToNcolsAtFixedNnz) {
    const double base = estimate_scalar(WindowFeatures::from_counts(128, 8), 32, kParams);
    for (index_t ncols = 8; ncols <= 128; ++ncols)
        EXPECT_EQ(estimate_scalar(WindowFeatures::from_counts(128, ncols), 32, kParams), base);
}

TEST(EstimateTile, InvariantToDensity) {
    const double base = estimate_tile(WindowFeatures::from_counts(32, 32), 32, kParams);
    for (index_t k = 1; k <= 15; ++k)
        EXPECT_EQ(estimate_tile(WindowFeatures::from_counts(32 * k, 32), 32, kParams), base);
}

TEST(EstimateTile, BlockTermDoublesFromEightToSixteenColumns) {
    CostParams blocks_only{0, 0, 0, 1e-9, 1e-300};
    const double t8 = estimate_tile(WindowFeatures::from_counts(8, 8), 32, blocks_only);
    const double t16 = estimate_tile(WindowFeatures::from_counts(16, 16), 32, blocks_only);
    EXPECT_NEAR(t16, 2 * t8, 1e-20);
}

TEST(EstimateTile, DimEntersThroughBlocksOfSixteen) {
    const auto f = WindowFeatures::from_counts(20, 10);
    EXPECT_EQ(estimate_tile(f, 17, kParams), estimate_tile(f, 32, kParams));
    EXPECT_LT(estimate_tile(f, 16, kParams), estimate_tile(f, 17, kParams));
}

TEST(Crossover, DefaultsHaveInteriorDensityThreshold) {
    // Solve estimate_scalar = estimate_tile for nnz by hand:
    // nnz* = (alpha_t + 4·2·beta_t + 32·2·gamma_t − alpha_s) / (beta_s · 32).
    const double tile = kParams.alpha_tile + 8 * kParams.beta_tile + 64 * kParams.gamma_tile;
    const double nnz_star = (tile - kParams.alpha_scalar) / (kParams.beta_scalar * 32);
    const double d_star = nnz_star / (16.0 * 32.0);
    const auto d = crossover_density(32, 32, kParams);
    ASSERT_TRUE(d.has_value());
    EXPECT_NEAR(*d, d_star, 1e-12);
    EXPECT_GT(*d, 1.0 / 16);
    EXPECT_LT(*d, 15.0 / 16);

    const auto below = WindowFeatures::from_counts(static_cast<index_t>(std::floor(nnz_star)), 32);
    const auto above = WindowFeatures::from_counts(static_cast<index_t>(std::ceil(nnz_star)), 32);
    EXPECT_LT(estimate_scalar(below, 32, kParams), estimate_tile(below, 32, kParams));
    EXPECT_GT(estimate_scalar(above, 32, kParams), estimate_tile(above, 32, kParams));
}

TEST(Defaults, MemoryTermDominatesAtReferenceWindow) {
    EXPECT_TRUE(tile_memory_dominates(kParams, 32, 32));
    EXPECT_NO_THROW(kParams.validate());
}

TEST(Defaults, ConfigFileMatchesCompiledDefaults) {
    const auto f = load_cost_params(HCSPMM_SOURCE_DIR "/config/default_cost_params.json");
    EXPECT_EQ(f.params, kParams);
    EXPECT_EQ(f.version, CostParamsFile::kVersion);
}

TEST(Params, Validation) {
    CostParams p = kParams;
    p.gamma_tile = 0;
    EXPECT_THROW(p.validate(), InputError);
    p = kParams;
    p.alpha_scalar = -1;
    EXPECT_THROW(p.validate(), InputError);
}

TEST(Params, JsonRoundTripAndMissingField) {
    CostParamsFile f{kParams, {"measured", "2026-01-01", 77}};
    const auto j = to_json(f);
    const auto back = cost_params_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.params, kParams);
    EXPECT_EQ(back.provenance.provider, "measured");
    EXPECT_EQ(back.provenance.sample_count, 77);

    auto broken = nlohmann::json::parse(j.dump());
    broken.erase("beta_tile");
    EXPECT_THROW(cost_params_from_json(broken), InputError);
}

namespace {

std::vector<CalibrationSample> synthetic_samples(const CostParams& p) {
    std::vector<CalibrationSample> out;
    for (index_t ncols : {1, 5, 8, 13, 32, 64, 100, 130})
        for (index_t k : {1, 4, 9, 15})
            for (index_t dim : {16, 32, 47}) {
                const auto f = WindowFeatures::from_counts(k * ncols, ncols);
                out.push_back({f, dim, estimate_scalar(f, dim, p), estimate_tile(f, dim, p)});
            }
    return out;
}

}  // namespace

TEST(Calibrate, RecoversKnownParamsNoiseless) {
    const CostParams truth{3e-8, 5e-11, 1e-8, 7e-9, 2e-9};
    const auto res = calibrate(synthetic_samples(truth));
    EXPECT_LT(rel(res.params.alpha_scalar, truth.alpha_scalar), 1e-9);
    EXPECT_LT(rel(res.params.beta_scalar, truth.beta_scalar), 1e-9);
    EXPECT_LT(rel(res.params.alpha_tile, truth.alpha_tile), 1e-9);
    EXPECT_LT(rel(res.params.beta_tile, truth.beta_tile), 1e-9);
    EXPECT_LT(rel(res.params.gamma_tile, truth.gamma_tile), 1e-9);
    EXPECT_NEAR(res.r2_scalar, 1.0, 1e-12);
    EXPECT_NEAR(res.r2_tile, 1.0, 1e-12);
    EXPECT_TRUE(res.warnings.empty());
}

TEST(Calibrate, Idempotent) {
    const auto once = calibrate(synthetic_samples(kParams)).params;
    const auto twice = calibrate(synthetic_samples(once)).params;
    EXPECT_LT(rel(twice.gamma_tile, kParams.gamma_tile), 1e-9);
    EXPECT_LT(rel(twice.beta_scalar, kParams.beta_scalar), 1e-9);
}

TEST(Calibrate, Errors) {
    auto samples = synthetic_samples(kParams);
    auto scalar_only = samples;
    for (auto& s : scalar_only) s.t_tile.reset();
    EXPECT_THROW(calibrate(scalar_only), InputError);

    std::vector<CalibrationSample> identical(10, samples.front());
    EXPECT_THROW(calibrate(identical), InputError);

    // Three distinct rows but collinear tile design (ncols fixed, dim fixed).
    std::vector<CalibrationSample> collinear;
    for (index_t k = 1; k <= 5; ++k) {
        const auto f = WindowFeatures::from_counts(k * 16, 16);
        collinear.push_back({f, 32 * k, 1e-6 * static_cast<double>(k), 1e-6 * static_cast<double>(k)});
    }
    EXPECT_THROW(calibrate(collinear), InputError);
}

TEST(Calibrate, NegativeFitIsClampedWithWarning) {
    std::vector<CalibrationSample> samples;
    for (index_t ncols : {5, 12, 19, 30, 41})
        for (index_t k : {1, 8, 15}) {
            const auto f = WindowFeatures::from_counts(k * ncols, ncols);
            // Tile time falls with ncols: the load coefficient fits negative.
            samples.push_back({f, 32, 1e-8 + 1e-11 * static_cast<double>(f.nnz * 32),
                               1e-6 - 1e-9 * static_cast<double>(ncols)});
        }
    const auto res = calibrate(samples);
    EXPECT_GT(res.params.gamma_tile, 0.0);
    EXPECT_FALSE(res.warnings.empty());
    EXPECT_NO_THROW(res.params.validate());
}

TEST(Sweep, DensityCurveShape) {
    const auto pts = sweep_density(32, 32, kParams);
    ASSERT_EQ(pts.size(), 15u);
    EXPECT_DOUBLE_EQ(pts.front().density, 1.0 / 16);
    EXPECT_DOUBLE_EQ(pts.back().density, 15.0 / 16);
    for (const auto& p : pts) EXPECT_EQ(p.t_tile, pts.front().t_tile);
    for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GT(pts[i].t_scalar, pts[i - 1].t_scalar);
}

TEST(Sweep, NcolsCurveShape) {
    const auto pts = sweep_ncols(128, 32, kParams);
    ASSERT_FALSE(pts.empty());
    EXPECT_EQ(pts.front().ncols, 8);
    EXPECT_EQ(pts.back().ncols, 128);
    for (const auto& p : pts) EXPECT_EQ(p.t_scalar, pts.front().t_scalar);
    EXPECT_GT(pts.back().t_tile, pts.front().t_tile);
}

TEST(MeasuredProvider, TimesArePositive) {
    const auto w = generate_synthetic(16, 64, 1);
    const auto t = measured_cpu_times(w, 32, 5);
    EXPECT_GT(t.t_scalar, 0);
    EXPECT_GT(t.t_tile, 0);

    RowWindow<double> empty;
    empty.row_count = 16;
    empty.entry_ptr.assign(17, 0);
    const auto te = measured_cpu_times(empty, 32, 5);
    EXPECT_GE(te.t_scalar, kMeasurementFloor);
    EXPECT_GE(te.t_tile, kMeasurementFloor);
    EXPECT_THROW(measured_cpu_times(w, 32, 0), InputError);
}

TEST(MeasuredProvider, DenseWindowCostsMoreOnScalarPath) {
    std::vector<Triplet<double>> full;
    for (index_t r = 0; r < 16; ++r)
        for (index_t c = 0; c < 8; ++c) full.push_back({r, c, 1.0});
    const auto dense = make_window(csr_from_triplets<double>(16, 8, full), 0, 0, 16);
    const auto one = make_window(csr_from_triplets<double>(16, 8, {{0, 0, 1.0}}), 0, 0, 16);
    const auto td = measured_cpu_times(dense, 32, 200);
    const auto t1 = measured_cpu_times(one, 32, 200);
    EXPECT_GT(td.t_scalar, t1.t_scalar);
}

TEST(MeasuredProvider, CalibratedFitExplainsHeldOutWindows) {
    // Host speed drifts in phases, so each window keeps the median of several
    // short batches, interleaved across the whole grid. A per-window minimum
    // rewards whichever windows happened to land in a fast phase.
    struct Job {
        RowWindow<double> w;
        index_t dim;
    };
    std::vector<Job> jobs;
    std::uint64_t seed = 1;
    for (index_t ncols = 1; ncols <= 128; ncols += 6)
        for (index_t k : {1, 4, 8, 12, 15})
            for (index_t dim : {32, 96}) jobs.push_back({generate_synthetic(ncols, k * ncols, seed++), dim});
    Rng rng(7);
    std::shuffle(jobs.begin(), jobs.end(), rng);

    MeasuredCpuProvider provider;
    const int rounds = 15;
    std::vector<std::vector<double>> ts(jobs.size()), tt(jobs.size());
    for (int round = 0; round < rounds; ++round)
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            const auto t = provider.measure(jobs[i].w, jobs[i].dim, 20);
            ts[i].push_back(t.t_scalar);
            tt[i].push_back(t.t_tile);
        }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    std::vector<CalibrationSample> samples;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        samples.push_back({features(jobs[i].w), jobs[i].dim, median(ts[i]), median(tt[i])});

    const auto cut = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() * 3 / 4);
    const std::vector<CalibrationSample> fit(samples.begin(), cut), held_out(cut, samples.end());
    const auto res = calibrate(fit);
    const auto [r2s, r2t] = calibration_r2(res.params, held_out);
    EXPECT_GE(r2s, 0.9);
    EXPECT_GE(r2t, 0.9);
}

TEST(CsvProvider, NearestDensityAndMissingNcols) {
    std::istringstream in("ncols,density,t_scalar,t_tile\n4,0.25,1e-6,2e-6\n4,0.75,3e-6,2e-6\n");
    auto provider = CsvTimingProvider::from_stream(in, "t.csv");
    const auto sparse = provider.measure(generate_synthetic(4, 16, 1), 32, 1);  // density 0.25
    EXPECT_EQ(sparse.t_scalar, 1e-6);
    const auto dense = provider.measure(generate_synthetic(4, 52, 1), 32, 1);  // density 0.8125
    EXPECT_EQ(dense.t_scalar, 3e-6);
    EXPECT_THROW(provider.measure(generate_synthetic(5, 10, 1), 32, 1), InputError);

    std::istringstream bad_header("a,b,c,d\n");
    EXPECT_THROW(CsvTimingProvider::from_stream(bad_header, "t.csv"), InputError);
}
