#include <gtest/gtest.h>

#include <cmath>

#include "downwash/eval.hpp"
#include "test_support.hpp"

using namespace downwash;

namespace {

const FormationSpec kLF3{FormationKind::kLeaderFollower, 3, 0.5, 0.5};
const FormationSpec kSxS2{FormationKind::kSideBySide, 2, 0.5, 0.5};

Predictor additive() { return oracle_predictor(OracleKind::kAdditive, {}, {}); }
Predictor merging() { return oracle_predictor(OracleKind::kMerging, {}, {}); }

const GridLookupModel& naive_grid() {
  static const GridLookupModel m = [] {
    SweepRequest r;
    r.sweep.legs = 41;
    r.sweep.samples_per_leg = 101;
    r.noise = {0.0, 0.0, 0};
    const auto ds = generate_sweep(r);
    return fit_grid(ds, grid_spec_for_sweep(r.sweep, 0.02));
  }();
  return m;
}

}  // namespace

TEST(PlaneError, TruthAgainstItselfIsZero) {
  const auto e = integrated_plane_error(merging(), merging(), {kLF3, 1.3, 2.0, 32});
  for (std::size_t a = 0; a < 5; ++a) {
    ASSERT_TRUE(e[a].has_value()) << a;
    EXPECT_EQ(*e[a], 0.0);
  }
  EXPECT_FALSE(e[5].has_value());
}

TEST(PlaneError, ZeroPredictorScoresOne) {
  const auto e = integrated_plane_error(zero_predictor(), merging(), {kLF3, 0.8, 2.0, 32});
  for (std::size_t a = 0; a < 5; ++a) EXPECT_DOUBLE_EQ(*e[a], 1.0);
}

TEST(PlaneError, ScaledPredictorScoresItsScale) {
  const auto truth = additive();
  const Predictor half = [&](const FormationSnapshot& s) { return wrench_scale(truth(s), 1.5); };
  const auto e = integrated_plane_error(half, truth, {kSxS2, 0.8, 2.0, 16});
  for (std::size_t a = 0; a < 5; ++a) EXPECT_NEAR(*e[a], 0.5, 1e-12);
}

TEST(PlaneError, RejectsCoarseResolution) {
  EXPECT_THROW(integrated_plane_error(zero_predictor(), merging(), {kLF3, 1.3, 2.0, 7}),
               std::invalid_argument);
}

TEST(PlaneError, StableUnderRefinement) {
  const auto coarse = integrated_plane_error(additive(), merging(), {kLF3, 1.3, 2.0, 64});
  const auto fine = integrated_plane_error(additive(), merging(), {kLF3, 1.3, 2.0, 128});
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(*coarse[a], *fine[a], 0.02 * *fine[a]) << a;
}

TEST(PlaneError, NaiveGridIsWorseAgainstMergingTruth) {
  const auto naive = as_predictor(naive_grid());
  const PlaneSpec plane{kLF3, 1.3, 2.0, 64};
  const auto vs_additive = integrated_plane_error(naive, additive(), plane);
  const auto vs_merging = integrated_plane_error(naive, merging(), plane);
  EXPECT_LT(*vs_additive[kD], 0.05);
  EXPECT_GT(*vs_merging[kD], *vs_additive[kD]);
}

TEST(Midpoints, SymmetricAndInside) {
  const auto m = midpoint_nodes(2.0, 4);
  ASSERT_EQ(m.size(), 4u);
  EXPECT_DOUBLE_EQ(m[0], -0.75);
  EXPECT_DOUBLE_EQ(m[3], 0.75);
}

TEST(Peaks, CountsSeparatedMaxima) {
  EXPECT_EQ(count_peaks({0, 1, 0, 1, 0, 1, 0}), 3u);
  EXPECT_EQ(count_peaks({0, 1, 2, 3, 2, 1, 0}), 1u);
  EXPECT_EQ(count_peaks({0, 0, 0}), 0u);
  // Second bump is below a quarter of the maximum.
  EXPECT_EQ(count_peaks({0, 10, 0, 2, 0}), 1u);
  // Dip between the maxima is shallower than a tenth of the maximum.
  EXPECT_EQ(count_peaks({0, 10, 9.5, 10, 0}), 1u);
  // Plateau counts once.
  EXPECT_EQ(count_peaks({0, 5, 5, 0}), 1u);
}

TEST(Slice, AdditiveLowShowsThreeColumns) {
  const auto s = slice_profile({}, additive(), kLF3, 0.3, SliceAxis::kE, 2.0, 201);
  EXPECT_EQ(count_peaks(s.truth), 3u);
  std::vector<double> where;
  for (std::size_t i = 1; i + 1 < s.truth.size(); ++i) {
    if (s.truth[i] >= s.truth[i - 1] && s.truth[i] > s.truth[i + 1]) where.push_back(s.positions[i]);
  }
  ASSERT_EQ(where.size(), 3u);
  EXPECT_NEAR(where[1] - where[0], 0.5, 0.02);
  EXPECT_NEAR(where[2] - where[1], 0.5, 0.02);
}

TEST(Slice, SingleVehicleHasOnePeak) {
  const FormationSpec one{FormationKind::kSingle, 1, 0.5, 0.5};
  const auto s = slice_profile({}, merging(), one, 0.8, SliceAxis::kN, 2.0, 201);
  EXPECT_EQ(count_peaks(s.truth), 1u);
}

TEST(Slice, MergingHasFewerPeaksThanAdditive) {
  const auto a = slice_profile({{"additive", additive()}}, merging(), kLF3, 1.3, SliceAxis::kE, 2.0, 201);
  ASSERT_EQ(a.model_names, std::vector<std::string>{"additive"});
  EXPECT_LT(count_peaks(a.truth), count_peaks(a.model_values[0]));
  EXPECT_EQ(count_peaks(a.truth), 1u);
}

TEST(Slice, CsvHasModelColumns) {
  const auto s = slice_profile({{"zero", zero_predictor()}}, additive(), kLF3, 0.8, SliceAxis::kE, 2.0, 5);
  const auto csv = slice_to_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "e,zero,ground_truth");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Contour, SideBySideIsMirrorSymmetricInN) {
  const auto g = contour_grid(merging(), kSxS2, 0.8, 2.0, 48);
  const auto n = g.n.size(), e = g.e.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < e; ++j) {
      EXPECT_NEAR(g.values[i * e + j], g.values[(n - 1 - i) * e + j], 1e-9);
    }
  }
}

TEST(Contour, MergingSupportIsSmaller) {
  const auto add = contour_grid(additive(), kLF3, 1.3, 2.0, 96);
  const auto mer = contour_grid(merging(), kLF3, 1.3, 2.0, 96);
  EXPECT_GT(support_area(add), support_area(mer));
  EXPECT_GT(mer.max(), add.max());
}

TEST(Contour, ZeroPredictorHasNoSupport) {
  const auto g = contour_grid(zero_predictor(), kLF3, 1.3, 2.0, 16);
  EXPECT_EQ(g.max(), 0.0);
  EXPECT_EQ(support_area(g), 0.0);
  EXPECT_EQ(contour_to_csv(g).substr(0, 8), "n,e,f_d\n");
}

TEST(Benchmark, SelfIsExactAndWins) {
  BenchmarkRequest req;
  req.models = {{"zero", zero_predictor()}, {"self", merging()}};
  req.references = {{"oracle_merging", merging()}};
  req.formations = {kLF3, kSxS2};
  req.altitudes = {0.8, 1.3};
  req.resolution = 16;
  const auto r = benchmark(req);
  ASSERT_EQ(r.rows.size(), 2u * 2u * 3u);
  const auto* self = r.find("leader_follower_k3", 1.3, "self");
  ASSERT_NE(self, nullptr);
  EXPECT_EQ(*self->errors[kD], 0.0);
  EXPECT_TRUE(self->wins[kD]);
  const auto* ref = r.find("leader_follower_k3", 1.3, "oracle_merging");
  ASSERT_NE(ref, nullptr);
  EXPECT_EQ(*ref->errors[kD], 0.0);
  for (bool w : ref->wins) EXPECT_FALSE(w);
  EXPECT_EQ(r.rows[2].model, "oracle_merging");
}

TEST(Benchmark, CsvIsDeterministicAndShaped) {
  BenchmarkRequest req;
  req.models = {{"naive_linear", as_predictor(naive_grid())}, {"zero", zero_predictor()}};
  req.formations = {kLF3};
  req.altitudes = {0.3, 1.3};
  req.resolution = 16;
  const auto a = report_to_csv(benchmark(req));
  const auto b = report_to_csv(benchmark(req));
  EXPECT_EQ(a, b);
  const auto header = a.substr(0, a.find('\n'));
  EXPECT_EQ(header, "formation,k,altitude,model,err_N,err_E,err_D,err_Pitch,err_Roll,err_Yaw,wins");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 5);
  EXPECT_NE(a.find("n/a"), std::string::npos);
  const auto j = report_to_json(benchmark(req));
  EXPECT_EQ(j["rows"].size(), 4u);
  EXPECT_TRUE(j["rows"][0]["errors"]["Yaw"].is_null());
}
