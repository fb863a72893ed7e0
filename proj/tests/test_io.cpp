#include <gtest/gtest.h>

#include <fstream>

#include "downwash/io.hpp"
#include "downwash/model_io.hpp"
#include "downwash/models.hpp"
#include "test_support.hpp"

using namespace downwash;

namespace {

Dataset small_dataset(FormationKind kind, std::size_t k) {
  SweepRequest r;
  r.kind = kind;
  r.k = k;
  r.oracle = OracleKind::kMerging;
  r.sweep.legs = 3;
  r.sweep.samples_per_leg = 7;
  r.noise.seed = 5;
  return generate_sweep(r);
}

void replace_line(const std::filesystem::path& p, std::size_t line_no, const std::string& text) {
  std::string body = read_text_file(p);
  std::size_t start = 0;
  for (std::size_t i = 1; i < line_no; ++i) start = body.find('\n', start) + 1;
  const std::size_t end = body.find('\n', start);
  body.replace(start, end - start, text);
  write_text_file(p, body);
}

}  // namespace

TEST(Numbers, FormatParseIsExact) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.normal(0.0, 1e3) * std::pow(10.0, rng.uniform(-12, 12));
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_THROW(parse_double("1.5x"), IoError);
  EXPECT_THROW(parse_double(""), IoError);
}

TEST(Dataset, RoundTripIsBitExact) {
  const auto dir = support::temp_dir("io_roundtrip");
  for (auto [kind, k] : {std::pair{FormationKind::kSingle, std::size_t{1}},
                         std::pair{FormationKind::kHybrid3, std::size_t{3}},
                         std::pair{FormationKind::kStack, std::size_t{2}}}) {
    const auto ds = small_dataset(kind, k);
    const auto path = dir / "ds.csv";
    save_dataset(ds, path);
    const auto back = load_dataset(path);
    EXPECT_EQ(back.meta.k, ds.meta.k);
    EXPECT_EQ(back.meta.formation, ds.meta.formation);
    EXPECT_EQ(back.meta.oracle, ds.meta.oracle);
    EXPECT_EQ(back.meta.noise.seed, ds.meta.noise.seed);
    EXPECT_EQ(back.meta.sweep.altitudes, ds.meta.sweep.altitudes);
    ASSERT_EQ(back.records.size(), ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      const auto& a = ds.records[i];
      const auto& b = back.records[i];
      EXPECT_EQ(a.time, b.time);
      EXPECT_EQ(a.truth, b.truth);
      EXPECT_EQ(a.measured, b.measured);
      ASSERT_EQ(a.snapshot.k(), b.snapshot.k());
      for (std::size_t j = 0; j < a.snapshot.k(); ++j) {
        EXPECT_EQ(a.snapshot.neighbours[j].position, b.snapshot.neighbours[j].position);
        EXPECT_EQ(a.snapshot.neighbours[j].velocity, b.snapshot.neighbours[j].velocity);
      }
    }
    EXPECT_EQ(dataset_to_csv(back), dataset_to_csv(ds));
  }
}

TEST(Dataset, ColumnsFollowK) {
  const auto cols = dataset_columns(2);
  EXPECT_EQ(cols.size(), 1u + 7u + 1u + 14u + 12u);
  EXPECT_EQ(cols.front(), "time");
  EXPECT_EQ(cols[9], "n0_pn");
  EXPECT_EQ(cols.back(), "meas_tyaw");
}

TEST(Dataset, MalformedRowReportsLine) {
  const auto dir = support::temp_dir("io_malformed");
  const auto path = dir / "ds.csv";
  save_dataset(small_dataset(FormationKind::kSingle, 1), path);
  replace_line(path, 5, "0,1,2");
  try {
    load_dataset(path);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("ds.csv:5:"), std::string::npos) << e.what();
  }
}

TEST(Dataset, BadNumberReportsLine) {
  const auto dir = support::temp_dir("io_badnumber");
  const auto path = dir / "ds.csv";
  const auto ds = small_dataset(FormationKind::kSingle, 1);
  save_dataset(ds, path);
  auto row = split(dataset_to_csv(ds).substr(0), '\n')[3];
  std::string bad(row);
  bad.replace(0, bad.find(','), "abc");
  replace_line(path, 4, bad);
  try {
    load_dataset(path);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
  }
}

TEST(Dataset, MissingFilesAreIoErrors) {
  const auto dir = support::temp_dir("io_missing");
  EXPECT_THROW(load_dataset(dir / "nope.csv"), IoError);
  save_dataset(small_dataset(FormationKind::kSingle, 1), dir / "ds.csv");
  std::filesystem::remove(dir / "ds.json");
  EXPECT_THROW(load_dataset(dir / "ds.csv"), IoError);
}

TEST(Dataset, MissingHeaderIsRejected) {
  const auto dir = support::temp_dir("io_header");
  const auto path = dir / "ds.csv";
  save_dataset(small_dataset(FormationKind::kSingle, 1), path);
  replace_line(path, 1, "time,oops");
  EXPECT_THROW(load_dataset(path), IoError);
}

TEST(ModelFile, LinearRoundTrip) {
  const auto dir = support::temp_dir("io_linear");
  Rng rng(3);
  auto m = LinearAggModel::create(8, 2, rng);
  m.scaling.output_scale = {0.1, 0.2, 1.5, 0.01, 0.02, 1e-9};
  m.metadata["note"] = "hello world";
  save_model(m, dir / "a.model");
  EXPECT_EQ(model_type(dir / "a.model"), ModelType::kLinear);
  const auto back = load_linear_model(dir / "a.model");
  EXPECT_EQ(back.psi, m.psi);
  EXPECT_EQ(back.scaling, m.scaling);
  EXPECT_EQ(back.metadata, m.metadata);
  EXPECT_EQ(model_to_text(back), model_to_text(m));
}

TEST(ModelFile, DeepSetRoundTrip) {
  const auto dir = support::temp_dir("io_deepset");
  Rng rng(4);
  auto m = DeepSetModel::create(8, 5, 2, 1, rng);
  save_model(m, dir / "d.model");
  EXPECT_EQ(model_type(dir / "d.model"), ModelType::kDeepSet);
  const auto back = load_deepset_model(dir / "d.model");
  EXPECT_EQ(back.phi, m.phi);
  EXPECT_EQ(back.big_phi, m.big_phi);
  EXPECT_EQ(back.embedding_dim(), 5u);
  Rng srng(9);
  const auto snap = support::random_snapshot(srng, 3);
  EXPECT_EQ(predict_deepset(back, snap), predict_deepset(m, snap));
}

TEST(ModelFile, GridRoundTrip) {
  const auto dir = support::temp_dir("io_grid");
  const auto ds = small_dataset(FormationKind::kSingle, 1);
  const auto m = fit_grid(ds, grid_spec_for_sweep(ds.meta.sweep, 0.5));
  save_model(m, dir / "g.model");
  EXPECT_EQ(model_type(dir / "g.model"), ModelType::kGrid);
  const auto back = load_grid_model(dir / "g.model");
  EXPECT_EQ(back.spec, m.spec);
  EXPECT_EQ(back.cells, m.cells);
}

TEST(ModelFile, WrongTypeAndTruncationAreErrors) {
  const auto dir = support::temp_dir("io_modelerr");
  Rng rng(5);
  save_model(LinearAggModel::create(4, 1, rng), dir / "a.model");
  EXPECT_THROW(load_deepset_model(dir / "a.model"), IoError);
  EXPECT_THROW(load_linear_model(dir / "missing.model"), IoError);

  std::string text = read_text_file(dir / "a.model");
  text.resize(text.size() / 2);
  write_text_file(dir / "b.model", text);
  EXPECT_THROW(load_linear_model(dir / "b.model"), IoError);

  write_text_file(dir / "c.model", "something else\n");
  EXPECT_THROW(model_type(dir / "c.model"), IoError);
}
