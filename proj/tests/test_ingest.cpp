#include <gtest/gtest.h>

#include <sstream>

#include "compclust.hpp"

using namespace compclust;

namespace {

IngestResult read(const std::string& text, IngestOptions opt = {}) {
  std::istringstream in(text);
  return read_minimal_csv(in, opt);
}

}  // namespace

TEST(Ingest, CloseSameTypeMergedToMidpoint) {
  const auto r = read("x_km,y_km,type\n10,10,Burton\n12,10,Burton\n11,10,Walton\n");
  ASSERT_EQ(r.pattern.size(), 2u);
  EXPECT_EQ(r.pattern.k, 2);
  bool found = false;
  for (const auto& p : r.pattern.points)
    if (r.pattern.type_name(p.mark) == "Burton") {
      EXPECT_DOUBLE_EQ(p.x.x, 11.0);
      EXPECT_DOUBLE_EQ(p.x.y, 10.0);
      found = true;
    }
  EXPECT_TRUE(found);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].lines, (std::vector<int>{2, 3}));
  EXPECT_EQ(r.log[0].type, "Burton");
}

TEST(Ingest, FarSameTypeKept) {
  const auto r = read("x_km,y_km,type\n10,10,Burton\n14,10,Burton\n");
  EXPECT_EQ(r.pattern.size(), 2u);
  EXPECT_TRUE(r.log.empty());
}

TEST(Ingest, TransitiveChainMergedToCentroid) {
  const auto r = read("x_km,y_km,type\n0,0,A\n2,0,A\n4,0,A\n");
  ASSERT_EQ(r.pattern.size(), 1u);
  EXPECT_DOUBLE_EQ(r.pattern[0].x.x, 2.0);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].lines.size(), 3u);
  EXPECT_NE(r.log[0].reason.find("transitive"), std::string::npos);
}

TEST(Ingest, DifferentTypesNeverMerge) {
  const auto r = read("x_km,y_km,type\n0,0,A\n0,0,B\n");
  EXPECT_EQ(r.pattern.size(), 2u);
}

TEST(Ingest, RoundTripWithoutMerging) {
  Rng rng = make_rng(1);
  const Window w(Rect{0, 0, 10, 10});
  ModelParams mp;
  mp.sigma = 0.4;
  mp.p = {0.2, 0.3, 0.5};
  mp.lambda = 40;
  const auto sim = simulate_model(mp, CenterDensity::uniform(w), w, rng);
  std::ostringstream out;
  write_minimal_csv(out, sim.pattern);
  IngestOptions opt;
  opt.merge_threshold_km = 0.0;
  opt.window = w;
  opt.known_types = {"1", "2", "3"};
  const auto back = read(out.str(), opt);
  EXPECT_EQ(back.pattern.points, sim.pattern.points);
  EXPECT_EQ(back.pattern.k, 3);
}

TEST(Ingest, NamedTypesRoundTrip) {
  const std::string text = "x_km,y_km,type\n1.5,2,\"Aston, Easton\"\n3,4,Burton\n";
  const auto a = read(text);
  std::ostringstream out;
  write_minimal_csv(out, a.pattern);
  IngestOptions opt;
  opt.window = a.pattern.window;
  const auto b = read(out.str(), opt);
  EXPECT_EQ(a.pattern.points, b.pattern.points);
  EXPECT_EQ(a.pattern.type_names, b.pattern.type_names);
}

TEST(Ingest, UnknownPlacenames) {
  IngestOptions opt;
  opt.known_types = {"A", "B"};
  const auto r = read("x_km,y_km,type\n0,0,A\n5,5,C\n", opt);
  EXPECT_EQ(r.pattern.k, 3);
  EXPECT_EQ(r.pattern.type_name(2), "C");
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].reason, "new category");
  opt.reject_unknown = true;
  EXPECT_THROW(read("x_km,y_km,type\n0,0,A\n5,5,C\n", opt), InputError);
}

TEST(Ingest, DefaultWindowIsBufferedBoundingBox) {
  const auto r = read("x_km,y_km,type\n10,20,A\n30,25,B\n");
  const auto& b = r.pattern.window.bounding_box();
  EXPECT_DOUBLE_EQ(b.x0, 7.0);
  EXPECT_DOUBLE_EQ(b.y0, 17.0);
  EXPECT_DOUBLE_EQ(b.x1, 33.0);
  EXPECT_DOUBLE_EQ(b.y1, 28.0);
}

TEST(Ingest, SettlementTable) {
  std::istringstream in(
      "county,place,parish,gridref,date\n"
      "Wiltshire,Charlton,Hungerford,SU 230870,1086\n"
      "Wiltshire,Charlcot,Bremhill,SU 2387,\n"
      "Berkshire,Walton,Kintbury,c. SU 3000,\n");
  const auto recs = read_records_csv(in);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[1].line, 3);
  const auto r = ingest_and_clean(recs, AliasTable::defaults());
  // the two Charlton/Charlcot records are 0.64 km apart
  EXPECT_EQ(r.pattern.size(), 2u);
  EXPECT_EQ(r.pattern.k, 2);
  EXPECT_EQ(r.pattern.type_name(0), "Charlton/Charlcot");
  EXPECT_NEAR(r.pattern[0].x.x, (423.05 + 423.5) / 2, 1e-9);
  EXPECT_NEAR(r.pattern[0].x.y, (187.05 + 187.5) / 2, 1e-9);
}

TEST(Ingest, Errors) {
  std::istringstream bad("county,place,parish,gridref,date\nW,Burton,P,SI 1234,\n");
  try {
    ingest_and_clean(read_records_csv(bad), AliasTable::defaults());
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(read("x,y,z\n1,2,A\n"), InputError);
  EXPECT_THROW(read("x_km,y_km,type\n1,abc,A\n"), InputError);
  std::istringstream nocol("county,place\nW,Burton\n");
  EXPECT_THROW(read_records_csv(nocol), InputError);
}

TEST(Aliases, MergeListFile) {
  AliasTable a = AliasTable::defaults();
  std::istringstream in("# extra\nStratton,Stretton\n\n");
  a.load(in);
  EXPECT_EQ(a.canonical("stratton"), "Stretton");
  EXPECT_EQ(a.canonical("Bourton"), "Burton");
  EXPECT_EQ(a.canonical("Unlisted"), "Unlisted");
  std::istringstream bad("only-one-field\n");
  EXPECT_THROW(a.load(bad), InputError);
}
