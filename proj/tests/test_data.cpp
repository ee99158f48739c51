#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mulaaip/data.hpp"
#include "mulaaip/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mulaaip;
using namespace mulaaip::data;

namespace {

const char* kHeader =
    "pair_id,ab_heavy_seq,ab_light_seq,ag_seq,ab_structure_path,ag_structure_path,ab_chains,ag_chains,label,"
    "label_kind,temperature_k\n";

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

void check_partition(const std::vector<Fold>& folds, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& f : folds) {
    CHECK(std::is_sorted(f.train.begin(), f.train.end()));
    CHECK(std::is_sorted(f.test.begin(), f.test.end()));
    CHECK(f.train.size() + f.test.size() == n);
    std::set<std::size_t> train(f.train.begin(), f.train.end());
    for (std::size_t t : f.test) {
      CHECK_FALSE(train.contains(t));
      ++seen[t];
    }
  }
  for (int s : seen) CHECK(s == 1);
}

}  // namespace

TEST_CASE("free energy from dissociation constants") {
  CHECK(dg_from_kd(1.0, 310.0) == 0.0);
  CHECK(dg_from_kd(1e-9, 298.0) == doctest::Approx(-12.28).epsilon(0.01 / 12.28));
  CHECK(std::abs(dg_from_kd(1e-9) - 1.9872e-3 * 298 * std::log(1e-9)) < 1e-12);
  const double rt_ln2 = 1.9872e-3 * 298 * std::log(2.0);
  CHECK(std::abs(dg_from_kd(0.5e-7) - (dg_from_kd(1e-7) - rt_ln2)) < 1e-12);
  double prev = -1e300;
  for (double kd : {1e-12, 1e-9, 1e-6, 1e-3, 1.0, 10.0}) {
    CHECK(dg_from_kd(kd) > prev);
    prev = dg_from_kd(kd);
  }
  CHECK(code_of([] { dg_from_kd(0.0); }) == ErrorCode::NonPositiveKd);
  CHECK(code_of([] { dg_from_kd(-1e-9); }) == ErrorCode::NonPositiveKd);
  CHECK(code_of([] { dg_from_kd(1e-9, 0.0); }) == ErrorCode::ConfigError);
}

TEST_CASE("mutant free energies") {
  CHECK(dg_from_ddg(0.0, -11.5) == -11.5);
  CHECK(dg_from_ddg(2.0, -12.0) == -10.0);
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    // Multiples of 1/64 keep the sum exact.
    const double x = std::round(rng.uniform(-5, 5) * 64) / 64, w = std::round(rng.uniform(-15, -5) * 64) / 64;
    CHECK(ddg_from_dg(dg_from_ddg(x, w), w) == x);
  }
}

TEST_CASE("k-fold splits") {
  SUBCASE("one record per fold") {
    const auto folds = kfold_split(10, 10, 3);
    REQUIRE(folds.size() == 10);
    for (const auto& f : folds) CHECK(f.test.size() == 1);
    check_partition(folds, 10);
  }
  SUBCASE("uneven sizes") {
    const auto folds = kfold_split(103, 10, 7);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.test.size());
    CHECK(std::count(sizes.begin(), sizes.end(), 11u) == 3);
    CHECK(std::count(sizes.begin(), sizes.end(), 10u) == 7);
    check_partition(folds, 103);
  }
  SUBCASE("deterministic per seed") {
    const auto a = kfold_split(50, 5, 11);
    const auto b = kfold_split(50, 5, 11);
    const auto c = kfold_split(50, 5, 12);
    for (std::size_t k = 0; k < 5; ++k) CHECK(a[k].test == b[k].test);
    bool differs = false;
    for (std::size_t k = 0; k < 5; ++k) differs |= a[k].test != c[k].test;
    CHECK(differs);
  }
  SUBCASE("errors") {
    CHECK(code_of([] { kfold_split(5, 10, 0); }) == ErrorCode::TooFewRecords);
    CHECK(code_of([] { kfold_split(5, 1, 0); }) == ErrorCode::ConfigError);
  }
}

TEST_CASE("grouped folds keep groups together") {
  std::vector<std::string> groups;
  Rng rng(4);
  for (int i = 0; i < 60; ++i) groups.push_back("g" + std::to_string(rng.below(14)));
  const auto folds = kfold_split_grouped(groups, 5, 9);
  REQUIRE(folds.size() == 5);
  check_partition(folds, groups.size());
  for (const auto& f : folds) {
    std::set<std::string> test_groups;
    for (std::size_t t : f.test) test_groups.insert(groups[t]);
    for (std::size_t t : f.train) CHECK_FALSE(test_groups.contains(groups[t]));
  }
  const std::vector<std::string> few{"a", "a", "b"};
  CHECK(code_of([&] { kfold_split_grouped(few, 3, 0); }) == ErrorCode::TooFewRecords);
}

TEST_CASE("holdout split") {
  std::vector<std::size_t> idx(20);
  for (std::size_t i = 0; i < 20; ++i) idx[i] = 100 + i;
  const auto [train, val] = holdout_split(idx, 0.1, 5);
  CHECK(val.size() == 2);
  CHECK(train.size() == 18);
  std::vector<std::size_t> all(train);
  all.insert(all.end(), val.begin(), val.end());
  std::sort(all.begin(), all.end());
  CHECK(all == idx);
  const std::vector<std::size_t> two{1, 2};
  CHECK(holdout_split(two, 0.0, 1).second.size() == 1);
  CHECK(holdout_split(two, 0.9, 1).first.size() == 1);
  const std::vector<std::size_t> one{1};
  CHECK(code_of([&] { holdout_split(one, 0.1, 1); }) == ErrorCode::EmptySplit);
}

TEST_CASE("regression metrics") {
  const std::vector<double> y{1, 2, 3};
  auto m = regression_metrics(y, y);
  CHECK(m.mae == 0.0);
  CHECK(m.pcc == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> neg{-1, -2, -3};
  CHECK(regression_metrics(neg, y).pcc == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> p{1, 2, 4};
  m = regression_metrics(p, y);
  CHECK(m.mae == doctest::Approx(1.0 / 3).epsilon(1e-15));
  // Centred sums: cross 3, squares 14/3 and 2.
  CHECK(m.pcc == doctest::Approx(3.0 / std::sqrt(14.0 / 3.0 * 2.0)).epsilon(1e-12));
  CHECK(std::abs(m.pcc - oracle::pcc(p, y)) < 1e-12);
  const std::vector<double> flat{2, 2, 2};
  m = regression_metrics(flat, y);
  CHECK(m.pcc == 0.0);
  CHECK(m.pcc_degenerate);
  const std::vector<double> shorter{1, 2};
  CHECK(code_of([&] { regression_metrics(shorter, y); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("classification metrics") {
  SUBCASE("perfect predictions") {
    const std::vector<double> prob{1, 1, 0, 0}, y{1, 1, 0, 0};
    const auto m = classification_metrics(prob, y);
    CHECK(m.acc == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK(m.roc_auc == 1.0);
    CHECK(m.g_mean == 1.0);
    CHECK(m.mcc == 1.0);
  }
  SUBCASE("all positive predictions") {
    const std::vector<double> prob{0.9, 0.9, 0.9, 0.9}, y{1, 1, 0, 0};
    const auto m = classification_metrics(prob, y);
    CHECK(m.acc == 0.5);
    CHECK(m.g_mean == 0.0);
    CHECK(m.mcc == 0.0);
    CHECK(m.mcc_degenerate);
  }
  SUBCASE("pair-counted AUC") {
    const std::vector<double> prob{0.9, 0.8, 0.3, 0.1}, y{1, 0, 1, 0};
    CHECK(classification_metrics(prob, y).roc_auc == 0.75);
  }
  SUBCASE("single class") {
    const std::vector<double> prob{0.2, 0.7}, y{1, 1};
    const auto m = classification_metrics(prob, y);
    CHECK(m.roc_auc == 0.5);
    CHECK(m.auc_degenerate);
  }
  SUBCASE("threshold is inclusive") {
    const std::vector<double> prob{0.5}, y{1};
    CHECK(classification_metrics(prob, y).acc == 1.0);
  }
}

TEST_CASE("metrics agree with loop and pair-count oracles") {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(50);
    std::vector<double> p(n), y(n), prob(n), cls(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(-5, 5);
      y[i] = rng.uniform(-5, 5);
      // Coarse grid so ties occur.
      prob[i] = std::round(rng.uniform() * 10) / 10;
      cls[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    const auto r = regression_metrics(p, y);
    CHECK(std::abs(r.mae - oracle::mae(p, y)) < 1e-12);
    if (n > 1) CHECK(std::abs(r.pcc - oracle::pcc(p, y)) < 1e-12);
    const auto c = classification_metrics(prob, cls);
    const auto conf = oracle::confusion(prob, cls);
    CHECK(std::abs(c.acc - oracle::accuracy(conf)) < 1e-12);
    CHECK(std::abs(c.f1 - oracle::f1(conf)) < 1e-12);
    CHECK(std::abs(c.g_mean - oracle::g_mean(conf)) < 1e-12);
    CHECK(std::abs(c.mcc - oracle::mcc(conf)) < 1e-12);
    CHECK(std::abs(c.roc_auc - oracle::roc_auc(prob, cls)) < 1e-12);
    for (double v : {c.acc, c.f1, c.roc_auc, c.g_mean}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(std::abs(c.mcc) <= 1.0);
  }
}

TEST_CASE("metrics report") {
  std::vector<MetricReport> reports;
  const std::vector<double> y{1, 2, 3, 4};
  const std::vector<double> p1{1, 2, 3, 5}, p2{2, 2, 3, 3};
  reports.push_back(evaluate_predictions("0", model::Task::Affinity, p1, y));
  reports.push_back(evaluate_predictions("1", model::Task::Affinity, p2, y));
  const std::string csv = format_metrics_csv(reports, model::Task::Affinity);
  const auto first_nl = csv.find('\n');
  CHECK(csv.substr(0, first_nl) == "fold,mae,pcc");
  CHECK(csv.find("\n0,0.25,") != std::string::npos);
  CHECK(csv.find("\n1,0.5,") != std::string::npos);
  // mean 0.375, sample std of {0.25, 0.5}
  CHECK(csv.find("\nmean±std,0.375±" + format_double(std::sqrt(0.03125)) + ",") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const std::vector<double> prob{0.9, 0.1}, cls{1, 0};
  const std::vector<MetricReport> cr{evaluate_predictions("a", model::Task::Neutralization, prob, cls)};
  const std::string ccsv = format_metrics_csv(cr, model::Task::Neutralization);
  CHECK(ccsv.starts_with("fold,acc,f1,roc_auc,g_mean,mcc\na,1,1,1,1,1\nmean±std,1±0,1±0,1±0,1±0,1±0\n"));
}

TEST_CASE("shortest round-trip number formatting") {
  for (double v : {0.1, 1.0 / 3, -12.28, 1e-300, 123456789.0, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("CSV helpers") {
  CHECK(split_csv_line("a,\"b,c\",d") == std::vector<std::string>{"a", "b,c", "d"});
  CHECK(split_csv_line("\"say \"\"hi\"\"\",") == std::vector<std::string>{"say \"hi\"", ""});
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("q\"") == "\"q\"\"\"");
}

TEST_CASE("manifest parsing") {
  SUBCASE("round trip") {
    const std::string text = std::string(kHeader) +
                             "p1,EVQL,DIQM,MKTA,ab.pdb,ag.pdb,H;L,A,-11.5,dG,298\n"
                             "p2,evql,,MKTA,,,H,A;B,-9.25,dG_from_ddG,\n";
    const auto records = parse_manifest(text);
    REQUIRE(records.size() == 2);
    CHECK(records[0].ab_chains == std::vector<std::string>{"H", "L"});
    CHECK(records[0].ab_structure_path == std::optional<std::string>("ab.pdb"));
    CHECK(records[1].ab_heavy_seq == "EVQL");
    CHECK(records[1].ab_light_seq.empty());
    CHECK_FALSE(records[1].ab_structure_path.has_value());
    CHECK(records[1].ag_chains == std::vector<std::string>{"A", "B"});
    CHECK(records[1].label_kind == LabelKind::DeltaGFromDdg);
    CHECK(records[1].temperature_k == kDefaultTemperatureK);
    CHECK(parse_manifest(format_manifest(records)) == records);
  }
  SUBCASE("columns in any order") {
    const std::string text =
        "label,pair_id,ab_heavy_seq,ab_light_seq,ag_seq,ab_structure_path,ag_structure_path,ab_chains,ag_chains,"
        "label_kind,temperature_k\n1,n1,EVQL,,MKT,,,H,A,neutralization,\n";
    const auto r = parse_manifest(text);
    REQUIRE(r.size() == 1);
    CHECK(r[0].pair_id == "n1");
    CHECK(r[0].label == 1.0);
  }
  SUBCASE("errors name the line") {
    auto message = [](const std::string& text) {
      try {
        parse_manifest(text);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadManifest);
        return std::string(e.what());
      }
      return std::string("no error");
    };
    CHECK(message(std::string(kHeader) + "p1,EVQL,,MKT,,,H,A,abc,dG,\n").find("line 2") != std::string::npos);
    CHECK(message(std::string(kHeader) + "p1,EVQL,,MKT,,,H,A,0.5,neutralization,\n").find("line 2") !=
          std::string::npos);
    CHECK(message(std::string(kHeader) + "p1,EVQL,,MKT,,,H,A,1,kd,\n").find("line 2") != std::string::npos);
    CHECK(message("pair_id,label\np,1\n").find("line 1") != std::string::npos);
    CHECK(message(std::string(kHeader) + "p1,,,MKT,,,H,A,1,dG,\n").find("line 2") != std::string::npos);
    CHECK(message(std::string(kHeader) + "p1,EVQL,,MKT,,,H,A,1,dG\n").find("line 2") != std::string::npos);
  }
}

TEST_CASE("dataset assembly deduplicates entities and pools embeddings") {
  std::vector<PairRecord> records(3);
  for (std::size_t i = 0; i < 3; ++i) {
    records[i].pair_id = "p" + std::to_string(i);
    records[i].ab_heavy_seq = i < 2 ? "EVQ" : "QVQ";
    records[i].ag_seq = "MK";
    records[i].label = -10.0 - static_cast<double>(i);
  }
  graphs::EmbeddingStore emb;
  emb.add("EVQ", graphs::EmbeddingMatrix{2, 2, {1, 2, 3, 4}});
  emb.add("QVQ", graphs::EmbeddingMatrix{1, 2, {5, 6}});
  emb.add("MK", graphs::EmbeddingMatrix{1, 2, {1, 1}});
  const data::StructureLookup none = [](const std::string&, const std::vector<std::string>&) {
    return std::shared_ptr<const graphs::StructuralGraph>();
  };
  const auto d = assemble_dataset(records, emb, none, model::Task::Affinity);
  CHECK(d.antibodies.size() == 2);
  CHECK(d.antigens.size() == 1);
  CHECK(d.pairs[0].antibody == d.pairs[1].antibody);
  CHECK(d.antibodies[d.pairs[0].antibody].heavy == std::vector<double>{2, 3});
  CHECK(d.antibodies[0].light.empty());
  CHECK(d.pairs[2].label == -12.0);
  CHECK(code_of([&] { assemble_dataset(records, emb, none, model::Task::Neutralization); }) ==
        ErrorCode::BadManifest);
}
