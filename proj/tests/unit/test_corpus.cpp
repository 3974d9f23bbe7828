#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "polprog/corpus.hpp"
#include "polprog/error.hpp"
#include "polprog/textprep.hpp"

using namespace polprog;

namespace {

const char* kTwoLines =
    R"({"id":"p1","title":"A","body":"Climate text","stage":"Tabled","month":4,"year":2021,"rapporteurs":[{"name":"X","country":"France","party":"EPP"}],"spotlight":"JD21","procedure_type":"COD","procedure_year":2021,"legislative":true})"
    "\n"
    R"({"id":"p2","title":"B","body":"Energy text","stage":"Announced","month":7,"year":2022,"rapporteurs":[],"legislative":false})"
    "\n";

std::string line_with_stage(const std::string& id, const std::string& stage) {
  return R"({"id":")" + id + R"(","title":"t","body":"b","stage":")" + stage +
         R"(","month":1,"year":2020})";
}

Corpus stage_corpus(const std::map<StageLabel, int>& counts) {
  std::vector<PolicyRecord> recs;
  int k = 0;
  for (const auto& [stage, n] : counts) {
    for (int i = 0; i < n; ++i) recs.push_back(testutil::record("p" + std::to_string(k++), stage));
  }
  return Corpus(std::move(recs));
}

}  // namespace

TEST_CASE("stage mapping follows the fixed 0-1 scale") {
  CHECK(map_stage(StageLabel::Withdrawn) == 0.0);
  CHECK(map_stage(StageLabel::Blocked) == 0.0);
  CHECK(map_stage(StageLabel::Announced) == 0.25);
  CHECK(map_stage(StageLabel::Tabled) == 0.5);
  CHECK(map_stage(StageLabel::CloseToAdoption) == 0.75);
  CHECK(map_stage(StageLabel::AdoptedCompleted) == 1.0);
}

TEST_CASE("stage mapping is monotone in legislative order") {
  for (std::size_t i = 1; i < kAllStages.size(); ++i) {
    CHECK(map_stage(kAllStages[i - 1]) <= map_stage(kAllStages[i]));
  }
  CHECK(level_name(StageLevel::BlockedWithdrawn) == "Blocked/Withdrawn");
}

TEST_CASE("stage parsing accepts canonical, snake_case and CamelCase spellings") {
  CHECK(parse_stage("Close to Adoption") == StageLabel::CloseToAdoption);
  CHECK(parse_stage("close_to_adoption") == StageLabel::CloseToAdoption);
  CHECK(parse_stage("CloseToAdoption") == StageLabel::CloseToAdoption);
  CHECK(parse_stage("adopted/completed") == StageLabel::AdoptedCompleted);
  CHECK(parse_stage("TABLED") == StageLabel::Tabled);
  CHECK_FALSE(parse_stage("InProgress").has_value());
  for (auto s : kAllStages) {
    CHECK(parse_stage(stage_name(s)) == s);
    CHECK(parse_stage(stage_key(s)) == s);
  }
}

TEST_CASE("parse a two-line corpus") {
  const Corpus c = parse_corpus_text(kTwoLines);
  REQUIRE(c.size() == 2);
  const auto& p1 = c.records()[0];
  CHECK(p1.stage == StageLabel::Tabled);
  CHECK(c.records()[1].stage == StageLabel::Announced);
  REQUIRE(p1.rapporteurs.size() == 1);
  CHECK(p1.rapporteurs[0].country == "France");
  CHECK(p1.rapporteurs[0].party == "EPP");
  CHECK(p1.spotlight == "JD21");
  CHECK(p1.procedure_year == 2021);
  CHECK(p1.legislative);
  CHECK(c.records()[1].rapporteurs.empty());
  CHECK(c.find("p2") != nullptr);
  CHECK(c.find("zz") == nullptr);
}

TEST_CASE("unknown stage label is reported with its line") {
  const std::string text = line_with_stage("a", "Tabled") + "\n" + line_with_stage("b", "InProgress") + "\n";
  try {
    parse_corpus_text(text);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE_FALSE(e.issues().empty());
    const std::string issue = e.issues().front();
    CHECK(issue.find("line 2") != std::string::npos);
    CHECK(issue.find("InProgress") != std::string::npos);
  }
}

TEST_CASE("duplicate ids are rejected by name") {
  const std::string text = line_with_stage("p1", "Tabled") + "\n" + line_with_stage("p1", "Announced") + "\n";
  try {
    parse_corpus_text(text);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    std::string all = e.what();
    for (const auto& i : e.issues()) all += i;
    CHECK(all.find("p1") != std::string::npos);
    CHECK(all.find("duplicate") != std::string::npos);
  }
}

TEST_CASE("malformed records collect every issue") {
  const std::string text =
      R"({"id":"a","body":"  ","stage":"Tabled","month":13,"year":2020})" "\n"
      "not json\n"
      R"({"id":"c","body":"x","stage":"Tabled","year":2020})" "\n";
  try {
    parse_corpus_text(text);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.issues().size() >= 4);
  }
  CHECK_THROWS_AS(parse_corpus_text(""), ValidationError);
}

TEST_CASE("JSONL round trip preserves the corpus") {
  const Corpus c = generate_synthetic(3, 40, 60);
  CHECK(parse_corpus_text(to_jsonl(c)) == c);
  const Corpus small = parse_corpus_text(kTwoLines);
  CHECK(parse_corpus_text(to_jsonl(small)) == small);
}

TEST_CASE("sidecar scores attach by policy id") {
  const Corpus c = parse_corpus_text(kTwoLines);
  const Corpus with = attach_sidecar_scores_text(c, "policy_id,score_a,label_b\np1,0.5,1\np2,0.25,0\n");
  CHECK(with.records()[0].sidecar_scores.at("score_a") == 0.5);
  CHECK(with.records()[1].sidecar_scores.at("label_b") == 0.0);
  CHECK_THROWS_AS(attach_sidecar_scores_text(c, "policy_id,s\np9,1\n"), ValidationError);
  CHECK_THROWS_AS(attach_sidecar_scores_text(c, "id,s\np1,1\n"), ValidationError);
  CHECK_THROWS_AS(attach_sidecar_scores_text(c, "policy_id,s\np1,abc\np2,1\n"), ValidationError);
}

TEST_CASE("split sizes for 165 records at ratio 0.2") {
  const Corpus c = generate_synthetic(1, 165, 60);
  const SplitIndices s = split(c, 0.2, 42);
  CHECK(s.test_ids.size() == 33);
  CHECK(s.train_ids.size() == 132);
  const SplitIndices plain = split(c, 0.2, 42, false);
  CHECK(plain.test_ids.size() == 33);
}

TEST_CASE("stratified split of 10 Tabled and 10 Announced puts 2 of each in test") {
  const Corpus c = stage_corpus({{StageLabel::Tabled, 10}, {StageLabel::Announced, 10}});
  for (std::uint64_t seed : {1ULL, 2ULL, 42ULL, 999ULL}) {
    const SplitIndices s = split(c, 0.2, seed);
    std::map<StageLabel, int> test_counts;
    for (const auto& id : s.test_ids) test_counts[c.find(id)->stage]++;
    CHECK(test_counts[StageLabel::Tabled] == 2);
    CHECK(test_counts[StageLabel::Announced] == 2);
  }
}

TEST_CASE("split is deterministic and partitions the corpus") {
  const Corpus c = generate_synthetic(5, 120, 60);
  CHECK(split(c, 0.3, 7).test_ids == split(c, 0.3, 7).test_ids);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ratio(0.01, 0.99);
  std::set<std::string> all;
  for (const auto& r : c.records()) all.insert(r.id);
  for (int trial = 0; trial < 1000; ++trial) {
    const double rho = ratio(gen);
    const SplitIndices s = split(c, rho, gen(), trial % 2 == 0);
    std::set<std::string> train(s.train_ids.begin(), s.train_ids.end());
    std::set<std::string> test(s.test_ids.begin(), s.test_ids.end());
    std::vector<std::string> both;
    std::set_intersection(train.begin(), train.end(), test.begin(), test.end(), std::back_inserter(both));
    REQUIRE(both.empty());
    std::set<std::string> uni = train;
    uni.insert(test.begin(), test.end());
    REQUIRE(uni == all);
    const long expect = std::clamp<long>(std::lround(rho * 120), 1, 119);
    REQUIRE(std::abs(static_cast<long>(test.size()) - expect) <= 1);
  }
}

TEST_CASE("stratified split keeps per-stage counts within one of proportional") {
  const Corpus c = generate_synthetic(9, 165, 60);
  std::map<StageLabel, int> total;
  for (const auto& r : c.records()) total[r.stage]++;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SplitIndices s = split(c, 0.2, seed);
    std::map<StageLabel, int> test;
    for (const auto& id : s.test_ids) test[c.find(id)->stage]++;
    for (const auto& [stage, n] : total) {
      CHECK(std::abs(test[stage] - 0.2 * n) <= 1.0);
    }
  }
}

TEST_CASE("split rejects bad ratios and tiny corpora") {
  const Corpus c = generate_synthetic(1, 30, 60);
  CHECK_THROWS_AS(split(c, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(split(c, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(split(c, -0.1, 1), ValidationError);
  const Corpus one({testutil::record("a", StageLabel::Tabled)});
  CHECK_THROWS_AS(split(one, 0.2, 1), ValidationError);
}

TEST_CASE("synthetic corpora are deterministic and validated") {
  CHECK(to_jsonl(generate_synthetic(7, 100, 80)) == to_jsonl(generate_synthetic(7, 100, 80)));
  CHECK(to_jsonl(generate_synthetic(7, 100, 80)) != to_jsonl(generate_synthetic(8, 100, 80)));
  CHECK(generate_synthetic(1, 20, 50).size() == 20);
  CHECK_THROWS_AS(generate_synthetic(1, 19, 50), ValidationError);
  CHECK_THROWS_AS(generate_synthetic(1, 20, 49), ValidationError);
}

TEST_CASE("synthetic label frequencies track the documented distribution") {
  const Corpus c = generate_synthetic(21, 4000, 60);
  std::map<StageLabel, double> freq;
  for (const auto& r : c.records()) freq[r.stage] += 1.0 / 4000.0;
  for (std::size_t i = 0; i < kAllStages.size(); ++i) {
    const double p = synthetic::kLabelDistribution[i];
    // Four binomial standard deviations.
    CHECK(std::abs(freq[kAllStages[i]] - p) < 4.0 * std::sqrt(p * (1 - p) / 4000.0));
  }
}

TEST_CASE("planted marker frequency rises with stage") {
  const Corpus c = generate_synthetic(7, 600, 200);
  const TextPipeline pipeline;
  for (auto marker : synthetic::kMarkerTokens) {
    std::map<StageLevel, std::pair<double, int>> acc;
    for (const auto& r : c.records()) {
      // Independent count over whitespace-split, letter-only lowercase words.
      std::istringstream in(r.title + " " + r.body);
      std::string w;
      int count = 0;
      while (in >> w) {
        std::string letters;
        for (char ch : w) {
          if (std::isalpha(static_cast<unsigned char>(ch))) letters += static_cast<char>(std::tolower(ch));
        }
        if (letters == marker) ++count;
      }
      auto& [sum, n] = acc[level_of(r.stage)];
      sum += count;
      ++n;
    }
    double prev = -1.0;
    for (const auto& [level, sn] : acc) {
      const double mean = sn.first / sn.second;
      CHECK_MESSAGE(mean > prev, "marker " << marker << " level " << static_cast<int>(level));
      prev = mean;
    }
  }
}

TEST_CASE("planted no-party pattern is anti-correlated with stage") {
  const Corpus c = generate_synthetic(7, 600, 200);
  std::map<StageLevel, std::pair<double, int>> acc;
  for (const auto& r : c.records()) {
    bool no_party = true;
    for (const auto& rap : r.rapporteurs) no_party = no_party && !rap.party;
    auto& [sum, n] = acc[level_of(r.stage)];
    sum += no_party ? 1.0 : 0.0;
    ++n;
  }
  CHECK(acc[StageLevel::BlockedWithdrawn].first / acc[StageLevel::BlockedWithdrawn].second >
        acc[StageLevel::AdoptedCompleted].first / acc[StageLevel::AdoptedCompleted].second + 0.3);
}
