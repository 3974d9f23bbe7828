#include <doctest.h>

#include <random>
#include <regex>

#include "polprog/corpus.hpp"
#include "polprog/hash.hpp"
#include "polprog/textprep.hpp"

using namespace polprog;

namespace {

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

}  // namespace

TEST_CASE("clean_text examples") {
  CHECK(clean_text("CO2 taxes!") == "co taxes");
  CHECK(clean_text("") == "");
  CHECK(clean_text("The EU's 2030 target") == "the eu s target");
  CHECK(clean_text("  \t Multiple\n\nSPACES  ") == "multiple spaces");
  CHECK(clean_text("caf\xC3\xA9 na\xC3\xAFve") == "caf na ve");
}

TEST_CASE("clean_text output alphabet on fuzzed bytes") {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> byte(0, 255);
  const std::regex allowed("^([a-z]+( [a-z]+)*)?$");
  for (int trial = 0; trial < 500; ++trial) {
    std::string raw;
    const int len = trial % 80;
    for (int i = 0; i < len; ++i) raw += static_cast<char>(byte(gen));
    const std::string cleaned = clean_text(raw);
    REQUIRE(std::regex_match(cleaned, allowed));
  }
}

TEST_CASE("tokenize examples") {
  CHECK(tokenize("climate policy") == std::vector<std::string>{"climate", "policy"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a a a") == std::vector<std::string>{"a", "a", "a"});
}

TEST_CASE("remove_stopwords examples") {
  const StopList stop = parse_stoplist("# comment\nthe\nand\n\n");
  CHECK(stop.size() == 2);
  CHECK(remove_stopwords({"the", "climate"}, stop) == std::vector<std::string>{"climate"});
  CHECK(remove_stopwords({}, stop).empty());
  CHECK(remove_stopwords({"the", "and", "the"}, stop).empty());
  CHECK(remove_stopwords({"b", "the", "a"}, stop) == std::vector<std::string>{"b", "a"});
}

TEST_CASE("bundled stop-word list") {
  const StopList& stop = default_stoplist();
  CHECK(stop.size() > 150);
  CHECK(stop.size() < 220);
  for (auto w : {"the", "and", "of", "to", "in", "is", "for"}) CHECK(stop.count(w) == 1);
  for (const auto& w : stop) {
    CHECK(std::regex_match(w, std::regex("^[a-z]+$")));
  }
}

TEST_CASE("lemmatizer rules and exceptions") {
  const Lemmatizer& lem = default_lemmatizer();
  CHECK(lem.lemma("policies") == "policy");
  CHECK(lem.lemma("climate") == "climate");
  CHECK(lem.lemma("emissions") == "emission");
  CHECK(lem.lemma("taxes") == "tax");
  CHECK(lem.lemma("classes") == "class");
  CHECK(lem.lemma("approaches") == "approach");
  CHECK(lem.lemma("bus") == "bus");
  CHECK(lem.lemma("analysis") == "analysis");
  CHECK(lem.lemma("gas") == "gas");
  CHECK(lem.lemma("ties") == "tie");
  CHECK(lem.lemma("children") == "child");
  CHECK(lem.lemma("series") == "series");
  CHECK(lem.lemma("news") == "news");
}

TEST_CASE("custom exception table") {
  const Lemmatizer lem = Lemmatizer::from_table("# inflected lemma\nmice mouse\nfeet foot\n");
  CHECK(lem.lemma("mice") == "mouse");
  CHECK(lem.lemma("mouse") == "mouse");
  CHECK(lem({"feet", "cars"}) == std::vector<std::string>{"foot", "car"});
}

TEST_CASE("lemmatize is idempotent and never changes the token count") {
  const Lemmatizer& lem = default_lemmatizer();
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> letter(0, 25), len(1, 12);
  for (int trial = 0; trial < 5000; ++trial) {
    std::string t;
    const int n = len(gen);
    for (int i = 0; i < n; ++i) t += static_cast<char>('a' + letter(gen));
    if (trial % 3 == 0) t += "s";
    if (trial % 7 == 0) t += "ies";
    const std::string once = lem.lemma(t);
    REQUIRE(lem.lemma(once) == once);
    REQUIRE(once.size() <= t.size());
    REQUIRE_FALSE(once.empty());
  }
  for (const auto& [inflected, lemma] : lem.exceptions()) {
    CHECK(lem.lemma(lem.lemma(inflected)) == lem.lemma(inflected));
  }
}

TEST_CASE("full pipeline is idempotent on synthetic documents") {
  const Corpus c = generate_synthetic(11, 1000, 300);
  const TextPipeline pipeline;
  for (const auto& r : c.records()) {
    const auto first = pipeline.tokens(r.title + "\n" + r.body);
    const auto second = pipeline.tokens(join(first));
    REQUIRE(first == second);
    for (const auto& t : first) REQUIRE(pipeline.stoplist().count(t) == 0);
  }
}

TEST_CASE("pipeline handles empty and all-stop-word text") {
  const TextPipeline pipeline;
  CHECK(pipeline.tokens("").empty());
  CHECK(pipeline.tokens("the and of to in").empty());
  CHECK(pipeline.tokens("1234 !!! ???").empty());
  const CleanDoc d = pipeline("p1", "The policies on Climate!");
  CHECK(d.id == "p1");
  CHECK(d.tokens == std::vector<std::string>{"policy", "climate"});
}

TEST_CASE("bundled data hashes match the embedded bytes") {
  const auto hashes = data_file_hashes();
  REQUIRE(hashes.size() == 2);
  CHECK(hashes.at("stopwords_en.txt") == sha256_hex(bundled_stopwords_text()));
  CHECK(hashes.at("lemma_exceptions.txt") == sha256_hex(bundled_lemma_table_text()));
  CHECK(hashes.at("stopwords_en.txt").size() == 64);
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
