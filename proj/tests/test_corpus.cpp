#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include "least/corpus.hpp"

using namespace least;

namespace {

// A page with n <p> nodes under /html[1]/body[1]/p[k].
std::string page_html(int n) {
  std::string html = "<html><body>";
  for (int i = 0; i < n; ++i)
    html += "<p>text" + std::to_string(i) + "</p>";
  return html + "</body></html>";
}

AttributeSet movie_attrs() {
  return AttributeSet({"title", "director", "genre", "mpaa_rating"});
}

}  // namespace

TEST_CASE("attribute set classes and lookup", "[corpus]") {
  auto attrs = movie_attrs();
  CHECK(attrs.size() == 4);
  CHECK(attrs.class_count() == 5);
  CHECK(attrs.none_id() == 4);
  CHECK(attrs.class_name(4) == "NONE");
  CHECK(attrs.require("director") == 1);
  CHECK_THROWS_AS(attrs.require("nonsense"), UnknownAttribute);
  CHECK_THROWS_AS(AttributeSet({"a", "NONE"}), InvalidConfig);
  CHECK_THROWS_AS(AttributeSet({}), InvalidConfig);
}

TEST_CASE("apply_labels fills unmentioned nodes with NONE", "[corpus]") {
  auto attrs = movie_attrs();
  PageStore store;
  store.add(parse_page(page_html(10), "pg0", "siteA"));
  std::vector<LabelFileEntry> entries = {
      {"pg0", "/html[1]/body[1]/p[1]", "title"},
      {"pg0", "/html[1]/body[1]/p[4]", "director"},
  };
  auto applied = apply_labels(store, entries, attrs);
  REQUIRE(applied.samples.size() == 10);
  int attr_count = 0, none_count = 0;
  for (const auto& s : applied.samples) {
    if (s.label == attrs.none_id()) ++none_count;
    else ++attr_count;
  }
  CHECK(attr_count == 2);
  CHECK(none_count == 8);
  CHECK(applied.labeled_page_ids == std::set<std::string>{"pg0"});
}

TEST_CASE("label errors", "[corpus]") {
  auto attrs = movie_attrs();
  PageStore store;
  store.add(parse_page(page_html(3), "pg0", "siteA"));
  SECTION("dangling xpath") {
    std::vector<LabelFileEntry> entries = {
        {"pg0", "/html[1]/body[1]/p[9]", "title"}};
    CHECK_THROWS_AS(apply_labels(store, entries, attrs), DanglingXPath);
  }
  SECTION("unknown page") {
    std::vector<LabelFileEntry> entries = {
        {"missing", "/html[1]/body[1]/p[1]", "title"}};
    CHECK_THROWS_AS(apply_labels(store, entries, attrs), DanglingXPath);
  }
  SECTION("unknown attribute") {
    std::vector<LabelFileEntry> entries = {
        {"pg0", "/html[1]/body[1]/p[1]", "price"}};
    CHECK_THROWS_AS(apply_labels(store, entries, attrs), UnknownAttribute);
  }
}

TEST_CASE("duplicate page ids across sites are rejected", "[corpus]") {
  PageStore store;
  store.add(parse_page(page_html(1), "pg0", "siteA"));
  CHECK_THROWS_AS(store.add(parse_page(page_html(1), "pg0", "siteB")),
                  InvalidConfig);
}

namespace {

std::vector<LabeledSample> labeled_fixture(PageStore& store,
                                           const AttributeSet& attrs,
                                           int sites, int pages_per_site) {
  std::vector<LabeledSample> samples;
  for (int s = 0; s < sites; ++s) {
    std::string site = "site" + std::to_string(s);
    for (int p = 0; p < pages_per_site; ++p) {
      std::string page_id = site + "-pg" + std::to_string(p);
      const DetailPage& page = store.add(parse_page(page_html(5), page_id, site));
      for (const auto& n : page.nodes) {
        int label = n.node_id == 0 ? 0 : attrs.none_id();
        samples.push_back(LabeledSample{&page, n.node_id, label});
      }
    }
  }
  return samples;
}

}  // namespace

TEST_CASE("split_initial is page-level, exhaustive, and seeded", "[corpus]") {
  auto attrs = movie_attrs();
  PageStore store;
  auto labeled = labeled_fixture(store, attrs, 2, 19);

  std::mt19937_64 rng(99);
  auto split = split_initial(labeled, attrs, 10, rng);

  CHECK(split.validation_page_ids.size() == 20);
  CHECK(split.training_page_ids.size() == 18);
  std::set<std::string> inter;
  for (const auto& p : split.validation_page_ids)
    if (split.training_page_ids.count(p)) inter.insert(p);
  CHECK(inter.empty());
  CHECK(split.corpus.samples.size() + split.validation.entries.size() ==
        labeled.size());
  for (const auto& s : split.corpus.samples) {
    CHECK(s.weight == 1.0);
    CHECK(s.source == LabelSource::Human);
    double sum = 0;
    for (double v : s.soft_label) sum += v;
    CHECK(sum == Catch::Approx(1.0).epsilon(1e-9));
  }

  std::mt19937_64 rng2(99);
  auto split2 = split_initial(labeled, attrs, 10, rng2);
  CHECK(split2.validation_page_ids == split.validation_page_ids);
}

TEST_CASE("split_initial rejects degenerate configs", "[corpus]") {
  auto attrs = movie_attrs();
  PageStore store;
  auto labeled = labeled_fixture(store, attrs, 2, 5);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(split_initial(labeled, attrs, 0, rng),
                  InsufficientLabeledPages);
  CHECK_THROWS_AS(split_initial(labeled, attrs, 5, rng),
                  InsufficientLabeledPages);
}

TEST_CASE("sample_unlabeled draws without replacement", "[corpus]") {
  PageStore store;
  const DetailPage& page = store.add(parse_page(page_html(10), "pg", "site"));
  std::mt19937_64 rng(5);

  SECTION("L exceeding pool returns everything") {
    UnlabeledPool pool;
    pool.add_page(page);
    pool.finalize();
    auto got = pool.sample(100000, rng);
    CHECK(got.size() == 10);
    CHECK(pool.remaining() == 0);
  }

  SECTION("successive draws are disjoint until exhaustion") {
    UnlabeledPool pool;
    pool.add_page(page);
    pool.finalize();
    auto a = pool.sample(4, rng);
    auto b = pool.sample(4, rng);
    auto c = pool.sample(4, rng);
    CHECK(a.size() == 4);
    CHECK(b.size() == 4);
    CHECK(c.size() == 2);
    std::set<std::string> keys;
    for (const auto& e : a) keys.insert(e.key());
    for (const auto& e : b) keys.insert(e.key());
    for (const auto& e : c) keys.insert(e.key());
    CHECK(keys.size() == 10);
    CHECK(pool.sample(4, rng).empty());
  }

  SECTION("empty pool returns empty") {
    UnlabeledPool pool;
    pool.finalize();
    CHECK(pool.sample(3, rng).empty());
  }
}

TEST_CASE("pool sampling never repeats across many draws", "[corpus]") {
  PageStore store;
  UnlabeledPool pool;
  for (int p = 0; p < 8; ++p)
    pool.add_page(store.add(
        parse_page(page_html(7), "pg" + std::to_string(p), "site")));
  pool.finalize();
  std::mt19937_64 rng(17);
  std::set<std::string> seen;
  size_t total = 0;
  for (int round = 0; round < 30; ++round) {
    auto got = pool.sample(1 + uniform_index(rng, 5), rng);
    total += got.size();
    for (const auto& e : got) CHECK(seen.insert(e.key()).second);
  }
  CHECK(seen.size() == total);
  CHECK(seen.size() <= 56);
}
