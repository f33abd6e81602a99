#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "least/rng.hpp"
#include "least/weak_supervision.hpp"

using namespace least;

namespace {

AttributeSet movie_attrs() {
  return AttributeSet({"title", "director", "genre", "mpaa_rating"});
}

DetailPage make_page(const std::string& page_id, const std::string& site,
                     const std::vector<std::string>& texts) {
  std::string html = "<html><body>";
  for (const auto& t : texts) html += "<p>" + t + "</p>";
  html += "</body></html>";
  return parse_page(html, page_id, site);
}

DomNodeRecord make_node(const std::string& text) {
  DomNodeRecord n;
  n.text = text;
  return n;
}

}  // namespace

TEST_CASE("fuzzy match rule: word counts and per-word distance", "[weak]") {
  CHECK(fuzzy_text_match("Christopher Nolan", "Christopher Nolan"));
  CHECK(fuzzy_text_match("Harry Potter", "Harry Pottr"));
  CHECK_FALSE(fuzzy_text_match("The Matrix", "Matrix"));
  CHECK_FALSE(fuzzy_text_match("Christopher Nolan", "Christopher Smith"));
  // distance exactly 3 still matches; 4 does not
  CHECK(fuzzy_text_match("abcdefg", "abcd"));
  CHECK_FALSE(fuzzy_text_match("abcdefgh", "abcd"));
}

TEST_CASE("fuzzy_string_matcher collects matching nodes", "[weak]") {
  auto page = make_page("p", "w", {"Inception", "Inceptionn", "Other Film"});
  DomNodeRecord seed = make_node("Inception");
  auto hits = fuzzy_string_matcher({&seed}, 0, page);
  REQUIRE(hits.size() == 2);
  CHECK(page.nodes[hits[0]].text == "Inception");
  CHECK(page.nodes[hits[1]].text == "Inceptionn");
}

TEST_CASE("check_soundness classifies functions", "[weak]") {
  auto attrs = movie_attrs();
  auto page = make_page("p", "w", {"Inception", "chatter one two", "PG-13"});
  LabeledPageView view{&page, {0, attrs.none_id(), 3}};

  SECTION("fuzzy matcher is sound on this fixture") {
    auto fn = make_fuzzy_string_matcher();
    auto report = check_soundness(fn, 0, {view});
    CHECK(report.sound);
    CHECK(report.violations.empty());
  }
  SECTION("return-everything is unsound, violations are the NONE nodes") {
    LabelingFunction grabby{
        "grab_all",
        [](const std::vector<const DomNodeRecord*>&, int,
           const DetailPage& p) {
          std::vector<int> all;
          for (const auto& n : p.nodes) all.push_back(n.node_id);
          return all;
        }};
    auto report = check_soundness(grabby, 0, {view});
    CHECK_FALSE(report.sound);
    REQUIRE(report.violations.size() == 2);
  }
  SECTION("empty-returning function is vacuously sound") {
    LabelingFunction never{"never",
                           [](const std::vector<const DomNodeRecord*>&, int,
                              const DetailPage&) {
                             return std::vector<int>{};
                           }};
    CHECK(check_soundness(never, 0, {view}).sound);
  }
}

namespace {

// Two sites, director at a per-site fixed slot. Shared directors d1..d3,
// site A also shows d4, site B also shows d5.
struct OverlapFixture {
  std::vector<DetailPage> pages_a;
  std::vector<DetailPage> pages_b;
  std::vector<SeedSiteInputs> inputs;

  explicit OverlapFixture(const AttributeSet& attrs) {
    std::vector<std::string> site_a = {"DirectorOne", "DirectorTwo",
                                       "DirectorThree", "DirectorFour"};
    std::vector<std::string> site_b = {"DirectorOne", "DirectorTwo",
                                       "DirectorThree", "DirectorFive"};
    for (size_t i = 0; i < site_a.size(); ++i)
      pages_a.push_back(make_page("a" + std::to_string(i), "siteA",
                                  {"header junk text", site_a[i]}));
    for (size_t i = 0; i < site_b.size(); ++i)
      pages_b.push_back(make_page("b" + std::to_string(i), "siteB",
                                  {site_b[i], "footer junk text"}));

    SeedSiteInputs a{"siteA", {}, {}};
    a.human_values.assign(attrs.size(), {});
    for (const auto& p : pages_a) a.pages.push_back(&p);
    a.human_values[1] = {"DirectorOne"};  // one human-labeled director
    SeedSiteInputs b{"siteB", {}, {}};
    b.human_values.assign(attrs.size(), {});
    for (const auto& p : pages_b) b.pages.push_back(&p);
    inputs = {a, b};
  }
};

}  // namespace

TEST_CASE("infer_overlap_rules finds cross-site templates", "[weak]") {
  auto attrs = movie_attrs();
  OverlapFixture fx(attrs);
  auto rules = infer_overlap_rules(fx.inputs, attrs, 0.3);
  // Jaccard of director sets = 3/5 = 0.6; one rule per site.
  REQUIRE(rules.size() == 2);
  for (const auto& r : rules) CHECK(r.attribute == 1);
  CHECK(rules[0].website_id == "siteA");
  CHECK(rules[0].xpath_template == "/html[1]/body[1]/p[*]");
  CHECK(rules[1].website_id == "siteB");
}

TEST_CASE("disjoint sites produce no overlap rules", "[weak]") {
  auto attrs = movie_attrs();
  std::vector<DetailPage> pa, pb;
  for (int i = 0; i < 3; ++i) {
    pa.push_back(make_page("a" + std::to_string(i), "siteA",
                           {"AlphaValue" + std::to_string(i)}));
    pb.push_back(make_page("b" + std::to_string(i), "siteB",
                           {"BravoValue" + std::to_string(i)}));
  }
  SeedSiteInputs a{"siteA", {}, {}};
  a.human_values.assign(attrs.size(), {});
  for (const auto& p : pa) a.pages.push_back(&p);
  a.human_values[0] = {"AlphaValue0"};
  SeedSiteInputs b{"siteB", {}, {}};
  b.human_values.assign(attrs.size(), {});
  for (const auto& p : pb) b.pages.push_back(&p);
  CHECK(infer_overlap_rules({a, b}, attrs, 0.3).empty());
}

TEST_CASE("bootstrap ties drop the template", "[weak]") {
  auto attrs = movie_attrs();
  // One template mixing a known title and a known genre value equally.
  std::vector<DetailPage> pa = {
      make_page("a0", "siteA", {"SharedTitle"}),
      make_page("a1", "siteA", {"SharedGenre"}),
  };
  std::vector<DetailPage> pb = {
      make_page("b0", "siteB", {"SharedTitle"}),
      make_page("b1", "siteB", {"SharedGenre"}),
  };
  SeedSiteInputs a{"siteA", {}, {}};
  a.human_values.assign(attrs.size(), {});
  for (const auto& p : pa) a.pages.push_back(&p);
  a.human_values[0] = {"SharedTitle"};
  a.human_values[2] = {"SharedGenre"};
  SeedSiteInputs b{"siteB", {}, {}};
  b.human_values.assign(attrs.size(), {});
  for (const auto& p : pb) b.pages.push_back(&p);
  CHECK(infer_overlap_rules({a, b}, attrs, 0.3).empty());
}

TEST_CASE("build_site_relations unions all three sources", "[weak]") {
  auto attrs = movie_attrs();
  std::vector<DetailPage> pages = {
      make_page("a0", "siteA", {"Inception", "chatter noise"}),
      make_page("a1", "siteA", {"Inception", "more chatter"}),
      make_page("a2", "siteA", {"Memento", "other text"}),
  };
  SeedSiteInputs site{"siteA", {}, {}};
  site.human_values.assign(attrs.size(), {});
  for (const auto& p : pages) site.pages.push_back(&p);
  site.human_values[0] = {"Inception"};

  std::vector<LabeledSample> human = {
      LabeledSample{&pages[0], 0, 0},
      LabeledSample{&pages[0], 1, attrs.none_id()},
  };

  SECTION("no functions, no rules: human values only") {
    auto rels = build_site_relations({site}, attrs, human, {}, {});
    REQUIRE(rels.size() == 1);
    CHECK(rels[0].rows[0] == std::set<std::string>{"Inception"});
    CHECK(rels[0].rows[1].empty());
  }
  SECTION("fuzzy matcher and overlap rule contribute") {
    std::vector<LabelingFunction> fns = {make_fuzzy_string_matcher()};
    std::vector<OverlapRule> rules = {{"siteA", "/html[1]/body[1]/p[*]", 0}};
    auto rels = build_site_relations({site}, attrs, human, fns, rules);
    REQUIRE(rels.size() == 1);
    // fuzzy finds Inception on a1; the rule template also pulls in the rest
    CHECK(rels[0].rows[0].count("Inception") == 1);
    CHECK(rels[0].rows[0].count("Memento") == 1);
  }
}

TEST_CASE("distant labeling votes across relations", "[weak]") {
  auto attrs = movie_attrs();
  SiteRelation a("siteA", attrs.size());
  SiteRelation b("siteB", attrs.size());
  SiteRelation c("siteC", attrs.size());
  a.rows[1] = {"Christopher Nolan"};
  a.rows[3] = {"PG"};
  b.rows[3] = {"PG"};
  c.rows[2] = {"PG"};
  c.rows[0] = {"Tied Text"};
  b.rows[2] = {"Tied Text"};

  auto page = make_page("p", "w",
                        {"Christopher Nolan", "PG", "Tied Text", "unseen"});

  auto labels = distant_label_page({a, b, c}, attrs, page);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].node_id == 0);
  CHECK(labels[0].label == 1);
  CHECK(labels[0].votes == 1);
  CHECK(labels[1].node_id == 1);
  CHECK(labels[1].label == 3);  // mpaa_rating wins 2-1 over genre
  CHECK(labels[1].votes == 2);
  // "Tied Text" 1-1 abstains; "unseen" is not labeled NONE, just absent
}

TEST_CASE("distant labeling is independent of relation order", "[weak]") {
  auto attrs = movie_attrs();
  std::vector<SiteRelation> rels(4, SiteRelation("", attrs.size()));
  rels[0].website_id = "s0";
  rels[0].rows[0] = {"ValueA"};
  rels[0].rows[1] = {"ValueC"};
  rels[1].website_id = "s1";
  rels[1].rows[0] = {"ValueA", "ValueB"};
  rels[2].website_id = "s2";
  rels[2].rows[1] = {"ValueB"};
  rels[2].rows[0] = {"ValueC"};
  rels[3].website_id = "s3";
  rels[3].rows[0] = {"ValueC"};
  auto page = make_page("p", "w", {"ValueA", "ValueB", "ValueC"});
  auto base = distant_label_page(rels, attrs, page);
  REQUIRE(base.size() == 2);  // ValueB ties 1-1 and abstains
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    shuffle_vector(rels, rng);
    auto shuffled = distant_label_page(rels, attrs, page);
    REQUIRE(shuffled.size() == base.size());
    for (size_t i = 0; i < base.size(); ++i) {
      CHECK(shuffled[i].node_id == base[i].node_id);
      CHECK(shuffled[i].label == base[i].label);
      CHECK(shuffled[i].votes == base[i].votes);
    }
  }
}

TEST_CASE("adding a relation keeps the majority label unless it flips",
          "[weak]") {
  auto attrs = movie_attrs();
  SiteRelation r1("s1", attrs.size()), r2("s2", attrs.size()),
      r3("s3", attrs.size());
  r1.rows[0] = {"Contested"};
  r2.rows[0] = {"Contested"};
  r3.rows[2] = {"Contested"};
  auto page = make_page("p", "w", {"Contested"});

  auto two = distant_label_page({r1, r2}, attrs, page);
  REQUIRE(two.size() == 1);
  CHECK(two[0].label == 0);

  auto three = distant_label_page({r1, r2, r3}, attrs, page);
  REQUIRE(three.size() == 1);  // 2-1, label survives
  CHECK(three[0].label == 0);

  // a second genre vote flips it to a tie: the label disappears
  SiteRelation r4("s4", attrs.size());
  r4.rows[2] = {"Contested"};
  CHECK(distant_label_page({r1, r2, r3, r4}, attrs, page).empty());
}
