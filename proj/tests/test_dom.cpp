#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "least/dom.hpp"
#include "least/rng.hpp"

using namespace least;

TEST_CASE("normalize_text collapses and trims", "[dom]") {
  CHECK(normalize_text("  Christopher   Nolan \n") == "Christopher Nolan");
  CHECK(normalize_text("PG-13") == "PG-13");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text(" \t \r\n ") == "");
  CHECK(normalize_text("a\tb\nc") == "a b c");
}

TEST_CASE("normalize_text is idempotent", "[dom]") {
  std::mt19937_64 rng(42);
  const char alphabet[] = " \t\nabcXYZ -.";
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    size_t len = uniform_index(rng, 30);
    for (size_t i = 0; i < len; ++i)
      s.push_back(alphabet[uniform_index(rng, sizeof(alphabet) - 1)]);
    CHECK(normalize_text(normalize_text(s)) == normalize_text(s));
  }
}

TEST_CASE("parse_page extracts text nodes with absolute xpaths", "[dom]") {
  auto page = parse_page(
      "<html><body><h1>Inception</h1><span>Christopher Nolan</span></body></html>",
      "p1", "w1");
  REQUIRE(page.nodes.size() == 2);
  CHECK(page.nodes[0].xpath == "/html[1]/body[1]/h1[1]");
  CHECK(page.nodes[0].text == "Inception");
  CHECK(page.nodes[0].tag == "h1");
  CHECK(page.nodes[0].node_id == 0);
  CHECK(page.nodes[1].xpath == "/html[1]/body[1]/span[1]");
  CHECK(page.nodes[1].text == "Christopher Nolan");
  CHECK(page.nodes[1].node_id == 1);
  CHECK(page.page_id == "p1");
  CHECK(page.website_id == "w1");
}

TEST_CASE("empty body yields zero nodes", "[dom]") {
  auto page = parse_page("<html><body></body></html>", "p", "w");
  CHECK(page.nodes.empty());
}

TEST_CASE("script and comment content is excluded", "[dom]") {
  auto page = parse_page(
      "<html><body><script>var x=1;</script><!-- note --><p>PG-13</p>"
      "<style>p{color:red}</style></body></html>",
      "p", "w");
  REQUIRE(page.nodes.size() == 1);
  CHECK(page.nodes[0].text == "PG-13");
  CHECK(page.nodes[0].xpath == "/html[1]/body[1]/p[1]");
}

TEST_CASE("only direct text counts, runs merge with single spaces", "[dom]") {
  auto page = parse_page(
      "<html><body><div>before<span>inner</span>after</div></body></html>",
      "p", "w");
  REQUIRE(page.nodes.size() == 2);
  CHECK(page.nodes[0].text == "before after");
  CHECK(page.nodes[0].tag == "div");
  CHECK(page.nodes[1].text == "inner");
}

TEST_CASE("sibling indices are per-tag and 1-based", "[dom]") {
  auto page = parse_page(
      "<html><body><p>a</p><div>b</div><p>c</p></body></html>", "p", "w");
  REQUIRE(page.nodes.size() == 3);
  CHECK(page.nodes[0].xpath == "/html[1]/body[1]/p[1]");
  CHECK(page.nodes[1].xpath == "/html[1]/body[1]/div[1]");
  CHECK(page.nodes[2].xpath == "/html[1]/body[1]/p[2]");
}

TEST_CASE("xpaths are unique within a page", "[dom]") {
  auto page = parse_page(
      "<html><body><ul><li>a</li><li>b</li><li>c</li></ul>"
      "<div><span>d</span></div><div><span>e</span></div></body></html>",
      "p", "w");
  std::set<std::string> seen;
  for (const auto& n : page.nodes) CHECK(seen.insert(n.xpath).second);
}

TEST_CASE("malformed HTML is repaired leniently", "[dom]") {
  SECTION("unclosed tags") {
    auto page = parse_page("<html><body><div>a<div>b", "p", "w");
    REQUIRE(page.nodes.size() == 2);
    CHECK(page.nodes[0].text == "a");
    CHECK(page.nodes[1].xpath == "/html[1]/body[1]/div[1]/div[1]");
  }
  SECTION("stray end tag ignored") {
    auto page = parse_page("<html><body></table><p>x</p></body></html>", "p",
                           "w");
    REQUIRE(page.nodes.size() == 1);
    CHECK(page.nodes[0].xpath == "/html[1]/body[1]/p[1]");
  }
  SECTION("implied close of p and li") {
    auto page =
        parse_page("<html><body><p>one<p>two<ul><li>x<li>y</ul></body></html>",
                    "p", "w");
    REQUIRE(page.nodes.size() == 4);
    CHECK(page.nodes[0].xpath == "/html[1]/body[1]/p[1]");
    CHECK(page.nodes[1].xpath == "/html[1]/body[1]/p[2]");
    CHECK(page.nodes[2].xpath == "/html[1]/body[1]/ul[1]/li[1]");
    CHECK(page.nodes[3].xpath == "/html[1]/body[1]/ul[1]/li[2]");
  }
  SECTION("fragment without html root gets wrapped") {
    auto page = parse_page("<h2>Hello</h2>", "p", "w");
    REQUIRE(page.nodes.size() == 1);
    CHECK(page.nodes[0].xpath == "/html[1]/body[1]/h2[1]");
  }
  SECTION("attributes with angle brackets in quotes") {
    auto page = parse_page(
        "<html><body><a href=\"x?a>b\" title='c>d'>link</a></body></html>",
        "p", "w");
    REQUIRE(page.nodes.size() == 1);
    CHECK(page.nodes[0].text == "link");
  }
}

TEST_CASE("entities are decoded in text", "[dom]") {
  auto page = parse_page(
      "<html><body><p>Tom &amp; Jerry&nbsp;&#65;&#x42; &lt;tag&gt;</p>"
      "</body></html>",
      "p", "w");
  REQUIRE(page.nodes.size() == 1);
  CHECK(page.nodes[0].text == "Tom & Jerry AB <tag>");
}

TEST_CASE("whitespace-only elements are excluded", "[dom]") {
  auto page = parse_page(
      "<html><body><p>  \n\t </p><p>real</p></body></html>", "p", "w");
  REQUIRE(page.nodes.size() == 1);
  CHECK(page.nodes[0].text == "real");
}

TEST_CASE("unparseable input throws", "[dom]") {
  CHECK_THROWS_AS(parse_page("", "p", "w"), UnparseableDocument);
  CHECK_THROWS_AS(parse_page("   \n ", "p", "w"), UnparseableDocument);
  CHECK_THROWS_AS(parse_page("<!-- only a comment -->", "p", "w"),
                  UnparseableDocument);
}

TEST_CASE("node ids are consecutive and rel_position in [0,1]", "[dom]") {
  auto page = parse_page(
      "<html><body><p>a</p><p>b</p><p>c</p><p>d</p></body></html>", "p", "w");
  for (size_t i = 0; i < page.nodes.size(); ++i) {
    CHECK(page.nodes[i].node_id == static_cast<int>(i));
    CHECK(page.nodes[i].rel_position >= 0.0);
    CHECK(page.nodes[i].rel_position <= 1.0);
  }
  CHECK(page.nodes[0].rel_position == 0.0);
}

TEST_CASE("parsing is deterministic", "[dom]") {
  std::string html =
      "<html><body><div>a<span>b</span></div><p>c</p></body></html>";
  auto a = parse_page(html, "p", "w");
  auto b = parse_page(html, "p", "w");
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].xpath == b.nodes[i].xpath);
    CHECK(a.nodes[i].text == b.nodes[i].text);
    CHECK(a.nodes[i].rel_position == b.nodes[i].rel_position);
  }
}

namespace {

// Random well-formed documents with an independently tracked count of
// elements carrying non-empty direct text.
struct RandomDoc {
  std::string html;
  int text_elements = 0;
};

void grow(RandomDoc& doc, std::mt19937_64& rng, int depth, int& budget) {
  static const char* tags[] = {"div", "span", "section", "em", "b", "u"};
  int children = depth > 4 ? 0 : static_cast<int>(uniform_index(rng, 4));
  const char* tag = tags[uniform_index(rng, 6)];
  doc.html += "<";
  doc.html += tag;
  doc.html += ">";
  bool has_text = uniform_index(rng, 3) != 0;
  bool ws_only = !has_text && uniform_index(rng, 2) == 0;
  if (has_text) {
    doc.html += "t" + std::to_string(++doc.text_elements);
  } else if (ws_only) {
    doc.html += "  \n ";
  }
  for (int c = 0; c < children && budget > 0; ++c) {
    --budget;
    grow(doc, rng, depth + 1, budget);
  }
  doc.html += "</";
  doc.html += tag;
  doc.html += ">";
}

}  // namespace

TEST_CASE("node count matches an independent tree walk", "[dom]") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    RandomDoc doc;
    doc.html = "<html><body>";
    int budget = 40;
    grow(doc, rng, 0, budget);
    doc.html += "</body></html>";
    auto page = parse_page(doc.html, "p", "w");
    CHECK(static_cast<int>(page.nodes.size()) == doc.text_elements);
  }
}
