#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "least/errors.hpp"
#include "least/text.hpp"

namespace least {

// One text-bearing DOM node. The unit of classification.
struct DomNodeRecord {
  int node_id = 0;           // ordinal within the page, consecutive from 0
  std::string xpath;         // absolute, lowercase tags, 1-based sibling indices
  std::string tag;           // leaf element name
  std::string text;          // normalized direct text, never empty
  double rel_position = 0.0; // node_id / page node count, in [0,1]
};

struct DetailPage {
  std::string page_id;
  std::string website_id;
  std::vector<DomNodeRecord> nodes;  // document order
};

inline std::string node_key(const DetailPage& page, int node_id) {
  return page.website_id + "/" + page.page_id + "#" + std::to_string(node_id);
}

namespace detail {

struct HtmlElement {
  std::string tag;                 // lowercase
  std::vector<std::string> text_runs;  // raw direct-text runs, entity-decoded
  std::vector<std::unique_ptr<HtmlElement>> children;
};

inline bool is_void_element(std::string_view tag) {
  static const char* kVoid[] = {"area",  "base", "br",    "col",  "embed",
                                "hr",    "img",  "input", "link", "meta",
                                "param", "source", "track", "wbr"};
  for (const char* v : kVoid)
    if (tag == v) return true;
  return false;
}

inline bool is_raw_text_element(std::string_view tag) {
  return tag == "script" || tag == "style" || tag == "xmp";
}

// Lenient implied-close table: an incoming start tag closes an open one.
inline bool start_tag_closes(std::string_view incoming, std::string_view open) {
  if (incoming == open) {
    static const char* kSelfClosing[] = {"p",  "li", "option", "dt",
                                         "dd", "tr", "td",     "th"};
    for (const char* t : kSelfClosing)
      if (incoming == t) return true;
    return false;
  }
  auto open_is = [&](std::initializer_list<const char*> tags) {
    for (const char* t : tags)
      if (open == t) return true;
    return false;
  };
  if (incoming == "dt" || incoming == "dd") return open_is({"dt", "dd"});
  if (incoming == "td" || incoming == "th") return open_is({"td", "th"});
  if (incoming == "tr") return open_is({"td", "th"});
  if (incoming == "thead" || incoming == "tbody" || incoming == "tfoot")
    return open_is({"thead", "tbody", "tfoot", "tr", "td", "th"});
  return false;
}

inline void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Minimal entity decoding; unknown entities pass through literally.
inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    size_t semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back(s[i++]);
      continue;
    }
    std::string_view name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      uint32_t cp = 0;
      bool ok = name.size() > 1;
      if (name.size() > 2 && (name[1] == 'x' || name[1] == 'X')) {
        for (size_t k = 2; k < name.size() && ok; ++k) {
          char c = name[k];
          uint32_t d;
          if (c >= '0' && c <= '9') d = c - '0';
          else if (c >= 'a' && c <= 'f') d = 10 + c - 'a';
          else if (c >= 'A' && c <= 'F') d = 10 + c - 'A';
          else { ok = false; break; }
          cp = cp * 16 + d;
        }
        ok = ok && name.size() > 2;
      } else {
        for (size_t k = 1; k < name.size() && ok; ++k) {
          char c = name[k];
          if (c < '0' || c > '9') { ok = false; break; }
          cp = cp * 10 + (c - '0');
        }
      }
      if (ok && cp > 0 && cp <= 0x10FFFF) {
        append_utf8(out, cp);
        i = semi + 1;
        continue;
      }
    } else if (name == "amp") { out.push_back('&'); i = semi + 1; continue; }
    else if (name == "lt") { out.push_back('<'); i = semi + 1; continue; }
    else if (name == "gt") { out.push_back('>'); i = semi + 1; continue; }
    else if (name == "quot") { out.push_back('"'); i = semi + 1; continue; }
    else if (name == "apos") { out.push_back('\''); i = semi + 1; continue; }
    else if (name == "nbsp") { out.push_back(' '); i = semi + 1; continue; }
    out.push_back(s[i++]);
  }
  return out;
}

inline bool is_tag_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '-' || c == '_' || c == ':';
}

struct ForestParser {
  std::string_view src;
  size_t pos = 0;
  std::vector<std::unique_ptr<HtmlElement>> top;
  std::vector<std::string> top_text;
  std::vector<HtmlElement*> stack;

  void add_text(std::string_view raw) {
    if (raw.empty()) return;
    std::string decoded = decode_entities(raw);
    if (stack.empty()) {
      top_text.push_back(std::move(decoded));
    } else {
      stack.back()->text_runs.push_back(std::move(decoded));
    }
  }

  HtmlElement* push_element(std::string tag) {
    auto el = std::make_unique<HtmlElement>();
    el->tag = std::move(tag);
    HtmlElement* raw = el.get();
    if (stack.empty()) {
      top.push_back(std::move(el));
    } else {
      stack.back()->children.push_back(std::move(el));
    }
    return raw;
  }

  // Skips attributes honoring quotes; returns true when tag is self-closing.
  bool skip_attributes() {
    bool self_closing = false;
    while (pos < src.size() && src[pos] != '>') {
      char c = src[pos];
      if (c == '"' || c == '\'') {
        ++pos;
        while (pos < src.size() && src[pos] != c) ++pos;
        if (pos < src.size()) ++pos;
        self_closing = false;
        continue;
      }
      self_closing = (c == '/');
      ++pos;
    }
    if (pos < src.size()) ++pos;  // consume '>'
    return self_closing;
  }

  void consume_raw_text(const std::string& tag) {
    std::string close = "</" + tag;
    size_t search = pos;
    while (search < src.size()) {
      size_t hit = src.find('<', search);
      if (hit == std::string_view::npos) { pos = src.size(); return; }
      if (hit + close.size() <= src.size()) {
        bool match = true;
        for (size_t k = 0; k < close.size(); ++k) {
          char a = src[hit + k];
          char b = close[k];
          if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
          if (a != b) { match = false; break; }
        }
        if (match) {
          pos = hit + close.size();
          while (pos < src.size() && src[pos] != '>') ++pos;
          if (pos < src.size()) ++pos;
          return;  // content dropped
        }
      }
      search = hit + 1;
    }
    pos = src.size();
  }

  void handle_end_tag(const std::string& tag) {
    for (size_t i = stack.size(); i > 0; --i) {
      if (stack[i - 1]->tag == tag) {
        stack.resize(i - 1);
        return;
      }
    }
    // stray end tag: ignore
  }

  void handle_start_tag(std::string tag, bool self_closing) {
    while (!stack.empty() && start_tag_closes(tag, stack.back()->tag)) {
      stack.pop_back();
    }
    if (is_raw_text_element(tag)) {
      if (!self_closing) consume_raw_text(tag);
      // raw-text elements are dropped from the tree entirely
      return;
    }
    HtmlElement* el = push_element(tag);
    if (!self_closing && !is_void_element(el->tag)) stack.push_back(el);
  }

  void run() {
    while (pos < src.size()) {
      size_t lt = src.find('<', pos);
      if (lt == std::string_view::npos) {
        add_text(src.substr(pos));
        break;
      }
      if (lt > pos) add_text(src.substr(pos, lt - pos));
      pos = lt;
      if (pos + 1 >= src.size()) { pos = src.size(); break; }
      char next = src[pos + 1];
      if (next == '!') {
        if (src.compare(pos, 4, "<!--") == 0) {
          size_t end = src.find("-->", pos + 4);
          pos = (end == std::string_view::npos) ? src.size() : end + 3;
        } else if (src.compare(pos, 9, "<![CDATA[") == 0) {
          size_t end = src.find("]]>", pos + 9);
          pos = (end == std::string_view::npos) ? src.size() : end + 3;
        } else {
          size_t end = src.find('>', pos + 2);
          pos = (end == std::string_view::npos) ? src.size() : end + 1;
        }
        continue;
      }
      if (next == '?') {
        size_t end = src.find('>', pos + 2);
        pos = (end == std::string_view::npos) ? src.size() : end + 1;
        continue;
      }
      if (next == '/') {
        size_t start = pos + 2;
        size_t end = start;
        while (end < src.size() && is_tag_name_char(src[end])) ++end;
        std::string tag = to_lower(src.substr(start, end - start));
        size_t gt = src.find('>', end);
        pos = (gt == std::string_view::npos) ? src.size() : gt + 1;
        if (!tag.empty()) handle_end_tag(tag);
        continue;
      }
      if (is_tag_name_char(next)) {
        size_t start = pos + 1;
        size_t end = start;
        while (end < src.size() && is_tag_name_char(src[end])) ++end;
        std::string tag = to_lower(src.substr(start, end - start));
        pos = end;
        bool self_closing = skip_attributes();
        handle_start_tag(std::move(tag), self_closing);
        continue;
      }
      // lone '<' in text
      add_text(src.substr(pos, 1));
      ++pos;
    }
  }
};

inline std::string joined_direct_text(const HtmlElement& el) {
  std::string merged;
  for (const auto& run : el.text_runs) {
    merged.push_back('\n');
    merged.append(run);
  }
  return normalize_text(merged);
}

inline void emit_nodes(const HtmlElement& el, const std::string& parent_path,
                       int same_tag_index, std::vector<DomNodeRecord>& out) {
  std::string path = parent_path + "/" + el.tag + "[" +
                     std::to_string(same_tag_index) + "]";
  std::string text = joined_direct_text(el);
  if (!text.empty()) {
    DomNodeRecord rec;
    rec.xpath = path;
    rec.tag = el.tag;
    rec.text = std::move(text);
    out.push_back(std::move(rec));
  }
  // 1-based index among preceding siblings with the same tag
  std::vector<std::pair<std::string_view, int>> counts;
  for (const auto& child : el.children) {
    int idx = 1;
    for (auto& [tag, n] : counts) {
      if (tag == child->tag) { idx = ++n; break; }
    }
    if (idx == 1) counts.emplace_back(child->tag, 1);
    emit_nodes(*child, path, idx, out);
  }
}

}  // namespace detail

// Parse possibly-malformed HTML into the ordered text-bearing node list.
// Script/style/comment content is excluded; only direct text counts toward
// an element's node text. Fragments without an <html> root are wrapped in a
// synthesized html/body pair, browser-style.
inline DetailPage parse_page(std::string_view html, std::string page_id,
                             std::string website_id) {
  detail::ForestParser parser;
  parser.src = html;
  parser.run();

  bool has_content = !parser.top.empty();
  for (const auto& t : parser.top_text) {
    if (!normalize_text(t).empty()) has_content = true;
  }
  if (!has_content) {
    throw UnparseableDocument("no DOM content recovered for page '" + page_id +
                              "'");
  }

  bool single_html_root = parser.top.size() == 1 &&
                          parser.top[0]->tag == "html";
  if (single_html_root) {
    for (const auto& t : parser.top_text) {
      if (!normalize_text(t).empty()) single_html_root = false;
    }
  }

  std::unique_ptr<detail::HtmlElement> root;
  if (single_html_root) {
    root = std::move(parser.top[0]);
  } else {
    root = std::make_unique<detail::HtmlElement>();
    root->tag = "html";
    auto body = std::make_unique<detail::HtmlElement>();
    body->tag = "body";
    body->text_runs = std::move(parser.top_text);
    for (auto& el : parser.top) body->children.push_back(std::move(el));
    root->children.push_back(std::move(body));
  }

  DetailPage page;
  page.page_id = std::move(page_id);
  page.website_id = std::move(website_id);
  detail::emit_nodes(*root, "", 1, page.nodes);

  const size_t n = page.nodes.size();
  for (size_t i = 0; i < n; ++i) {
    page.nodes[i].node_id = static_cast<int>(i);
    page.nodes[i].rel_position = static_cast<double>(i) / static_cast<double>(n);
  }
  return page;
}

}  // namespace least
