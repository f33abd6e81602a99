#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "least/corpus.hpp"
#include "least/dom.hpp"
#include "least/text.hpp"

namespace least {

// The recovered website-specific relation: attribute id -> value strings.
struct SiteRelation {
  std::string website_id;
  std::vector<std::set<std::string>> rows;  // indexed by attribute id, size |A'|

  explicit SiteRelation(std::string site = {}, int n_attrs = 0)
      : website_id(std::move(site)), rows(n_attrs) {}
};

// A heuristics-based weakly supervised labeling function. Given the human-
// labeled nodes for an attribute and a page, returns node ids on that page
// it considers instances of the attribute. Must be sound: on a human-labeled
// page it may only return nodes labeled as that attribute.
struct LabelingFunction {
  std::string name;
  std::function<std::vector<int>(const std::vector<const DomNodeRecord*>&, int,
                                 const DetailPage&)>
      apply;
};

// Two node texts match iff they have the same word count and every
// positionally aligned word pair is within Levenshtein distance 3.
inline bool fuzzy_text_match(const std::string& a, const std::string& b) {
  auto wa = split_words(a);
  auto wb = split_words(b);
  if (wa.size() != wb.size() || wa.empty()) return false;
  for (size_t i = 0; i < wa.size(); ++i) {
    if (levenshtein(wa[i], wb[i]) > 3) return false;
  }
  return true;
}

inline std::vector<int> fuzzy_string_matcher(
    const std::vector<const DomNodeRecord*>& node_list, int /*attribute*/,
    const DetailPage& page) {
  std::vector<int> out;
  for (const auto& node : page.nodes) {
    for (const DomNodeRecord* seed : node_list) {
      if (fuzzy_text_match(seed->text, node.text)) {
        out.push_back(node.node_id);
        break;
      }
    }
  }
  return out;
}

inline LabelingFunction make_fuzzy_string_matcher() {
  return LabelingFunction{"fuzzy_string_matcher", fuzzy_string_matcher};
}

// Full human annotations for one page: labels indexed by node id.
struct LabeledPageView {
  const DetailPage* page = nullptr;
  std::vector<int> labels;  // size == page->nodes.size()
};

inline std::vector<LabeledPageView> build_labeled_page_views(
    const std::vector<LabeledSample>& samples, const AttributeSet& attrs) {
  std::map<const DetailPage*, std::vector<int>> by_page;
  for (const auto& s : samples) {
    auto& labels = by_page[s.page];
    if (labels.empty()) labels.assign(s.page->nodes.size(), attrs.none_id());
    labels[s.node_id] = s.label;
  }
  std::vector<LabeledPageView> views;
  for (auto& [page, labels] : by_page)
    views.push_back(LabeledPageView{page, std::move(labels)});
  return views;
}

struct SoundnessReport {
  bool sound = true;
  struct Violation {
    const DetailPage* page;
    int node_id;
  };
  std::vector<Violation> violations;
};

// True iff on every labeled page the function's output is a subset of the
// nodes human-labeled as the attribute.
inline SoundnessReport check_soundness(
    const LabelingFunction& fn, int attribute,
    const std::vector<LabeledPageView>& labeled_pages) {
  SoundnessReport report;
  for (const auto& view : labeled_pages) {
    std::vector<const DomNodeRecord*> node_list;
    for (const auto& other : labeled_pages) {
      if (other.page->website_id != view.page->website_id) continue;
      for (size_t i = 0; i < other.labels.size(); ++i)
        if (other.labels[i] == attribute)
          node_list.push_back(&other.page->nodes[i]);
    }
    if (node_list.empty()) continue;
    for (int node_id : fn.apply(node_list, attribute, *view.page)) {
      if (view.labels[node_id] != attribute) {
        report.sound = false;
        report.violations.push_back({view.page, node_id});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Overlap rules: a simplified re-implementation of the bootstrapped
// cross-site alignment idea. XPath templates (final sibling index
// wildcarded) whose value sets overlap across sites get an attribute when
// they intersect the human-labeled values for it.
// ---------------------------------------------------------------------------

struct OverlapRule {
  std::string website_id;
  std::string xpath_template;
  int attribute = 0;
};

inline std::string xpath_template_of(const std::string& xpath) {
  size_t bracket = xpath.rfind('[');
  if (bracket == std::string::npos) return xpath;
  return xpath.substr(0, bracket) + "[*]";
}

struct SeedSiteInputs {
  std::string website_id;
  std::vector<const DetailPage*> pages;  // pages available for rule mining
  // human-labeled value texts per attribute id (normalized)
  std::vector<std::set<std::string>> human_values;
};

namespace detail {

inline double jaccard(const std::set<std::string>& a,
                      const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace detail

inline std::vector<OverlapRule> infer_overlap_rules(
    const std::vector<SeedSiteInputs>& sites, const AttributeSet& attrs,
    double min_overlap) {
  // template -> extracted value set, per site
  std::vector<std::map<std::string, std::set<std::string>>> site_templates;
  site_templates.reserve(sites.size());
  for (const auto& site : sites) {
    std::map<std::string, std::set<std::string>> templates;
    for (const DetailPage* page : site.pages)
      for (const auto& node : page->nodes)
        templates[xpath_template_of(node.xpath)].insert(node.text);
    site_templates.push_back(std::move(templates));
  }

  // human-labeled bootstrap values, pooled over seed sites
  std::vector<std::set<std::string>> pooled(attrs.size());
  for (const auto& site : sites)
    for (int a = 0; a < attrs.size(); ++a)
      pooled[a].insert(site.human_values[a].begin(),
                       site.human_values[a].end());

  std::vector<OverlapRule> rules;
  for (size_t i = 0; i < sites.size(); ++i) {
    for (const auto& [tmpl, values] : site_templates[i]) {
      bool overlaps = false;
      for (size_t j = 0; j < sites.size() && !overlaps; ++j) {
        if (j == i) continue;
        for (const auto& [other_tmpl, other_values] : site_templates[j]) {
          if (detail::jaccard(values, other_values) >= min_overlap) {
            overlaps = true;
            break;
          }
        }
      }
      if (!overlaps) continue;
      // bootstrap assignment; ties are dropped
      int best_attr = -1;
      size_t best_count = 0;
      bool tie = false;
      for (int a = 0; a < attrs.size(); ++a) {
        size_t count = 0;
        for (const auto& v : values) count += pooled[a].count(v);
        if (count > best_count) {
          best_count = count;
          best_attr = a;
          tie = false;
        } else if (count == best_count && count > 0) {
          tie = true;
        }
      }
      if (best_attr >= 0 && best_count > 0 && !tie)
        rules.push_back({sites[i].website_id, tmpl, best_attr});
    }
  }
  return rules;
}

// rows[a] = human-labeled texts  ∪  labeling-function outputs over the
// site's pages  ∪  overlap-rule extractions.
inline std::vector<SiteRelation> build_site_relations(
    const std::vector<SeedSiteInputs>& sites, const AttributeSet& attrs,
    const std::vector<LabeledSample>& human_samples,
    const std::vector<LabelingFunction>& functions,
    const std::vector<OverlapRule>& rules) {
  // human-labeled node lists per (site, attribute)
  std::map<std::string, std::vector<std::vector<const DomNodeRecord*>>>
      node_lists;
  for (const auto& site : sites)
    node_lists[site.website_id].assign(attrs.size(), {});
  for (const auto& s : human_samples) {
    if (s.label == attrs.none_id()) continue;
    auto it = node_lists.find(s.page->website_id);
    if (it != node_lists.end()) it->second[s.label].push_back(&s.node());
  }

  std::vector<SiteRelation> relations;
  for (const auto& site : sites) {
    SiteRelation rel(site.website_id, attrs.size());
    for (int a = 0; a < attrs.size(); ++a)
      rel.rows[a] = site.human_values[a];

    const auto& lists = node_lists[site.website_id];
    for (const auto& fn : functions) {
      for (int a = 0; a < attrs.size(); ++a) {
        if (lists[a].empty()) continue;
        for (const DetailPage* page : site.pages)
          for (int node_id : fn.apply(lists[a], a, *page))
            rel.rows[a].insert(page->nodes[node_id].text);
      }
    }

    for (const auto& rule : rules) {
      if (rule.website_id != site.website_id) continue;
      for (const DetailPage* page : site.pages)
        for (const auto& node : page->nodes)
          if (xpath_template_of(node.xpath) == rule.xpath_template)
            rel.rows[rule.attribute].insert(node.text);
    }
    relations.push_back(std::move(rel));
  }
  return relations;
}

// ---------------------------------------------------------------------------
// Distant pseudo-labeling with majority voting over site relations.
// γ abstains on unknown texts and on vote ties; it never emits NONE.
// ---------------------------------------------------------------------------

struct VoteTable {
  // normalized text -> (winning attribute, votes); absent on tie/unknown
  std::map<std::string, std::pair<int, int>> winners;
};

inline VoteTable build_vote_table(const std::vector<SiteRelation>& relations,
                                  const AttributeSet& attrs) {
  std::map<std::string, std::vector<int>> votes;
  for (const auto& rel : relations)
    for (int a = 0; a < attrs.size(); ++a)
      for (const auto& text : rel.rows[a]) {
        auto& v = votes[text];
        if (v.empty()) v.assign(attrs.size(), 0);
        ++v[a];
      }
  VoteTable table;
  for (const auto& [text, v] : votes) {
    int best = -1, best_votes = 0;
    bool tie = false;
    for (int a = 0; a < attrs.size(); ++a) {
      if (v[a] > best_votes) {
        best_votes = v[a];
        best = a;
        tie = false;
      } else if (v[a] == best_votes && v[a] > 0) {
        tie = true;
      }
    }
    if (best >= 0 && !tie) table.winners[text] = {best, best_votes};
  }
  return table;
}

struct DistantLabel {
  int node_id = 0;
  int label = 0;
  int votes = 0;
};

inline std::vector<DistantLabel> distant_label_page(const VoteTable& table,
                                                    const DetailPage& page) {
  std::vector<DistantLabel> out;
  for (const auto& node : page.nodes) {
    auto it = table.winners.find(node.text);
    if (it != table.winners.end())
      out.push_back({node.node_id, it->second.first, it->second.second});
  }
  return out;
}

inline std::vector<DistantLabel> distant_label_page(
    const std::vector<SiteRelation>& relations, const AttributeSet& attrs,
    const DetailPage& page) {
  return distant_label_page(build_vote_table(relations, attrs), page);
}

}  // namespace least
