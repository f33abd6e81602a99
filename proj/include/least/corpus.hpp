#pragma once

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "least/dom.hpp"
#include "least/errors.hpp"
#include "least/rng.hpp"

namespace least {

// The vertical's attribute set A'. Class ids are 0..size()-1 for attributes
// in declared order, plus the NONE class at index size().
class AttributeSet {
 public:
  explicit AttributeSet(std::vector<std::string> names)
      : names_(std::move(names)) {
    if (names_.empty()) throw InvalidConfig("attribute set must be non-empty");
    for (const auto& n : names_) {
      if (n == kNoneName)
        throw InvalidConfig("attribute name 'NONE' is reserved");
    }
    class_names_ = names_;
    class_names_.push_back(kNoneName);
  }

  int size() const { return static_cast<int>(names_.size()); }
  int class_count() const { return size() + 1; }
  int none_id() const { return size(); }
  const std::string& class_name(int id) const { return class_names_.at(id); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<std::string>& attribute_names() const { return names_; }

  std::optional<int> find(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
      if (names_[i] == name) return i;
    if (name == kNoneName) return none_id();
    return std::nullopt;
  }

  int require(const std::string& name) const {
    auto id = find(name);
    if (!id) throw UnknownAttribute("unknown attribute '" + name + "'");
    return *id;
  }

  static constexpr const char* kNoneName = "NONE";

 private:
  std::vector<std::string> names_;
  std::vector<std::string> class_names_;
};

enum class LabelSource { Human, Generative, Teacher };

inline const char* label_source_name(LabelSource s) {
  switch (s) {
    case LabelSource::Human: return "human";
    case LabelSource::Generative: return "generative";
    case LabelSource::Teacher: return "teacher";
  }
  return "?";
}

struct LabeledSample {
  const DetailPage* page = nullptr;
  int node_id = 0;
  int label = 0;  // class id, NONE included

  const DomNodeRecord& node() const { return page->nodes[node_id]; }
  std::string key() const { return node_key(*page, node_id); }
};

struct PseudoLabeledSample {
  const DetailPage* page = nullptr;
  int node_id = 0;
  int hard_label = 0;
  std::vector<double> soft_label;  // length |A'|+1, sums to 1
  LabelSource source = LabelSource::Teacher;
  double weight = 1.0;
  int iteration_added = 0;
  int weight_iteration = -1;  // iteration whose V produced the weight

  const DomNodeRecord& node() const { return page->nodes[node_id]; }
  std::string key() const { return node_key(*page, node_id); }
};

struct ValidationEntry {
  const DetailPage* page = nullptr;
  int node_id = 0;
  int human_label = 0;
  std::vector<double> soft_pseudo;
  int hard_pseudo = 0;

  const DomNodeRecord& node() const { return page->nodes[node_id]; }
};

struct ValidationSet {
  std::vector<ValidationEntry> entries;

  std::set<std::string> page_ids() const {
    std::set<std::string> ids;
    for (const auto& e : entries) ids.insert(e.page->page_id);
    return ids;
  }
};

struct AugmentedCorpus {
  std::vector<PseudoLabeledSample> samples;
  std::set<std::string> consumed_pool_ids;  // node keys ever added
};

// Owns parsed pages; pointers into it stay valid for the run. Movable but
// not copyable (the index holds element pointers).
class PageStore {
 public:
  PageStore() = default;
  PageStore(PageStore&&) = default;
  PageStore& operator=(PageStore&&) = default;
  PageStore(const PageStore&) = delete;
  PageStore& operator=(const PageStore&) = delete;

  const DetailPage& add(DetailPage&& page) {
    std::string key = page.page_id;
    if (by_id_.count(key)) {
      throw InvalidConfig("duplicate page id '" + key +
                          "' (page ids must be unique across websites)");
    }
    pages_.push_back(std::move(page));
    const DetailPage& ref = pages_.back();
    by_id_[key] = &ref;
    return ref;
  }

  const DetailPage* find(const std::string& page_id) const {
    auto it = by_id_.find(page_id);
    return it == by_id_.end() ? nullptr : it->second;
  }

  const std::deque<DetailPage>& pages() const { return pages_; }
  size_t size() const { return pages_.size(); }

  std::vector<const DetailPage*> site_pages(const std::string& website_id) const {
    std::vector<const DetailPage*> out;
    for (const auto& p : pages_)
      if (p.website_id == website_id) out.push_back(&p);
    return out;
  }

  std::set<std::string> websites() const {
    std::set<std::string> out;
    for (const auto& p : pages_) out.insert(p.website_id);
    return out;
  }

 private:
  std::deque<DetailPage> pages_;
  std::map<std::string, const DetailPage*> by_id_;
};

// ---------------------------------------------------------------------------
// Label files: JSON lines, one object per labeled node,
//   {"page": "<page_id>", "xpath": "<abs xpath>", "attribute": "<name>"}
// Nodes of a labeled page absent from the file are NONE.
// ---------------------------------------------------------------------------

struct LabelFileEntry {
  std::string page;
  std::string xpath;
  std::string attribute;
};

inline std::vector<LabelFileEntry> read_label_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open label file " + path.string());
  std::vector<LabelFileEntry> entries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_text(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidConfig(path.string() + ":" + std::to_string(lineno) +
                          ": bad JSON: " + e.what());
    }
    LabelFileEntry e;
    e.page = j.at("page").get<std::string>();
    e.xpath = j.at("xpath").get<std::string>();
    e.attribute = j.at("attribute").get<std::string>();
    entries.push_back(std::move(e));
  }
  return entries;
}

inline void write_label_file(const std::filesystem::path& path,
                             const std::vector<LabelFileEntry>& entries) {
  std::ofstream out(path);
  for (const auto& e : entries) {
    nlohmann::json j{{"page", e.page}, {"xpath", e.xpath},
                     {"attribute", e.attribute}};
    out << j.dump() << "\n";
  }
}

// Reads every .html/.htm under <dir>/<website_id>/<page_id>.html.
// Directories starting with '_' hold sidecar files and are skipped.
inline PageStore load_pages_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw InvalidConfig("not a directory: " + dir.string());
  PageStore store;
  std::vector<fs::path> sites;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    std::string name = entry.path().filename().string();
    if (!name.empty() && name[0] == '_') continue;
    sites.push_back(entry.path());
  }
  std::sort(sites.begin(), sites.end());
  for (const auto& site_dir : sites) {
    std::string website_id = site_dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& f : fs::directory_iterator(site_dir)) {
      if (!f.is_regular_file()) continue;
      auto ext = f.path().extension().string();
      if (ext == ".html" || ext == ".htm") files.push_back(f.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      std::string html((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      store.add(parse_page(html, file.stem().string(), website_id));
    }
  }
  return store;
}

// Every node of a page mentioned in the label entries becomes a LabeledSample
// (unmentioned nodes are NONE). Returns samples plus the labeled page-id set.
struct AppliedLabels {
  std::vector<LabeledSample> samples;
  std::set<std::string> labeled_page_ids;
};

inline AppliedLabels apply_labels(const PageStore& pages,
                                  const std::vector<LabelFileEntry>& entries,
                                  const AttributeSet& attrs) {
  std::map<std::string, std::map<std::string, int>> by_page;  // page -> xpath -> label
  for (const auto& e : entries) {
    int label = attrs.require(e.attribute);
    by_page[e.page][e.xpath] = label;
  }
  AppliedLabels out;
  for (const auto& [page_id, xpath_labels] : by_page) {
    const DetailPage* page = pages.find(page_id);
    if (!page) {
      throw DanglingXPath("label file references unknown page '" + page_id +
                          "'");
    }
    std::map<std::string, int> node_by_xpath;
    for (const auto& n : page->nodes) node_by_xpath[n.xpath] = n.node_id;
    std::vector<int> labels(page->nodes.size(), attrs.none_id());
    for (const auto& [xpath, label] : xpath_labels) {
      auto it = node_by_xpath.find(xpath);
      if (it == node_by_xpath.end()) {
        throw DanglingXPath("page '" + page_id + "' has no node at xpath " +
                            xpath);
      }
      labels[it->second] = label;
    }
    for (const auto& n : page->nodes) {
      out.samples.push_back(LabeledSample{page, n.node_id, labels[n.node_id]});
    }
    out.labeled_page_ids.insert(page_id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initial split (Algorithm 1 line 3): page-level, per seed website, into the
// human part of the augmented corpus and the validation set.
// ---------------------------------------------------------------------------

struct InitialSplit {
  AugmentedCorpus corpus;        // human samples, weight 1
  ValidationSet validation;
  std::set<std::string> training_page_ids;
  std::set<std::string> validation_page_ids;
};

inline InitialSplit split_initial(const std::vector<LabeledSample>& labeled,
                                  const AttributeSet& attrs,
                                  int validation_pages_per_site,
                                  std::mt19937_64& rng) {
  if (validation_pages_per_site < 1) {
    throw InsufficientLabeledPages(
        "validation_pages_per_site must be >= 1; reweighting needs a "
        "non-empty validation set");
  }
  std::map<std::string, std::set<std::string>> pages_by_site;
  for (const auto& s : labeled)
    pages_by_site[s.page->website_id].insert(s.page->page_id);

  InitialSplit split;
  for (const auto& [site, page_set] : pages_by_site) {
    if (static_cast<int>(page_set.size()) < validation_pages_per_site + 1) {
      throw InsufficientLabeledPages(
          "website '" + site + "' has " + std::to_string(page_set.size()) +
          " labeled pages, needs at least " +
          std::to_string(validation_pages_per_site + 1));
    }
    std::vector<std::string> page_ids(page_set.begin(), page_set.end());
    shuffle_vector(page_ids, rng);
    for (size_t i = 0; i < page_ids.size(); ++i) {
      if (static_cast<int>(i) < validation_pages_per_site)
        split.validation_page_ids.insert(page_ids[i]);
      else
        split.training_page_ids.insert(page_ids[i]);
    }
  }

  for (const auto& s : labeled) {
    if (split.validation_page_ids.count(s.page->page_id)) {
      ValidationEntry e;
      e.page = s.page;
      e.node_id = s.node_id;
      e.human_label = s.label;
      e.soft_pseudo.assign(attrs.class_count(),
                           1.0 / attrs.class_count());
      e.hard_pseudo = attrs.none_id();
      split.validation.entries.push_back(std::move(e));
    } else {
      PseudoLabeledSample p;
      p.page = s.page;
      p.node_id = s.node_id;
      p.hard_label = s.label;
      p.soft_label.assign(attrs.class_count(), 0.0);
      p.soft_label[s.label] = 1.0;
      p.source = LabelSource::Human;
      p.weight = 1.0;
      p.iteration_added = 0;
      split.corpus.consumed_pool_ids.insert(p.key());
      split.corpus.samples.push_back(std::move(p));
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// Unlabeled node pool with without-replacement sampling (Alg. 1 line 6).
// ---------------------------------------------------------------------------

class UnlabeledPool {
 public:
  struct Entry {
    const DetailPage* page;
    int node_id;
    std::string key() const { return node_key(*page, node_id); }
  };

  void add_page(const DetailPage& page) {
    for (const auto& n : page.nodes)
      entries_.push_back(Entry{&page, n.node_id});
  }

  // Canonical order, then ready for sampling. Call once after adds.
  void finalize() {
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) {
                auto ka = std::tie(a.page->website_id, a.page->page_id,
                                   a.node_id);
                auto kb = std::tie(b.page->website_id, b.page->page_id,
                                   b.node_id);
                return ka < kb;
              });
    remaining_.resize(entries_.size());
    for (size_t i = 0; i < entries_.size(); ++i)
      remaining_[i] = static_cast<uint32_t>(i);
  }

  // At most L distinct new nodes; fewer only when the pool is exhausted.
  std::vector<Entry> sample(size_t L, std::mt19937_64& rng) {
    size_t k = std::min(L, remaining_.size());
    std::vector<Entry> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + uniform_index(rng, remaining_.size() - i);
      std::swap(remaining_[i], remaining_[j]);
      out.push_back(entries_[remaining_[i]]);
    }
    remaining_.erase(remaining_.begin(), remaining_.begin() + k);
    for (const auto& e : out) consumed_.insert(e.key());
    return out;
  }

  size_t remaining() const { return remaining_.size(); }
  size_t total() const { return entries_.size(); }
  const std::set<std::string>& consumed() const { return consumed_; }

 private:
  std::vector<Entry> entries_;
  std::vector<uint32_t> remaining_;
  std::set<std::string> consumed_;
};

}  // namespace least
