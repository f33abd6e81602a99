#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "least/corpus.hpp"
#include "least/dom.hpp"
#include "least/rng.hpp"
#include "least/weak_supervision.hpp"

namespace least {
namespace synth {

// ---------------------------------------------------------------------------
// Vocabulary pools. Attribute values, captions, and distractor text are kept
// structurally apart (word counts and token shapes) so the shipped fuzzy
// matcher stays sound on generated corpora; test_synth pins this down.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& title_token_pool() {
  static const std::vector<std::string> pool = {
      "Crimson",  "Horizon",  "Legacy",   "Midnight", "Silent",   "Ember",
      "Granite",  "Hollow",   "Winter",   "Voyage",   "Serpent",  "Paradox",
      "Harvest",  "Obsidian", "Cascade",  "Thunder",  "Velvet",   "Phantom",
      "Monarch",  "Drifter",  "Eclipse",  "Fortune",  "Gambit",   "Harbor",
      "Iron",     "Jubilee",  "Kingdom",  "Lantern",  "Meridian", "Nebula",
      "Outpost",  "Pinnacle", "Quarry",   "Rebellion", "Summit",  "Tempest",
      "Umbra",    "Vanguard", "Wildfire", "Zenith",   "Anthem",   "Beacon",
      "Citadel",  "Dominion", "Enigma",   "Falcon",   "Glacier",  "Haven",
      "Inferno",  "Journey",  "Karma",    "Labyrinth", "Mirage",  "Nocturne",
      "Oracle",   "Pilgrim",  "Quicksand", "Reverie", "Specter",  "Tundra"};
  return pool;
}

inline const std::vector<std::string>& person_token_pool() {
  static const std::vector<std::string> pool = {
      "Aurelia",  "Barnaby",  "Caledon",  "Delphine", "Evander",  "Fiorella",
      "Gideon",   "Henrietta", "Ignatius", "Jemima",  "Konstantin", "Lucinda",
      "Montgomery", "Natalia", "Octavius", "Persephone", "Quentin", "Rosalind",
      "Sebastian", "Theodora", "Ulysses",  "Valentina", "Wendell", "Xiomara",
      "Yolanda",  "Zacharias", "Ambrose",  "Beatrix",  "Cornelius", "Dorothea",
      "Emmerich",  "Florentina", "Gustavo", "Hyacinth", "Isadora", "Jeremiah",
      "Kerensa",  "Leopold",  "Marguerite", "Nikolai"};
  return pool;
}

inline const std::vector<std::string>& genre_vocab() {
  static const std::vector<std::string> vocab = {
      "Adventure", "Documentary", "Animation", "Thriller",
      "Westerns",  "Romantic",    "Fantasia",  "Mysteries"};
  return vocab;
}

inline const std::vector<std::string>& rating_vocab() {
  static const std::vector<std::string> vocab = {"G", "PG", "PG-13", "R",
                                                 "NC-17"};
  return vocab;
}

inline const std::vector<std::string>& distractor_token_pool() {
  static const std::vector<std::string> pool = {
      "zorvexia", "quimbalo", "ferrundle", "washboard", "crenshawl",
      "plimsodd", "grumblage", "tarraby",  "veskitone", "moradique",
      "hasperly", "dunwiddle", "crofters",  "yelvington", "sarquist",
      "bellowick", "thrombone", "gadsbury", "wrenfold",  "ossifrage",
      "lumberton", "pegwhistle", "varnishul", "kindlewood", "jasperine",
      "mottlefen", "ruckleshaw", "snodbury", "tippleford", "ulverscroft"};
  return pool;
}

struct CaptionSet {
  std::vector<std::string> variants;
};

inline const std::map<std::string, CaptionSet>& caption_pools() {
  static const std::map<std::string, CaptionSet> pools = {
      {"title", {{"Feature:", "Presentation:", "Showing:"}}},
      {"director", {{"Director:", "Filmmaker:", "Helmed by"}}},
      {"genre", {{"Category:", "Classification:", "Grouping:"}}},
      {"mpaa_rating", {{"Certificate:", "Advisory:", "Classified:"}}},
  };
  return pools;
}

inline const std::vector<std::string>& extraneous_captions() {
  static const std::vector<std::string> captions = {
      "Archive reference", "Supplier entry", "Catalog shelf", "Batch marker"};
  return captions;
}

// ---------------------------------------------------------------------------
// Abstract relation (the vertical-wide table the sites render views of).
// ---------------------------------------------------------------------------

struct AttributeSpec {
  std::string name;
  int word_count = 1;
  int vocab_size = 0;  // 0 = one unique value per tuple
  std::vector<std::string> fixed_vocab;
  std::vector<std::string> token_pool;
};

struct VerticalSchema {
  std::string vertical;
  std::vector<AttributeSpec> attrs;

  std::vector<std::string> attribute_names() const {
    std::vector<std::string> names;
    for (const auto& a : attrs) names.push_back(a.name);
    return names;
  }
};

// Table 1 movie vertical: title, director, genre, mpaa_rating.
inline VerticalSchema movie_schema(int n_tuples) {
  VerticalSchema schema;
  schema.vertical = "movie";
  schema.attrs = {
      AttributeSpec{"title", 3, 0, {}, title_token_pool()},
      AttributeSpec{"director", 2, std::max(8, n_tuples / 3), {},
                    person_token_pool()},
      AttributeSpec{"genre", 1, 0, genre_vocab(), {}},
      AttributeSpec{"mpaa_rating", 1, 0, rating_vocab(), {}},
  };
  return schema;
}

struct AbstractRelation {
  std::vector<std::string> attributes;
  std::vector<std::vector<std::string>> tuples;  // tuples[i][a]
  std::vector<int> entity_ids;
};

namespace detail {

inline std::string sample_value(const std::vector<std::string>& pool,
                                int word_count, std::mt19937_64& rng) {
  std::vector<size_t> picked;
  std::string value;
  for (int w = 0; w < word_count; ++w) {
    size_t idx;
    do {
      idx = uniform_index(rng, pool.size());
    } while (std::find(picked.begin(), picked.end(), idx) != picked.end());
    picked.push_back(idx);
    if (!value.empty()) value.push_back(' ');
    value += pool[idx];
  }
  return value;
}

}  // namespace detail

inline AbstractRelation generate_relation(int n_tuples,
                                          const VerticalSchema& schema,
                                          std::mt19937_64& rng) {
  AbstractRelation rel;
  rel.attributes = schema.attribute_names();
  rel.tuples.assign(n_tuples, std::vector<std::string>(schema.attrs.size()));
  rel.entity_ids.resize(n_tuples);
  for (int i = 0; i < n_tuples; ++i) rel.entity_ids[i] = i;

  for (size_t a = 0; a < schema.attrs.size(); ++a) {
    const AttributeSpec& spec = schema.attrs[a];
    std::vector<std::string> vocab;
    if (!spec.fixed_vocab.empty()) {
      vocab = spec.fixed_vocab;
    } else {
      int size = spec.vocab_size > 0 ? spec.vocab_size : n_tuples;
      std::set<std::string> seen;
      int guard = 0;
      while (static_cast<int>(vocab.size()) < size) {
        std::string v =
            detail::sample_value(spec.token_pool, spec.word_count, rng);
        if (++guard > 1000 && seen.count(v)) v += "x";  // exhausted pool
        if (seen.insert(v).second) vocab.push_back(std::move(v));
      }
    }
    bool unique_per_tuple =
        spec.fixed_vocab.empty() && spec.vocab_size == 0;
    for (int i = 0; i < n_tuples; ++i) {
      rel.tuples[i][a] = unique_per_tuple
                             ? vocab[i % vocab.size()]
                             : vocab[uniform_index(rng, vocab.size())];
    }
  }
  return rel;
}

// ---------------------------------------------------------------------------
// Website rendering: w_i = R_i(e_i(pi_i(sigma_i(H)))).
// ---------------------------------------------------------------------------

struct NoiseSpec {
  int extraneous_attr_count = 0;
  double null_rate = 0.0;
  double wrong_value_rate = 0.0;
};

struct SiteGenConfig {
  std::string website_id;
  double select_fraction = 1.0;          // sigma
  std::vector<int> projected_attributes; // pi, indices into relation attrs
  NoiseSpec noise;                        // e
  uint64_t seed = 0;                      // fixes template and noise
};

struct GroundTruthEntry {
  std::string page_id;
  std::string xpath;
  std::string attribute;
  std::string text;
};

struct RenderedSite {
  std::string website_id;
  std::vector<std::pair<std::string, std::string>> pages;  // (page_id, html)
  std::vector<GroundTruthEntry> truth;
  SiteRelation relation_view;  // post-noise H_{w_i}, A'-indexed rows
};

namespace detail {

inline std::string escape_html(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Emits HTML while tracking the absolute xpath of the open element.
class HtmlBuilder {
 public:
  void open(const std::string& tag) {
    int index = 1;
    if (!stack_.empty()) {
      index = ++stack_.back().child_counts[tag];
    } else {
      index = ++root_counts_[tag];
    }
    std::string path = (stack_.empty() ? std::string() : stack_.back().path) +
                       "/" + tag + "[" + std::to_string(index) + "]";
    html_ += "<" + tag + ">";
    stack_.push_back(Frame{tag, std::move(path), {}});
  }

  void text(const std::string& s) { html_ += escape_html(s); }

  void close() {
    html_ += "</" + stack_.back().tag + ">";
    stack_.pop_back();
  }

  void element(const std::string& tag, const std::string& content) {
    open(tag);
    text(content);
    close();
  }

  const std::string& current_path() const { return stack_.back().path; }
  const std::string& str() const { return html_; }

 private:
  struct Frame {
    std::string tag;
    std::string path;
    std::map<std::string, int> child_counts;
  };
  std::vector<Frame> stack_;
  std::map<std::string, int> root_counts_;
  std::string html_;
};

inline std::string gibberish(std::mt19937_64& rng, int words) {
  const auto& pool = distractor_token_pool();
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += pool[uniform_index(rng, pool.size())];
  }
  return out;
}

struct SiteTemplate {
  std::string container_tag;
  std::string caption_tag;
  std::string distractor_tag;
  std::vector<std::string> value_tags;       // per rendered slot
  std::vector<int> slot_order;               // >=0: projected attr index
                                             // <0: extraneous slot (-1-k)
  std::vector<std::string> captions;         // per projected attr (aligned)
  std::vector<std::string> extraneous_caps;  // per extraneous slot
  std::vector<std::string> fixed_distractors;
  int variable_distractors = 2;
  std::string display_name;
};

inline SiteTemplate make_site_template(const SiteGenConfig& cfg,
                                       const AbstractRelation& rel,
                                       std::mt19937_64& rng) {
  SiteTemplate t;
  const std::vector<std::string> containers = {"div", "section", "article"};
  const std::vector<std::string> caption_tags = {"h4", "h3", "label", "small"};
  const std::vector<std::string> distractor_tags = {"p", "li", "dd"};
  std::vector<std::string> value_tag_pool = {"span", "b",    "em",
                                             "strong", "i", "code"};
  t.container_tag = containers[uniform_index(rng, containers.size())];
  t.caption_tag = caption_tags[uniform_index(rng, caption_tags.size())];
  t.distractor_tag =
      distractor_tags[uniform_index(rng, distractor_tags.size())];
  shuffle_vector(value_tag_pool, rng);

  size_t n_proj = cfg.projected_attributes.size();
  size_t n_extra = static_cast<size_t>(cfg.noise.extraneous_attr_count);
  for (size_t i = 0; i < n_proj + n_extra; ++i)
    t.value_tags.push_back(value_tag_pool[i % value_tag_pool.size()]);

  for (size_t i = 0; i < n_proj; ++i)
    t.slot_order.push_back(static_cast<int>(i));
  for (size_t k = 0; k < n_extra; ++k)
    t.slot_order.push_back(-1 - static_cast<int>(k));
  shuffle_vector(t.slot_order, rng);

  for (size_t i = 0; i < n_proj; ++i) {
    const std::string& attr_name = rel.attributes[cfg.projected_attributes[i]];
    auto it = caption_pools().find(attr_name);
    if (it != caption_pools().end()) {
      const auto& variants = it->second.variants;
      t.captions.push_back(variants[uniform_index(rng, variants.size())]);
    } else {
      t.captions.push_back(attr_name + ":");
    }
  }
  for (size_t k = 0; k < n_extra; ++k) {
    const auto& caps = extraneous_captions();
    t.extraneous_caps.push_back(caps[uniform_index(rng, caps.size())]);
  }

  int n_fixed = 2 + static_cast<int>(uniform_index(rng, 3));
  for (int i = 0; i < n_fixed; ++i)
    t.fixed_distractors.push_back(
        gibberish(rng, 4 + static_cast<int>(uniform_index(rng, 3))));
  t.variable_distractors = 2 + static_cast<int>(uniform_index(rng, 4));
  t.display_name = cfg.website_id + " " + gibberish(rng, 3);
  return t;
}

}  // namespace detail

// Selects ceil(sigma * n) tuples, projects, applies noise consistently at
// page level, renders one page per surviving tuple, and emits exact ground
// truth plus the post-noise relation view.
inline RenderedSite render_website(const AbstractRelation& rel,
                                   const SiteGenConfig& cfg) {
  if (cfg.projected_attributes.empty())
    throw InvalidConfig("projected_attributes must be non-empty");
  std::mt19937_64 rng(cfg.seed);

  RenderedSite site;
  site.website_id = cfg.website_id;
  site.relation_view =
      SiteRelation(cfg.website_id, static_cast<int>(rel.attributes.size()));

  // sigma: distinct tuples, page order by entity id
  size_t n = rel.tuples.size();
  size_t take = static_cast<size_t>(
      std::ceil(cfg.select_fraction * static_cast<double>(n)));
  take = std::min(take, n);
  std::vector<size_t> indices(n);
  for (size_t i = 0; i < n; ++i) indices[i] = i;
  for (size_t i = 0; i < take; ++i) {
    size_t j = i + uniform_index(rng, n - i);
    std::swap(indices[i], indices[j]);
  }
  std::vector<size_t> selected(indices.begin(), indices.begin() + take);
  std::sort(selected.begin(), selected.end());

  detail::SiteTemplate tmpl = detail::make_site_template(cfg, rel, rng);

  // e: per-tuple noise, fixed before rendering so page and relation agree
  struct PageValues {
    std::vector<std::string> values;  // per projected attr, "" = null
  };
  std::vector<PageValues> page_values(selected.size());
  for (size_t p = 0; p < selected.size(); ++p) {
    const auto& tuple = rel.tuples[selected[p]];
    auto& pv = page_values[p];
    pv.values.resize(cfg.projected_attributes.size());
    for (size_t i = 0; i < cfg.projected_attributes.size(); ++i) {
      int attr = cfg.projected_attributes[i];
      std::string value = tuple[attr];
      double roll = uniform01(rng);
      if (roll < cfg.noise.null_rate) {
        value.clear();
      } else if (roll < cfg.noise.null_rate + cfg.noise.wrong_value_rate) {
        // corrupt: a different value of the same attribute
        std::set<std::string> others;
        for (const auto& t : rel.tuples)
          if (t[attr] != value) others.insert(t[attr]);
        if (!others.empty()) {
          size_t pick = uniform_index(rng, others.size());
          auto it = others.begin();
          std::advance(it, pick);
          value = *it;
        }
      }
      pv.values[i] = value;
      if (!value.empty())
        site.relation_view.rows[attr].insert(normalize_text(value));
    }
  }

  for (size_t p = 0; p < selected.size(); ++p) {
    std::string page_id = cfg.website_id + "-p" + [&] {
      std::string num = std::to_string(p);
      while (num.size() < 4) num.insert(num.begin(), '0');
      return num;
    }();

    detail::HtmlBuilder b;
    b.open("html");
    b.open("head");
    b.element("title", tmpl.display_name);
    b.close();  // head
    b.open("body");

    b.open("div");
    for (const auto& fixed : tmpl.fixed_distractors)
      b.element("p", fixed);
    b.close();

    b.open(tmpl.container_tag);
    for (int slot : tmpl.slot_order) {
      if (slot >= 0) {
        const std::string& value = page_values[p].values[slot];
        if (value.empty()) continue;  // nulled by e_i
        b.open("div");
        b.element(tmpl.caption_tag, tmpl.captions[slot]);
        b.open(tmpl.value_tags[slot]);
        std::string value_xpath = b.current_path();
        b.text(value);
        b.close();
        b.close();
        site.truth.push_back(GroundTruthEntry{
            page_id, value_xpath,
            rel.attributes[cfg.projected_attributes[slot]],
            normalize_text(value)});
      } else {
        int k = -1 - slot;
        b.open("div");
        b.element(tmpl.caption_tag, tmpl.extraneous_caps[k]);
        b.element(tmpl.value_tags[cfg.projected_attributes.size() + k],
                  detail::gibberish(rng, 4));
        b.close();
      }
    }
    b.close();  // container

    b.open("ul");
    for (int d = 0; d < tmpl.variable_distractors; ++d)
      b.element("li", detail::gibberish(
                          rng, 4 + static_cast<int>(uniform_index(rng, 5))));
    b.close();

    b.open("div");
    b.element(tmpl.distractor_tag, tmpl.fixed_distractors.front());
    b.close();

    b.close();  // body
    b.close();  // html
    site.pages.emplace_back(std::move(page_id), b.str());
  }
  return site;
}

// ---------------------------------------------------------------------------
// Whole-vertical generation and the on-disk layout consumed by the CLI:
//   <out>/<vertical>/<site>/<page>.html
//   <out>/<vertical>/_truth/<site>.jsonl      full ground truth
//   <out>/<vertical>/_labels/<site>.jsonl     seed sites, truncated
//   <out>/<vertical>/manifest.json
// ---------------------------------------------------------------------------

struct VerticalGenSpec {
  VerticalSchema schema;
  int n_tuples = 334;
  int sites = 5;
  int seed_sites = 2;
  int labeled_pages_per_seed = 19;
  double select_fraction = 0.6;
  NoiseSpec noise;
  uint64_t seed = 1;
};

inline VerticalGenSpec dense_preset(int pages_per_site = 200) {
  VerticalGenSpec spec;
  spec.select_fraction = 0.6;
  spec.n_tuples = static_cast<int>(
      std::ceil(pages_per_site / spec.select_fraction));
  spec.schema = movie_schema(spec.n_tuples);
  spec.noise = NoiseSpec{1, 0.05, 0.02};
  return spec;
}

inline VerticalGenSpec sparse_preset(int pages_per_site = 200) {
  VerticalGenSpec spec;
  spec.select_fraction = 0.1;
  spec.n_tuples = static_cast<int>(
      std::ceil(pages_per_site / spec.select_fraction));
  spec.schema = movie_schema(spec.n_tuples);
  spec.noise = NoiseSpec{2, 0.10, 0.05};
  return spec;
}

struct GeneratedVertical {
  std::string vertical;
  std::vector<std::string> attribute_names;
  std::vector<std::string> site_ids;
  std::vector<std::string> seed_site_ids;
  std::vector<RenderedSite> sites;
  std::vector<std::vector<LabelFileEntry>> seed_labels;  // per seed site
};

inline GeneratedVertical generate_vertical_data(const VerticalGenSpec& spec) {
  if (spec.sites < spec.seed_sites + 3)
    throw InvalidConfig("need at least seed_sites + 3 websites");
  std::mt19937_64 rel_rng(derive_seed(spec.seed, "relation"));
  AbstractRelation rel =
      generate_relation(spec.n_tuples, spec.schema, rel_rng);

  GeneratedVertical out;
  out.vertical = spec.schema.vertical;
  out.attribute_names = rel.attributes;

  for (int s = 0; s < spec.sites; ++s) {
    SiteGenConfig cfg;
    cfg.website_id = "site" + std::to_string(s);
    cfg.select_fraction = spec.select_fraction;
    for (size_t a = 0; a < rel.attributes.size(); ++a)
      cfg.projected_attributes.push_back(static_cast<int>(a));
    cfg.noise = spec.noise;
    cfg.seed = derive_seed(spec.seed, "site" + std::to_string(s));
    out.site_ids.push_back(cfg.website_id);
    out.sites.push_back(render_website(rel, cfg));
  }

  for (int s = 0; s < spec.seed_sites; ++s) {
    out.seed_site_ids.push_back(out.site_ids[s]);
    const RenderedSite& site = out.sites[s];
    if (static_cast<int>(site.pages.size()) < spec.labeled_pages_per_seed)
      throw InsufficientPages("site " + site.website_id + " has " +
                              std::to_string(site.pages.size()) +
                              " pages, cannot label " +
                              std::to_string(spec.labeled_pages_per_seed));
    std::set<std::string> labeled_pages;
    for (int p = 0; p < spec.labeled_pages_per_seed; ++p)
      labeled_pages.insert(site.pages[p].first);
    std::vector<LabelFileEntry> entries;
    for (const auto& t : site.truth)
      if (labeled_pages.count(t.page_id))
        entries.push_back(LabelFileEntry{t.page_id, t.xpath, t.attribute});
    out.seed_labels.push_back(std::move(entries));
  }
  return out;
}

inline std::filesystem::path write_vertical(
    const std::filesystem::path& out_dir, const GeneratedVertical& data,
    const VerticalGenSpec& spec) {
  namespace fs = std::filesystem;
  fs::path root = out_dir / data.vertical;
  fs::create_directories(root / "_truth");
  fs::create_directories(root / "_labels");

  for (const auto& site : data.sites) {
    fs::create_directories(root / site.website_id);
    for (const auto& [page_id, html] : site.pages) {
      std::ofstream f(root / site.website_id / (page_id + ".html"),
                      std::ios::binary);
      f << html;
    }
    std::ofstream truth(root / "_truth" / (site.website_id + ".jsonl"));
    for (const auto& t : site.truth) {
      nlohmann::json j{{"page", t.page_id},
                       {"xpath", t.xpath},
                       {"attribute", t.attribute},
                       {"text", t.text}};
      truth << j.dump() << "\n";
    }
  }
  for (size_t i = 0; i < data.seed_site_ids.size(); ++i) {
    write_label_file(root / "_labels" / (data.seed_site_ids[i] + ".jsonl"),
                     data.seed_labels[i]);
  }

  nlohmann::json manifest{
      {"vertical", data.vertical},
      {"attributes", data.attribute_names},
      {"sites", data.site_ids},
      {"seed_sites", data.seed_site_ids},
      {"n_tuples", spec.n_tuples},
      {"select_fraction", spec.select_fraction},
      {"labeled_pages_per_seed", spec.labeled_pages_per_seed},
      {"seed", spec.seed}};
  std::ofstream mf(root / "manifest.json");
  mf << manifest.dump(2) << "\n";
  return root;
}

}  // namespace synth
}  // namespace least
