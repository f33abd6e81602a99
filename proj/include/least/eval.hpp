#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "least/classifier.hpp"
#include "least/corpus.hpp"
#include "least/errors.hpp"
#include "least/rng.hpp"

namespace least {

// Top-1 per-attribute extraction from one page.
struct ExtractionResult {
  struct Prediction {
    int attribute = 0;
    std::string xpath;
    std::string text;
    double confidence = 0.0;
  };
  std::string page_id;
  std::vector<Prediction> predictions;  // at most one per attribute
};

// For each attribute, take the node maximizing P(a|node); emit a prediction
// only if that beats P(NONE|node) there (forced top-1 with abstain=false).
// Ties abstain: the inequality is strict.
inline ExtractionResult extract_page(const ClassifierState& model,
                                     const DetailPage& page,
                                     const AttributeSet& attrs,
                                     FeatureCache& cache, bool abstain = true) {
  ExtractionResult result;
  result.page_id = page.page_id;
  if (page.nodes.empty()) return result;

  std::vector<std::vector<double>> soft(page.nodes.size());
  for (const auto& node : page.nodes)
    soft[node.node_id] = predict(model, cache.get(page, node.node_id));

  for (int a = 0; a < attrs.size(); ++a) {
    int best = 0;
    for (size_t i = 1; i < soft.size(); ++i)
      if (soft[i][a] > soft[best][a]) best = static_cast<int>(i);
    if (abstain && !(soft[best][a] > soft[best][attrs.none_id()])) continue;
    result.predictions.push_back(ExtractionResult::Prediction{
        a, page.nodes[best].xpath, page.nodes[best].text, soft[best][a]});
  }
  return result;
}

// Ground truth for evaluation: per page and attribute, the set of accepted
// (normalized) value texts.
struct GroundTruth {
  std::map<std::string, std::map<int, std::set<std::string>>> by_page;

  void add(const std::string& page_id, int attribute,
           const std::string& text) {
    by_page[page_id][attribute].insert(normalize_text(text));
  }
};

struct AttributeScore {
  double precision = 0.0;  // percent
  double recall = 0.0;
  double f1 = 0.0;
  size_t predictions_made = 0;
  size_t correct = 0;
  size_t pages_with_truth = 0;
};

struct EvalReport {
  std::vector<AttributeScore> per_attribute;  // indexed by attribute id
  double macro_f1 = 0.0;
  size_t pages_evaluated = 0;

  nlohmann::json to_json(const AttributeSet& attrs) const {
    nlohmann::json per;
    for (int a = 0; a < attrs.size(); ++a) {
      const auto& s = per_attribute[a];
      per[attrs.class_name(a)] = {{"precision", s.precision},
                                  {"recall", s.recall},
                                  {"f1", s.f1},
                                  {"predictions_made", s.predictions_made},
                                  {"correct", s.correct},
                                  {"pages_with_truth", s.pages_with_truth}};
    }
    return nlohmann::json{{"per_attribute", per},
                          {"macro_f1", macro_f1},
                          {"pages_evaluated", pages_evaluated}};
  }
};

// Page-level scores with text-match correctness. A prediction is correct iff
// its normalized text equals any ground-truth text for that attribute on
// that page. Precision with zero predictions is 0 by convention.
inline EvalReport evaluate(const std::vector<ExtractionResult>& results,
                           const GroundTruth& truth,
                           const AttributeSet& attrs) {
  EvalReport report;
  report.per_attribute.assign(attrs.size(), {});
  report.pages_evaluated = results.size();

  for (int a = 0; a < attrs.size(); ++a) {
    auto& score = report.per_attribute[a];
    for (const auto& [page_id, attr_map] : truth.by_page)
      if (attr_map.count(a)) ++score.pages_with_truth;
  }

  for (const auto& result : results) {
    auto page_it = truth.by_page.find(result.page_id);
    for (const auto& pred : result.predictions) {
      auto& score = report.per_attribute[pred.attribute];
      ++score.predictions_made;
      if (page_it == truth.by_page.end()) continue;
      auto attr_it = page_it->second.find(pred.attribute);
      if (attr_it == page_it->second.end()) continue;
      if (attr_it->second.count(normalize_text(pred.text))) ++score.correct;
    }
  }

  double f1_sum = 0.0;
  for (int a = 0; a < attrs.size(); ++a) {
    auto& s = report.per_attribute[a];
    double p = s.predictions_made > 0
                   ? static_cast<double>(s.correct) / s.predictions_made
                   : 0.0;
    double r = s.pages_with_truth > 0
                   ? static_cast<double>(s.correct) / s.pages_with_truth
                   : 0.0;
    s.precision = 100.0 * p;
    s.recall = 100.0 * r;
    s.f1 = (p + r > 0.0) ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
    f1_sum += s.f1;
  }
  report.macro_f1 = f1_sum / attrs.size();
  return report;
}

// ---------------------------------------------------------------------------
// Experiment splits (zero-shot / in-domain). Test pages never reach any
// training pool.
// ---------------------------------------------------------------------------

enum class EvalMode { ZeroShot, InDomain };

struct ExperimentSplit {
  std::set<std::string> test_page_ids;
  std::set<std::string> pool_page_ids;  // unlabeled training pool
};

inline ExperimentSplit split_experiment(
    const PageStore& pages, const std::set<std::string>& labeled_page_ids,
    const std::set<std::string>& seed_sites,
    const std::set<std::string>& target_sites, EvalMode mode,
    int held_out_per_seed, std::mt19937_64& rng) {
  for (const auto& s : seed_sites) {
    if (target_sites.count(s))
      throw OverlappingSiteSets("website '" + s +
                                "' is both seed and target");
  }

  ExperimentSplit split;
  if (mode == EvalMode::ZeroShot) {
    for (const auto& page : pages.pages()) {
      if (target_sites.count(page.website_id)) {
        split.test_page_ids.insert(page.page_id);
      } else if (!labeled_page_ids.count(page.page_id)) {
        split.pool_page_ids.insert(page.page_id);
      }
    }
    return split;
  }

  // in-domain: held-out unseen pages of each seed site form the test set;
  // everything else unlabeled (any site) is pool
  for (const auto& site : seed_sites) {
    std::vector<std::string> candidates;
    for (const DetailPage* p : pages.site_pages(site))
      if (!labeled_page_ids.count(p->page_id))
        candidates.push_back(p->page_id);
    std::sort(candidates.begin(), candidates.end());
    if (static_cast<int>(candidates.size()) < held_out_per_seed)
      throw InsufficientPages(
          "website '" + site + "' has " + std::to_string(candidates.size()) +
          " unseen pages, needs " + std::to_string(held_out_per_seed) +
          " for the in-domain test set");
    shuffle_vector(candidates, rng);
    for (int i = 0; i < held_out_per_seed; ++i)
      split.test_page_ids.insert(candidates[i]);
  }
  for (const auto& page : pages.pages()) {
    if (split.test_page_ids.count(page.page_id)) continue;
    if (labeled_page_ids.count(page.page_id)) continue;
    split.pool_page_ids.insert(page.page_id);
  }
  return split;
}

// ---------------------------------------------------------------------------
// JSONL plumbing for the extract/eval subcommands.
// ---------------------------------------------------------------------------

inline void write_predictions(const std::filesystem::path& path,
                              const std::vector<ExtractionResult>& results,
                              const AttributeSet& attrs) {
  std::ofstream out(path);
  if (!out) throw InvalidConfig("cannot write " + path.string());
  for (const auto& r : results) {
    for (const auto& p : r.predictions) {
      nlohmann::json j{{"page", r.page_id},
                       {"attribute", attrs.class_name(p.attribute)},
                       {"xpath", p.xpath},
                       {"text", p.text},
                       {"confidence", p.confidence}};
      out << j.dump() << "\n";
    }
  }
}

inline std::vector<ExtractionResult> read_predictions(
    const std::filesystem::path& path, const AttributeSet& attrs) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open predictions " + path.string());
  std::map<std::string, ExtractionResult> by_page;
  std::string line;
  while (std::getline(in, line)) {
    if (normalize_text(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    auto& r = by_page[j.at("page").get<std::string>()];
    r.page_id = j.at("page").get<std::string>();
    ExtractionResult::Prediction p;
    p.attribute = attrs.require(j.at("attribute").get<std::string>());
    p.xpath = j.value("xpath", "");
    p.text = j.at("text").get<std::string>();
    p.confidence = j.value("confidence", 0.0);
    r.predictions.push_back(std::move(p));
  }
  std::vector<ExtractionResult> results;
  for (auto& [_, r] : by_page) results.push_back(std::move(r));
  return results;
}

// Truth files are label-format JSONL with an extra "text" field.
inline GroundTruth read_ground_truth(const std::filesystem::path& path,
                                     const AttributeSet& attrs) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open truth file " + path.string());
  GroundTruth truth;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_text(line).empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (!j.contains("text"))
      throw InvalidConfig(path.string() + ":" + std::to_string(lineno) +
                          ": truth entries need a \"text\" field");
    truth.add(j.at("page").get<std::string>(),
              attrs.require(j.at("attribute").get<std::string>()),
              j.at("text").get<std::string>());
  }
  return truth;
}

}  // namespace least
