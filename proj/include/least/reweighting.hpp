#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "least/classifier.hpp"
#include "least/corpus.hpp"
#include "least/errors.hpp"

namespace least {

struct ReweightConfig {
  double epsilon = 0.0005;    // page-overlap floor
  double weight_floor = 0.01; // normalization floor for accuracies
};

// The (hard predicted label, normalized text) pairs of a page's nodes under
// one model snapshot. Keyed this way so Jaccard is well-defined across pages
// from different sites.
struct PageSignature {
  std::string website_id;
  std::string page_id;
  std::vector<std::pair<int, std::string>> items;  // sorted, unique
};

inline PageSignature build_page_signature(const ClassifierState& model,
                                          const DetailPage& page,
                                          FeatureCache& cache) {
  PageSignature sig;
  sig.website_id = page.website_id;
  sig.page_id = page.page_id;
  sig.items.reserve(page.nodes.size());
  for (const auto& node : page.nodes) {
    auto soft = predict(model, cache.get(page, node.node_id));
    sig.items.emplace_back(argmax(soft), node.text);
  }
  std::sort(sig.items.begin(), sig.items.end());
  sig.items.erase(std::unique(sig.items.begin(), sig.items.end()),
                  sig.items.end());
  return sig;
}

// max(epsilon, Jaccard). Two empty signatures carry no transfer evidence
// and return epsilon, not 1.
inline double page_overlap(const PageSignature& a, const PageSignature& b,
                           const ReweightConfig& cfg) {
  size_t inter = 0;
  size_t i = 0, j = 0;
  while (i < a.items.size() && j < b.items.size()) {
    if (a.items[i] < b.items[j]) ++i;
    else if (b.items[j] < a.items[i]) ++j;
    else { ++inter; ++i; ++j; }
  }
  size_t uni = a.items.size() + b.items.size() - inter;
  if (uni == 0) return cfg.epsilon;
  double js = static_cast<double>(inter) / static_cast<double>(uni);
  return std::max(cfg.epsilon, js);
}

// Fraction of the site's validation entries whose hard pseudo-label equals
// the human label, clamped below by weight_floor.
inline double hard_accuracy_for_site(const ValidationSet& v,
                                     const std::string& website_id,
                                     const ReweightConfig& cfg) {
  size_t total = 0, correct = 0;
  for (const auto& e : v.entries) {
    if (e.page->website_id != website_id) continue;
    ++total;
    if (e.hard_pseudo == e.human_label) ++correct;
  }
  if (total == 0)
    throw NoValidationEntries("no validation entries for website '" +
                              website_id + "'");
  double acc = static_cast<double>(correct) / static_cast<double>(total);
  return std::max(cfg.weight_floor, acc);
}

// Mean probability mass the soft pseudo-labels put on the human labels of
// the page's validation entries, clamped below by weight_floor.
inline double soft_accuracy_for_page(const ValidationSet& v,
                                     const std::string& page_id,
                                     const ReweightConfig& cfg) {
  size_t total = 0;
  double sum = 0.0;
  for (const auto& e : v.entries) {
    if (e.page->page_id != page_id) continue;
    ++total;
    sum += e.soft_pseudo[e.human_label];
  }
  if (total == 0)
    throw NoValidationEntries("no validation entries for page '" + page_id +
                              "'");
  return std::max(cfg.weight_floor, sum / static_cast<double>(total));
}

struct PageWeightDecision {
  double weight = 1.0;
  char case_tag = 'A';  // A: human-labeled seed page, B: seed site, C: other
  std::string matched_validation_page;  // case C only
};

// Case A: human-labeled page of a seed site -> 1.0.
// Case B: seed site, page not human-labeled -> site hard accuracy.
// Case C: non-seed site -> soft accuracy of the best-overlap validation
//         page times that overlap; the argmax runs over validation_sigs in
//         the given order and ties keep the first (callers pass them sorted
//         by page id).
inline PageWeightDecision compute_page_weight(
    const PageSignature& page_sig, bool is_human_labeled_seed_page,
    bool is_seed_site, const ValidationSet& v,
    const std::vector<PageSignature>& validation_sigs,
    const ReweightConfig& cfg) {
  if (v.entries.empty())
    throw NoValidationEntries("validation set is empty");
  PageWeightDecision d;
  if (is_human_labeled_seed_page) {
    d.case_tag = 'A';
    d.weight = 1.0;
    return d;
  }
  if (is_seed_site) {
    d.case_tag = 'B';
    d.weight = hard_accuracy_for_site(v, page_sig.website_id, cfg);
    return d;
  }
  d.case_tag = 'C';
  const PageSignature* best = nullptr;
  double best_po = -1.0;
  for (const auto& vsig : validation_sigs) {
    double po = page_overlap(page_sig, vsig, cfg);
    if (po > best_po) {
      best_po = po;
      best = &vsig;
    }
  }
  if (!best)
    throw NoValidationEntries("no validation page signatures available");
  d.matched_validation_page = best->page_id;
  double soft_acc = soft_accuracy_for_page(v, best->page_id, cfg);
  d.weight = std::max(cfg.weight_floor, soft_acc * best_po);
  return d;
}

}  // namespace least
