#pragma once

// Shared fixtures: in-memory experiments built from generated verticals,
// used by the self-training tests and the acceptance suite.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "least/least.hpp"

namespace testsupport {

struct MemoryExperiment {
  least::AttributeSet attrs;
  least::PageStore store;
  least::AppliedLabels labels;
  std::set<std::string> seed_sites;
  std::set<std::string> target_sites;
  least::ExperimentSplit split;

  explicit MemoryExperiment(std::vector<std::string> names)
      : attrs(std::move(names)) {}
};

inline MemoryExperiment build_experiment(
    const least::synth::GeneratedVertical& data, least::EvalMode mode,
    int held_out_per_seed, uint64_t seed) {
  MemoryExperiment exp(data.attribute_names);
  for (const auto& site : data.sites)
    for (const auto& [page_id, html] : site.pages)
      exp.store.add(least::parse_page(html, page_id, site.website_id));

  std::vector<least::LabelFileEntry> entries;
  for (const auto& site_labels : data.seed_labels)
    entries.insert(entries.end(), site_labels.begin(), site_labels.end());
  exp.labels = least::apply_labels(exp.store, entries, exp.attrs);

  exp.seed_sites.insert(data.seed_site_ids.begin(), data.seed_site_ids.end());
  for (const auto& site : data.site_ids)
    if (!exp.seed_sites.count(site)) exp.target_sites.insert(site);

  std::mt19937_64 rng(least::derive_seed(seed, "experiment"));
  exp.split = least::split_experiment(
      exp.store, exp.labels.labeled_page_ids, exp.seed_sites,
      mode == least::EvalMode::ZeroShot ? exp.target_sites
                                        : std::set<std::string>{},
      mode, held_out_per_seed, rng);
  return exp;
}

// A fresh RunInputs per run: the pool is consumed by sampling.
inline least::RunInputs make_run_inputs(MemoryExperiment& exp) {
  least::RunInputs inputs;
  inputs.attrs = &exp.attrs;
  inputs.labeled = exp.labels.samples;
  inputs.seed_sites = exp.seed_sites;
  inputs.functions.push_back(least::make_fuzzy_string_matcher());
  for (const auto& page : exp.store.pages()) {
    if (exp.split.pool_page_ids.count(page.page_id))
      inputs.pool.add_page(page);
    if (exp.seed_sites.count(page.website_id) &&
        !exp.split.test_page_ids.count(page.page_id))
      inputs.relation_pages.push_back(&page);
  }
  inputs.pool.finalize();
  return inputs;
}

inline least::GroundTruth test_set_truth(
    const least::synth::GeneratedVertical& data, const MemoryExperiment& exp) {
  least::GroundTruth truth;
  for (const auto& site : data.sites)
    for (const auto& t : site.truth)
      if (exp.split.test_page_ids.count(t.page_id))
        truth.add(t.page_id, exp.attrs.require(t.attribute), t.text);
  return truth;
}

inline double zero_shot_macro_f1(const least::ClassifierState& model,
                                 const MemoryExperiment& exp,
                                 const least::GroundTruth& truth) {
  least::FeatureCache cache(model.dim);
  std::vector<least::ExtractionResult> results;
  for (const auto& page : exp.store.pages())
    if (exp.split.test_page_ids.count(page.page_id))
      results.push_back(
          least::extract_page(model, page, exp.attrs, cache));
  return least::evaluate(results, truth, exp.attrs).macro_f1;
}

}  // namespace testsupport
