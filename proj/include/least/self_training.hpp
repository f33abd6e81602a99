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
#include "least/reweighting.hpp"
#include "least/rng.hpp"
#include "least/weak_supervision.hpp"

namespace least {

// All run hyperparameters. Field names follow the config-file keys.
struct LeastConfig {
  int T = 5;                    // self-training iterations
  long long L = 100000;         // max unlabeled sample per iteration
  double beta0 = 0.6;           // fusion schedule start
  double k_beta1 = 0.1;
  double k_beta2 = 1.0;
  double k0 = 1.0;              // loss penalty schedule start
  double k_c1 = 0.1;
  double k_c2 = 1.0;
  double epsilon = 0.0005;      // page-overlap floor
  double alpha = 0.01;          // gradient step size
  int epochs_teacher = 30;
  int epochs_student = 5;
  int batch_size = 32;
  uint32_t feature_dim = 1u << 15;
  double weight_floor = 0.01;
  double min_overlap = 0.3;     // overlap-rule threshold
  int validation_pages_per_site = 10;
  uint64_t seed = 1;

  void validate() const {
    if (T < 1) throw InvalidConfig("T must be >= 1");
    if (L < 1) throw InvalidConfig("L must be >= 1");
    if (beta0 < 0.0 || beta0 > 1.0)
      throw InvalidConfig("beta0 must be in [0,1]");
    if (k_beta1 < 0.0 || k_beta2 < 0.0 || k_c1 < 0.0 || k_c2 < 0.0)
      throw InvalidConfig("schedule constants must be non-negative");
    if (epsilon <= 0.0 || epsilon >= 1.0)
      throw InvalidConfig("epsilon must be in (0,1)");
    if (weight_floor <= 0.0 || weight_floor >= 1.0)
      throw InvalidConfig("weight_floor must be in (0,1)");
    if (alpha <= 0.0) throw InvalidConfig("alpha must be positive");
    if (epochs_teacher < 0 || epochs_student < 0)
      throw InvalidConfig("epoch counts must be non-negative");
    if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
    if (feature_dim == 0 || (feature_dim & (feature_dim - 1)) != 0)
      throw InvalidConfig("feature_dim must be a power of two");
    if (validation_pages_per_site < 1)
      throw InvalidConfig("validation_pages_per_site must be >= 1");
    if (min_overlap <= 0.0 || min_overlap > 1.0)
      throw InvalidConfig("min_overlap must be in (0,1]");
  }
};

// Flat key/value JSON document, keys as in the struct above.
inline LeastConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(path.string() + ": bad JSON: " + e.what());
  }
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  LeastConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "T") cfg.T = value.get<int>();
    else if (key == "L") cfg.L = value.get<long long>();
    else if (key == "beta0") cfg.beta0 = value.get<double>();
    else if (key == "k_beta1") cfg.k_beta1 = value.get<double>();
    else if (key == "k_beta2") cfg.k_beta2 = value.get<double>();
    else if (key == "k0") cfg.k0 = value.get<double>();
    else if (key == "k_c1") cfg.k_c1 = value.get<double>();
    else if (key == "k_c2") cfg.k_c2 = value.get<double>();
    else if (key == "epsilon") cfg.epsilon = value.get<double>();
    else if (key == "alpha") cfg.alpha = value.get<double>();
    else if (key == "epochs_teacher") cfg.epochs_teacher = value.get<int>();
    else if (key == "epochs_student") cfg.epochs_student = value.get<int>();
    else if (key == "batch_size") cfg.batch_size = value.get<int>();
    else if (key == "feature_dim") cfg.feature_dim = value.get<uint32_t>();
    else if (key == "weight_floor") cfg.weight_floor = value.get<double>();
    else if (key == "min_overlap") cfg.min_overlap = value.get<double>();
    else if (key == "validation_pages_per_site")
      cfg.validation_pages_per_site = value.get<int>();
    else if (key == "seed") cfg.seed = value.get<uint64_t>();
    else throw InvalidConfig("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

// Eq. 6: beta^{(t)} = beta^{(t-1)} - k_b1 * e^{-k_b2 * t}, clamped to [0,1].
inline double beta_schedule(int t, double prior, const LeastConfig& cfg) {
  double b = prior - cfg.k_beta1 * std::exp(-cfg.k_beta2 * t);
  return std::clamp(b, 0.0, 1.0);
}

// Eq. 8: k^{(t)} = k^{(t-1)} - k_c1 * e^{-k_c2 * t}.
inline double k_schedule(int t, double prior, const LeastConfig& cfg) {
  return prior - cfg.k_c1 * std::exp(-cfg.k_c2 * t);
}

struct FusedLabel {
  int hard = 0;
  std::vector<double> soft;
  LabelSource source = LabelSource::Teacher;
};

// With probability beta_t take the generative hard label (when present),
// otherwise the teacher's softmax label. Absent gamma always falls to the
// teacher; the coin is tossed either way so ablations share rng streams.
inline FusedLabel fuse_pseudo_label(std::optional<int> gamma_label,
                                    const std::vector<double>& teacher_soft,
                                    double beta_t, std::mt19937_64& rng) {
  double u = uniform01(rng);
  FusedLabel fused;
  if (gamma_label && u < beta_t) {
    fused.hard = *gamma_label;
    fused.soft.assign(teacher_soft.size(), 0.0);
    fused.soft[fused.hard] = 1.0;
    fused.source = LabelSource::Generative;
  } else {
    fused.hard = argmax(teacher_soft);
    fused.soft = teacher_soft;
    fused.source = LabelSource::Teacher;
  }
  return fused;
}

struct IterationReport {
  int iteration = 0;
  double beta = 0.0;
  double k = 0.0;
  size_t corpus_size = 0;
  size_t new_samples = 0;
  double val_macro_f1 = 0.0;   // node-level, teacher predictions on V
  double mean_weight = 0.0;
  double student_loss = 0.0;   // last-epoch mean of the weighted loss
  std::map<std::string, size_t> source_counts;

  nlohmann::json to_json() const {
    return nlohmann::json{{"iteration", iteration},
                          {"beta", beta},
                          {"k", k},
                          {"corpus_size", corpus_size},
                          {"new_samples", new_samples},
                          {"val_macro_f1", val_macro_f1},
                          {"mean_weight", mean_weight},
                          {"student_loss", student_loss},
                          {"source_counts", source_counts}};
  }
};

struct WeightAuditEntry {
  int iteration = 0;
  std::string page_id;
  double weight = 1.0;
  char case_tag = 'A';
  std::string matched_validation_page;
};

struct RunInputs {
  const AttributeSet* attrs = nullptr;
  std::vector<LabeledSample> labeled;             // all human-labeled nodes
  UnlabeledPool pool;                             // test pages excluded
  std::set<std::string> seed_sites;
  std::vector<const DetailPage*> relation_pages;  // seed-site pages for rules
  std::vector<LabelingFunction> functions;
};

struct RunOptions {
  bool disable_generative = false;  // ablation S1
  bool uniform_weights = false;     // ablation S3
  bool refresh_pseudo_labels = false;
  bool early_stop = false;
};

struct RunResult {
  ClassifierState student;
  std::vector<IterationReport> reports;
  std::vector<std::vector<std::string>> added_keys_per_iteration;
  std::vector<WeightAuditEntry> weight_audit;
  std::set<std::string> training_page_ids;
  std::set<std::string> validation_page_ids;
};

namespace detail {

inline double node_level_macro_f1(const ValidationSet& v,
                                  const AttributeSet& attrs) {
  double f1_sum = 0.0;
  for (int a = 0; a < attrs.size(); ++a) {
    size_t tp = 0, fp = 0, fn = 0;
    for (const auto& e : v.entries) {
      bool pred = e.hard_pseudo == a;
      bool truth = e.human_label == a;
      if (pred && truth) ++tp;
      else if (pred) ++fp;
      else if (truth) ++fn;
    }
    double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    f1_sum += (p + r > 0) ? 2.0 * p * r / (p + r) : 0.0;
  }
  return 100.0 * f1_sum / attrs.size();
}

}  // namespace detail

// Algorithm 1. Builds the generative model once, then iterates teacher
// training, pseudo-label fusion, validation refresh, reweighting, and the
// weighted student pass, handing the student back as the next teacher.
inline RunResult run_least(const LeastConfig& cfg, RunInputs& inputs,
                           const RunOptions& opts = {}) {
  cfg.validate();
  const AttributeSet& attrs = *inputs.attrs;

  if (inputs.seed_sites.size() < 2)
    throw InsufficientLabeledPages("need labeled pages from >= 2 seed sites");

  std::mt19937_64 rng_split(derive_seed(cfg.seed, "split"));
  std::mt19937_64 rng_sample(derive_seed(cfg.seed, "sample"));
  std::mt19937_64 rng_fuse(derive_seed(cfg.seed, "fuse"));
  std::mt19937_64 rng_teacher(derive_seed(cfg.seed, "teacher"));
  std::mt19937_64 rng_student(derive_seed(cfg.seed, "student"));

  InitialSplit split = split_initial(inputs.labeled, attrs,
                                     cfg.validation_pages_per_site, rng_split);
  AugmentedCorpus corpus = std::move(split.corpus);
  ValidationSet validation = std::move(split.validation);

  // Soundness regression: every registered function, every labeled page.
  auto labeled_views = build_labeled_page_views(inputs.labeled, attrs);
  for (const auto& fn : inputs.functions) {
    for (int a = 0; a < attrs.size(); ++a) {
      auto report = check_soundness(fn, a, labeled_views);
      if (!report.sound) {
        throw SoundnessViolation(
            "labeling function '" + fn.name + "' is unsound for attribute '" +
            attrs.class_name(a) + "' (" +
            std::to_string(report.violations.size()) + " violations)");
      }
    }
  }

  // Generative model: relations depend only on human labels, built once.
  // Bootstrapped from the training split so validation stays held aside.
  VoteTable votes;
  if (!opts.disable_generative) {
    std::vector<LabeledSample> train_human;
    for (const auto& s : inputs.labeled)
      if (split.training_page_ids.count(s.page->page_id))
        train_human.push_back(s);

    std::vector<SeedSiteInputs> seed_inputs;
    for (const auto& site : inputs.seed_sites) {
      SeedSiteInputs si;
      si.website_id = site;
      si.human_values.assign(attrs.size(), {});
      for (const DetailPage* p : inputs.relation_pages)
        if (p->website_id == site) si.pages.push_back(p);
      for (const auto& s : train_human)
        if (s.page->website_id == site && s.label != attrs.none_id())
          si.human_values[s.label].insert(s.node().text);
      seed_inputs.push_back(std::move(si));
    }
    auto rules = infer_overlap_rules(seed_inputs, attrs, cfg.min_overlap);
    auto relations = build_site_relations(seed_inputs, attrs, train_human,
                                          inputs.functions, rules);
    votes = build_vote_table(relations, attrs);
  }

  std::map<const DetailPage*, std::vector<int>> gamma_cache;  // -1 = abstain
  auto gamma_label_of = [&](const DetailPage& page,
                            int node_id) -> std::optional<int> {
    auto it = gamma_cache.find(&page);
    if (it == gamma_cache.end()) {
      std::vector<int> labels(page.nodes.size(), -1);
      for (const auto& dl : distant_label_page(votes, page))
        labels[dl.node_id] = dl.label;
      it = gamma_cache.emplace(&page, std::move(labels)).first;
    }
    int label = it->second[node_id];
    if (label < 0) return std::nullopt;
    return label;
  };

  FeatureCache features(cfg.feature_dim);
  ClassifierState model(cfg.feature_dim, attrs.class_names(), cfg.seed);

  std::vector<TrainExample> teacher_examples;
  for (const auto& s : corpus.samples) {
    teacher_examples.push_back(supervised_example(
        &features.get(*s.page, s.node_id), s.hard_label));
  }

  ReweightConfig rw_cfg{cfg.epsilon, cfg.weight_floor};
  RunResult result;
  result.training_page_ids = split.training_page_ids;
  result.validation_page_ids = split.validation_page_ids;

  double beta = cfg.beta0;
  double k = cfg.k0;
  double best_val_f1 = -1.0;
  int stale_iterations = 0;

  for (int iter = 1; iter <= cfg.T; ++iter) {
    beta = beta_schedule(iter, beta, cfg);
    k = k_schedule(iter, k, cfg);

    // line 5: teacher on human-labeled samples (from scratch at iter 1)
    train_supervised(model, teacher_examples, cfg.epochs_teacher, cfg.alpha,
                     cfg.batch_size, rng_teacher);

    if (opts.refresh_pseudo_labels) {
      for (auto& s : corpus.samples) {
        if (s.source == LabelSource::Human) continue;
        auto soft = predict(model, features.get(*s.page, s.node_id));
        auto fused = fuse_pseudo_label(gamma_label_of(*s.page, s.node_id),
                                       soft, beta, rng_fuse);
        s.hard_label = fused.hard;
        s.soft_label = std::move(fused.soft);
        s.source = fused.source;
      }
    }

    // lines 6-10: sample new nodes, fuse pseudo-labels, append
    auto sampled = inputs.pool.sample(static_cast<size_t>(cfg.L), rng_sample);
    std::vector<std::string> added_keys;
    for (const auto& entry : sampled) {
      auto soft = predict(model, features.get(*entry.page, entry.node_id));
      auto fused = fuse_pseudo_label(
          gamma_label_of(*entry.page, entry.node_id), soft, beta, rng_fuse);
      PseudoLabeledSample s;
      s.page = entry.page;
      s.node_id = entry.node_id;
      s.hard_label = fused.hard;
      s.soft_label = std::move(fused.soft);
      s.source = fused.source;
      s.weight = 1.0;
      s.iteration_added = iter;
      added_keys.push_back(s.key());
      corpus.consumed_pool_ids.insert(added_keys.back());
      corpus.samples.push_back(std::move(s));
    }
    result.added_keys_per_iteration.push_back(std::move(added_keys));

    // lines 11-15: refresh the validation pseudo-labels with this teacher
    for (auto& e : validation.entries) {
      e.soft_pseudo = predict(model, features.get(*e.page, e.node_id));
      e.hard_pseudo = argmax(e.soft_pseudo);
    }
    double val_f1 = detail::node_level_macro_f1(validation, attrs);

    // lines 16-18: recompute every sample weight from V^{(i)}
    std::map<std::string, const DetailPage*> corpus_pages;
    for (const auto& s : corpus.samples)
      corpus_pages.emplace(s.page->page_id, s.page);
    std::map<std::string, PageSignature> signatures;
    for (const auto& [page_id, page] : corpus_pages)
      signatures.emplace(page_id, build_page_signature(model, *page, features));
    std::vector<PageSignature> validation_sigs;  // sorted by page id
    {
      std::map<std::string, const DetailPage*> vpages;
      for (const auto& e : validation.entries)
        vpages.emplace(e.page->page_id, e.page);
      for (const auto& [page_id, page] : vpages)
        validation_sigs.push_back(
            build_page_signature(model, *page, features));
    }
    std::map<std::string, PageWeightDecision> page_weights;
    for (const auto& [page_id, page] : corpus_pages) {
      PageWeightDecision d;
      if (opts.uniform_weights) {
        d.weight = 1.0;
        d.case_tag = 'U';
      } else {
        d = compute_page_weight(signatures.at(page_id),
                                split.training_page_ids.count(page_id) > 0,
                                inputs.seed_sites.count(page->website_id) > 0,
                                validation, validation_sigs, rw_cfg);
      }
      result.weight_audit.push_back(WeightAuditEntry{
          iter, page_id, d.weight, d.case_tag, d.matched_validation_page});
      page_weights.emplace(page_id, std::move(d));
    }
    double weight_sum = 0.0;
    for (auto& s : corpus.samples) {
      const auto& d = page_weights.at(s.page->page_id);
      s.weight = s.source == LabelSource::Human ? 1.0 : d.weight;
      s.weight_iteration = iter;
      weight_sum += s.weight;
    }

    // lines 19-21: student starts from the teacher, trains on A^{(i)} with
    // the weighted noise-robust loss, then becomes the next teacher
    std::vector<TrainExample> student_examples;
    student_examples.reserve(corpus.samples.size());
    for (const auto& s : corpus.samples) {
      if (s.weight_iteration != iter)
        throw LeastError("stale sample weight at iteration " +
                         std::to_string(iter));
      student_examples.push_back(student_example(
          &features.get(*s.page, s.node_id), s.hard_label, s.weight, k));
    }
    LossConfig loss_cfg;
    loss_cfg.k = k;
    loss_cfg.noise_rng.seed(
        derive_seed(cfg.seed, "lossnoise" + std::to_string(iter)));
    auto stats =
        train_student(model, student_examples, cfg.epochs_student, cfg.alpha,
                      cfg.batch_size, loss_cfg, rng_student);

    IterationReport report;
    report.iteration = iter;
    report.beta = beta;
    report.k = k;
    report.corpus_size = corpus.samples.size();
    report.new_samples = sampled.size();
    report.val_macro_f1 = val_f1;
    report.mean_weight = weight_sum / corpus.samples.size();
    report.student_loss = stats.last_epoch_mean_loss;
    for (const auto& s : corpus.samples)
      ++report.source_counts[label_source_name(s.source)];
    result.reports.push_back(std::move(report));

    if (opts.early_stop) {
      if (val_f1 > best_val_f1) {
        best_val_f1 = val_f1;
        stale_iterations = 0;
      } else if (++stale_iterations >= 2) {
        break;
      }
    }
  }

  result.student = std::move(model);
  return result;
}

}  // namespace least
