// least: label-efficient self-training for DOM-node attribute extraction.
//
// Subcommands: synth, ingest, pseudo-label, train, extract, eval.
// Exit codes: 0 success, 2 validation errors.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "least/least.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Manifest {
  std::vector<std::string> attributes;
  std::vector<std::string> sites;
  std::vector<std::string> seed_sites;
};

std::optional<Manifest> read_manifest(const fs::path& vertical_dir) {
  fs::path path = vertical_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return std::nullopt;
  }
  Manifest m;
  if (j.contains("attributes"))
    m.attributes = j["attributes"].get<std::vector<std::string>>();
  if (j.contains("sites")) m.sites = j["sites"].get<std::vector<std::string>>();
  if (j.contains("seed_sites"))
    m.seed_sites = j["seed_sites"].get<std::vector<std::string>>();
  return m;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i <= s.size()) {
    size_t j = s.find(',', i);
    if (j == std::string::npos) j = s.size();
    std::string item = least::normalize_text(s.substr(i, j - i));
    if (!item.empty()) out.push_back(item);
    i = j + 1;
  }
  return out;
}

least::AttributeSet resolve_attributes(const std::string& attributes_flag,
                                       const fs::path& vertical_dir) {
  if (!attributes_flag.empty())
    return least::AttributeSet(split_csv(attributes_flag));
  if (auto m = read_manifest(vertical_dir); m && !m->attributes.empty())
    return least::AttributeSet(m->attributes);
  throw least::InvalidConfig(
      "no attribute set: pass --attributes or provide manifest.json in the "
      "vertical directory");
}

std::vector<least::LabelFileEntry> read_all_labels(
    const std::vector<std::string>& paths) {
  std::vector<least::LabelFileEntry> entries;
  for (const auto& p : paths) {
    auto part = least::read_label_file(p);
    entries.insert(entries.end(), part.begin(), part.end());
  }
  return entries;
}

struct LoadedVertical {
  least::PageStore pages;
  least::AppliedLabels labels;
  std::set<std::string> seed_sites;
};

LoadedVertical load_vertical(const fs::path& dir,
                             const std::vector<std::string>& label_paths,
                             const least::AttributeSet& attrs) {
  LoadedVertical v;
  v.pages = least::load_pages_dir(dir);
  if (!label_paths.empty()) {
    v.labels = least::apply_labels(v.pages, read_all_labels(label_paths), attrs);
    for (const auto& s : v.labels.samples)
      v.seed_sites.insert(s.page->website_id);
  }
  return v;
}

int cmd_synth(const std::string& preset, int sites, int seed_sites,
              int labeled_pages, int pages_per_site, uint64_t seed,
              const std::string& out_dir) {
  least::synth::VerticalGenSpec spec = preset == "sparse"
                                           ? least::synth::sparse_preset(pages_per_site)
                                           : least::synth::dense_preset(pages_per_site);
  spec.sites = sites;
  spec.seed_sites = seed_sites;
  spec.labeled_pages_per_seed = labeled_pages;
  spec.seed = seed;
  auto data = least::synth::generate_vertical_data(spec);
  fs::path root = least::synth::write_vertical(out_dir, data, spec);
  size_t total_pages = 0;
  for (const auto& s : data.sites) total_pages += s.pages.size();
  std::cout << "wrote " << data.sites.size() << " sites, " << total_pages
            << " pages under " << root.string() << "\n";
  std::cout << "seed sites:";
  for (const auto& s : data.seed_site_ids) std::cout << " " << s;
  std::cout << "\nlabel files under " << (root / "_labels").string() << "\n";
  return 0;
}

int cmd_ingest(const std::string& vertical_dir,
               const std::vector<std::string>& label_paths,
               const std::string& attributes_flag) {
  least::AttributeSet attrs = resolve_attributes(attributes_flag, vertical_dir);
  LoadedVertical v = load_vertical(vertical_dir, label_paths, attrs);
  size_t nodes = 0;
  for (const auto& p : v.pages.pages()) nodes += p.nodes.size();
  std::cout << "websites: " << v.pages.websites().size() << "\n"
            << "pages: " << v.pages.size() << "\n"
            << "text nodes: " << nodes << "\n";
  if (!label_paths.empty()) {
    size_t attr_labels = 0;
    for (const auto& s : v.labels.samples)
      if (s.label != attrs.none_id()) ++attr_labels;
    std::cout << "labeled pages: " << v.labels.labeled_page_ids.size() << "\n"
              << "labeled nodes: " << v.labels.samples.size() << " ("
              << attr_labels << " attribute, "
              << v.labels.samples.size() - attr_labels << " NONE)\n"
              << "seed sites: " << v.seed_sites.size() << "\n";
  }
  std::cout << "ok\n";
  return 0;
}

int cmd_pseudo_label(const std::string& vertical_dir,
                     const std::vector<std::string>& label_paths,
                     const std::string& attributes_flag, double min_overlap,
                     const std::string& out_path) {
  least::AttributeSet attrs = resolve_attributes(attributes_flag, vertical_dir);
  LoadedVertical v = load_vertical(vertical_dir, label_paths, attrs);
  if (v.labels.samples.empty())
    throw least::InvalidConfig("pseudo-label needs at least one label file");

  std::vector<least::LabelingFunction> functions = {
      least::make_fuzzy_string_matcher()};
  std::vector<least::SeedSiteInputs> seed_inputs;
  for (const auto& site : v.seed_sites) {
    least::SeedSiteInputs si;
    si.website_id = site;
    si.pages = v.pages.site_pages(site);
    si.human_values.assign(attrs.size(), {});
    for (const auto& s : v.labels.samples)
      if (s.page->website_id == site && s.label != attrs.none_id())
        si.human_values[s.label].insert(s.node().text);
    seed_inputs.push_back(std::move(si));
  }
  auto rules = least::infer_overlap_rules(seed_inputs, attrs, min_overlap);
  auto relations = least::build_site_relations(seed_inputs, attrs,
                                               v.labels.samples, functions,
                                               rules);
  auto votes = least::build_vote_table(relations, attrs);

  std::ofstream out(out_path);
  if (!out) throw least::InvalidConfig("cannot write " + out_path);
  size_t labeled_nodes = 0, labeled_pages = 0;
  for (const auto& page : v.pages.pages()) {
    if (v.labels.labeled_page_ids.count(page.page_id)) continue;
    auto labels = least::distant_label_page(votes, page);
    if (!labels.empty()) ++labeled_pages;
    for (const auto& dl : labels) {
      json j{{"page", page.page_id},
             {"xpath", page.nodes[dl.node_id].xpath},
             {"attribute", attrs.class_name(dl.label)},
             {"source", "generative"},
             {"votes", dl.votes}};
      out << j.dump() << "\n";
      ++labeled_nodes;
    }
  }
  std::cout << "inferred " << rules.size() << " overlap rules\n"
            << "pseudo-labeled " << labeled_nodes << " nodes on "
            << labeled_pages << " pages -> " << out_path << "\n";
  return 0;
}

struct TrainFlags {
  std::string vertical_dir;
  std::vector<std::string> label_paths;
  std::string config_path;
  std::string attributes_flag;
  std::string mode = "zero_shot";
  std::string target_sites_flag;
  int held_out_per_seed = 100;
  std::string report_path;
  std::string checkpoint_out;
  std::string dump_weights;
  uint64_t seed = 0;
  bool seed_set = false;
  bool no_generative = false;
  bool uniform_weights = false;
  bool refresh_pseudo_labels = false;
  bool early_stop = false;
};

int cmd_train(const TrainFlags& flags) {
  least::LeastConfig cfg;
  if (!flags.config_path.empty()) cfg = least::load_config(flags.config_path);
  if (flags.seed_set) cfg.seed = flags.seed;

  least::AttributeSet attrs =
      resolve_attributes(flags.attributes_flag, flags.vertical_dir);
  LoadedVertical v = load_vertical(flags.vertical_dir, flags.label_paths, attrs);
  if (v.labels.samples.empty())
    throw least::InvalidConfig("train needs at least one label file");

  std::set<std::string> target_sites;
  if (!flags.target_sites_flag.empty()) {
    for (const auto& s : split_csv(flags.target_sites_flag))
      target_sites.insert(s);
  } else if (flags.mode == "zero_shot") {
    for (const auto& s : v.pages.websites())
      if (!v.seed_sites.count(s)) target_sites.insert(s);
  }

  least::EvalMode mode = flags.mode == "in_domain" ? least::EvalMode::InDomain
                                                   : least::EvalMode::ZeroShot;
  std::mt19937_64 split_rng(least::derive_seed(cfg.seed, "experiment"));
  auto split = least::split_experiment(v.pages, v.labels.labeled_page_ids,
                                       v.seed_sites, target_sites, mode,
                                       flags.held_out_per_seed, split_rng);

  least::RunInputs inputs;
  inputs.attrs = &attrs;
  inputs.labeled = v.labels.samples;
  inputs.seed_sites = v.seed_sites;
  inputs.functions.push_back(least::make_fuzzy_string_matcher());
  for (const auto& page : v.pages.pages()) {
    if (split.pool_page_ids.count(page.page_id))
      inputs.pool.add_page(page);
    if (v.seed_sites.count(page.website_id) &&
        !split.test_page_ids.count(page.page_id))
      inputs.relation_pages.push_back(&page);
  }
  inputs.pool.finalize();

  least::RunOptions opts;
  opts.disable_generative = flags.no_generative;
  opts.uniform_weights = flags.uniform_weights;
  opts.refresh_pseudo_labels = flags.refresh_pseudo_labels;
  opts.early_stop = flags.early_stop;

  auto result = least::run_least(cfg, inputs, opts);

  for (const auto& r : result.reports) {
    std::cout << "iteration " << r.iteration << ": corpus=" << r.corpus_size
              << " new=" << r.new_samples << " val_macro_f1=" << r.val_macro_f1
              << " mean_weight=" << r.mean_weight << "\n";
  }
  if (!flags.report_path.empty()) {
    std::ofstream out(flags.report_path);
    if (!out)
      throw least::InvalidConfig("cannot write " + flags.report_path);
    for (const auto& r : result.reports) out << r.to_json().dump() << "\n";
  }
  if (!flags.dump_weights.empty()) {
    std::ofstream out(flags.dump_weights);
    if (!out)
      throw least::InvalidConfig("cannot write " + flags.dump_weights);
    for (const auto& w : result.weight_audit) {
      json j{{"iteration", w.iteration},
             {"page", w.page_id},
             {"weight", w.weight},
             {"case", std::string(1, w.case_tag)},
             {"matched_validation_page", w.matched_validation_page}};
      out << j.dump() << "\n";
    }
  }
  if (!flags.checkpoint_out.empty()) {
    least::save_checkpoint(result.student, fs::path(flags.checkpoint_out));
    std::cout << "checkpoint: " << flags.checkpoint_out << "\n";
  }
  return 0;
}

int cmd_extract(const std::string& checkpoint_path, const std::string& pages_dir,
                const std::string& out_path, bool no_abstain) {
  least::ClassifierState model = least::load_checkpoint(checkpoint_path);
  std::vector<std::string> attr_names(model.class_names.begin(),
                                      model.class_names.end() - 1);
  least::AttributeSet attrs(attr_names);
  least::PageStore pages = least::load_pages_dir(pages_dir);
  least::FeatureCache cache(model.dim);
  std::vector<least::ExtractionResult> results;
  for (const auto& page : pages.pages())
    results.push_back(
        least::extract_page(model, page, attrs, cache, !no_abstain));
  least::write_predictions(out_path, results, attrs);
  size_t preds = 0;
  for (const auto& r : results) preds += r.predictions.size();
  std::cout << "extracted " << preds << " predictions from " << pages.size()
            << " pages -> " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_path,
             const std::vector<std::string>& truth_paths,
             const std::string& attributes_flag,
             const std::string& report_path) {
  std::vector<std::string> attr_names;
  if (!attributes_flag.empty()) {
    attr_names = split_csv(attributes_flag);
  } else {
    std::set<std::string> names;
    for (const auto& p : truth_paths) {
      std::ifstream in(p);
      if (!in) throw least::InvalidConfig("cannot open truth file " + p);
      std::string line;
      while (std::getline(in, line)) {
        if (least::normalize_text(line).empty()) continue;
        names.insert(json::parse(line).at("attribute").get<std::string>());
      }
    }
    attr_names.assign(names.begin(), names.end());
  }
  least::AttributeSet attrs(attr_names);

  least::GroundTruth truth;
  for (const auto& p : truth_paths) {
    least::GroundTruth part = least::read_ground_truth(p, attrs);
    for (auto& [page, attr_map] : part.by_page)
      for (auto& [attr, texts] : attr_map)
        truth.by_page[page][attr].insert(texts.begin(), texts.end());
  }
  auto results = least::read_predictions(pred_path, attrs);

  // results must cover every truth page; absent pages count as abstentions
  std::set<std::string> seen;
  for (const auto& r : results) seen.insert(r.page_id);
  for (const auto& [page, _] : truth.by_page) {
    if (!seen.count(page)) {
      least::ExtractionResult empty;
      empty.page_id = page;
      results.push_back(std::move(empty));
    }
  }

  auto report = least::evaluate(results, truth, attrs);
  json out = report.to_json(attrs);
  std::cout << out.dump(2) << "\n";
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    if (!f) throw least::InvalidConfig("cannot write " + report_path);
    f << out.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LEAST: label-efficient self-training web extractor"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic vertical");
  std::string synth_preset = "dense", synth_out;
  int synth_sites = 5, synth_seed_sites = 2, synth_labeled = 19,
      synth_pages = 200;
  uint64_t synth_seed = 1;
  synth->add_option("--preset", synth_preset, "dense|sparse")
      ->check(CLI::IsMember({"dense", "sparse"}));
  synth->add_option("--sites", synth_sites, "number of websites");
  synth->add_option("--seed-sites", synth_seed_sites, "seed website count");
  synth->add_option("--labeled-pages", synth_labeled,
                    "human-labeled pages per seed site");
  synth->add_option("--pages-per-site", synth_pages, "approx pages per site");
  synth->add_option("--seed", synth_seed, "rng seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "parse and validate a corpus");
  std::string ingest_dir, ingest_attrs;
  std::vector<std::string> ingest_labels;
  ingest->add_option("--vertical-dir", ingest_dir, "corpus directory")
      ->required();
  ingest->add_option("--labels", ingest_labels, "label files (JSONL)");
  ingest->add_option("--attributes", ingest_attrs, "comma-separated A'");

  // pseudo-label
  auto* plabel = app.add_subcommand(
      "pseudo-label", "run the generative labeler on unlabeled pages");
  std::string pl_dir, pl_attrs, pl_out;
  std::vector<std::string> pl_labels;
  double pl_min_overlap = 0.3;
  plabel->add_option("--vertical-dir", pl_dir)->required();
  plabel->add_option("--labels", pl_labels)->required();
  plabel->add_option("--attributes", pl_attrs);
  plabel->add_option("--min-overlap", pl_min_overlap,
                     "overlap-rule Jaccard threshold");
  plabel->add_option("--out", pl_out, "output JSONL")->required();

  // train
  auto* train = app.add_subcommand("train", "run the self-training loop");
  TrainFlags tf;
  train->add_option("--vertical-dir", tf.vertical_dir)->required();
  train->add_option("--labels", tf.label_paths)->required();
  train->add_option("--config", tf.config_path, "flat JSON config");
  train->add_option("--attributes", tf.attributes_flag);
  train->add_option("--mode", tf.mode, "zero_shot|in_domain")
      ->check(CLI::IsMember({"zero_shot", "in_domain"}));
  train->add_option("--target-sites", tf.target_sites_flag,
                    "comma-separated target websites (zero_shot)");
  train->add_option("--held-out-per-seed", tf.held_out_per_seed,
                    "in-domain test pages per seed site");
  train->add_option("--report", tf.report_path, "iteration report JSONL");
  train->add_option("--checkpoint-out", tf.checkpoint_out);
  train->add_option("--dump-weights", tf.dump_weights,
                    "weight audit JSONL");
  auto* seed_opt = train->add_option("--seed", tf.seed, "overrides config");
  train->add_flag("--no-generative", tf.no_generative,
                  "teacher-only pseudo-labels (ablation S1)");
  train->add_flag("--uniform-weights", tf.uniform_weights,
                  "force all sample weights to 1 (ablation S3)");
  train->add_flag("--refresh-pseudo-labels", tf.refresh_pseudo_labels,
                  "re-infer previously appended pseudo-labels each iteration");
  train->add_flag("--early-stop", tf.early_stop,
                  "stop when validation macro-F1 stalls for 2 iterations");

  // extract
  auto* extract = app.add_subcommand("extract", "top-1 extraction per page");
  std::string ex_checkpoint, ex_pages, ex_out;
  bool ex_no_abstain = false;
  extract->add_option("--checkpoint", ex_checkpoint)->required();
  extract->add_option("--pages", ex_pages)->required();
  extract->add_option("--out", ex_out)->required();
  extract->add_flag("--no-abstain", ex_no_abstain,
                    "forced top-1, no NONE comparison");

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions against truth");
  std::string ev_pred, ev_attrs, ev_report;
  std::vector<std::string> ev_truth;
  eval->add_option("--pred", ev_pred)->required();
  eval->add_option("--truth", ev_truth)->required();
  eval->add_option("--attributes", ev_attrs);
  eval->add_option("--report", ev_report, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_preset, synth_sites, synth_seed_sites,
                       synth_labeled, synth_pages, synth_seed, synth_out);
    if (ingest->parsed())
      return cmd_ingest(ingest_dir, ingest_labels, ingest_attrs);
    if (plabel->parsed())
      return cmd_pseudo_label(pl_dir, pl_labels, pl_attrs, pl_min_overlap,
                              pl_out);
    if (train->parsed()) {
      tf.seed_set = seed_opt->count() > 0;
      return cmd_train(tf);
    }
    if (extract->parsed())
      return cmd_extract(ex_checkpoint, ex_pages, ex_out, ex_no_abstain);
    if (eval->parsed())
      return cmd_eval(ev_pred, ev_truth, ev_attrs, ev_report);
  } catch (const least::LeastError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
