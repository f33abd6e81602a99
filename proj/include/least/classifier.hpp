#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "least/corpus.hpp"
#include "least/dom.hpp"
#include "least/rng.hpp"
#include "least/text.hpp"

namespace least {

// Sparse hashed feature vector; entries sorted by index, duplicates merged.
struct FeatureVector {
  std::vector<std::pair<uint32_t, float>> entries;
};

namespace detail {

inline void add_feature(std::vector<std::pair<uint32_t, float>>& raw,
                        uint32_t dim, std::string_view name) {
  raw.emplace_back(static_cast<uint32_t>(fnv1a64(name) & (dim - 1)), 1.0f);
}

inline std::vector<std::string> xpath_steps(const std::string& xpath) {
  std::vector<std::string> steps;
  size_t i = 0;
  while (i < xpath.size()) {
    if (xpath[i] == '/') { ++i; continue; }
    size_t j = xpath.find('/', i);
    if (j == std::string::npos) j = xpath.size();
    steps.push_back(xpath.substr(i, j - i));
    i = j;
  }
  return steps;
}

}  // namespace detail

// Deterministic hashed features for one DOM node: text word unigrams,
// character trigrams, trailing xpath steps, leaf tag, position bucket, and
// a few shape flags.
inline FeatureVector featurize(const DomNodeRecord& node, uint32_t dim) {
  std::vector<std::pair<uint32_t, float>> raw;
  std::string lower = to_lower(node.text);

  for (const auto& word : split_words(lower))
    detail::add_feature(raw, dim, "w=" + word);

  if (lower.size() >= 3) {
    for (size_t i = 0; i + 3 <= lower.size(); ++i)
      detail::add_feature(raw, dim, "t3=" + lower.substr(i, 3));
  } else {
    detail::add_feature(raw, dim, "t3=" + lower);
  }

  auto steps = detail::xpath_steps(node.xpath);
  size_t first = steps.size() > 3 ? steps.size() - 3 : 0;
  std::string joined;
  for (size_t i = first; i < steps.size(); ++i) {
    detail::add_feature(raw, dim,
                        "xp" + std::to_string(steps.size() - i) + "=" + steps[i]);
    if (!joined.empty()) joined.push_back('/');
    joined += steps[i];
  }
  detail::add_feature(raw, dim, "xpj=" + joined);
  detail::add_feature(raw, dim, "tag=" + node.tag);

  int bucket = static_cast<int>(node.rel_position * 10.0);
  if (bucket > 9) bucket = 9;
  detail::add_feature(raw, dim, "pos=" + std::to_string(bucket));

  bool has_digit = false, has_alpha = false, all_caps = true;
  bool has_currency = false;
  for (size_t i = 0; i < node.text.size(); ++i) {
    unsigned char c = node.text[i];
    if (c >= '0' && c <= '9') has_digit = true;
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      has_alpha = true;
      if (c >= 'a' && c <= 'z') all_caps = false;
    }
    if (c == '$') has_currency = true;
    // UTF-8 for euro/pound/yen signs
    if (c == 0xE2 && i + 2 < node.text.size() &&
        static_cast<unsigned char>(node.text[i + 1]) == 0x82 &&
        static_cast<unsigned char>(node.text[i + 2]) == 0xAC)
      has_currency = true;
    if (c == 0xC2 && i + 1 < node.text.size()) {
      unsigned char d = node.text[i + 1];
      if (d == 0xA3 || d == 0xA5) has_currency = true;
    }
  }
  if (has_digit) detail::add_feature(raw, dim, "flag=has_digit");
  if (has_alpha && all_caps) detail::add_feature(raw, dim, "flag=all_caps");
  if (has_currency) detail::add_feature(raw, dim, "flag=currency");
  size_t tokens = split_words(lower).size();
  std::string bucket_name = tokens >= 5 ? "5+" : std::to_string(tokens);
  detail::add_feature(raw, dim, "ntok=" + bucket_name);

  std::sort(raw.begin(), raw.end());
  FeatureVector fv;
  fv.entries.reserve(raw.size());
  for (const auto& [idx, val] : raw) {
    if (!fv.entries.empty() && fv.entries.back().first == idx)
      fv.entries.back().second += val;
    else
      fv.entries.emplace_back(idx, val);
  }
  return fv;
}

// Feature-hashed linear softmax model over |A'|+1 classes.
struct ClassifierState {
  uint32_t dim = 0;
  std::vector<std::string> class_names;
  std::vector<double> weights;  // class-major, class_count() x dim
  std::vector<double> bias;
  uint64_t rng_seed = 0;

  ClassifierState() = default;
  ClassifierState(uint32_t dim_, std::vector<std::string> classes,
                  uint64_t seed)
      : dim(dim_),
        class_names(std::move(classes)),
        weights(static_cast<size_t>(dim_) * class_names.size(), 0.0),
        bias(class_names.size(), 0.0),
        rng_seed(seed) {}

  int class_count() const { return static_cast<int>(class_names.size()); }
};

inline std::vector<double> predict(const ClassifierState& model,
                                   const FeatureVector& fv) {
  const int C = model.class_count();
  std::vector<double> logits(model.bias);
  for (int c = 0; c < C; ++c) {
    const double* row = model.weights.data() + static_cast<size_t>(c) * model.dim;
    double dot = 0.0;
    for (const auto& [idx, val] : fv.entries) dot += row[idx] * val;
    logits[c] += dot;
  }
  double max_logit = logits[0];
  for (double l : logits) max_logit = std::max(max_logit, l);
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - max_logit);
    sum += l;
  }
  for (double& l : logits) l /= sum;
  return logits;
}

inline int argmax(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

constexpr double kProbClamp = 1e-12;

inline double cross_entropy(const std::vector<double>& soft_pred,
                            int hard_label) {
  return -std::log(std::max(soft_pred[hard_label], kProbClamp));
}

// ---------------------------------------------------------------------------
// Noise-robust loss:  L_ua = e^{(1-k)c} * L  +  e^{c} * U(0,1).
// The random term is parameter-independent; it shows up in reported loss
// values and contributes no gradient.
// ---------------------------------------------------------------------------

struct LossConfig {
  double k = 1.0;
  std::mt19937_64 noise_rng{0};
};

inline double noise_robust_loss_term(double base_loss, double c, double k,
                                     double u) {
  return std::exp((1.0 - k) * c) * base_loss + std::exp(c) * u;
}

inline double noise_robust_loss(const std::vector<double>& soft_pred,
                                int hard_label, double c, LossConfig& cfg) {
  double base = cross_entropy(soft_pred, hard_label);
  double u = uniform01(cfg.noise_rng);
  return noise_robust_loss_term(base, c, cfg.k, u);
}

// Eq. 9 summand for one sample: c * L_ua. Gradient w.r.t. the parameters is
// c * e^{(1-k)c} times the cross-entropy gradient.
inline double student_sample_loss(const ClassifierState& model,
                                  const FeatureVector& fv, int hard_label,
                                  double c, double k, double u) {
  auto soft = predict(model, fv);
  return c * noise_robust_loss_term(cross_entropy(soft, hard_label), c, k, u);
}

inline double student_grad_scale(double c, double k) {
  return c * std::exp((1.0 - k) * c);
}

// ---------------------------------------------------------------------------
// Mini-batch gradient descent. One shared loop drives both the supervised
// teacher pass (scale 1) and the weighted noise-robust student pass.
// ---------------------------------------------------------------------------

struct TrainExample {
  const FeatureVector* fv;
  int label;
  double grad_scale;   // multiplies the CE gradient
  double noise_scale;  // multiplies the e^c * U(0,1) reported-loss term
};

struct TrainStats {
  double last_epoch_mean_loss = 0.0;
};

namespace detail {

inline TrainStats run_minibatch_gd(ClassifierState& model,
                                   std::span<const TrainExample> examples,
                                   int epochs, double alpha, int batch_size,
                                   std::mt19937_64& rng,
                                   std::mt19937_64* noise_rng) {
  TrainStats stats;
  if (examples.empty() || epochs <= 0) return stats;
  const int C = model.class_count();
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> err(C);
  // flat sparse gradient triples for one batch
  std::vector<std::pair<size_t, double>> weight_grads;
  std::vector<double> bias_grad(C);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_vector(order, rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size(); start += batch_size) {
      size_t end = std::min(order.size(), start + batch_size);
      double inv_batch = 1.0 / static_cast<double>(end - start);
      weight_grads.clear();
      std::fill(bias_grad.begin(), bias_grad.end(), 0.0);

      for (size_t i = start; i < end; ++i) {
        const TrainExample& ex = examples[order[i]];
        auto soft = predict(model, *ex.fv);
        double base = cross_entropy(soft, ex.label);
        double sample_loss = ex.grad_scale * base;
        if (noise_rng)
          sample_loss += ex.noise_scale * uniform01(*noise_rng);
        epoch_loss += sample_loss;
        for (int c = 0; c < C; ++c) {
          err[c] = (soft[c] - (c == ex.label ? 1.0 : 0.0)) * ex.grad_scale;
          bias_grad[c] += err[c];
        }
        for (const auto& [idx, val] : ex.fv->entries) {
          for (int c = 0; c < C; ++c) {
            weight_grads.emplace_back(
                static_cast<size_t>(c) * model.dim + idx,
                err[c] * static_cast<double>(val));
          }
        }
      }

      double step = alpha * inv_batch;
      for (const auto& [flat, g] : weight_grads)
        model.weights[flat] -= step * g;
      for (int c = 0; c < C; ++c) model.bias[c] -= step * bias_grad[c];
    }
    stats.last_epoch_mean_loss = epoch_loss / static_cast<double>(order.size());
  }
  return stats;
}

}  // namespace detail

// Eq. 3: cross-entropy on human-labeled samples, plain gradient steps.
inline TrainStats train_supervised(ClassifierState& model,
                                   std::span<const TrainExample> examples,
                                   int epochs, double alpha, int batch_size,
                                   std::mt19937_64& rng) {
  return detail::run_minibatch_gd(model, examples, epochs, alpha, batch_size,
                                  rng, nullptr);
}

inline TrainExample supervised_example(const FeatureVector* fv, int label) {
  return TrainExample{fv, label, 1.0, 0.0};
}

// Eq. 9: each sample contributes c * L_ua; grad scale c * e^{(1-k)c}.
inline TrainExample student_example(const FeatureVector* fv, int label,
                                    double c, double k) {
  return TrainExample{fv, label, student_grad_scale(c, k),
                      c * std::exp(c)};
}

inline TrainStats train_student(ClassifierState& model,
                                std::span<const TrainExample> examples,
                                int epochs, double alpha, int batch_size,
                                LossConfig& loss_cfg, std::mt19937_64& rng) {
  return detail::run_minibatch_gd(model, examples, epochs, alpha, batch_size,
                                  rng, &loss_cfg.noise_rng);
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned little-endian binary; byte-identical across runs
// with the same seed.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw InvalidConfig("truncated checkpoint");
  return v;
}

}  // namespace detail

constexpr char kCheckpointMagic[8] = {'L', 'S', 'T', 'C', 'K', 'P', 'T', '1'};

inline void save_checkpoint(const ClassifierState& model, std::ostream& out) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod<uint32_t>(out, 1);  // version
  detail::write_pod<uint32_t>(out, model.dim);
  detail::write_pod<uint32_t>(out, static_cast<uint32_t>(model.class_names.size()));
  detail::write_pod<uint64_t>(out, model.rng_seed);
  for (const auto& name : model.class_names) {
    detail::write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  out.write(reinterpret_cast<const char*>(model.bias.data()),
            static_cast<std::streamsize>(model.bias.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.weights.data()),
            static_cast<std::streamsize>(model.weights.size() * sizeof(double)));
}

inline void save_checkpoint(const ClassifierState& model,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidConfig("cannot write checkpoint " + path.string());
  save_checkpoint(model, out);
}

inline ClassifierState load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw InvalidConfig("not a checkpoint file");
  uint32_t version = detail::read_pod<uint32_t>(in);
  if (version != 1)
    throw InvalidConfig("unsupported checkpoint version " +
                        std::to_string(version));
  uint32_t dim = detail::read_pod<uint32_t>(in);
  uint32_t n_classes = detail::read_pod<uint32_t>(in);
  uint64_t seed = detail::read_pod<uint64_t>(in);
  std::vector<std::string> names;
  for (uint32_t i = 0; i < n_classes; ++i) {
    uint32_t len = detail::read_pod<uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw InvalidConfig("truncated checkpoint");
    names.push_back(std::move(name));
  }
  ClassifierState model(dim, std::move(names), seed);
  in.read(reinterpret_cast<char*>(model.bias.data()),
          static_cast<std::streamsize>(model.bias.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(model.weights.data()),
          static_cast<std::streamsize>(model.weights.size() * sizeof(double)));
  if (!in) throw InvalidConfig("truncated checkpoint");
  return model;
}

inline ClassifierState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

// Features are model-independent; cache them per page.
class FeatureCache {
 public:
  explicit FeatureCache(uint32_t dim) : dim_(dim) {}

  const FeatureVector& get(const DetailPage& page, int node_id) {
    auto& vec = cache_[&page];
    if (vec.empty()) {
      vec.reserve(page.nodes.size());
      for (const auto& node : page.nodes) vec.push_back(featurize(node, dim_));
    }
    return vec[node_id];
  }

  uint32_t dim() const { return dim_; }

 private:
  uint32_t dim_;
  std::map<const DetailPage*, std::vector<FeatureVector>> cache_;
};

}  // namespace least
