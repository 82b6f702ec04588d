#include "visemeforge/vsr.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

using json = nlohmann::json;

namespace vf::vsr {

void ViewCombination::validate() const {
  if (poses.empty()) throw InvalidArgument("view combination must be non-empty");
  for (int p : poses)
    if (!corpus::valid_pose(p)) throw InvalidArgument("invalid pose " + std::to_string(p));
  if (!std::is_sorted(poses.begin(), poses.end()) ||
      std::adjacent_find(poses.begin(), poses.end()) != poses.end())
    throw InvalidArgument("view combination must be sorted and duplicate-free");
}

std::string ViewCombination::str() const {
  std::string s;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (i) s += "+";
    s += std::to_string(poses[i]);
  }
  return s;
}

void VsrNetConfig::validate() const {
  views.validate();
  if (frame_dim < 1 || view_hidden < 1 || fusion_hidden < 1)
    throw InvalidArgument("invalid vsr widths");
  if (encoder.empty()) throw InvalidArgument("encoder needs at least one layer");
  for (long w : encoder)
    if (w < 1) throw InvalidArgument("encoder widths must be positive");
}

ad::Var delta_features(const ad::Var& x) {
  using namespace ad;
  if (x->value.ndim() != 2) throw ShapeError("delta_features: expects [T,d]");
  const long t = x->value.dim(0);
  auto central = [&](const Var& v) {
    if (t == 1) return scale(sub(v, v), 0.5);  // zero, graph-connected
    Var next = concat({slice(v, 0, 1, t - 1), slice(v, 0, t - 1, 1)}, 0);
    Var prev = concat({slice(v, 0, 0, 1), slice(v, 0, 0, t - 1)}, 0);
    return scale(sub(next, prev), 0.5);
  };
  Var d1 = central(x);
  Var d2 = central(d1);
  return concat({x, d1, d2}, 1);
}

Tensor delta_features(const Tensor& x) { return delta_features(ad::leaf(x))->value; }

VsrModel::VsrModel(VsrNetConfig cfg, std::vector<int> class_ids, std::uint64_t init_seed)
    : cfg_(std::move(cfg)), class_ids_(std::move(class_ids)) {
  cfg_.validate();
  if (class_ids_.empty()) throw InvalidArgument("vsr model needs at least one class");
  std::sort(class_ids_.begin(), class_ids_.end());
  if (std::adjacent_find(class_ids_.begin(), class_ids_.end()) != class_ids_.end())
    throw InvalidArgument("duplicate class ids");

  Rng rng(init_seed);
  const std::size_t n_views = cfg_.views.poses.size();
  const std::size_t n_encoders = cfg_.shared_encoder ? 1 : n_views;
  for (std::size_t v = 0; v < n_encoders; ++v) {
    std::vector<nn::Linear> layers;
    long in = cfg_.frame_dim;
    for (std::size_t l = 0; l < cfg_.encoder.size(); ++l) {
      layers.emplace_back(params_, "enc" + std::to_string(v) + ".l" + std::to_string(l), in,
                          cfg_.encoder[l], rng);
      in = cfg_.encoder[l];
    }
    encoders_.push_back(std::move(layers));
  }
  const long enc_out = cfg_.encoder.back();
  for (std::size_t v = 0; v < n_views; ++v)
    view_lstm_.emplace_back(params_, "view_lstm" + std::to_string(v), 3 * enc_out,
                            cfg_.view_hidden, rng);
  fusion_lstm_ = nn::BiLSTM(params_, "fusion_lstm",
                            2 * cfg_.view_hidden * static_cast<long>(n_views),
                            cfg_.fusion_hidden, rng);
  head_ = nn::Linear(params_, "head", 2 * cfg_.fusion_hidden,
                     static_cast<long>(class_ids_.size()), rng);
}

long VsrModel::class_index(int class_id) const {
  auto it = std::lower_bound(class_ids_.begin(), class_ids_.end(), class_id);
  if (it == class_ids_.end() || *it != class_id)
    throw InvalidArgument("class id " + std::to_string(class_id) + " not registered");
  return static_cast<long>(it - class_ids_.begin());
}

ad::Var VsrModel::logits(const std::map<int, const corpus::VideoClip*>& views) const {
  using namespace ad;
  if (views.size() != cfg_.views.poses.size())
    throw ShapeError("vsr: expected " + std::to_string(cfg_.views.poses.size()) +
                     " views, got " + std::to_string(views.size()));
  long t = -1;
  for (int pose : cfg_.views.poses) {
    auto it = views.find(pose);
    if (it == views.end() || !it->second)
      throw ShapeError("vsr: missing view for pose " + std::to_string(pose));
    const corpus::VideoClip& clip = *it->second;
    if (clip.t() < 1) throw ShapeError("vsr: empty clip");
    if (t == -1)
      t = clip.t();
    else if (clip.t() != t)
      throw ShapeError("vsr: views disagree on frame count");
    if (clip.frames.numel() != t * cfg_.frame_dim)
      throw ShapeError("vsr: frame geometry does not match configured frame_dim");
  }

  // std::map iterates poses in ascending order, so insertion order of the
  // caller's map never affects the result.
  std::vector<Var> per_view;
  std::size_t vi = 0;
  for (int pose : cfg_.views.poses) {
    const corpus::VideoClip& clip = *views.at(pose);
    Var x = leaf(clip.frames.reshaped({t, cfg_.frame_dim}));
    const auto& enc = encoders_[cfg_.shared_encoder ? 0 : vi];
    for (const nn::Linear& layer : enc) x = relu(layer(x));
    x = delta_features(x);
    per_view.push_back(view_lstm_[vi].run(x));  // [T, 2*view_hidden]
    ++vi;
  }
  Var fused = per_view.size() == 1 ? per_view[0] : concat(per_view, 1);
  Var clip_embedding = fusion_lstm_.final_states(fused);  // [1, 2*fusion_hidden]
  return head_(clip_embedding);
}

Prediction VsrModel::predict(const std::map<int, const corpus::VideoClip*>& views) const {
  const Tensor probs = ad::softmax(logits(views)->value);
  Prediction p;
  p.probs.assign(probs.data(), probs.data() + probs.numel());
  p.top.resize(class_ids_.size());
  std::vector<std::size_t> idx(class_ids_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (p.probs[a] != p.probs[b]) return p.probs[a] > p.probs[b];
    return class_ids_[a] < class_ids_[b];
  });
  for (std::size_t i = 0; i < idx.size(); ++i) p.top[i] = class_ids_[idx[i]];
  return p;
}

Prediction uniform_prediction(const std::vector<int>& class_ids) {
  Prediction p;
  p.probs.assign(class_ids.size(), 1.0 / static_cast<double>(class_ids.size()));
  p.top = class_ids;
  std::sort(p.top.begin(), p.top.end());
  return p;
}

std::vector<ViewItem> group_views(const std::vector<corpus::Sample>& samples,
                                  const ViewCombination& views) {
  views.validate();
  using GroupKey = std::tuple<int, int, int, int>;  // speaker, class, rep, provenance
  std::map<GroupKey, std::map<int, const corpus::VideoClip*>> groups;
  for (const corpus::Sample& s : samples) {
    if (std::find(views.poses.begin(), views.poses.end(), s.who.pose_deg) == views.poses.end())
      continue;
    const GroupKey key{s.who.speaker_id, s.label.class_id, s.rep,
                       static_cast<int>(s.provenance)};
    groups[key][s.who.pose_deg] = &s.video;
  }
  std::vector<ViewItem> items;
  for (auto& [key, by_pose] : groups) {
    if (by_pose.size() != views.poses.size()) continue;  // incomplete view set
    ViewItem item;
    item.views = std::move(by_pose);
    item.class_id = std::get<1>(key);
    items.push_back(std::move(item));
  }
  return items;
}

TrainHistory train_vsr(VsrModel& model, const std::vector<ViewItem>& train,
                       const std::vector<ViewItem>& val, const VsrTrainConfig& cfg) {
  using namespace ad;
  if (train.empty()) throw InvalidArgument("train_vsr: empty training set");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw InvalidArgument("invalid vsr train config");

  nn::Adam opt(cfg.lr, cfg.beta1, cfg.beta2);
  Rng rng(cfg.seed);
  TrainHistory history;

  // Class-balanced index pool: cycle minority-class items up to the largest
  // class count so hallucinated classes are not drowned out.
  std::vector<std::size_t> pool;
  if (cfg.balance_classes) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train.size(); ++i)
      by_class[train[i].class_id].push_back(i);
    std::size_t max_count = 0;
    for (const auto& [cid, idx] : by_class) max_count = std::max(max_count, idx.size());
    for (const auto& [cid, idx] : by_class)
      for (std::size_t k = 0; k < max_count; ++k) pool.push_back(idx[k % idx.size()]);
  } else {
    pool.resize(train.size());
    std::iota(pool.begin(), pool.end(), 0);
  }

  auto eval_top1 = [&](const std::vector<ViewItem>& items) {
    std::vector<Prediction> preds;
    std::vector<int> truth;
    for (const ViewItem& item : items) {
      preds.push_back(model.predict(item.views));
      truth.push_back(item.class_id);
    }
    return top_k_accuracy(preds, truth, 1);
  };

  double best_val = -1.0;
  std::vector<double> best_params;
  long since_best = 0;

  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = pool;
    rng.shuffle(order);
    double epoch_loss = 0.0;
    long batches = 0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
      Var batch_loss;
      for (std::size_t j = at; j < end; ++j) {
        const ViewItem& item = train[order[j]];
        Var ce = softmax_cross_entropy(model.logits(item.views),
                                       model.class_index(item.class_id));
        batch_loss = batch_loss ? add(batch_loss, ce) : ce;
      }
      batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - at));
      if (!std::isfinite(batch_loss->scalar()))
        throw TrainingDivergenceError("vsr: non-finite loss at epoch " +
                                      std::to_string(epoch));
      model.params().zero_grads();
      backward(batch_loss);
      opt.step(model.params().vars());
      epoch_loss += batch_loss->scalar();
      ++batches;
    }
    history.train_loss.push_back(epoch_loss / static_cast<double>(std::max<long>(batches, 1)));

    if (!val.empty()) {
      const double v = eval_top1(val);
      history.val_top1.push_back(v);
      if (v > best_val) {
        best_val = v;
        best_params = model.params().values_flat();
        history.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (!best_params.empty()) model.params().set_values_flat(best_params);
  if (history.best_epoch < 0 && !history.train_loss.empty())
    history.best_epoch = static_cast<long>(history.train_loss.size()) - 1;
  return history;
}

double top_k_accuracy(const std::vector<Prediction>& preds, const std::vector<int>& truth,
                      long k) {
  if (preds.size() != truth.size())
    throw InvalidArgument("top_k_accuracy: prediction/truth length mismatch");
  if (k < 1) throw InvalidArgument("top_k_accuracy: k must be >= 1");
  if (preds.empty()) return 0.0;
  long hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& top = preds[i].top;
    const long upto = std::min<long>(k, static_cast<long>(top.size()));
    for (long j = 0; j < upto; ++j)
      if (top[static_cast<std::size_t>(j)] == truth[i]) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::size_t select_view_combination_index(const std::vector<ViewCombination>& candidates,
                                          const std::vector<double>& val_scores) {
  if (candidates.empty()) throw InvalidArgument("select_view_combination: no candidates");
  if (candidates.size() != val_scores.size())
    throw InvalidArgument("select_view_combination: score count mismatch");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double s = val_scores[i], sb = val_scores[best];
    if (s > sb) {
      best = i;
    } else if (s == sb) {
      const auto& a = candidates[i].poses;
      const auto& b = candidates[best].poses;
      if (a.size() < b.size() || (a.size() == b.size() && a < b)) best = i;
    }
  }
  return best;
}

ViewCombination select_view_combination(
    const std::vector<std::pair<ViewCombination, const VsrModel*>>& candidates,
    const std::vector<corpus::Sample>& val_samples) {
  if (candidates.empty()) throw InvalidArgument("select_view_combination: no candidates");
  std::vector<ViewCombination> combos;
  std::vector<double> scores;
  for (const auto& [combo, model] : candidates) {
    if (!model) throw InvalidArgument("select_view_combination: null model");
    std::vector<Prediction> preds;
    std::vector<int> truth;
    for (const ViewItem& item : group_views(val_samples, combo)) {
      preds.push_back(model->predict(item.views));
      truth.push_back(item.class_id);
    }
    combos.push_back(combo);
    scores.push_back(top_k_accuracy(preds, truth, 1));
  }
  return combos[select_view_combination_index(combos, scores)];
}

namespace {
constexpr char kCheckpointMagic[] = "VFCKPT1\n";
}

void save_vsr_checkpoint(const std::string& path, const VsrModel& model, std::uint64_t seed,
                         long epoch) {
  json header;
  header["format"] = "visemeforge-checkpoint";
  header["kind"] = "vsr";
  header["seed"] = seed;
  header["epoch"] = epoch;
  header["class_ids"] = model.class_ids();
  const VsrNetConfig& c = model.config();
  header["net"] = {{"views", c.views.poses},   {"frame_dim", c.frame_dim},
                   {"encoder", c.encoder},     {"view_hidden", c.view_hidden},
                   {"fusion_hidden", c.fusion_hidden},
                   {"shared_encoder", c.shared_encoder}};

  const std::string header_str = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 8);
  const std::uint64_t len = header_str.size();
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(header_str.data(), static_cast<std::streamsize>(len));
  const std::vector<double> flat = model.params().values_flat();
  os.write(reinterpret_cast<const char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

LoadedVsr load_vsr_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != kCheckpointMagic)
    throw IoError("not a visemeforge checkpoint: " + path);
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 8);
  std::string header_str(len, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(len));
  const json header = json::parse(header_str);
  if (header.value("kind", "") != "vsr") throw IoError("checkpoint kind mismatch in " + path);

  VsrNetConfig c;
  c.views.poses = header["net"]["views"].get<std::vector<int>>();
  c.frame_dim = header["net"]["frame_dim"];
  c.encoder = header["net"]["encoder"].get<std::vector<long>>();
  c.view_hidden = header["net"]["view_hidden"];
  c.fusion_hidden = header["net"]["fusion_hidden"];
  c.shared_encoder = header["net"]["shared_encoder"];

  LoadedVsr out;
  out.seed = header["seed"];
  out.epoch = header["epoch"];
  out.model = std::make_shared<VsrModel>(c, header["class_ids"].get<std::vector<int>>(), 0);
  std::vector<double> flat(static_cast<std::size_t>(out.model->params().scalar_count()));
  is.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!is) throw IoError("truncated checkpoint payload: " + path);
  out.model->params().set_values_flat(flat);
  return out;
}

}  // namespace vf::vsr
