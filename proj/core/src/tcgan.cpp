#include "visemeforge/tcgan.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

using json = nlohmann::json;

namespace vf::tcgan {

namespace {
constexpr double kLeakySlope = 0.2;
}

AudioChunks chunk_audio(const corpus::AudioTrack& audio, double fps, double overlap) {
  audio.validate();
  if (fps <= 0.0) throw InvalidArgument("chunk_audio: fps must be positive");
  if (overlap < 0.0 || overlap >= 1.0)
    throw InvalidArgument("chunk_audio: overlap must lie in [0,1)");
  AudioChunks out;
  out.sample_rate = audio.sample_rate;
  out.hop = static_cast<long>(std::lround(static_cast<double>(audio.sample_rate) / fps));
  if (out.hop < 1) throw InvalidArgument("chunk_audio: sample_rate/fps below one sample");
  out.window = static_cast<long>(std::lround(static_cast<double>(out.hop) / (1.0 - overlap)));
  const long len = static_cast<long>(audio.samples.size());
  if (len < out.window)
    throw TooShortError("audio shorter than one window (" + std::to_string(len) + " < " +
                        std::to_string(out.window) + " samples)");
  const long t = (len - out.window) / out.hop + 1;
  out.chunks = Tensor({t, out.window});
  for (long i = 0; i < t; ++i)
    std::copy(audio.samples.begin() + i * out.hop,
              audio.samples.begin() + i * out.hop + out.window,
              out.chunks.data() + i * out.window);
  return out;
}

void TcganNetConfig::validate() const {
  if (image_h < 8 || image_w < 8 || image_h % 8 != 0 || image_w % 8 != 0)
    throw InvalidArgument("image geometry must be a multiple of 8");
  if (channels < 1 || d_identity < 1 || d_audio < 1 || d_noise < 1 || enc_base < 1 ||
      audio_channels < 1 || disc_base < 1 || seq_hidden < 1)
    throw InvalidArgument("network widths must be positive");
  if (fps <= 0.0 || overlap < 0.0 || overlap >= 1.0)
    throw InvalidArgument("invalid fps/overlap");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5))
    throw InvalidArgument("clamp_eps must lie in (0, 0.5)");
}

Generator::Generator(TcganNetConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(init_seed);
  const long b = cfg_.enc_base;
  const long bh = cfg_.image_h / 8, bw = cfg_.image_w / 8;
  enc1_ = nn::Conv2d(params_, "enc1", cfg_.channels, b, 3, 2, 1, rng);
  enc2_ = nn::Conv2d(params_, "enc2", b, 2 * b, 3, 2, 1, rng);
  enc3_ = nn::Conv2d(params_, "enc3", 2 * b, 4 * b, 3, 2, 1, rng);
  enc_fc_ = nn::Linear(params_, "enc_fc", 4 * b * bh * bw, cfg_.d_identity, rng);
  const long a = cfg_.audio_channels;
  aud1_ = nn::Conv1d(params_, "aud1", 1, a, 9, 4, 4, rng);
  aud2_ = nn::Conv1d(params_, "aud2", a, 2 * a, 9, 4, 4, rng);
  aud3_ = nn::Conv1d(params_, "aud3", 2 * a, 2 * a, 9, 4, 4, rng);
  aud_fc_ = nn::Linear(params_, "aud_fc", 2 * a, cfg_.d_audio, rng);
  aud_gru_ = nn::GRU(params_, "aud_gru", cfg_.d_audio, cfg_.d_audio, 2, rng);
  noise_gru_ = nn::GRUCell(params_, "noise_gru", cfg_.d_noise, cfg_.d_noise, rng);
  const long d_all = cfg_.d_identity + cfg_.d_audio + cfg_.d_noise;
  dec_fc_ = nn::Linear(params_, "dec_fc", d_all, 4 * b * bh * bw, rng);
  dec1_ = nn::Conv2d(params_, "dec1", 8 * b, 4 * b, 3, 1, 1, rng);
  dec2_ = nn::Conv2d(params_, "dec2", 4 * b + 2 * b, 2 * b, 3, 1, 1, rng);
  dec3_ = nn::Conv2d(params_, "dec3", 2 * b + b, b, 3, 1, 1, rng);
  dec_out_ = nn::Conv2d(params_, "dec_out", b, cfg_.channels, 3, 1, 1, rng);
}

namespace {

ad::Var tile_rows(const ad::Var& x, long t) {
  return ad::concat(std::vector<ad::Var>(static_cast<std::size_t>(t), x), 0);
}

}  // namespace

ad::Var Generator::forward(const Tensor& still, const AudioChunks& chunks,
                           std::uint64_t noise_seed) const {
  using namespace ad;
  if (still.ndim() != 3 || still.dim(0) != cfg_.channels || still.dim(1) != cfg_.image_h ||
      still.dim(2) != cfg_.image_w)
    throw ShapeError("generator: still image geometry " + still.shape_str() +
                     " does not match configuration");
  const long t = chunks.t();
  if (t < 1) throw ShapeError("generator: no audio chunks");
  const long b = cfg_.enc_base;
  const long bh = cfg_.image_h / 8, bw = cfg_.image_w / 8;

  // Identity path with skip features.
  Var s = leaf(still.reshaped({1, cfg_.channels, cfg_.image_h, cfg_.image_w}));
  Var e1 = leaky_relu(enc1_(s), kLeakySlope);
  Var e2 = leaky_relu(enc2_(e1), kLeakySlope);
  Var e3 = leaky_relu(enc3_(e2), kLeakySlope);
  Var identity = leaky_relu(enc_fc_(reshape(e3, {1, 4 * b * bh * bw})), kLeakySlope);

  // Audio path: per-chunk 1-D convs, pooled, then a 2-layer GRU over time.
  Var chunks_var = leaf(chunks.chunks.reshaped({t, 1, 1, chunks.window}));
  Var au = leaky_relu(aud1_(chunks_var), kLeakySlope);
  au = leaky_relu(aud2_(au), kLeakySlope);
  au = leaky_relu(aud3_(au), kLeakySlope);
  Var audio_feat = leaky_relu(aud_fc_(spatial_mean(au)), kLeakySlope);  // [T, d_audio]
  Var audio_latent = aud_gru_.run(audio_feat);                          // [T, d_audio]

  // Noise path: fresh Gaussian per step through a 1-layer GRU.
  Rng noise_rng(noise_seed);
  Tensor noise({t, cfg_.d_noise});
  for (long i = 0; i < noise.numel(); ++i) noise[i] = noise_rng.normal();
  Var noise_seq = leaf(std::move(noise));
  Var h = leaf(Tensor::zeros({1, cfg_.d_noise}));
  std::vector<Var> noise_steps;
  noise_steps.reserve(static_cast<std::size_t>(t));
  for (long i = 0; i < t; ++i) {
    h = noise_gru_.step(slice(noise_seq, 0, i, 1), h);
    noise_steps.push_back(h);
  }
  Var noise_latent = concat(noise_steps, 0);  // [T, d_noise]

  // Decode every step as one batch; skips are broadcast along time.
  Var z = concat({tile_rows(identity, t), audio_latent, noise_latent}, 1);
  Var x = reshape(dec_fc_(z), {t, 4 * b, bh, bw});
  x = leaky_relu(dec1_(concat({x, tile_rows(e3, t)}, 1)), kLeakySlope);
  x = upsample_nearest2x(x);
  x = leaky_relu(dec2_(concat({x, tile_rows(e2, t)}, 1)), kLeakySlope);
  x = upsample_nearest2x(x);
  x = leaky_relu(dec3_(concat({x, tile_rows(e1, t)}, 1)), kLeakySlope);
  x = upsample_nearest2x(x);
  return sigmoid(dec_out_(x));  // [T,C,H,W] in (0,1)
}

corpus::VideoClip Generator::generate(const Tensor& still, const AudioChunks& chunks,
                                      std::uint64_t noise_seed) const {
  corpus::VideoClip clip;
  clip.fps = cfg_.fps;
  clip.frames = forward(still, chunks, noise_seed)->value;
  return clip;
}

FrameDiscriminator::FrameDiscriminator(TcganNetConfig cfg, std::uint64_t init_seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(init_seed);
  const long d = cfg_.disc_base;
  c1_ = nn::Conv2d(params_, "c1", 2 * cfg_.channels, d, 3, 2, 1, rng);
  c2_ = nn::Conv2d(params_, "c2", d, d, 3, 1, 1, rng);
  c3_ = nn::Conv2d(params_, "c3", d, 2 * d, 3, 2, 1, rng);
  c4_ = nn::Conv2d(params_, "c4", 2 * d, 2 * d, 3, 1, 1, rng);
  c5_ = nn::Conv2d(params_, "c5", 2 * d, 4 * d, 3, 2, 1, rng);
  c6_ = nn::Conv2d(params_, "c6", 4 * d, 4 * d, 3, 1, 1, rng);
  fc_ = nn::Linear(params_, "fc", 4 * d * (cfg_.image_h / 8) * (cfg_.image_w / 8), 1, rng);
}

ad::Var FrameDiscriminator::forward(const ad::Var& frames, const ad::Var& stills) const {
  using namespace ad;
  if (frames->value.ndim() != 4 || !frames->value.same_shape(stills->value))
    throw ShapeError("frame discriminator: frame/still geometry mismatch");
  if (frames->value.dim(1) != cfg_.channels || frames->value.dim(2) != cfg_.image_h ||
      frames->value.dim(3) != cfg_.image_w)
    throw ShapeError("frame discriminator: input geometry does not match configuration");
  const long n = frames->value.dim(0);
  Var x = concat({frames, stills}, 1);
  x = leaky_relu(c1_(x), kLeakySlope);
  x = leaky_relu(c2_(x), kLeakySlope);
  x = leaky_relu(c3_(x), kLeakySlope);
  x = leaky_relu(c4_(x), kLeakySlope);
  x = leaky_relu(c5_(x), kLeakySlope);
  x = leaky_relu(c6_(x), kLeakySlope);
  const long flat = 4 * cfg_.disc_base * (cfg_.image_h / 8) * (cfg_.image_w / 8);
  Var logit = fc_(reshape(x, {n, flat}));
  return clamp(sigmoid(logit), cfg_.clamp_eps, 1.0 - cfg_.clamp_eps);
}

ad::Var FrameDiscriminator::forward(const Tensor& frame, const Tensor& still) const {
  const std::vector<long> batched{1, frame.dim(0), frame.dim(1), frame.dim(2)};
  return forward(ad::leaf(frame.reshaped(batched)), ad::leaf(still.reshaped(batched)));
}

SequenceDiscriminator::SequenceDiscriminator(TcganNetConfig cfg, std::uint64_t init_seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(init_seed);
  const long d = cfg_.disc_base;
  const long s = cfg_.seq_hidden;
  vid1_ = nn::Conv2d(params_, "vid1", cfg_.channels, d, 3, 2, 1, rng);
  vid2_ = nn::Conv2d(params_, "vid2", d, 2 * d, 3, 2, 1, rng);
  vid_fc_ = nn::Linear(params_, "vid_fc", 2 * d, s, rng);
  vid_gru_ = nn::GRU(params_, "vid_gru", s, s, 2, rng);
  aud1_ = nn::Conv1d(params_, "aud1", 1, d, 9, 4, 4, rng);
  aud2_ = nn::Conv1d(params_, "aud2", d, 2 * d, 9, 4, 4, rng);
  aud_fc_ = nn::Linear(params_, "aud_fc", 2 * d, s, rng);
  aud_gru_ = nn::GRU(params_, "aud_gru", s, s, 2, rng);
  head1_ = nn::Linear(params_, "head1", 2 * s, s, rng);
  head2_ = nn::Linear(params_, "head2", s, 1, rng);
}

ad::Var SequenceDiscriminator::forward(const ad::Var& video, const AudioChunks& chunks) const {
  using namespace ad;
  if (video->value.ndim() != 4)
    throw ShapeError("sequence discriminator: video must be [T,C,H,W]");
  const long t = video->value.dim(0);
  if (t != chunks.t())
    throw ShapeError("sequence discriminator: video frames (" + std::to_string(t) +
                     ") and audio chunks (" + std::to_string(chunks.t()) + ") disagree");
  if (video->value.dim(1) != cfg_.channels || video->value.dim(2) != cfg_.image_h ||
      video->value.dim(3) != cfg_.image_w)
    throw ShapeError("sequence discriminator: video geometry does not match configuration");

  Var v = leaky_relu(vid1_(video), kLeakySlope);
  v = leaky_relu(vid2_(v), kLeakySlope);
  Var video_final = vid_gru_.final_state(leaky_relu(vid_fc_(spatial_mean(v)), kLeakySlope));

  Var a = leaf(chunks.chunks.reshaped({t, 1, 1, chunks.window}));
  a = leaky_relu(aud1_(a), kLeakySlope);
  a = leaky_relu(aud2_(a), kLeakySlope);
  Var audio_final = aud_gru_.final_state(leaky_relu(aud_fc_(spatial_mean(a)), kLeakySlope));

  Var fused = leaky_relu(head1_(concat({video_final, audio_final}, 1)), kLeakySlope);
  return clamp(sigmoid(head2_(fused)), cfg_.clamp_eps, 1.0 - cfg_.clamp_eps);
}

namespace {

void check_probability_range(const ad::Var& v, const char* name) {
  for (long i = 0; i < v->value.numel(); ++i)
    if (!(v->value[i] > 0.0 && v->value[i] < 1.0))
      throw DomainError(std::string("adversarial_loss: ") + name +
                        " outside (0,1): " + std::to_string(v->value[i]));
}

ad::Var one_minus(const ad::Var& v) { return ad::add_scalar(ad::neg(v), 1.0); }

}  // namespace

ad::Var adversarial_loss(const ad::Var& d_img_real, const ad::Var& d_img_fake,
                         const ad::Var& d_seq_real, const ad::Var& d_seq_fake) {
  using namespace ad;
  const long n = d_img_real->value.numel();
  if (d_img_fake->value.numel() != n || d_seq_real->value.numel() != n ||
      d_seq_fake->value.numel() != n)
    throw ShapeError("adversarial_loss: batch sizes disagree");
  check_probability_range(d_img_real, "d_img_real");
  check_probability_range(d_img_fake, "d_img_fake");
  check_probability_range(d_seq_real, "d_seq_real");
  check_probability_range(d_seq_fake, "d_seq_fake");
  Var per_item = add(add(log_(d_img_real), log_(one_minus(d_img_fake))),
                     add(log_(d_seq_real), log_(one_minus(d_seq_fake))));
  return mean(per_item);
}

double adversarial_loss(double d_img_real, double d_img_fake, double d_seq_real,
                        double d_seq_fake) {
  return adversarial_loss(ad::leaf(Tensor::scalar(d_img_real)),
                          ad::leaf(Tensor::scalar(d_img_fake)),
                          ad::leaf(Tensor::scalar(d_seq_real)),
                          ad::leaf(Tensor::scalar(d_seq_fake)))
      ->scalar();
}

ad::Var l1_loss(const ad::Var& real, const ad::Var& fake) {
  if (!real->value.same_shape(fake->value))
    throw ShapeError("l1_loss: shape mismatch " + real->value.shape_str() + " vs " +
                     fake->value.shape_str());
  const long t = real->value.ndim() == 4 ? real->value.dim(0) : 1;
  return ad::scale(ad::sum(ad::abs_(ad::sub(real, fake))), 1.0 / static_cast<double>(t));
}

double l1_loss(const corpus::VideoClip& real, const corpus::VideoClip& fake) {
  return l1_loss(ad::leaf(real.frames), ad::leaf(fake.frames))->scalar();
}

TcganTrainer::TcganTrainer(Generator& gen, FrameDiscriminator& d_img,
                           SequenceDiscriminator& d_seq, TcganTrainConfig cfg)
    : gen_(gen),
      d_img_(d_img),
      d_seq_(d_seq),
      cfg_(cfg),
      opt_gen_(cfg.lr_gen, cfg.beta1, cfg.beta2),
      opt_disc_(cfg.lr_disc, cfg.beta1, cfg.beta2),
      rng_(cfg.seed) {
  if (cfg_.batch_size < 1 || cfg_.steps < 1 || cfg_.disc_steps_per_gen < 1)
    throw InvalidArgument("invalid tcgan training configuration");
  if (cfg_.lambda_rec < 0.0) throw InvalidArgument("lambda_rec must be >= 0");
}

StepMetrics TcganTrainer::train_step(const std::vector<const corpus::Sample*>& batch) {
  using namespace ad;
  if (batch.empty()) throw InvalidArgument("train_step: empty batch");
  const TcganNetConfig& net = gen_.config();
  const long n = static_cast<long>(batch.size());

  struct Item {
    AudioChunks chunks;
    Tensor real;   // [Tc,C,H,W], first Tc real frames
    Tensor still;  // [C,H,W]
    Var fake;      // generator output, graph attached
    long frame_real = 0, frame_fake = 0;
  };
  std::vector<Item> items;
  items.reserve(batch.size());
  for (const corpus::Sample* s : batch) {
    Item it;
    it.chunks = chunk_audio(s->audio, net.fps, net.overlap);
    const long tc = it.chunks.t();
    const long tv = s->video.t();
    if (tc > tv)
      throw ShapeError("train_step: more audio chunks than video frames");
    const long fsz = s->video.channels() * s->video.height() * s->video.width();
    it.real = Tensor({tc, s->video.channels(), s->video.height(), s->video.width()});
    std::copy(s->video.frames.data(), s->video.frames.data() + tc * fsz, it.real.data());
    it.still = s->video.frame(static_cast<long>(rng_.uniform_int(static_cast<std::uint64_t>(tv))));
    it.frame_real = static_cast<long>(rng_.uniform_int(static_cast<std::uint64_t>(tc)));
    it.frame_fake = static_cast<long>(rng_.uniform_int(static_cast<std::uint64_t>(tc)));
    it.fake = gen_.forward(it.still, it.chunks, rng_.next_u64());
    items.push_back(std::move(it));
  }

  auto stack_frames = [&](bool fake, bool detached) {
    std::vector<Var> frames, stills;
    for (Item& it : items) {
      const long f = fake ? it.frame_fake : it.frame_real;
      Var frame;
      if (fake) {
        frame = slice(detached ? detach(it.fake) : it.fake, 0, f, 1);
      } else {
        const long fsz = it.real.dim(1) * it.real.dim(2) * it.real.dim(3);
        Tensor one({1, it.real.dim(1), it.real.dim(2), it.real.dim(3)});
        std::copy(it.real.data() + f * fsz, it.real.data() + (f + 1) * fsz, one.data());
        frame = leaf(std::move(one));
      }
      frames.push_back(frame);
      stills.push_back(leaf(it.still.reshaped({1, it.still.dim(0), it.still.dim(1),
                                               it.still.dim(2)})));
    }
    return std::pair{concat(frames, 0), concat(stills, 0)};
  };

  auto seq_scores = [&](bool fake, bool detached) {
    std::vector<Var> scores;
    for (Item& it : items) {
      Var video = fake ? (detached ? detach(it.fake) : it.fake) : leaf(it.real);
      scores.push_back(d_seq_.forward(video, it.chunks));
    }
    return concat(scores, 0);  // [N,1]
  };

  // Discriminator phase: ascend the adversarial objective.
  double adv_d_value = 0.0;
  for (long r = 0; r < cfg_.disc_steps_per_gen; ++r) {
    auto [real_frames, stills_r] = stack_frames(/*fake=*/false, /*detached=*/true);
    auto [fake_frames, stills_f] = stack_frames(/*fake=*/true, /*detached=*/true);
    Var adv = adversarial_loss(d_img_.forward(real_frames, stills_r),
                               d_img_.forward(fake_frames, stills_f),
                               seq_scores(false, true), seq_scores(true, true));
    adv_d_value = adv->scalar();
    Var loss_d = neg(adv);
    d_img_.params().zero_grads();
    d_seq_.params().zero_grads();
    backward(loss_d);
    std::vector<Var> disc_params = d_img_.params().vars();
    for (const Var& p : d_seq_.params().vars()) disc_params.push_back(p);
    opt_disc_.step(disc_params);
  }

  // Generator phase: descend its fake terms plus the weighted reconstruction.
  auto [fake_frames, stills_f] = stack_frames(/*fake=*/true, /*detached=*/false);
  Var g_fake_terms =
      mean(add(log_(one_minus(d_img_.forward(fake_frames, stills_f))),
               log_(one_minus(seq_scores(true, false)))));
  std::vector<Var> l1_terms;
  for (Item& it : items) l1_terms.push_back(l1_loss(leaf(it.real), it.fake));
  Var l1_mean = scale(sum(concat(l1_terms, 0)), 1.0 / static_cast<double>(n));
  Var loss_g = cfg_.lambda_rec > 0.0
                   ? add(g_fake_terms, scale(l1_mean, cfg_.lambda_rec))
                   : g_fake_terms;
  gen_.params().zero_grads();
  backward(loss_g);
  opt_gen_.step(gen_.params().vars());

  StepMetrics m;
  m.step = ++step_;
  m.loss_adv_d = adv_d_value;
  m.loss_adv_g = g_fake_terms->scalar();
  m.loss_l1 = l1_mean->scalar();
  if (!std::isfinite(m.loss_adv_d) || !std::isfinite(m.loss_adv_g) ||
      !std::isfinite(m.loss_l1)) {
    std::ostringstream os;
    os << "non-finite loss at step " << m.step << ": adv_d=" << m.loss_adv_d
       << " adv_g=" << m.loss_adv_g << " l1=" << m.loss_l1;
    throw TrainingDivergenceError(os.str());
  }
  return m;
}

std::vector<StepMetrics> TcganTrainer::train(const std::vector<corpus::Sample>& data,
                                             std::ostream* metrics_csv) {
  if (data.empty()) throw InvalidArgument("tcgan train: empty data set");
  if (metrics_csv) *metrics_csv << "step,loss_adv_d,loss_adv_g,loss_l1\n";
  std::vector<StepMetrics> history;
  std::vector<std::size_t> order(data.size());
  while (step_ < cfg_.steps) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng_.shuffle(order);
    for (std::size_t at = 0; at < order.size() && step_ < cfg_.steps;
         at += static_cast<std::size_t>(cfg_.batch_size)) {
      std::vector<const corpus::Sample*> batch;
      for (std::size_t j = at;
           j < std::min(order.size(), at + static_cast<std::size_t>(cfg_.batch_size)); ++j)
        batch.push_back(&data[order[j]]);
      const StepMetrics m = train_step(batch);
      history.push_back(m);
      if (metrics_csv)
        *metrics_csv << m.step << "," << m.loss_adv_d << "," << m.loss_adv_g << ","
                     << m.loss_l1 << "\n";
    }
  }
  return history;
}

const Generator& TcganModelRegistry::for_pose(int pose_deg) const {
  auto it = by_pose.find(pose_deg);
  if (it == by_pose.end() || !it->second)
    throw MissingModelError("no trained generator for pose " + std::to_string(pose_deg));
  return *it->second;
}

std::vector<corpus::Sample> hallucinate_tcgan(const std::vector<corpus::UtteranceLabel>& labels,
                                              const std::vector<corpus::SpeakerPose>& speakers,
                                              const std::vector<corpus::Sample>& still_corpus,
                                              const TcganModelRegistry& models,
                                              const corpus::TtsAdapter* tts,
                                              std::uint64_t seed) {
  std::vector<corpus::Sample> out;
  for (const corpus::UtteranceLabel& label : labels) {
    for (const corpus::SpeakerPose& who : speakers) {
      const Generator& gen = models.for_pose(who.pose_deg);
      corpus::AudioTrack audio = corpus::lookup_audio(label, still_corpus, tts);
      const AudioChunks chunks = chunk_audio(audio, gen.config().fps, gen.config().overlap);

      // Deterministic seeded choice among the speaker's frames at this pose.
      std::vector<const corpus::Sample*> pool;
      for (const corpus::Sample& s : still_corpus)
        if (s.who == who && s.provenance == corpus::Provenance::real) pool.push_back(&s);
      if (pool.empty())
        throw InvalidArgument("no real frames for speaker " +
                              std::to_string(who.speaker_id) + " at pose " +
                              std::to_string(who.pose_deg) + " to draw a still from");
      Rng rng(Rng::mix(seed, {static_cast<std::uint64_t>(label.class_id),
                              static_cast<std::uint64_t>(who.speaker_id),
                              static_cast<std::uint64_t>(who.pose_deg)}));
      const corpus::Sample* src = pool[rng.uniform_int(pool.size())];
      const Tensor still =
          src->video.frame(static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(src->video.t()))));

      corpus::Sample s;
      s.video = gen.generate(still, chunks, rng.next_u64());
      // Trim audio to exactly the chunked span so durations agree.
      audio.samples.resize(static_cast<std::size_t>(chunks.t() * chunks.hop), 0.0);
      s.audio = std::move(audio);
      s.label = label;
      s.who = who;
      s.provenance = corpus::Provenance::tcgan;
      s.rep = 0;
      s.validate();
      out.push_back(std::move(s));
    }
  }
  corpus::sort_samples(out);
  return out;
}

namespace {

json net_config_to_json(const TcganNetConfig& c) {
  return {{"image_h", c.image_h},   {"image_w", c.image_w},
          {"channels", c.channels}, {"d_identity", c.d_identity},
          {"d_audio", c.d_audio},   {"d_noise", c.d_noise},
          {"enc_base", c.enc_base}, {"audio_channels", c.audio_channels},
          {"disc_base", c.disc_base}, {"seq_hidden", c.seq_hidden},
          {"fps", c.fps},           {"overlap", c.overlap},
          {"clamp_eps", c.clamp_eps}};
}

TcganNetConfig net_config_from_json(const json& j) {
  TcganNetConfig c;
  c.image_h = j["image_h"];
  c.image_w = j["image_w"];
  c.channels = j["channels"];
  c.d_identity = j["d_identity"];
  c.d_audio = j["d_audio"];
  c.d_noise = j["d_noise"];
  c.enc_base = j["enc_base"];
  c.audio_channels = j["audio_channels"];
  c.disc_base = j["disc_base"];
  c.seq_hidden = j["seq_hidden"];
  c.fps = j["fps"];
  c.overlap = j["overlap"];
  c.clamp_eps = j["clamp_eps"];
  return c;
}

constexpr char kCheckpointMagic[] = "VFCKPT1\n";

}  // namespace

void save_generator_checkpoint(const std::string& path, const Generator& gen, int pose_deg,
                               std::uint64_t seed, long step) {
  json header;
  header["format"] = "visemeforge-checkpoint";
  header["kind"] = "tcgan-generator";
  header["pose_deg"] = pose_deg;
  header["seed"] = seed;
  header["step"] = step;
  header["net"] = net_config_to_json(gen.config());
  json params = json::array();
  for (const auto& [name, var] : gen.params().named())
    params.push_back({{"name", name}, {"shape", var->value.shape()}});
  header["params"] = params;

  const std::string header_str = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 8);
  const std::uint64_t len = header_str.size();
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(header_str.data(), static_cast<std::streamsize>(len));
  const std::vector<double> flat = gen.params().values_flat();
  os.write(reinterpret_cast<const char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

LoadedGenerator load_generator_checkpoint(const std::string& path) {
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
  if (header.value("kind", "") != "tcgan-generator")
    throw IoError("checkpoint kind mismatch in " + path);

  LoadedGenerator out;
  out.pose_deg = header["pose_deg"];
  out.seed = header["seed"];
  out.step = header["step"];
  out.generator = std::make_shared<Generator>(net_config_from_json(header["net"]), 0);

  std::vector<double> flat(
      static_cast<std::size_t>(out.generator->params().scalar_count()));
  is.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!is) throw IoError("truncated checkpoint payload: " + path);
  out.generator->params().set_values_flat(flat);
  return out;
}

}  // namespace vf::tcgan
