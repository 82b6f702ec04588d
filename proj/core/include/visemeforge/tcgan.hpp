#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "visemeforge/corpus.hpp"
#include "visemeforge/nn.hpp"

namespace vf::tcgan {

// Overlapping audio windows, one per video frame: hop = sample_rate / fps,
// window = hop / (1 - overlap), T = floor((len - window) / hop) + 1.
struct AudioChunks {
  Tensor chunks;  // [T, window]
  long window = 0;
  long hop = 0;
  int sample_rate = 0;

  long t() const { return chunks.ndim() == 2 ? chunks.dim(0) : 0; }
};

AudioChunks chunk_audio(const corpus::AudioTrack& audio, double fps, double overlap);

struct TcganNetConfig {
  long image_h = 32, image_w = 32, channels = 1;
  long d_identity = 64;
  long d_audio = 64;
  long d_noise = 10;
  long enc_base = 8;             // U-Net widths: base, 2*base, 4*base
  long audio_channels = 16;      // 1-D conv widths: a, 2a, 2a
  long disc_base = 8;            // frame discriminator widths
  long seq_hidden = 32;          // sequence discriminator GRU width
  double fps = 25.0;
  double overlap = 0.5;
  double clamp_eps = 1e-7;       // discriminator output clamp

  void validate() const;
};

// Generator: U-Net-style identity encoder/decoder with skip connections, a
// 1-D conv + 2-layer GRU audio encoder, and a 1-layer GRU noise path. One
// frame is decoded per audio chunk from concat(L_I, L_A[t], L_N[t]).
class Generator {
 public:
  Generator(TcganNetConfig cfg, std::uint64_t init_seed);

  // Graph-building forward; still is [C,H,W]. Output frames are [T,C,H,W]
  // in (0,1) via the bounded output activation.
  ad::Var forward(const Tensor& still, const AudioChunks& chunks,
                  std::uint64_t noise_seed) const;

  corpus::VideoClip generate(const Tensor& still, const AudioChunks& chunks,
                             std::uint64_t noise_seed) const;

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const TcganNetConfig& config() const { return cfg_; }

 private:
  TcganNetConfig cfg_;
  nn::ParamSet params_;
  nn::Conv2d enc1_, enc2_, enc3_;
  nn::Linear enc_fc_;
  nn::Conv1d aud1_, aud2_, aud3_;
  nn::Linear aud_fc_;
  nn::GRU aud_gru_;
  nn::GRUCell noise_gru_;
  nn::Linear dec_fc_;
  nn::Conv2d dec1_, dec2_, dec3_, dec_out_;
};

// 6-layer CNN over the frame channel-stacked with the conditioning still.
class FrameDiscriminator {
 public:
  FrameDiscriminator(TcganNetConfig cfg, std::uint64_t init_seed);

  // frames/stills: [N,C,H,W]; returns [N,1] probabilities in (eps, 1-eps).
  ad::Var forward(const ad::Var& frames, const ad::Var& stills) const;
  ad::Var forward(const Tensor& frame, const Tensor& still) const;

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const TcganNetConfig& config() const { return cfg_; }

 private:
  TcganNetConfig cfg_;
  nn::ParamSet params_;
  nn::Conv2d c1_, c2_, c3_, c4_, c5_, c6_;
  nn::Linear fc_;
};

// Video and audio GRU encoders fused by a 2-layer dense head.
class SequenceDiscriminator {
 public:
  SequenceDiscriminator(TcganNetConfig cfg, std::uint64_t init_seed);

  // video [T,C,H,W] with T == chunks.t(); returns [1,1] probability.
  ad::Var forward(const ad::Var& video, const AudioChunks& chunks) const;

  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  const TcganNetConfig& config() const { return cfg_; }

 private:
  TcganNetConfig cfg_;
  nn::ParamSet params_;
  nn::Conv2d vid1_, vid2_;
  nn::Linear vid_fc_;
  nn::GRU vid_gru_;
  nn::Conv1d aud1_, aud2_;
  nn::Linear aud_fc_;
  nn::GRU aud_gru_;
  nn::Linear head1_, head2_;
};

// Eq. of the two-discriminator GAN objective: per item
//   log D_img(real) + log(1 - D_img(fake)) + log D_seq(real) + log(1 - D_seq(fake)),
// averaged over the batch. Inputs must lie strictly inside (0,1).
ad::Var adversarial_loss(const ad::Var& d_img_real, const ad::Var& d_img_fake,
                         const ad::Var& d_seq_real, const ad::Var& d_seq_fake);
double adversarial_loss(double d_img_real, double d_img_fake, double d_seq_real,
                        double d_seq_fake);

// Pixel-wise L1 reconstruction: sum of |F - G| over pixels and channels,
// averaged over the frame count so utterance length does not scale the loss.
ad::Var l1_loss(const ad::Var& real, const ad::Var& fake);
double l1_loss(const corpus::VideoClip& real, const corpus::VideoClip& fake);

struct TcganTrainConfig {
  long steps = 300;
  long batch_size = 4;
  double lr_gen = 2e-4;
  double lr_disc = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_rec = 100.0;
  long disc_steps_per_gen = 1;  // update ratio; 1 = strict alternation
  std::uint64_t seed = 0;
};

struct StepMetrics {
  long step = 0;
  double loss_adv_d = 0.0;  // Eq. 1 value the discriminators ascend
  double loss_adv_g = 0.0;  // generator's fake terms
  double loss_l1 = 0.0;     // Eq. 2 term (unweighted)
};

// Alternating two-player update on one batch of real samples. Throws
// TrainingDivergenceError if any loss goes non-finite.
class TcganTrainer {
 public:
  TcganTrainer(Generator& gen, FrameDiscriminator& d_img, SequenceDiscriminator& d_seq,
               TcganTrainConfig cfg);

  StepMetrics train_step(const std::vector<const corpus::Sample*>& batch);

  // Epoch loop over `data` until cfg.steps is reached; appends one CSV row
  // per step to metrics_csv when given ("step,loss_adv_d,loss_adv_g,loss_l1").
  std::vector<StepMetrics> train(const std::vector<corpus::Sample>& data,
                                 std::ostream* metrics_csv = nullptr);

  long step_count() const { return step_; }

 private:
  Generator& gen_;
  FrameDiscriminator& d_img_;
  SequenceDiscriminator& d_seq_;
  TcganTrainConfig cfg_;
  nn::Adam opt_gen_, opt_disc_;
  Rng rng_;
  long step_ = 0;
};

// One trained generator per pose angle.
struct TcganModelRegistry {
  std::map<int, std::shared_ptr<Generator>> by_pose;

  const Generator& for_pose(int pose_deg) const;
};

// Per (label, speaker-pose): audio via lookup_audio, still image via a seeded
// choice among the speaker's frames in `still_corpus` (pass the training
// split only), video via the pose's generator.
std::vector<corpus::Sample> hallucinate_tcgan(const std::vector<corpus::UtteranceLabel>& labels,
                                              const std::vector<corpus::SpeakerPose>& speakers,
                                              const std::vector<corpus::Sample>& still_corpus,
                                              const TcganModelRegistry& models,
                                              const corpus::TtsAdapter* tts,
                                              std::uint64_t seed);

// Single-file checkpoint: JSON header (config, pose_deg, seed, step) plus a
// raw little-endian double payload.
void save_generator_checkpoint(const std::string& path, const Generator& gen, int pose_deg,
                               std::uint64_t seed, long step);
struct LoadedGenerator {
  std::shared_ptr<Generator> generator;
  int pose_deg = 0;
  std::uint64_t seed = 0;
  long step = 0;
};
LoadedGenerator load_generator_checkpoint(const std::string& path);

}  // namespace vf::tcgan
