#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "ovseg/features/toy_encoder.hpp"
#include "ovseg/training/augment.hpp"
#include "ovseg/training/losses.hpp"
#include "ovseg/upsampler/simfeatup.hpp"

namespace ovseg {

struct TrainConfig {
  double gamma = 0.1;
  double lr = 1e-3;
  int steps = 200;
  int batch = 1;
  int crop = 64;
  int factor = 8;  // must equal the encoder patch size
  std::uint64_t seed = 0;
  AugmentFlags augment;
  int guide_width = 16;
  int radius = 5;
  int crn_hidden = 32;
  int eval_crops = 4;  // fixed centre crops used for the initial/final loss

  void validate(const EncoderConfig& enc) const;
};

struct StepLoss {
  int step = 0;
  double total = 0.0;
  double rec = 0.0;
  double img = 0.0;
};

struct TrainReport {
  std::vector<StepLoss> series;
  LossValues initial_eval;
  LossValues final_eval;
  SimFeatUpParams params;
  std::filesystem::path checkpoint;
};

using StepCallback = std::function<void(const StepLoss&)>;

/// Every *.ppm in dir, sorted by file name.
std::vector<Tensor> load_corpus(const std::filesystem::path& dir);

/// Early-tap features Proj(X) of the frozen encoder for one crop.
FeatureFn early_feature_fn(const EncoderConfig& enc);

/// Trains in memory. Each step draws `batch` random crops, builds the
/// augmented views, averages total_loss over all of them and takes one Adam
/// step. Results depend only on the seed.
TrainReport train_upsampler(const std::vector<Tensor>& corpus, const TrainConfig& cfg, const EncoderConfig& enc,
                            const StepCallback& on_step = {});

/// Loads the corpus, trains, and writes the checkpoint to out_dir.
TrainReport train_upsampler(const std::filesystem::path& corpus_dir, const TrainConfig& cfg,
                            const EncoderConfig& enc, const std::filesystem::path& out_dir,
                            const StepCallback& on_step = {});

}  // namespace ovseg
