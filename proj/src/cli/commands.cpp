#include "ovseg/cli/commands.hpp"

#include <omp.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ovseg/eval/dataset.hpp"
#include "ovseg/features/feature_dump.hpp"
#include "ovseg/features/image_io.hpp"
#include "ovseg/features/synthetic.hpp"
#include "ovseg/numeric/tensor_io.hpp"
#include "ovseg/pipeline/ovss.hpp"
#include "ovseg/training/trainer.hpp"

namespace ovseg::cli {
namespace fs = std::filesystem;

namespace {

fs::path embeddings_for(const fs::path& manifest) {
  fs::path p = manifest;
  p.replace_extension(".sfup");
  return p;
}

// "name" or "name=sub1,sub2".
ClassSpec parse_class_spec(const std::string& text) {
  ClassSpec spec;
  const auto eq = text.find('=');
  spec.name = text.substr(0, eq);
  if (spec.name.empty()) throw ArgumentError("empty class name in '" + text + "'");
  if (eq != std::string::npos) {
    std::stringstream rest(text.substr(eq + 1));
    std::string sub;
    while (std::getline(rest, sub, ','))
      if (!sub.empty()) spec.subclasses.push_back(sub);
  }
  if (spec.subclasses.empty()) spec.subclasses = {spec.name};
  return spec;
}

struct EncoderOptions {
  int patch = EncoderConfig{}.patch_size;
  std::uint64_t seed = EncoderConfig{}.seed;

  void add_to(CLI::App* app) {
    app->add_option("--patch", patch, "Encoder patch size")->capture_default_str();
    app->add_option("--encoder-seed", seed, "Seed of the toy encoder weights")->capture_default_str();
  }
  EncoderConfig config() const {
    EncoderConfig cfg;
    cfg.patch_size = patch;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-vocabulary segmentation with a trained SimFeatUp upsampler", "ovseg"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)")->check(CLI::NonNegativeNumber);

  // train-upsampler
  auto* train = app.add_subcommand("train-upsampler", "Train SimFeatUp on a directory of PPM images");
  fs::path corpus, train_out, train_log;
  TrainConfig tcfg;
  int train_factor = 0;
  bool no_flip = false, no_translate = false, no_zoom = false;
  EncoderOptions train_enc;
  train->add_option("--corpus", corpus, "Directory of .ppm training images")->required();
  train->add_option("--out", train_out, "Checkpoint directory to write")->required();
  train->add_option("--gamma", tcfg.gamma, "Weight of the image reconstruction loss")->capture_default_str();
  train->add_option("--steps", tcfg.steps, "Optimisation steps")->capture_default_str();
  train->add_option("--seed", tcfg.seed, "Training seed")->capture_default_str();
  train->add_option("--lr", tcfg.lr, "Adam step size")->capture_default_str();
  train->add_option("--batch", tcfg.batch, "Crops per step")->capture_default_str();
  train->add_option("--crop", tcfg.crop, "Crop edge in pixels")->capture_default_str();
  train->add_option("--factor", train_factor, "Upsampling factor (default: patch size)");
  train->add_option("--radius", tcfg.radius, "JBU window half-width")->capture_default_str();
  train->add_option("--log", train_log, "Write the JSON-lines loss series here instead of stdout");
  train->add_flag("--no-flip", no_flip, "Disable flip augmentation");
  train->add_flag("--no-translate", no_translate, "Disable translation augmentation");
  train->add_flag("--no-zoom", no_zoom, "Disable zoom augmentation");
  train_enc.add_to(train);

  // segment
  auto* segment = app.add_subcommand("segment", "Segment one PPM image");
  fs::path seg_image, seg_ckpt, seg_bank, seg_embeddings, seg_out, seg_logits;
  InferenceConfig icfg;
  segment->add_option("--image", seg_image, "Input .ppm image")->required();
  segment->add_option("--checkpoint", seg_ckpt, "SimFeatUp checkpoint directory")->required();
  segment->add_option("--bank", seg_bank, "Text bank manifest (.json)")->required();
  segment->add_option("--embeddings", seg_embeddings, "Text bank embeddings (default: manifest with .sfup)");
  segment->add_option("--lambda", icfg.lambda, "Global-bias intensity")->capture_default_str();
  segment->add_option("--window", icfg.window, "Slide window edge")->capture_default_str();
  segment->add_option("--stride", icfg.stride, "Slide stride")->capture_default_str();
  segment->add_option("--long-side", icfg.long_side, "Resize target for the long side")->capture_default_str();
  segment->add_option("--factor", icfg.upsample_factor, "Upsampling factor (default: checkpoint)");
  segment->add_flag("--early-tap", icfg.early_tap, "Upsample Proj(X) instead of the modulated block output");
  segment->add_option("--out", seg_out, "Output mask (.pgm)")->required();
  segment->add_option("--logits", seg_logits, "Also dump the stitched logits as a tensor file");

  // eval
  auto* eval = app.add_subcommand("eval", "Compute mIoU of predicted masks against a dataset manifest");
  fs::path manifest_path, pred_dir, eval_out;
  eval->add_option("--manifest", manifest_path, "Dataset manifest (.json)")->required();
  eval->add_option("--pred-dir", pred_dir, "Directory of predicted .pgm masks")->required();
  eval->add_option("--out", eval_out, "Also write the report to this file");

  // dump-features
  auto* dump = app.add_subcommand("dump-features", "Encode an image and write its token sequence");
  fs::path dump_image, dump_out;
  std::string stage = "tokens";
  EncoderOptions dump_enc;
  dump->add_option("--image", dump_image, "Input .ppm image")->required();
  dump->add_option("--out", dump_out, "Output tensor file")->required();
  dump->add_option("--stage", stage, "tokens (encoder output X) or baseline (modulated block output O)")
      ->check(CLI::IsMember({"tokens", "baseline"}))
      ->capture_default_str();
  dump_enc.add_to(dump);

  // make-toy-bank
  auto* bank_cmd = app.add_subcommand("make-toy-bank", "Write a seeded random text embedding bank");
  std::vector<std::string> class_args;
  std::int64_t bank_width = EncoderConfig{}.proj_dim;
  std::uint64_t bank_seed = 0;
  fs::path bank_out;
  bank_cmd->add_option("--class", class_args, "Class as name or name=sub1,sub2 (repeatable)");
  bank_cmd->add_option("--width", bank_width, "Embedding width")->capture_default_str();
  bank_cmd->add_option("--seed", bank_seed, "Seed")->capture_default_str();
  bank_cmd->add_option("--out", bank_out, "Manifest path; embeddings go next to it as .sfup")->required();

  // make-toy-corpus
  auto* corpus_cmd = app.add_subcommand("make-toy-corpus", "Write synthetic scenes (and optionally masks)");
  fs::path corpus_out;
  int corpus_count = 16, corpus_size = 96, corpus_classes = 4;
  std::uint64_t corpus_seed = 0;
  bool corpus_masks = false;
  corpus_cmd->add_option("--out", corpus_out, "Output directory")->required();
  corpus_cmd->add_option("--count", corpus_count, "Number of images")->capture_default_str();
  corpus_cmd->add_option("--size", corpus_size, "Image edge in pixels")->capture_default_str();
  corpus_cmd->add_option("--classes", corpus_classes, "Number of classes (1-8)")->capture_default_str();
  corpus_cmd->add_option("--seed", corpus_seed, "Seed")->capture_default_str();
  corpus_cmd->add_flag("--masks", corpus_masks, "Also write masks and manifest.json");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (train->parsed()) {
      const EncoderConfig enc = train_enc.config();
      tcfg.factor = train_factor > 0 ? train_factor : enc.patch_size;
      tcfg.augment = AugmentFlags{!no_flip, !no_translate, !no_zoom};
      tcfg.validate(enc);
      std::ofstream log_file;
      if (!train_log.empty()) {
        log_file.open(train_log, std::ios::trunc);
        if (!log_file) throw DataError("cannot write " + train_log.string());
      }
      std::ostream& log = train_log.empty() ? out : log_file;
      auto report = train_upsampler(corpus, tcfg, enc, train_out, [&](const StepLoss& s) {
        log << nlohmann::json{{"step", s.step}, {"loss_total", s.total}, {"loss_rec", s.rec}, {"loss_img", s.img}}
                   .dump()
            << "\n";
      });
      err << "checkpoint written to " << report.checkpoint.string() << " (eval loss "
          << report.initial_eval.total << " -> " << report.final_eval.total << ")\n";
    } else if (segment->parsed()) {
      icfg.validate();
      const Checkpoint ckpt = load_checkpoint(seg_ckpt);
      const auto bank = load_text_bank(seg_bank, seg_embeddings.empty() ? embeddings_for(seg_bank) : seg_embeddings);
      const OvssModel model = OvssModel::from_checkpoint(ckpt);
      const auto result = segment_image(read_ppm(seg_image), model, bank, icfg);
      write_mask(seg_out, result.mask);
      if (!seg_logits.empty()) save_tensor(seg_logits, result.slide.logits);
      if (result.slide.padded) err << "warning: image smaller than the window; replicate-padded\n";
      out << nlohmann::json{{"mask", seg_out.string()},
                            {"windows", result.slide.origins.size()},
                            {"resized", {result.resized_height, result.resized_width}},
                            {"padded", result.slide.padded}}
                 .dump()
          << "\n";
    } else if (eval->parsed()) {
      const auto manifest = load_manifest(manifest_path);
      const auto report = evaluate_predictions(manifest, pred_dir).to_json().dump(2);
      out << report << "\n";
      if (!eval_out.empty()) {
        std::ofstream f(eval_out, std::ios::trunc);
        if (!f) throw DataError("cannot write " + eval_out.string());
        f << report << "\n";
      }
    } else if (dump->parsed()) {
      const EncoderConfig enc = dump_enc.config();
      const ToyEncoder encoder(enc);
      TokenSequence seq = encoder.encode(read_ppm(dump_image));
      if (stage == "baseline") seq = baseline_forward(seq, make_last_block(enc));
      save_feature_dump(dump_out, seq);
      out << nlohmann::json{{"out", dump_out.string()}, {"h", seq.h}, {"w", seq.w}, {"dim", seq.dim()}}.dump()
          << "\n";
    } else if (bank_cmd->parsed()) {
      std::vector<ClassSpec> specs;
      if (class_args.empty()) {
        for (const auto& n : synthetic_class_names(4)) specs.push_back({n, {n}});
      }
      for (const auto& a : class_args) specs.push_back(parse_class_spec(a));
      const auto bank = make_toy_bank(specs, bank_width, bank_seed);
      save_text_bank(bank, bank_out, embeddings_for(bank_out));
      out << nlohmann::json{{"manifest", bank_out.string()}, {"embeddings", embeddings_for(bank_out).string()},
                            {"classes", bank.class_count()}}
                 .dump()
          << "\n";
    } else if (corpus_cmd->parsed()) {
      write_synthetic_corpus(corpus_out, corpus_count, corpus_size, corpus_size, corpus_seed, corpus_classes,
                             corpus_masks);
      out << nlohmann::json{{"out", corpus_out.string()}, {"count", corpus_count}}.dump() << "\n";
    }
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace ovseg::cli
