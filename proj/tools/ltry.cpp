// ltry: per-image overfitted codec driver.
//
// Verbs: encode, decode, sweep, bdrate, report, synth.
// Exit codes: 0 success, 1 usage error, 2 encode/decode failure,
// 3 sweep finished with partial failures.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lottery/decoder.hpp"
#include "lottery/encoder.hpp"
#include "lottery/eval.hpp"
#include "lottery/image_io.hpp"
#include "lottery/sweep.hpp"
#include "lottery/synth.hpp"

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<lottery::RatePoint> curve_from_csv(const std::string& path) {
  std::vector<lottery::RatePoint> curve;
  for (const auto& row : lottery::read_csv(path))
    if (row.status == "ok") curve.push_back({row.record.bpp_total, row.record.psnr_db});
  return curve;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LotteryCodec: overfitted image compression with a masked random network"};
  app.require_subcommand(1);
  app.set_config("--config");

  // encode
  auto* enc = app.add_subcommand("encode", "Overfit and compress one image");
  std::string enc_image, enc_out = "out.ltry", enc_mode = "lottery";
  lottery::EncoderConfig cfg;
  enc->add_option("--image", enc_image, "Input image (PNG or binary PPM)")->required();
  enc->add_option("--out", enc_out, "Output bitstream path");
  enc->add_option("--lambda", cfg.lambda, "Rate-distortion weight");
  enc->add_option("--mask-ratio", cfg.mask_ratio, "Active-weight fraction in (0,1]");
  enc->add_option("--d", cfg.modnet_width, "ModNet width");
  enc->add_option("--c", cfg.arm_context, "ARM context size");
  enc->add_option("--extra-convs", cfg.extra_convs, "Trailing 3x3 convolutions (0..2)");
  enc->add_option("--levels", cfg.latent_levels, "Latent pyramid levels");
  enc->add_option("--seed", cfg.seed, "Random-network seed");
  enc->add_option("--steps1", cfg.stage1_steps, "Stage I steps");
  enc->add_option("--steps2", cfg.stage2_steps, "Stage II steps");
  enc->add_option("--eval-interval", cfg.eval_interval, "Best-model evaluation cadence");
  enc->add_flag("--plain-sgd", cfg.force_plain_sgd, "Plain SGD instead of Adam for z/theta/psi");
  enc->add_option("--mode", enc_mode, "lottery | modnet_only | dense_trained");

  // decode
  auto* dec = app.add_subcommand("decode", "Reconstruct an image from a bitstream");
  std::string dec_in, dec_out = "out.png";
  bool dec_sparse = false;
  dec->add_option("--in", dec_in, "Input .ltry stream")->required();
  dec->add_option("--out", dec_out, "Output image (.png or .ppm)");
  dec->add_flag("--sparse", dec_sparse, "Skip masked multiplies (complexity lower bound)");

  // sweep
  auto* swp = app.add_subcommand("sweep", "Run a manifest of encode jobs");
  std::string swp_manifest, swp_out = "sweep_out";
  int swp_jobs = 1;
  swp->add_option("--manifest", swp_manifest, "JSON manifest")->required();
  swp->add_option("--out-dir", swp_out, "Output directory");
  swp->add_option("--jobs", swp_jobs, "Parallel encode jobs");

  // bdrate
  auto* bdr = app.add_subcommand("bdrate", "BD-rate between two sweep CSVs");
  std::string bdr_a, bdr_b;
  bdr->add_option("--a", bdr_a, "Reference curve CSV")->required();
  bdr->add_option("--b", bdr_b, "Test curve CSV")->required();

  // report
  auto* rep = app.add_subcommand("report", "Rate-share and BD-vs-MACs tables from a sweep CSV");
  std::string rep_csv, rep_out = ".";
  rep->add_option("--csv", rep_csv, "Sweep CSV")->required();
  rep->add_option("--out-dir", rep_out, "Directory for the report CSVs");

  // synth
  auto* syn = app.add_subcommand("synth", "Write a procedural test image");
  std::string syn_out = "test.ppm";
  int syn_h = 64, syn_w = 64;
  std::uint64_t syn_seed = 0;
  syn->add_option("--out", syn_out, "Output image path");
  syn->add_option("--height", syn_h, "Height");
  syn->add_option("--width", syn_w, "Width");
  syn->add_option("--seed", syn_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the message / help text
    return code == 0 ? 0 : 1;     // usage errors are exit code 1
  }

  try {
    if (*enc) {
      lottery::CodecMode mode = lottery::CodecMode::kLottery;
      if (enc_mode == "modnet_only")
        mode = lottery::CodecMode::kModNetOnly;
      else if (enc_mode == "dense_trained")
        mode = lottery::CodecMode::kDenseTrained;
      else if (enc_mode != "lottery")
        throw CLI::ValidationError("--mode", "unknown mode " + enc_mode);

      const lottery::PixelGrid image = lottery::read_image(enc_image);
      const lottery::EncodeResult result = lottery::ablation_encode(image, cfg, mode);
      write_file(enc_out, result.bytes);
      std::cout << lottery::to_json(enc_image, result.record, "ok") << "\n";
      return 0;
    }
    if (*dec) {
      const auto bytes = read_file(dec_in);
      const lottery::DecodeResult result = lottery::decode_image(bytes, dec_sparse);
      lottery::write_image(result.image, dec_out);
      std::cout << "decoded " << dec_in << " -> " << dec_out << " (" << result.image.width << "x"
                << result.image.height << ", " << result.macs_per_pixel << " MACs/pixel)\n";
      return 0;
    }
    if (*swp) {
      const lottery::SweepManifest manifest = lottery::load_manifest(swp_manifest);
      const lottery::SweepOutcome outcome = lottery::run_sweep(manifest, swp_out, swp_jobs);
      std::cout << "sweep: " << outcome.completed << " completed, " << outcome.skipped
                << " skipped, " << outcome.failed << " failed -> " << outcome.csv_path << "\n";
      return outcome.failed > 0 ? 3 : 0;
    }
    if (*bdr) {
      const double bd = lottery::bd_rate(curve_from_csv(bdr_a), curve_from_csv(bdr_b));
      std::printf("BD-rate of %s vs %s: %+.3f%%\n", bdr_b.c_str(), bdr_a.c_str(), bd);
      return 0;
    }
    if (*rep) {
      lottery::write_reports(rep_csv, rep_out);
      std::cout << "wrote " << rep_out << "/rate_share.csv and " << rep_out << "/bd_vs_macs.csv\n";
      return 0;
    }
    if (*syn) {
      lottery::write_image(lottery::make_test_image(syn_h, syn_w, syn_seed), syn_out);
      std::cout << "wrote " << syn_out << "\n";
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
