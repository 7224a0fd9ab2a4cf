#include "lottery/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "lottery/eval.hpp"
#include "lottery/image_io.hpp"

namespace lottery {

namespace fs = std::filesystem;
using nlohmann::json;

SweepManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j;
  in >> j;

  SweepManifest m;
  m.images = j.at("images").get<std::vector<std::string>>();
  m.lambdas = j.at("lambdas").get<std::vector<double>>();
  m.mask_ratios = j.at("mask_ratios").get<std::vector<double>>();
  for (const auto& a : j.at("archs")) {
    ArchChoice arch;
    arch.modnet_width = a.at("d").get<int>();
    arch.arm_context = a.at("c").get<int>();
    arch.extra_convs = a.value("extra_convs", 0);
    m.archs.push_back(arch);
  }
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.stage1_steps = j.value("stage1_steps", 2000L);
  m.stage2_steps = j.value("stage2_steps", 400L);
  m.eval_interval = j.value("eval_interval", 100L);
  m.latent_levels = j.value("latent_levels", 7);
  if (m.images.empty() || m.lambdas.empty() || m.mask_ratios.empty() || m.archs.empty() ||
      m.seeds.empty())
    throw std::runtime_error("manifest must list images, lambdas, mask_ratios, archs and seeds");
  return m;
}

namespace {

struct Job {
  std::string image_path;
  std::string image_name;
  EncoderConfig cfg;
  std::string stem;  // unique, filesystem-safe job id
};

std::string format_double(double v) {
  std::ostringstream os;
  os << v;
  std::string s = os.str();
  for (char& ch : s)
    if (ch == '.' || ch == '-' || ch == '+') ch = '_';
  return s;
}

std::vector<Job> enumerate_jobs(const SweepManifest& m) {
  std::vector<Job> jobs;
  for (const auto& image : m.images) {
    const std::string name = fs::path(image).stem().string();
    for (double lambda : m.lambdas) {
      for (double ratio : m.mask_ratios) {
        for (const auto& arch : m.archs) {
          for (std::uint64_t seed : m.seeds) {
            Job job;
            job.image_path = image;
            job.image_name = name;
            job.cfg.lambda = lambda;
            job.cfg.mask_ratio = ratio;
            job.cfg.modnet_width = arch.modnet_width;
            job.cfg.arm_context = arch.arm_context;
            job.cfg.extra_convs = arch.extra_convs;
            job.cfg.latent_levels = m.latent_levels;
            job.cfg.stage1_steps = m.stage1_steps;
            job.cfg.stage2_steps = m.stage2_steps;
            job.cfg.eval_interval = m.eval_interval;
            job.cfg.seed = seed;
            std::ostringstream os;
            os << name << "_lam" << format_double(lambda) << "_r" << format_double(ratio) << "_d"
               << arch.modnet_width << "_c" << arch.arm_context << "_e" << arch.extra_convs
               << "_s" << seed;
            job.stem = os.str();
            jobs.push_back(std::move(job));
          }
        }
      }
    }
  }
  return jobs;
}

}  // namespace

SweepOutcome run_sweep(const SweepManifest& manifest, const std::string& out_dir, int jobs) {
  fs::create_directories(out_dir);
  const std::vector<Job> all = enumerate_jobs(manifest);
  if (jobs < 1) jobs = 1;

  std::atomic<int> next{0}, completed{0}, skipped{0}, failed{0};
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= static_cast<int>(all.size())) return;
      const Job& job = all[i];
      const fs::path record_path = fs::path(out_dir) / (job.stem + ".json");
      if (fs::exists(record_path)) {
        ++skipped;
        continue;
      }
      try {
        const PixelGrid image = read_image(job.image_path);
        const EncodeResult result = encode_image(image, job.cfg);
        const fs::path stream_path = fs::path(out_dir) / (job.stem + ".ltry");
        std::ofstream bin(stream_path, std::ios::binary);
        bin.write(reinterpret_cast<const char*>(result.bytes.data()),
                  static_cast<std::streamsize>(result.bytes.size()));
        std::ofstream rec(record_path);
        rec << to_json(job.image_name, result.record, "ok") << "\n";
        ++completed;
      } catch (const std::exception& e) {
        json j;
        j["image"] = job.image_name;
        j["status"] = "failed";
        j["error"] = e.what();
        std::ofstream rec(record_path);
        rec << j.dump(2) << "\n";
        ++failed;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  // Aggregate in job order so the CSV is stable across runs.
  const fs::path csv_path = fs::path(out_dir) / "sweep.csv";
  std::ofstream csv(csv_path);
  csv << kCsvHeader << "\n";
  for (const Job& job : all) {
    std::ifstream rec(fs::path(out_dir) / (job.stem + ".json"));
    if (!rec) continue;
    json j;
    rec >> j;
    if (j.value("status", "failed") != "ok") {
      RDRecord empty;
      csv << to_csv_row(job.image_name, empty, "failed") << "\n";
      continue;
    }
    RDRecord r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mode = CodecMode::kLottery;
    r.lambda = j.at("lambda").get<double>();
    r.mask_ratio = j.at("mask_ratio").get<double>();
    r.modnet_width = j.at("d").get<int>();
    r.arm_context = j.at("c").get<int>();
    r.extra_convs = j.at("extra_convs").get<int>();
    r.latent_levels = j.at("levels").get<int>();
    r.steps1 = j.at("steps1").get<long>();
    r.steps2 = j.at("steps2").get<long>();
    r.height = j.at("height").get<int>();
    r.width = j.at("width").get<int>();
    const auto& bpp = j.at("bpp");
    r.bpp_total = bpp.at("total").get<double>();
    r.bpp_z = bpp.at("z").get<double>();
    r.bpp_tau = bpp.at("tau").get<double>();
    r.bpp_theta = bpp.at("theta").get<double>();
    r.bpp_psi = bpp.at("psi").get<double>();
    r.bpp_w = bpp.at("w").get<double>();
    r.bpp_header = bpp.at("header").get<double>();
    r.psnr_db = j.at("psnr_db").get<double>();
    r.psnr_unquantized_db = j.value("psnr_unquantized_db", 0.0);
    r.mse = j.at("mse").get<double>();
    r.rd_cost = j.at("rd_cost").get<double>();
    r.macs_lower = j.at("macs_lower").get<double>();
    r.macs_upper = j.at("macs_upper").get<double>();
    r.model_bits_total = j.at("model_bits_total").get<double>();
    r.header_bits = j.at("header_bits").get<double>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    csv << to_csv_row(job.image_name, r, "ok") << "\n";
  }

  SweepOutcome outcome;
  outcome.csv_path = csv_path.string();
  outcome.completed = completed;
  outcome.skipped = skipped;
  outcome.failed = failed;
  return outcome;
}

void write_reports(const std::string& csv_path, const std::string& out_dir) {
  const std::vector<CsvRow> rows = read_csv(csv_path);
  fs::create_directories(out_dir);

  {  // Rate share per lambda.
    std::map<double, std::vector<const CsvRow*>> by_lambda;
    for (const auto& row : rows)
      if (row.status == "ok") by_lambda[row.record.lambda].push_back(&row);
    std::ofstream out(fs::path(out_dir) / "rate_share.csv");
    out << "lambda,n,mean_bpp,share_z,share_tau,share_theta,share_psi,share_w,share_header\n";
    out.precision(6);
    for (const auto& [lambda, group] : by_lambda) {
      double total = 0, z = 0, tau = 0, theta = 0, psi = 0, wsec = 0, header = 0;
      for (const auto* row : group) {
        total += row->record.bpp_total;
        z += row->record.bpp_z;
        tau += row->record.bpp_tau;
        theta += row->record.bpp_theta;
        psi += row->record.bpp_psi;
        wsec += row->record.bpp_w;
        header += row->record.bpp_header;
      }
      const double n = static_cast<double>(group.size());
      out << lambda << ',' << group.size() << ',' << total / n << ',' << z / total << ','
          << tau / total << ',' << theta / total << ',' << psi / total << ',' << wsec / total
          << ',' << header / total << "\n";
    }
  }

  {  // BD-rate vs decoder complexity across mask ratios.
    std::map<double, std::vector<const CsvRow*>> by_ratio;
    for (const auto& row : rows)
      if (row.status == "ok") by_ratio[row.record.mask_ratio].push_back(&row);
    auto curve_of = [](const std::vector<const CsvRow*>& group) {
      std::map<double, std::pair<double, double>> by_lambda;  // lambda -> (sum bpp, sum psnr)
      std::map<double, int> counts;
      for (const auto* row : group) {
        by_lambda[row->record.lambda].first += row->record.bpp_total;
        by_lambda[row->record.lambda].second += row->record.psnr_db;
        counts[row->record.lambda] += 1;
      }
      std::vector<RatePoint> curve;
      for (const auto& [lambda, sums] : by_lambda)
        curve.push_back({sums.first / counts[lambda], sums.second / counts[lambda]});
      return curve;
    };

    std::ofstream out(fs::path(out_dir) / "bd_vs_macs.csv");
    out << "mask_ratio,n,mean_macs_lower,mean_macs_upper,bd_rate_vs_first\n";
    out.precision(6);
    if (!by_ratio.empty()) {
      const auto reference = curve_of(by_ratio.begin()->second);
      for (const auto& [ratio, group] : by_ratio) {
        double ml = 0, mu = 0;
        for (const auto* row : group) {
          ml += row->record.macs_lower;
          mu += row->record.macs_upper;
        }
        const double n = static_cast<double>(group.size());
        std::string bd = "nan";
        try {
          std::ostringstream os;
          os.precision(6);
          os << bd_rate(reference, curve_of(group));
          bd = os.str();
        } catch (const std::exception&) {
          // Fewer than four lambda points or non-overlapping curves.
        }
        out << ratio << ',' << group.size() << ',' << ml / n << ',' << mu / n << ',' << bd
            << "\n";
      }
    }
  }
}

}  // namespace lottery
