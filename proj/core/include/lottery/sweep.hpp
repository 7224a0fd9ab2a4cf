#pragma once

#include <string>
#include <vector>

#include "lottery/encoder.hpp"

namespace lottery {

// Cartesian sweep over images x lambdas x mask ratios x architectures x
// seeds. Jobs are resumable: a job whose record file already exists in the
// output directory is skipped.
struct ArchChoice {
  int modnet_width = 32;
  int arm_context = 16;
  int extra_convs = 0;
};

struct SweepManifest {
  std::vector<std::string> images;
  std::vector<double> lambdas;
  std::vector<double> mask_ratios;
  std::vector<ArchChoice> archs;
  std::vector<std::uint64_t> seeds;
  long stage1_steps = 2000;
  long stage2_steps = 400;
  long eval_interval = 100;
  int latent_levels = 7;
};

SweepManifest load_manifest(const std::string& path);

struct SweepOutcome {
  std::string csv_path;
  int completed = 0;
  int skipped = 0;
  int failed = 0;
};

// Runs every job (in a process-local thread pool of `jobs` workers), writes
// one JSON record and one .ltry stream per job plus an aggregate CSV.
// Per-job failures are recorded with status=failed and do not stop the
// sweep.
SweepOutcome run_sweep(const SweepManifest& manifest, const std::string& out_dir, int jobs);

// Aggregate reports consumed from the sweep CSV.
// rate_share.csv: mean share of each bitstream component per lambda.
// bd_vs_macs.csv: BD-rate of each mask-ratio group against the smallest
// mask ratio, next to its mean decoder complexity bounds.
void write_reports(const std::string& csv_path, const std::string& out_dir);

}  // namespace lottery
