#pragma once

#include <string>
#include <vector>

#include "lottery/encoder.hpp"
#include "lottery/grid.hpp"

namespace lottery {

// PSNR over all RGB channels in [0,1] units; identical inputs report the
// 99 dB cap so CSV values stay finite.
double psnr(const PixelGrid& a, const PixelGrid& b);

struct RatePoint {
  double bpp = 0.0;
  double psnr = 0.0;
};

// Classic Bjøntegaard delta rate: cubic fit of log10(rate) against PSNR,
// integrated over the overlapping PSNR interval. Negative means curve_b
// spends less rate than curve_a at equal quality. Requires >= 4 points per
// curve with distinct PSNRs and overlapping ranges.
double bd_rate(std::vector<RatePoint> curve_a, std::vector<RatePoint> curve_b);

// Closed CSV schema shared by the sweep writer, bdrate and report readers.
extern const char* const kCsvHeader;
std::string to_csv_row(const std::string& image_name, const RDRecord& r,
                       const std::string& status);
std::string to_json(const std::string& image_name, const RDRecord& r, const std::string& status);

struct CsvRow {
  std::string image;
  RDRecord record;
  std::string status;
};

std::vector<CsvRow> read_csv(const std::string& path);

}  // namespace lottery
