#include "lottery/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace lottery {

double psnr(const PixelGrid& a, const PixelGrid& b) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width)
    throw std::invalid_argument("psnr: shape mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.values.size());
  if (mse == 0.0) return 99.0;
  return -10.0 * std::log10(mse);
}

namespace {

// Least-squares cubic fit of y(x), solved by Gaussian elimination of the
// normal equations. x is pre-shifted by the caller for conditioning.
std::array<double, 4> fit_cubic(const std::vector<double>& x, const std::vector<double>& y) {
  constexpr int kTerms = 4;
  double a[kTerms][kTerms] = {};
  double rhs[kTerms] = {};
  for (std::size_t s = 0; s < x.size(); ++s) {
    double powers[2 * kTerms - 1];
    powers[0] = 1.0;
    for (int p = 1; p < 2 * kTerms - 1; ++p) powers[p] = powers[p - 1] * x[s];
    for (int i = 0; i < kTerms; ++i) {
      for (int j = 0; j < kTerms; ++j) a[i][j] += powers[i + j];
      rhs[i] += powers[i] * y[s];
    }
  }
  for (int col = 0; col < kTerms; ++col) {
    int pivot = col;
    for (int r = col + 1; r < kTerms; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    if (a[col][col] == 0.0) throw std::runtime_error("bd_rate: singular fit");
    for (int r = col + 1; r < kTerms; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < kTerms; ++c) a[r][c] -= f * a[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::array<double, 4> coeff{};
  for (int r = kTerms - 1; r >= 0; --r) {
    double acc = rhs[r];
    for (int c = r + 1; c < kTerms; ++c) acc -= a[r][c] * coeff[c];
    coeff[r] = acc / a[r][r];
  }
  return coeff;
}

double integrate_cubic(const std::array<double, 4>& c, double lo, double hi) {
  auto anti = [&](double x) {
    return c[0] * x + c[1] * x * x / 2.0 + c[2] * x * x * x / 3.0 + c[3] * x * x * x * x / 4.0;
  };
  return anti(hi) - anti(lo);
}

void validate_curve(const std::vector<RatePoint>& curve) {
  if (curve.size() < 4) throw std::invalid_argument("bd_rate: need at least 4 points per curve");
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (!(curve[i].psnr > curve[i - 1].psnr))
      throw std::invalid_argument("bd_rate: PSNR values must be strictly increasing");
  for (const auto& p : curve)
    if (!(p.bpp > 0.0)) throw std::invalid_argument("bd_rate: rates must be positive");
}

}  // namespace

double bd_rate(std::vector<RatePoint> curve_a, std::vector<RatePoint> curve_b) {
  auto by_psnr = [](const RatePoint& p, const RatePoint& q) { return p.psnr < q.psnr; };
  std::sort(curve_a.begin(), curve_a.end(), by_psnr);
  std::sort(curve_b.begin(), curve_b.end(), by_psnr);
  validate_curve(curve_a);
  validate_curve(curve_b);

  const double lo = std::max(curve_a.front().psnr, curve_b.front().psnr);
  const double hi = std::min(curve_a.back().psnr, curve_b.back().psnr);
  if (!(hi > lo)) throw std::invalid_argument("bd_rate: PSNR ranges do not overlap");

  // Shift the abscissa by a common center for conditioning; the average of
  // the fitted-curve difference over [lo, hi] is shift-invariant.
  double center = 0.0;
  for (const auto& p : curve_a) center += p.psnr;
  for (const auto& p : curve_b) center += p.psnr;
  center /= static_cast<double>(curve_a.size() + curve_b.size());

  auto fit = [&](const std::vector<RatePoint>& curve) {
    std::vector<double> x, y;
    for (const auto& p : curve) {
      x.push_back(p.psnr - center);
      y.push_back(std::log10(p.bpp));
    }
    return fit_cubic(x, y);
  };
  const auto ca = fit(curve_a);
  const auto cb = fit(curve_b);
  const double avg_diff =
      (integrate_cubic(cb, lo - center, hi - center) - integrate_cubic(ca, lo - center, hi - center)) /
      (hi - lo);
  return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

const char* const kCsvHeader =
    "image,seed,mode,lambda,mask_ratio,d,c,extra_convs,levels,steps1,steps2,height,width,"
    "bpp_total,bpp_z,bpp_tau,bpp_theta,bpp_psi,bpp_w,bpp_header,psnr_db,psnr_unquantized_db,"
    "mse,rd_cost,macs_lower,macs_upper,model_bits_total,header_bits,wall_seconds,status";

namespace {

const char* mode_name(CodecMode mode) {
  switch (mode) {
    case CodecMode::kLottery: return "lottery";
    case CodecMode::kModNetOnly: return "modnet_only";
    case CodecMode::kDenseTrained: return "dense_trained";
  }
  return "unknown";
}

CodecMode mode_from_name(const std::string& name) {
  if (name == "lottery") return CodecMode::kLottery;
  if (name == "modnet_only") return CodecMode::kModNetOnly;
  if (name == "dense_trained") return CodecMode::kDenseTrained;
  throw std::invalid_argument("unknown codec mode: " + name);
}

}  // namespace

std::string to_csv_row(const std::string& image_name, const RDRecord& r,
                       const std::string& status) {
  std::ostringstream os;
  os.precision(12);
  os << image_name << ',' << r.seed << ',' << mode_name(r.mode) << ',' << r.lambda << ','
     << r.mask_ratio << ',' << r.modnet_width << ',' << r.arm_context << ',' << r.extra_convs
     << ',' << r.latent_levels << ',' << r.steps1 << ',' << r.steps2 << ',' << r.height << ',' << r.width
     << ',' << r.bpp_total << ',' << r.bpp_z << ',' << r.bpp_tau << ',' << r.bpp_theta << ','
     << r.bpp_psi << ',' << r.bpp_w << ',' << r.bpp_header << ',' << r.psnr_db << ','
     << r.psnr_unquantized_db << ',' << r.mse << ',' << r.rd_cost << ',' << r.macs_lower << ','
     << r.macs_upper << ',' << r.model_bits_total << ',' << r.header_bits << ','
     << r.wall_seconds << ',' << status;
  return os.str();
}

std::string to_json(const std::string& image_name, const RDRecord& r, const std::string& status) {
  nlohmann::json j;
  j["image"] = image_name;
  j["seed"] = r.seed;
  j["mode"] = mode_name(r.mode);
  j["lambda"] = r.lambda;
  j["mask_ratio"] = r.mask_ratio;
  j["d"] = r.modnet_width;
  j["c"] = r.arm_context;
  j["extra_convs"] = r.extra_convs;
  j["levels"] = r.latent_levels;
  j["steps1"] = r.steps1;
  j["steps2"] = r.steps2;
  j["height"] = r.height;
  j["width"] = r.width;
  j["bpp"] = {{"total", r.bpp_total}, {"z", r.bpp_z},         {"tau", r.bpp_tau},
              {"theta", r.bpp_theta}, {"psi", r.bpp_psi},     {"w", r.bpp_w},
              {"header", r.bpp_header}};
  j["psnr_db"] = r.psnr_db;
  j["psnr_unquantized_db"] = r.psnr_unquantized_db;
  j["mse"] = r.mse;
  j["rd_cost"] = r.rd_cost;
  j["macs_lower"] = r.macs_lower;
  j["macs_upper"] = r.macs_upper;
  j["model_bits_total"] = r.model_bits_total;
  j["header_bits"] = r.header_bits;
  j["wall_seconds"] = r.wall_seconds;
  j["status"] = status;
  return j.dump(2);
}

std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
  if (line != kCsvHeader) throw std::runtime_error("CSV header does not match the schema: " + path);

  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 30) throw std::runtime_error("malformed CSV row: " + line);
    CsvRow row;
    row.image = f[0];
    RDRecord& r = row.record;
    r.seed = std::stoull(f[1]);
    r.mode = mode_from_name(f[2]);
    r.lambda = std::stod(f[3]);
    r.mask_ratio = std::stod(f[4]);
    r.modnet_width = std::stoi(f[5]);
    r.arm_context = std::stoi(f[6]);
    r.extra_convs = std::stoi(f[7]);
    r.latent_levels = std::stoi(f[8]);
    r.steps1 = std::stol(f[9]);
    r.steps2 = std::stol(f[10]);
    r.height = std::stoi(f[11]);
    r.width = std::stoi(f[12]);
    r.bpp_total = std::stod(f[13]);
    r.bpp_z = std::stod(f[14]);
    r.bpp_tau = std::stod(f[15]);
    r.bpp_theta = std::stod(f[16]);
    r.bpp_psi = std::stod(f[17]);
    r.bpp_w = std::stod(f[18]);
    r.bpp_header = std::stod(f[19]);
    r.psnr_db = std::stod(f[20]);
    r.psnr_unquantized_db = std::stod(f[21]);
    r.mse = std::stod(f[22]);
    r.rd_cost = std::stod(f[23]);
    r.macs_lower = std::stod(f[24]);
    r.macs_upper = std::stod(f[25]);
    r.model_bits_total = std::stod(f[26]);
    r.header_bits = std::stod(f[27]);
    r.wall_seconds = std::stod(f[28]);
    row.status = f[29];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace lottery
