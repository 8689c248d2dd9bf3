#include "pcar/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace pcar {

namespace {

constexpr double kKr = 0.2126;
constexpr double kKg = 0.7152;
constexpr double kKb = 0.0722;
constexpr double kChromaOffset = 128.0;

}  // namespace

Tensor2<float> rgb_to_yuv(const Tensor2<float>& rgb) {
  if (rgb.cols() != 3)
    throw std::invalid_argument("rgb_to_yuv: expected n x 3, got " +
                                shape_str(rgb.rows(), rgb.cols()));
  const double u_r = -kKr / (2.0 * (1.0 - kKb));
  const double u_g = -kKg / (2.0 * (1.0 - kKb));
  const double v_g = -kKg / (2.0 * (1.0 - kKr));
  const double v_b = -kKb / (2.0 * (1.0 - kKr));
  Tensor2<float> yuv(rgb.rows(), 3);
  for (Index i = 0; i < rgb.rows(); ++i) {
    const double r = rgb(i, 0), g = rgb(i, 1), b = rgb(i, 2);
    if (!(r >= 0.0 && r <= 255.0 && g >= 0.0 && g <= 255.0 && b >= 0.0 &&
          b <= 255.0))
      throw std::invalid_argument("rgb_to_yuv: value outside [0,255] at row " +
                                  std::to_string(i));
    yuv(i, 0) = static_cast<float>(kKr * r + kKg * g + kKb * b);
    yuv(i, 1) = static_cast<float>(u_r * r + u_g * g + 0.5 * b + kChromaOffset);
    yuv(i, 2) = static_cast<float>(0.5 * r + v_g * g + v_b * b + kChromaOffset);
  }
  return yuv;
}

Tensor2<float> yuv_to_rgb(const Tensor2<float>& yuv) {
  if (yuv.cols() != 3)
    throw std::invalid_argument("yuv_to_rgb: expected n x 3, got " +
                                shape_str(yuv.rows(), yuv.cols()));
  const double r_v = 2.0 * (1.0 - kKr);
  const double b_u = 2.0 * (1.0 - kKb);
  const double g_u = kKb * b_u / kKg;
  const double g_v = kKr * r_v / kKg;
  Tensor2<float> rgb(yuv.rows(), 3);
  auto to_byte = [](double v) {
    const double r = std::round(v);
    return static_cast<float>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
  };
  for (Index i = 0; i < yuv.rows(); ++i) {
    const double y = yuv(i, 0);
    const double u = yuv(i, 1) - kChromaOffset;
    const double v = yuv(i, 2) - kChromaOffset;
    rgb(i, 0) = to_byte(y + r_v * v);
    rgb(i, 1) = to_byte(y - g_u * u - g_v * v);
    rgb(i, 2) = to_byte(y + b_u * u);
  }
  return rgb;
}

template <typename Real>
double psnr(const Tensor2<Real>& a, const Tensor2<Real>& b, double peak) {
  if (!a.same_shape(b))
    throw std::invalid_argument("psnr: shapes differ, " +
                                shape_str(a.rows(), a.cols()) + " vs " +
                                shape_str(b.rows(), b.cols()));
  if (a.size() == 0) throw std::invalid_argument("psnr: empty input");
  double sq = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double d =
        static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    sq += d * d;
  }
  const double mse = sq / static_cast<double>(a.size());
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

template double psnr(const Tensor2<float>&, const Tensor2<float>&, double);
template double psnr(const Tensor2<double>&, const Tensor2<double>&, double);

double yuv_psnr(double psnr_y, double psnr_u, double psnr_v) {
  return (6.0 * psnr_y + psnr_u + psnr_v) / 8.0;
}

void RdCurve::validate() const {
  if (points.size() < 4)
    throw std::invalid_argument("rd curve: need at least 4 points, have " +
                                std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].rate > 0.0))
      throw std::invalid_argument("rd curve: rate must be positive");
    if (!std::isfinite(points[i].psnr))
      throw std::invalid_argument("rd curve: psnr must be finite");
    if (i > 0 && !(points[i].rate > points[i - 1].rate))
      throw std::invalid_argument("rd curve: rates must strictly increase");
  }
}

namespace {

struct LogRateFit {
  double shift = 0.0;   // PSNR mean, subtracted before fitting
  double coef[4] = {};  // log10(rate) ~ sum_k coef[k] * (psnr - shift)^k
};

LogRateFit fit_log_rate(const RdCurve& curve) {
  const auto& pts = curve.points;
  const int m = static_cast<int>(pts.size());
  LogRateFit fit;
  for (const auto& p : pts) fit.shift += p.psnr;
  fit.shift /= m;

  Eigen::MatrixXd vander(m, 4);
  Eigen::VectorXd logr(m);
  for (int i = 0; i < m; ++i) {
    const double x = pts[static_cast<std::size_t>(i)].psnr - fit.shift;
    double pow_x = 1.0;
    for (int k = 0; k < 4; ++k) {
      vander(i, k) = pow_x;
      pow_x *= x;
    }
    logr(i) = std::log10(pts[static_cast<std::size_t>(i)].rate);
  }
  const Eigen::VectorXd c = vander.colPivHouseholderQr().solve(logr);
  for (int k = 0; k < 4; ++k) fit.coef[k] = c(k);
  return fit;
}

// Definite integral of the fitted cubic over [lo, hi] in the PSNR axis.
double integrate_fit(const LogRateFit& fit, double lo, double hi) {
  auto antiderivative = [&](double psnr_value) {
    const double x = psnr_value - fit.shift;
    double acc = 0.0;
    double pow_x = x;
    for (int k = 0; k < 4; ++k) {
      acc += fit.coef[k] * pow_x / static_cast<double>(k + 1);
      pow_x *= x;
    }
    return acc;
  };
  return antiderivative(hi) - antiderivative(lo);
}

}  // namespace

double bd_rate(const RdCurve& anchor, const RdCurve& test) {
  anchor.validate();
  test.validate();

  auto psnr_range = [](const RdCurve& c) {
    double lo = c.points.front().psnr, hi = lo;
    for (const auto& p : c.points) {
      lo = std::min(lo, p.psnr);
      hi = std::max(hi, p.psnr);
    }
    return std::pair<double, double>{lo, hi};
  };
  const auto [a_lo, a_hi] = psnr_range(anchor);
  const auto [t_lo, t_hi] = psnr_range(test);
  const double lo = std::max(a_lo, t_lo);
  const double hi = std::min(a_hi, t_hi);
  if (!(lo < hi))
    throw std::invalid_argument("bd_rate: PSNR ranges do not overlap");

  const LogRateFit fa = fit_log_rate(anchor);
  const LogRateFit ft = fit_log_rate(test);
  const double delta =
      (integrate_fit(ft, lo, hi) - integrate_fit(fa, lo, hi)) / (hi - lo);
  return (std::pow(10.0, delta) - 1.0) * 100.0;
}

RdCurve parse_rd_curve_csv(const std::string& text) {
  RdCurve curve;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const std::size_t comma = line.find(',', begin);
    if (comma == std::string::npos)
      throw std::runtime_error("rd curve csv: line " +
                               std::to_string(line_no) +
                               " is not 'rate,psnr'");
    try {
      RatePoint p;
      p.rate = std::stod(line.substr(begin, comma - begin));
      p.psnr = std::stod(line.substr(comma + 1));
      curve.points.push_back(p);
    } catch (const std::exception&) {
      throw std::runtime_error("rd curve csv: line " +
                               std::to_string(line_no) +
                               " is not 'rate,psnr'");
    }
  }
  return curve;
}

std::string format_rd_curve_csv(const RdCurve& curve) {
  std::ostringstream out;
  out << std::setprecision(10);
  for (const auto& p : curve.points) out << p.rate << "," << p.psnr << "\n";
  return out.str();
}

}  // namespace pcar
