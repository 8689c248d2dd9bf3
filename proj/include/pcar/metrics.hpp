#pragma once

#include <string>
#include <vector>

#include "pcar/tensor.hpp"

namespace pcar {

// ---- color space -----------------------------------------------------------
// BT.709 full-range conversion with chroma offset 128:
//   Y =  0.212600 R + 0.715200 G + 0.072200 B
//   U = -0.114572 R - 0.385428 G + 0.500000 B + 128
//   V =  0.500000 R - 0.454153 G - 0.045847 B + 128
// rgb_to_yuv validates the [0,255] input range and returns floating-point
// YUV; yuv_to_rgb inverts, rounds to integers, and clamps to [0,255].

Tensor2<float> rgb_to_yuv(const Tensor2<float>& rgb);
Tensor2<float> yuv_to_rgb(const Tensor2<float>& yuv);

// ---- PSNR ------------------------------------------------------------------

// 10 log10(peak^2 / MSE) over all entries; identical inputs return the
// 100 dB cap.
template <typename Real>
double psnr(const Tensor2<Real>& a, const Tensor2<Real>& b,
            double peak = 255.0);

// Compound PSNR weighted 6:1:1 across Y, U, V.
double yuv_psnr(double psnr_y, double psnr_u, double psnr_v);

// ---- BD-rate ----------------------------------------------------------------

struct RatePoint {
  double rate = 0.0;  // bits per point
  double psnr = 0.0;  // dB
};

struct RdCurve {
  std::vector<RatePoint> points;

  // Throws unless there are >= 4 points with strictly increasing rate,
  // positive rates, and finite PSNR.
  void validate() const;
};

// Average bitrate difference of `test` against `anchor` at equal quality, in
// percent (negative = test saves bits). Fits log10(rate) as a cubic in PSNR
// for each curve by least squares and integrates the difference over the
// curves' common PSNR interval. Throws when the PSNR ranges do not overlap.
double bd_rate(const RdCurve& anchor, const RdCurve& test);

// CSV form used by the command line tool: one "rate,psnr" pair per line;
// blank lines and lines starting with '#' are ignored.
RdCurve parse_rd_curve_csv(const std::string& text);
std::string format_rd_curve_csv(const RdCurve& curve);

}  // namespace pcar
