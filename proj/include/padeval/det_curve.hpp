#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pad {

struct DetPoint {
  double threshold;
  double apcer;
  double bpcer;
  bool operator==(const DetPoint&) const = default;
};

/// APCER/BPCER staircase over ascending thresholds.
struct DetCurve {
  std::vector<DetPoint> points;
  bool operator==(const DetCurve&) const = default;
};

/// One point per candidate threshold (see candidate_thresholds); consecutive
/// points with identical (apcer, bpcer) collapse onto the lowest threshold.
DetCurve sweep_det(std::span<const double> bona_fide, std::span<const double> attacks);

enum class DetScale { raw, probit };

inline constexpr double kProbitClamp = 1e-6;

/// Normal-deviate coordinate of a rate, clamped to [1e-6, 1 - 1e-6] first.
double probit(double rate);

/// CSV text: `threshold,apcer,bpcer` or `threshold,probit_apcer,probit_bpcer`,
/// six decimal places, '\n' line endings.
std::string export_det(const DetCurve& curve, DetScale scale);

/// Parses a raw-scale export. Values come back at the six-decimal precision
/// they were written with.
DetCurve parse_det_csv(std::string_view text);

}  // namespace pad
