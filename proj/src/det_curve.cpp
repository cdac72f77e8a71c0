#include "padeval/det_curve.hpp"

#include <algorithm>

#include "csv.hpp"
#include "padeval/error.hpp"
#include "padeval/normal.hpp"
#include "padeval/score_metrics.hpp"

namespace pad {

DetCurve sweep_det(std::span<const double> bona_fide, std::span<const double> attacks) {
  if (bona_fide.empty()) throw Error(ErrorCode::empty_bona_fide, "sweep_det: no bona fide scores");
  if (attacks.empty()) throw Error(ErrorCode::empty_pais, "sweep_det: no attack scores");

  std::vector<double> bona(bona_fide.begin(), bona_fide.end());
  std::vector<double> att(attacks.begin(), attacks.end());
  std::sort(bona.begin(), bona.end());
  std::sort(att.begin(), att.end());
  const double n_bf = static_cast<double>(bona.size());
  const double n_att = static_cast<double>(att.size());

  DetCurve curve;
  for (double t : candidate_thresholds(bona_fide, attacks)) {
    const auto missed = std::lower_bound(att.begin(), att.end(), t) - att.begin();
    const auto rejected = bona.end() - std::lower_bound(bona.begin(), bona.end(), t);
    const DetPoint p{t, static_cast<double>(missed) / n_att, static_cast<double>(rejected) / n_bf};
    if (!curve.points.empty() && curve.points.back().apcer == p.apcer &&
        curve.points.back().bpcer == p.bpcer) {
      continue;
    }
    curve.points.push_back(p);
  }
  return curve;
}

double probit(double rate) {
  return normal_quantile(std::clamp(rate, kProbitClamp, 1.0 - kProbitClamp));
}

std::string export_det(const DetCurve& curve, DetScale scale) {
  std::string out = scale == DetScale::raw ? "threshold,apcer,bpcer\n"
                                           : "threshold,probit_apcer,probit_bpcer\n";
  for (const auto& p : curve.points) {
    const double a = scale == DetScale::raw ? p.apcer : probit(p.apcer);
    const double b = scale == DetScale::raw ? p.bpcer : probit(p.bpcer);
    out += csv::fixed(p.threshold, 6) + ',' + csv::fixed(a, 6) + ',' + csv::fixed(b, 6) + '\n';
  }
  return out;
}

DetCurve parse_det_csv(std::string_view text) {
  csv::LineReader reader(text);
  csv::expect_header(reader, "threshold,apcer,bpcer");
  DetCurve curve;
  std::string_view line;
  while (reader.next(line)) {
    const auto n = reader.line_number();
    const auto f = csv::fields(line, 3, n);
    DetPoint p{csv::parse_double(f[0], n, "threshold"), csv::parse_double(f[1], n, "apcer"),
               csv::parse_double(f[2], n, "bpcer")};
    if (p.apcer < 0.0 || p.apcer > 1.0 || p.bpcer < 0.0 || p.bpcer > 1.0) {
      throw parse_error_at_line(n, "rate outside [0,1]");
    }
    if (!curve.points.empty()) {
      const auto& prev = curve.points.back();
      // Six-decimal rounding may merge neighbouring thresholds.
      if (p.threshold < prev.threshold) throw parse_error_at_line(n, "thresholds must not decrease");
      if (p.apcer < prev.apcer || p.bpcer > prev.bpcer) {
        throw parse_error_at_line(n, "curve is not a monotone staircase");
      }
    }
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace pad
