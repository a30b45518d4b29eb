// Push on the tip of the distal segment and watch the observer pick it up.
// Prints the true and estimated tip force every 0.1 s, with the detection
// flag from the state-uncertainty thresholds.

#include <cstdio>

#include "cgmo/contact_estimation.hpp"
#include "cgmo/params.hpp"
#include "cgmo/scenarios.hpp"
#include "cgmo/simulator.hpp"

int main() {
  using namespace cgmo;
  using namespace cgmo::scenarios;

  const SegmentModel model(distal_segment());
  const Trajectory tr = simulate_tip_ramp(model, 2.0, 1.0, Eigen::Vector2d(4.0, -6.0), Vec2(0.2, 0.0), {});

  EstimatorSettings set;
  set.gmo.gains = Vec6::Constant(10.0);
  set.dx_bound.head<6>().setConstant(0.01);   // modal coefficient uncertainty, 1/m
  set.dx_bound.tail<6>().setConstant(0.05);   // rate uncertainty, 1/(m s)
  const EstimationSeries s = run_estimators(model, exact_inputs(tr), set, tr.w_true);

  std::printf("   t     true fx   fy      GMO fx   fy      JFD fx   fy    contact\n");
  for (std::size_t k = 0; k < s.t.size(); k += 10)
    std::printf("%5.2f  %7.3f %7.3f   %7.3f %7.3f   %7.3f %7.3f    %s\n", s.t[k], s.w_true[k].f.x(),
                s.w_true[k].f.y(), s.w_gmo[k].f.x(), s.w_gmo[k].f.y(), s.w_jfd[k].f.x(), s.w_jfd[k].f.y(),
                s.detected[k].any ? "yes" : "no");
  const ForceErrors g = force_errors(s.w_true, s.w_gmo);
  std::printf("GMO force RMSE: %.3f N (x), %.3f N (y)\n", g.rmse_x, g.rmse_y);
  return 0;
}
