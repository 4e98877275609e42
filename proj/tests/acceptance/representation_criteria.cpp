#include <doctest.h>

#include <sstream>

#include "helpers.hpp"

using namespace mummi;
using acceptance::criterion_line;

TEST_SUITE_BEGIN("representation");

TEST_CASE("criterion 6: contrastive training aligns and calibrates the experts") {
  const auto mummi_run = acceptance::train_toy2d("mummi", 1, "c6_mummi", /*representation_only=*/true);
  const auto elbo_run = acceptance::train_toy2d("elbo", 1, "c6_elbo", /*representation_only=*/true);
  REQUIRE(!mummi_run.result.diverged);
  REQUIRE(!elbo_run.result.diverged);

  const auto mummi_agent = agent::load_agent(mummi_run.checkpoint);
  const auto elbo_agent = agent::load_agent(elbo_run.checkpoint);
  const auto mummi_rep =
      acceptance::representation_report(*mummi_agent.model, mummi_agent.env_cfg, 99);
  const auto elbo_rep = acceptance::representation_report(*elbo_agent.model, elbo_agent.env_cfg, 99);

  const bool probes_ok = mummi_rep.probe_r2_position >= 0.8 && mummi_rep.probe_r2_camera >= 0.8;
  const bool distance_ok = mummi_rep.cross_modal_distance < 0.5 * elbo_rep.cross_modal_distance;
  const bool calibration_ok = mummi_rep.calibration_ratio < elbo_rep.calibration_ratio;
  const bool budget_ok = mummi_run.minutes < 30.0 && elbo_run.minutes < 30.0;

  std::ostringstream a;
  a << "probe R2 position " << mummi_rep.probe_r2_position << ", camera "
    << mummi_rep.probe_r2_camera << " (elbo baseline: " << elbo_rep.probe_r2_position << ", "
    << elbo_rep.probe_r2_camera << ")";
  criterion_line("6a", probes_ok, a.str());

  std::ostringstream b;
  b << "cross-modal distance " << mummi_rep.cross_modal_distance << " vs elbo "
    << elbo_rep.cross_modal_distance << " (ratio "
    << mummi_rep.cross_modal_distance / elbo_rep.cross_modal_distance << ", need < 0.5)";
  criterion_line("6b", distance_ok, b.str());

  std::ostringstream c;
  c << "calibration ratio std(camera)/std(position): mummi " << mummi_rep.calibration_ratio
    << ", elbo " << elbo_rep.calibration_ratio;
  criterion_line("6c", calibration_ok, c.str());

  std::ostringstream t;
  t << "training time mummi " << mummi_run.minutes << " min, elbo " << elbo_run.minutes
    << " min (budget 30 each)";
  criterion_line("6-runtime", budget_ok, t.str());

  CHECK(mummi_rep.probe_r2_position >= 0.8);
  CHECK(mummi_rep.probe_r2_camera >= 0.8);
  CHECK(distance_ok);
  CHECK(calibration_ok);
  CHECK(budget_ok);
}

TEST_SUITE_END();
