#pragma once

#include "mummi/cli/run_config.hpp"

namespace mummi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;   // usage / config error
inline constexpr int kExitRuntime = 2;  // divergence or failed numeric check

struct TrainCmdOptions {
  std::string config_path;  // empty = built-in defaults
  Overrides overrides;
  bool resume = false;
};
int cmd_train(const TrainCmdOptions& opts);

struct EvalCmdOptions {
  std::string checkpoint;
  double missing_rate = 0.0;
  diff::Index episodes = 10;
  std::uint64_t seed = 0;
  bool use_cem = false;
  std::string report_path;  // optional JSON report
};
int cmd_eval(const EvalCmdOptions& opts);

struct VizCmdOptions {
  std::string checkpoint;
  diff::Index samples = 500;
  std::string out_dir = "viz";
  std::uint64_t seed = 0;
};
int cmd_viz_latent(const VizCmdOptions& opts);

struct GradcheckCmdOptions {
  diff::Index h_dim = 8;
  diff::Index c_dim = 4;
  diff::Index f_dim = 6;
  double eps = 1e-5;
  double threshold = 1e-4;
};
int cmd_gradcheck(const GradcheckCmdOptions& opts);

struct GenDataCmdOptions {
  std::string env_name = "toy2d";
  std::string config_path;  // optional run config supplying env details
  diff::Index episodes = 10;
  double missing_rate = 0.375;
  std::string out_dir = "data";
  std::uint64_t seed = 0;
};
int cmd_gen_data(const GenDataCmdOptions& opts);

/// Random batch for gradient checking: every modality present, observations
/// and actions uniform in [-1, 1].
mssm::Batch make_synthetic_batch(const mssm::MssmConfig& cfg, diff::Index batch_size,
                                 diff::Index seq_len, std::uint64_t seed);

/// The tiny two-modality configuration used by the gradcheck command.
mssm::MssmConfig gradcheck_model_config(diff::Index h_dim, diff::Index c_dim, diff::Index f_dim);

}  // namespace mummi::cli
