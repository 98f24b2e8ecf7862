#pragma once

#include <string>
#include <vector>

#include "dewarp/dataset.hpp"
#include "dewarp/loss.hpp"
#include "dewarp/metrics.hpp"
#include "dewarp/model.hpp"

namespace dewarp {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 4;
  double learning_rate = 1e-4;
  enum class Optimizer { adam, sgd };
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 1;
  ModelConfig model;
  ObjectiveConfig objective;
  int checkpoint_every = 0;  // steps between checkpoints; 0 = final only
  std::string log_path;      // empty -> <out_dir>/train_log.csv
  std::string data_path;
  std::string out_dir = ".";
  int max_steps = 0;            // 0 = bounded by epochs only
  double target_grid_mse = 0.0; // > 0: stop once grid loss drops below

  void validate() const;
  KeyValueConfig to_config() const;
  static TrainConfig from_config(const KeyValueConfig& kv);
};

struct TrainLogRecord {
  int step = 0;
  int epoch = 0;
  double grid_loss = 0.0;
  double edge_loss = 0.0;
  double combined_loss = 0.0;
  double wall_time = 0.0;
};

struct TrainResult {
  std::string final_checkpoint;
  std::vector<TrainLogRecord> log;
  double final_grid_loss = -1.0;
  int steps_run = 0;
};

// deterministic 90/10 split by index
inline bool is_validation_index(int index) { return index % 10 == 9; }

// Adam with bias correction; state arrays parallel the parameter list.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const std::vector<NamedParam<float>>& params, float lr,
                         float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);
  void step(std::vector<NamedParam<float>>& params);

 private:
  std::vector<std::vector<float>> m_, v_;
  float lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

TrainResult train(const TrainConfig& cfg);

// Per-sample pyramid SSIM / MS-SSIM / LD of the model's rectifications
// against the flat ground truths, plus the identity-grid baseline (the
// unrectified input scored the same way). original_resolution upsamples the
// predicted grid to each flat image's native size before sampling.
MetricsReport evaluate_model(const GbsuNet<float>& model, const DatasetReader& data,
                             bool original_resolution, const std::vector<int>& indices = {});

struct AblationPreset {
  std::string name;
  ModelConfig config;
};

// full / no_gate / shared_decoders / single_decoder, differing only in the
// ablation switches
std::vector<AblationPreset> ablation_presets(const ModelConfig& base);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRecord>& log);

}  // namespace dewarp
