#include "dewarp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "dewarp/convert.hpp"
#include "dewarp/kernels/api.hpp"
#include "dewarp/parallel.hpp"

namespace fs = std::filesystem;

namespace dewarp {

void TrainConfig::validate() const {
  if (epochs < 0) throw UsageError("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw UsageError("TrainConfig: batch_size must be >= 1");
  if (learning_rate <= 0.0) throw UsageError("TrainConfig: learning_rate must be > 0");
  model.validate();
  objective.validate();
}

KeyValueConfig TrainConfig::to_config() const {
  KeyValueConfig kv = model.to_config();
  kv.merge(objective.to_config());
  kv.set_int("epochs", epochs);
  kv.set_int("batch_size", batch_size);
  kv.set_double("learning_rate", learning_rate);
  kv.set("optimizer", optimizer == Optimizer::adam ? "adam" : "sgd");
  kv.set("seed", std::to_string(seed));
  kv.set_int("checkpoint_every", checkpoint_every);
  kv.set("log_path", log_path);
  kv.set("data_path", data_path);
  kv.set("out_dir", out_dir);
  kv.set_int("max_steps", max_steps);
  kv.set_double("target_grid_mse", target_grid_mse);
  return kv;
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  TrainConfig cfg;
  cfg.model = ModelConfig::from_config(kv);
  cfg.objective = ObjectiveConfig::from_config(kv);
  cfg.epochs = static_cast<int>(kv.get_int("epochs", cfg.epochs));
  cfg.batch_size = static_cast<int>(kv.get_int("batch_size", cfg.batch_size));
  cfg.learning_rate = kv.get_double("learning_rate", cfg.learning_rate);
  const std::string opt = kv.get("optimizer", "adam");
  if (opt == "adam")
    cfg.optimizer = Optimizer::adam;
  else if (opt == "sgd")
    cfg.optimizer = Optimizer::sgd;
  else
    throw UsageError("TrainConfig: unknown optimizer " + opt);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.checkpoint_every = static_cast<int>(kv.get_int("checkpoint_every", cfg.checkpoint_every));
  cfg.log_path = kv.get("log_path", cfg.log_path);
  cfg.data_path = kv.get("data_path", cfg.data_path);
  cfg.out_dir = kv.get("out_dir", cfg.out_dir);
  cfg.max_steps = static_cast<int>(kv.get_int("max_steps", cfg.max_steps));
  cfg.target_grid_mse = kv.get_double("target_grid_mse", cfg.target_grid_mse);
  cfg.validate();
  return cfg;
}

AdamOptimizer::AdamOptimizer(const std::vector<NamedParam<float>>& params, float lr, float beta1,
                             float beta2, float eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.numel(), 0.0f);
    v_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void AdamOptimizer::step(std::vector<NamedParam<float>>& params) {
  ++t_;
  const float bc1 = 1.0f / (1.0f - std::pow(beta1_, static_cast<float>(t_)));
  const float bc2 = 1.0f / (1.0f - std::pow(beta2_, static_cast<float>(t_)));
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].tensor;
    if (!t.has_grad()) continue;
    k.adam_step(t.data(), t.grad_vec().data(), m_[i].data(), v_[i].data(), t.numel(), lr_, beta1_,
                beta2_, eps_, bc1, bc2);
  }
}

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRecord>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("train log: cannot write " + path);
  out << "step,epoch,grid_loss,edge_loss,combined_loss,wall_time\n";
  out.precision(10);
  for (const auto& r : log)
    out << r.step << "," << r.epoch << "," << r.grid_loss << "," << r.edge_loss << ","
        << r.combined_loss << "," << r.wall_time << "\n";
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::string log_path =
      cfg.log_path.empty() ? (fs::path(cfg.out_dir) / "train_log.csv").string() : cfg.log_path;
  const std::string final_ckpt = (fs::path(cfg.out_dir) / "model.gbsu").string();

  DatasetReader data(cfg.data_path);
  if (data.size() == 0 && cfg.epochs > 0)
    throw DataError("train: dataset at " + cfg.data_path + " is empty");

  std::vector<int> train_idx;
  for (int i = 0; i < data.size(); ++i)
    if (!is_validation_index(i)) train_idx.push_back(i);
  if (train_idx.empty() && cfg.epochs > 0) throw DataError("train: no training samples left");

  // samples are loaded once; desk-scale datasets fit comfortably in memory
  std::vector<DocumentSample> samples;
  samples.reserve(train_idx.size());
  for (int i : train_idx) samples.push_back(data.load(i));
  for (const auto& s : samples) {
    if (s.warped.h != cfg.model.input_size)
      throw DataError("train: dataset sample size " + std::to_string(s.warped.h) +
                      " != model input " + std::to_string(cfg.model.input_size));
  }

  GbsuNet<float> model(cfg.model, cfg.seed);

  TrainResult result;
  result.final_checkpoint = final_ckpt;

  AdamOptimizer adam(model.params(), static_cast<float>(cfg.learning_rate));
  const auto t0 = std::chrono::steady_clock::now();
  const bool use_edges = cfg.model.gate_enabled && cfg.objective.lambda > 0.0;

  Rng shuffle_rng(cfg.seed ^ 0x9d2c5680u);

  int step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    // seeded Fisher-Yates shuffle
    std::vector<int> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

    for (std::size_t pos = 0; pos < order.size() && !stop; pos += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), pos + cfg.batch_size);
      std::vector<const Image*> warped;
      std::vector<const WarpGrid*> grids;
      std::vector<const Image*> edges;
      for (std::size_t b = pos; b < end; ++b) {
        const DocumentSample& s = samples[order[b]];
        warped.push_back(&s.warped);
        grids.push_back(&s.gt_grid);
        edges.push_back(&s.edge_mask);
      }
      Tensor input = batch_images(warped);
      Tensor gt_grid = batch_grids(grids);

      auto out = model.forward(input);
      auto lg = grid_loss(out.grid, gt_grid, cfg.objective.l1_grid);
      Tensor le;
      if (use_edges) {
        Tensor gt_edges = batch_images(edges);
        le = edge_loss(ops::sigmoid(out.edge_logits), gt_edges,
                       static_cast<float>(cfg.objective.bce_epsilon));
      }
      auto loss = combined_loss(lg, le, cfg.objective);

      TrainLogRecord rec;
      rec.step = ++step;
      rec.epoch = epoch;
      rec.grid_loss = lg.item();
      rec.edge_loss = le.defined() ? le.item() : 0.0;
      rec.combined_loss = loss.item();
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      if (!std::isfinite(rec.combined_loss)) {
        model.save((fs::path(cfg.out_dir) / "diagnostic.gbsu").string());
        write_train_log_csv(log_path, result.log);
        throw NumericError("train: non-finite loss at step " + std::to_string(step) +
                           "; diagnostic checkpoint written");
      }

      loss.backward();
      if (cfg.optimizer == TrainConfig::Optimizer::adam) {
        adam.step(model.params());
      } else {
        const auto& k = kernels::active();
        for (auto& p : model.params())
          if (p.tensor.has_grad())
            k.sgd_step(p.tensor.data(), p.tensor.grad_vec().data(), p.tensor.numel(),
                       static_cast<float>(cfg.learning_rate));
      }
      zero_grads(model.params());

      result.log.push_back(rec);
      result.final_grid_loss = rec.grid_loss;
      result.steps_run = step;

      if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0)
        model.save((fs::path(cfg.out_dir) / ("ckpt_" + std::to_string(step) + ".gbsu")).string());
      if (cfg.max_steps > 0 && step >= cfg.max_steps) stop = true;
      if (cfg.target_grid_mse > 0.0 && rec.grid_loss < cfg.target_grid_mse) stop = true;
    }
  }

  model.save(final_ckpt);
  write_train_log_csv(log_path, result.log);
  return result;
}

MetricsReport evaluate_model(const GbsuNet<float>& model, const DatasetReader& data,
                             bool original_resolution, const std::vector<int>& indices) {
  std::vector<int> idx = indices;
  if (idx.empty())
    for (int i = 0; i < data.size(); ++i) idx.push_back(i);

  MetricsReport report;
  report.samples.resize(idx.size());
  std::vector<SampleMetrics> baselines(idx.size());
  std::vector<std::uint8_t> ok(idx.size(), 0);

  parallel_for(idx.size(), [&](std::size_t k) {
    NoGradGuard ng;
    const DocumentSample s = data.load(idx[k]);
    if (s.flat.empty()) return;  // skipped, counted below

    auto out = model.forward(image_to_tensor(s.warped));
    WarpGrid grid = tensor_to_grid(out.grid);

    const int th = original_resolution ? s.flat.h : grid.h;
    const int tw = original_resolution ? s.flat.w : grid.w;
    if (grid.h != th || grid.w != tw) grid = upsample_grid(grid, th, tw);
    const Image flat_ref = (s.flat.h == th && s.flat.w == tw)
                               ? s.flat
                               : resize_bilinear(s.flat, th, tw);

    const Image recon = grid_sample(s.warped, grid);
    SampleMetrics m;
    m.ssim_levels = pyramid_ssim(recon, flat_ref);
    m.ms_ssim = ms_ssim_from_levels(m.ssim_levels);
    if (s.gt_grid.h > 0) {
      WarpGrid gt = s.gt_grid;
      if (gt.h != th || gt.w != tw) gt = upsample_grid(gt, th, tw);
      WarpGrid pred = grid;
      m.ld = local_distortion(pred, gt);
    }
    report.samples[k] = m;

    // identity-grid baseline: score the unrectified input
    const Image warped_ref = (s.warped.h == th && s.warped.w == tw)
                                 ? s.warped
                                 : resize_bilinear(s.warped, th, tw);
    SampleMetrics b;
    b.ssim_levels = pyramid_ssim(warped_ref, flat_ref);
    b.ms_ssim = ms_ssim_from_levels(b.ssim_levels);
    if (s.gt_grid.h > 0) {
      WarpGrid gt = s.gt_grid;
      if (gt.h != th || gt.w != tw) gt = upsample_grid(gt, th, tw);
      b.ld = local_distortion(WarpGrid::identity(th, tw), gt);
    }
    baselines[k] = b;
    ok[k] = 1;
  });

  MetricsReport pruned;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (!ok[k]) {
      ++pruned.skipped;
      continue;
    }
    pruned.samples.push_back(report.samples[k]);
  }
  pruned.finalize();

  MetricsReport base;
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (ok[k]) base.samples.push_back(baselines[k]);
  base.finalize();
  pruned.baseline_mean = base.mean;
  return pruned;
}

std::vector<AblationPreset> ablation_presets(const ModelConfig& base) {
  ModelConfig full = base;
  full.gate_enabled = true;
  full.bifurcated = true;
  full.decoder_shared_weights = false;

  ModelConfig no_gate = full;
  no_gate.gate_enabled = false;

  ModelConfig shared = full;
  shared.decoder_shared_weights = true;

  ModelConfig single = full;
  single.bifurcated = false;
  single.decoder_shared_weights = false;

  return {{"full", full}, {"no_gate", no_gate}, {"shared_decoders", shared},
          {"single_decoder", single}};
}

}  // namespace dewarp
