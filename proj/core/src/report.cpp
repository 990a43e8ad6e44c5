#include "muse/report.hpp"

#include <fstream>

#include <json.hpp>

#include "muse/errors.hpp"

namespace muse {

using nlohmann::ordered_json;

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

ordered_json config_object(const TrainConfig& c) {
  return ordered_json{{"lr", c.lr},
                      {"weight_decay", c.weight_decay},
                      {"dropout", c.dropout},
                      {"hidden", c.hidden},
                      {"lambda_p", c.lambda_p},
                      {"k_hop", c.k_hop},
                      {"tau", c.tau},
                      {"mask_steps", c.mask_steps},
                      {"mask_lr", c.mask_lr},
                      {"isomap_k", c.isomap_k},
                      {"d_prime", c.d_prime},
                      {"isomap_tol", c.isomap_tol},
                      {"epochs", c.epochs},
                      {"patience", c.patience},
                      {"seed", c.seed},
                      {"trials", c.trials},
                      {"per_class", c.per_class},
                      {"final_activation", activation_name(c.final_activation)},
                      {"fuse_activation", activation_name(c.fuse_activation)},
                      {"warm_start_masks", c.warm_start_masks},
                      {"row_normalize_features", c.row_normalize_features},
                      {"use_cache", c.use_cache},
                      {"variant", variant_name(c.variant)}};
}

}  // namespace

std::string config_json(const TrainConfig& cfg) { return config_object(cfg).dump(); }

std::string report_json(const TrialReport& r) {
  ordered_json trials = ordered_json::array();
  for (const auto& t : r.per_trial) {
    trials.push_back({{"seed", t.seed},
                      {"accuracy", t.accuracy},
                      {"epochs", t.epochs},
                      {"best_epoch", t.best_epoch},
                      {"train_accuracy", t.train_accuracy}});
  }
  ordered_json j{{"schema", kReportSchema},
                 {"version", kVersion},
                 {"dataset", r.dataset},
                 {"variant", variant_name(r.config.variant)},
                 {"config", config_object(r.config)},
                 {"per_trial", trials},
                 {"mean", r.mean},
                 {"std", r.std},
                 {"wall_time_s", r.wall_time_s},
                 {"diagnostics",
                  {{"smoothness_H", r.smoothness_h},
                   {"smoothness_U", r.smoothness_u},
                   {"cross_view_cosine", r.cross_view_cosine},
                   {"bound", r.bound}}},
                 {"warnings", r.warnings}};
  return j.dump(2) + "\n";
}

void write_text_atomic(const std::filesystem::path& file, const std::string& content) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  const std::filesystem::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot write " + tmp.string());
    out << content;
    if (!out) throw DatasetError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

}  // namespace muse
