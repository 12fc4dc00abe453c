#pragma once

#include "qfl/fl_core.hpp"
#include "qfl/solvers.hpp"
#include "qfl/wireless_net.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfl {

// --- IDX container -------------------------------------------------------------

inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;

struct IdxFile {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;
};

class IdxError : public std::runtime_error {
 public:
  enum class Kind { TooShort, BadMagic, Truncated, TrailingBytes, CountMismatch };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Strict parse: known magic, exact payload length.
IdxFile parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_idx(const IdxFile& file);

/// Images scaled by 1/255, one row per image (row-major pixels).
Eigen::MatrixXd idx_images(const IdxFile& file);
std::vector<int> idx_labels(const IdxFile& file);

/// Pairs an image file with a label file; labels must be < num_classes.
LabeledDataset pair_idx(const IdxFile& images, const IdxFile& labels, int num_classes = 10);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Average-pools square images to side x side, then min-max scales each sample to [0, 1].
LabeledDataset pool_images(const LabeledDataset& data, int image_side, int pooled_side);

/// Keeps the listed classes and relabels them 0..k-1 in list order.
LabeledDataset select_classes(const LabeledDataset& data, const std::vector<int>& classes);

// --- synthetic data ------------------------------------------------------------

struct BlobSpec {
  /// One center per class; each of length feature_dim.
  std::vector<std::vector<double>> centers;
  double stddev = 0.05;
  int samples_per_class = 100;
  int feature_dim = 16;
  std::uint64_t seed = 0;
};

/// Gaussian blobs clipped to [0, 1].
LabeledDataset synth_blobs(const BlobSpec& spec);

/// Centers for `classes` well-separated blobs drawn from the seed.
std::vector<std::vector<double>> default_blob_centers(int classes, int feature_dim, std::uint64_t seed);

// --- experiment configuration --------------------------------------------------

struct DataSource {
  enum class Kind { Synthetic, Idx } kind = Kind::Synthetic;
  std::string images_path;
  std::string labels_path;
  std::vector<int> classes{0, 1};
  /// IDX only: 28x28 digits are pooled to pooled_side x pooled_side.
  int pooled_side = 4;
  /// Synthetic only; empty centers are generated from the seed.
  BlobSpec blobs{{}, 0.1, 200, 16, 0};
};

struct ExperimentConfig {
  NetworkConfig network{.num_devices = 24, .num_channels = 6};
  BcdConfig bcd{};
  FederationConfig fl{};
  /// Network for `federate`; its device count follows fl.num_devices.
  int fl_num_channels = 4;
  DataSource data{};
  std::string output_dir = "out";
  std::uint64_t master_seed = 1;
  /// Seeded network instances for `optimize`.
  int instances = 20;
  /// Seeded network instances for `federate`.
  int fl_instances = 1;
  /// Record measured wall time in sumrate_trace.csv; off keeps the file reproducible.
  bool record_wall_clock = false;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys take their defaults; unknown keys and invalid values are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Sub-seed of instance `index` for component `label`.
std::uint64_t instance_seed(const ExperimentConfig& cfg, std::string_view label, int index);

// --- results -------------------------------------------------------------------

struct SeededTrace {
  std::uint64_t seed;
  SolverTrace trace;
};

/// solver,seed,iteration,sum_rate_bps,wall_ms
std::string sumrate_trace_csv(const std::vector<SeededTrace>& traces, bool with_wall_clock);

struct SeededRounds {
  std::string arm;
  std::uint64_t seed;
  std::vector<RoundRecord> records;
  /// Per-device upload rates that timed this arm.
  std::vector<double> rates_bps{};
};

/// arm,seed,round,accuracy,loss,round_latency_s,cumulative_time_s
std::string fl_rounds_csv(const std::vector<SeededRounds>& runs);

struct OptimizeOutcome {
  std::vector<SeededTrace> traces;  // qaoa and sca interleaved per instance
  nlohmann::json summary;
};

/// Both solvers over `cfg.instances` seeded networks.
OptimizeOutcome run_optimize_experiment(const ExperimentConfig& cfg);

struct FederateOutcome {
  std::vector<SeededRounds> runs;
  nlohmann::json summary;
};

LabeledDataset load_experiment_data(const ExperimentConfig& cfg);

/// Per instance: both solvers on an fl.num_devices network, then both arms.
FederateOutcome run_federate_experiment(const ExperimentConfig& cfg);

/// Writes `name` under cfg.output_dir (created if missing). Throws IoError.
void write_output(const ExperimentConfig& cfg, const std::string& name, std::string_view contents);

}  // namespace qfl
