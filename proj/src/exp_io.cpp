#include "qfl/exp_io.hpp"

#include "qfl/errors.hpp"
#include "qfl/parallel.hpp"
#include "qfl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>

namespace qfl {

using nlohmann::json;

// --- IDX container -------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::size_t rank_of(std::uint32_t magic) {
  switch (magic) {
    case kIdxLabelsMagic: return 1;
    case kIdxImagesMagic: return 3;
    default: return 0;
  }
}

std::string hex(std::uint32_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << v;
  return s.str();
}

}  // namespace

IdxFile parse_idx(std::span<const std::uint8_t> bytes) {
  using K = IdxError::Kind;
  if (bytes.size() < 8) throw IdxError(K::TooShort, "idx: " + std::to_string(bytes.size()) + " bytes, need >= 8");
  IdxFile file;
  file.magic = read_be32(bytes, 0);
  const std::size_t rank = rank_of(file.magic);
  if (rank == 0) throw IdxError(K::BadMagic, "idx: unknown magic " + hex(file.magic));
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) throw IdxError(K::Truncated, "idx: header cut short");

  // Saturates at the available size so huge dims cannot overflow.
  const std::uint64_t available = bytes.size() - header;
  std::uint64_t expected = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    const std::uint64_t dim = read_be32(bytes, 4 + 4 * d);
    file.dims.push_back(static_cast<std::uint32_t>(dim));
    expected = (dim != 0 && expected > (available + 1) / dim) ? available + 1 : expected * dim;
  }
  if (available < expected)
    throw IdxError(K::Truncated, "idx: payload holds " + std::to_string(bytes.size() - header) +
                                     " bytes, dims need more");
  if (available > expected)
    throw IdxError(K::TrailingBytes, "idx: " + std::to_string(available - expected) +
                                         " bytes after the payload");
  file.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return file;
}

std::vector<std::uint8_t> write_idx(const IdxFile& file) {
  const std::size_t rank = rank_of(file.magic);
  require(rank != 0, "write_idx: unknown magic " + hex(file.magic));
  require(file.dims.size() == rank, "write_idx: magic " + hex(file.magic) + " needs " + std::to_string(rank) + " dims");
  std::uint64_t expected = 1;
  for (auto d : file.dims) expected *= d;
  require(file.payload.size() == expected, "write_idx: payload length does not match dims");
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * rank + file.payload.size());
  append_be32(out, file.magic);
  for (auto d : file.dims) append_be32(out, d);
  out.insert(out.end(), file.payload.begin(), file.payload.end());
  return out;
}

Eigen::MatrixXd idx_images(const IdxFile& file) {
  require(file.magic == kIdxImagesMagic && file.dims.size() == 3, "idx_images: not an image file");
  const Eigen::Index rows = file.dims[0];
  const Eigen::Index cols = Eigen::Index{file.dims[1]} * file.dims[2];
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = file.payload[static_cast<std::size_t>(r * cols + c)] / 255.0;
  return out;
}

std::vector<int> idx_labels(const IdxFile& file) {
  require(file.magic == kIdxLabelsMagic && file.dims.size() == 1, "idx_labels: not a label file");
  return {file.payload.begin(), file.payload.end()};
}

LabeledDataset pair_idx(const IdxFile& images, const IdxFile& labels, int num_classes) {
  LabeledDataset out;
  out.features = idx_images(images);
  out.labels = idx_labels(labels);
  out.num_classes = num_classes;
  if (out.features.rows() != static_cast<Eigen::Index>(out.labels.size()))
    throw IdxError(IdxError::Kind::CountMismatch, "idx: " + std::to_string(out.features.rows()) + " images but " +
                                                      std::to_string(out.labels.size()) + " labels");
  for (int l : out.labels)
    require(l < num_classes, "idx: label " + std::to_string(l) + " >= " + std::to_string(num_classes) + " classes");
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return out;
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

LabeledDataset pool_images(const LabeledDataset& data, int image_side, int pooled_side) {
  require(image_side >= 1 && pooled_side >= 1 && image_side % pooled_side == 0,
          "pool_images: pooled side must divide the image side");
  require(data.feature_dim() == image_side * image_side, "pool_images: feature count is not image_side^2");
  const int cell = image_side / pooled_side;
  LabeledDataset out;
  out.labels = data.labels;
  out.num_classes = data.num_classes;
  out.features.resize(data.size(), pooled_side * pooled_side);
  using Image = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (int r = 0; r < data.size(); ++r) {
    const Eigen::RowVectorXd pixels = data.features.row(r);
    const Eigen::Map<const Image> image(pixels.data(), image_side, image_side);
    for (int py = 0; py < pooled_side; ++py)
      for (int px = 0; px < pooled_side; ++px)
        out.features(r, py * pooled_side + px) = image.block(py * cell, px * cell, cell, cell).mean();
    auto row = out.features.row(r);
    const double lo = row.minCoeff();
    const double span = row.maxCoeff() - lo;
    if (span > 0.0) {
      row = (row.array() - lo) / span;
    } else {
      row.setZero();
    }
  }
  return out;
}

LabeledDataset select_classes(const LabeledDataset& data, const std::vector<int>& classes) {
  require(!classes.empty(), "select_classes: empty class list");
  std::vector<int> relabel(static_cast<std::size_t>(data.num_classes), -1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const int c = classes[i];
    require(c >= 0 && c < data.num_classes, "select_classes: class " + std::to_string(c) + " out of range");
    require(relabel[static_cast<std::size_t>(c)] < 0, "select_classes: class listed twice");
    relabel[static_cast<std::size_t>(c)] = static_cast<int>(i);
  }
  std::vector<int> rows;
  for (int r = 0; r < data.size(); ++r)
    if (relabel[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(r)])] >= 0) rows.push_back(r);
  LabeledDataset out = data.subset(rows);
  for (int& l : out.labels) l = relabel[static_cast<std::size_t>(l)];
  out.num_classes = static_cast<int>(classes.size());
  return out;
}

// --- synthetic data ------------------------------------------------------------

LabeledDataset synth_blobs(const BlobSpec& spec) {
  require(!spec.centers.empty(), "synth_blobs: no centers");
  require(spec.stddev >= 0.0, "synth_blobs: stddev must be >= 0");
  require(spec.samples_per_class >= 1, "synth_blobs: samples_per_class must be >= 1");
  for (const auto& c : spec.centers)
    require(static_cast<int>(c.size()) == spec.feature_dim, "synth_blobs: center length != feature_dim");
  const int classes = static_cast<int>(spec.centers.size());
  LabeledDataset out;
  out.num_classes = classes;
  out.features.resize(classes * spec.samples_per_class, spec.feature_dim);
  for (int c = 0; c < classes; ++c) {
    CounterRng rng(derive_seed(spec.seed, "blobs.class", static_cast<std::uint64_t>(c)));
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int s = 0; s < spec.samples_per_class; ++s) {
      const int r = c * spec.samples_per_class + s;
      for (int f = 0; f < spec.feature_dim; ++f) {
        const double v = spec.centers[static_cast<std::size_t>(c)][static_cast<std::size_t>(f)] +
                         spec.stddev * noise(rng);
        out.features(r, f) = std::clamp(v, 0.0, 1.0);
      }
      out.labels.push_back(c);
    }
  }
  return out;
}

std::vector<std::vector<double>> default_blob_centers(int classes, int feature_dim, std::uint64_t seed) {
  require(classes >= 1 && feature_dim >= 1, "default_blob_centers: need classes >= 1 and feature_dim >= 1");
  CounterRng rng(derive_seed(seed, "blobs.centers"));
  std::vector<std::vector<double>> out(static_cast<std::size_t>(classes));
  for (auto& c : out) {
    c.resize(static_cast<std::size_t>(feature_dim));
    for (auto& v : c) v = 0.2 + 0.6 * rng.uniform();
  }
  return out;
}

// --- experiment configuration --------------------------------------------------

namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<PowerStepKind> kPowerSteps[] = {{PowerStepKind::ProjectedGradient, "projected-gradient"},
                                                   {PowerStepKind::ScaBound, "sca-bound"}};
constexpr EnumName<AssignmentBackend> kBackends[] = {{AssignmentBackend::Qaoa, "qaoa"},
                                                     {AssignmentBackend::Anneal, "anneal"},
                                                     {AssignmentBackend::BruteForce, "brute-force"}};
constexpr EnumName<CandidateRule> kCandidateRules[] = {{CandidateRule::MarginalSumRate, "marginal-sum-rate"},
                                                       {CandidateRule::Gain, "gain"}};
constexpr EnumName<InterferenceProxy> kProxies[] = {{InterferenceProxy::MarginalSumRate, "marginal-sum-rate"},
                                                    {InterferenceProxy::ReceivedPower, "received-power"},
                                                    {InterferenceProxy::PairwiseRateLoss, "pairwise-rate-loss"}};
constexpr EnumName<AngleOptimizer> kOptimizers[] = {{AngleOptimizer::NelderMead, "nelder-mead"},
                                                    {AngleOptimizer::CoordinateGrid, "coordinate-grid"}};
constexpr EnumName<ModelKind> kModels[] = {{ModelKind::Vqc, "vqc"}, {ModelKind::Linear, "linear"}};
constexpr EnumName<DataSource::Kind> kSources[] = {{DataSource::Kind::Synthetic, "synthetic"},
                                                   {DataSource::Kind::Idx, "idx"}};

template <typename E, std::size_t N>
const char* name_of(const EnumName<E> (&table)[N], E value) {
  for (const auto& e : table)
    if (e.value == value) return e.name;
  throw ValidationError("enum value without a name");
}

/// Reads the keys of one JSON object and rejects any it did not ask for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(path_ + "." + key, "unknown key");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(path(key), "expected an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail(path(key), "out of range");
      out = static_cast<int>(x);
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(path(key), "expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, Interval& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
        fail(path(key), "expected [lo, hi]");
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }
  void get(const std::string& key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(path(key), "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(path(key), "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }
  void get(const std::string& key, std::vector<std::vector<double>>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(path(key), "expected an array of arrays");
      out.clear();
      for (const auto& row : *v) {
        if (!row.is_array()) fail(path(key), "expected an array of arrays");
        auto& dst = out.emplace_back();
        for (const auto& e : row) {
          if (!e.is_number()) fail(path(key), "expected numbers");
          dst.push_back(e.get<double>());
        }
      }
    }
  }
  template <typename E, std::size_t N>
  void get(const std::string& key, E& out, const EnumName<E> (&table)[N]) {
    if (const json* v = find(key)) {
      if (v->is_string())
        for (const auto& e : table)
          if (v->get<std::string>() == e.name) {
            out = e.value;
            return;
          }
      std::string allowed;
      for (const auto& e : table) allowed += std::string(allowed.empty() ? "" : ", ") + e.name;
      fail(path(key), "expected one of: " + allowed);
    }
  }
  template <typename F>
  void object(const std::string& key, F&& read) {
    if (const json* v = find(key)) {
      ObjectReader sub(*v, path(key));
      read(sub);
    }
  }

 private:
  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ValidationError("config " + where + ": " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

}  // namespace

void ExperimentConfig::validate() const {
  network.validate();
  bcd.validate();
  fl.validate();
  require(fl_num_channels >= 1, "fl_num_channels must be >= 1");
  require(instances >= 1, "instances must be >= 1");
  require(fl_instances >= 1, "fl_instances must be >= 1");
  require(!output_dir.empty(), "output_dir must not be empty");
  require(data.classes.size() >= 2, "data.classes needs at least two classes");
  const int feature_dim = data.kind == DataSource::Kind::Idx ? data.pooled_side * data.pooled_side
                                                             : data.blobs.feature_dim;
  if (data.kind == DataSource::Kind::Idx) {
    require(!data.images_path.empty() && !data.labels_path.empty(), "data: idx source needs images_path and labels_path");
    require(std::filesystem::exists(data.images_path), "data.images_path does not exist: " + data.images_path);
    require(std::filesystem::exists(data.labels_path), "data.labels_path does not exist: " + data.labels_path);
    require(data.pooled_side >= 1 && 28 % data.pooled_side == 0, "data.pooled_side must divide 28");
    for (int c : data.classes) require(c >= 0 && c <= 9, "data.classes must be digits 0..9");
  } else {
    require(data.blobs.feature_dim >= 1, "data.blobs.feature_dim must be >= 1");
    require(data.blobs.samples_per_class >= 1, "data.blobs.samples_per_class must be >= 1");
    require(data.blobs.stddev >= 0.0, "data.blobs.stddev must be >= 0");
    require(data.blobs.centers.empty() || data.blobs.centers.size() == data.classes.size(),
            "data.blobs.centers needs one center per class");
  }
  for (ModelKind kind : {fl.qfl_model, fl.fl_model}) {
    if (kind != ModelKind::Vqc) continue;
    require(feature_dim == fl.vqc.feature_dim(), "vqc expects " + std::to_string(fl.vqc.feature_dim()) +
                                                     " features, data provides " + std::to_string(feature_dim));
    require(static_cast<int>(data.classes.size()) <= fl.vqc.qubits, "vqc needs at least one qubit per class");
  }
}

json to_json(const ExperimentConfig& cfg) {
  const auto& n = cfg.network;
  const auto& b = cfg.bcd;
  const auto& f = cfg.fl;
  const auto& d = cfg.data;
  return json{
      {"network",
       {{"num_devices", n.num_devices},
        {"num_channels", n.num_channels},
        {"channel_bandwidth_hz", n.channel_bandwidth_hz},
        {"distance_range_m", interval_json(n.distance_range_m)},
        {"power_range_dbm", interval_json(n.power_range_dbm)},
        {"noise_psd_dbm_per_hz", n.noise_psd_dbm_per_hz},
        {"rician_k", n.rician_k},
        {"pathloss_exponent", n.pathloss_exponent},
        {"pathloss_ref_db", n.pathloss_ref_db}}},
      {"bcd",
       {{"outer_iterations", b.outer_iterations},
        {"block_size", b.block_size},
        {"candidates_per_device", b.candidates_per_device},
        {"candidate_rule", name_of(kCandidateRules, b.candidate_rule)},
        {"power_step", name_of(kPowerSteps, b.power_step)},
        {"power_inner_iters", b.power_inner_iters},
        {"pga_step_size", b.pga_step_size},
        {"relax_steps", b.relax_steps},
        {"qaoa",
         {{"depth_p", b.qaoa.depth_p},
          {"shots", b.qaoa.shots},
          {"angle_optimizer", name_of(kOptimizers, b.qaoa.angle_optimizer)},
          {"restarts", b.qaoa.restarts},
          {"evals_per_restart", b.qaoa.evals_per_restart}}},
        {"anneal",
         {{"sweeps", b.anneal.sweeps},
          {"restarts", b.anneal.restarts},
          {"t_start", b.anneal.t_start},
          {"t_end", b.anneal.t_end}}},
        {"assignment_backend", name_of(kBackends, b.assignment_backend)},
        {"qubo",
         {{"lambda_onehot", b.qubo_weights.lambda_onehot},
          {"lambda_int", b.qubo_weights.lambda_int},
          {"proxy", name_of(kProxies, b.qubo_weights.proxy)}}}}},
      {"fl",
       {{"num_devices", f.num_devices},
        {"rounds", f.rounds},
        {"qfl_model", name_of(kModels, f.qfl_model)},
        {"fl_model", name_of(kModels, f.fl_model)},
        {"vqc",
         {{"qubits", f.vqc.qubits},
          {"encode_layers", f.vqc.encode_layers},
          {"variational_layers", f.vqc.variational_layers}}},
        {"local_epochs", f.local_epochs},
        {"learning_rate", f.learning_rate},
        {"batch_size", f.batch_size},
        {"holdout_fraction", f.holdout_fraction},
        {"latency",
         {{"bits_per_param", f.latency.bits_per_param},
          {"compute_linear_s", f.latency.compute_linear_s},
          {"compute_vqc_s", f.latency.compute_vqc_s}}}}},
      {"fl_num_channels", cfg.fl_num_channels},
      {"data",
       {{"kind", name_of(kSources, d.kind)},
        {"images_path", d.images_path},
        {"labels_path", d.labels_path},
        {"classes", d.classes},
        {"pooled_side", d.pooled_side},
        {"blobs",
         {{"centers", d.blobs.centers},
          {"stddev", d.blobs.stddev},
          {"samples_per_class", d.blobs.samples_per_class},
          {"feature_dim", d.blobs.feature_dim}}}}},
      {"output_dir", cfg.output_dir},
      {"master_seed", cfg.master_seed},
      {"instances", cfg.instances},
      {"fl_instances", cfg.fl_instances},
      {"record_wall_clock", cfg.record_wall_clock},
  };
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  ObjectReader root(j, "$");
  root.object("network", [&](ObjectReader& r) {
    auto& n = cfg.network;
    r.get("num_devices", n.num_devices);
    r.get("num_channels", n.num_channels);
    r.get("channel_bandwidth_hz", n.channel_bandwidth_hz);
    r.get("distance_range_m", n.distance_range_m);
    r.get("power_range_dbm", n.power_range_dbm);
    r.get("noise_psd_dbm_per_hz", n.noise_psd_dbm_per_hz);
    r.get("rician_k", n.rician_k);
    r.get("pathloss_exponent", n.pathloss_exponent);
    r.get("pathloss_ref_db", n.pathloss_ref_db);
  });
  root.object("bcd", [&](ObjectReader& r) {
    auto& b = cfg.bcd;
    r.get("outer_iterations", b.outer_iterations);
    r.get("block_size", b.block_size);
    r.get("candidates_per_device", b.candidates_per_device);
    r.get("candidate_rule", b.candidate_rule, kCandidateRules);
    r.get("power_step", b.power_step, kPowerSteps);
    r.get("power_inner_iters", b.power_inner_iters);
    r.get("pga_step_size", b.pga_step_size);
    r.get("relax_steps", b.relax_steps);
    r.object("qaoa", [&](ObjectReader& q) {
      q.get("depth_p", b.qaoa.depth_p);
      q.get("shots", b.qaoa.shots);
      q.get("angle_optimizer", b.qaoa.angle_optimizer, kOptimizers);
      q.get("restarts", b.qaoa.restarts);
      q.get("evals_per_restart", b.qaoa.evals_per_restart);
    });
    r.object("anneal", [&](ObjectReader& a) {
      a.get("sweeps", b.anneal.sweeps);
      a.get("restarts", b.anneal.restarts);
      a.get("t_start", b.anneal.t_start);
      a.get("t_end", b.anneal.t_end);
    });
    r.get("assignment_backend", b.assignment_backend, kBackends);
    r.object("qubo", [&](ObjectReader& q) {
      q.get("lambda_onehot", b.qubo_weights.lambda_onehot);
      q.get("lambda_int", b.qubo_weights.lambda_int);
      q.get("proxy", b.qubo_weights.proxy, kProxies);
    });
  });
  root.object("fl", [&](ObjectReader& r) {
    auto& f = cfg.fl;
    r.get("num_devices", f.num_devices);
    r.get("rounds", f.rounds);
    r.get("qfl_model", f.qfl_model, kModels);
    r.get("fl_model", f.fl_model, kModels);
    r.object("vqc", [&](ObjectReader& v) {
      v.get("qubits", f.vqc.qubits);
      v.get("encode_layers", f.vqc.encode_layers);
      v.get("variational_layers", f.vqc.variational_layers);
    });
    r.get("local_epochs", f.local_epochs);
    r.get("learning_rate", f.learning_rate);
    r.get("batch_size", f.batch_size);
    r.get("holdout_fraction", f.holdout_fraction);
    r.object("latency", [&](ObjectReader& l) {
      l.get("bits_per_param", f.latency.bits_per_param);
      l.get("compute_linear_s", f.latency.compute_linear_s);
      l.get("compute_vqc_s", f.latency.compute_vqc_s);
    });
  });
  root.get("fl_num_channels", cfg.fl_num_channels);
  root.object("data", [&](ObjectReader& r) {
    auto& d = cfg.data;
    r.get("kind", d.kind, kSources);
    r.get("images_path", d.images_path);
    r.get("labels_path", d.labels_path);
    r.get("classes", d.classes);
    r.get("pooled_side", d.pooled_side);
    r.object("blobs", [&](ObjectReader& b) {
      b.get("centers", d.blobs.centers);
      b.get("stddev", d.blobs.stddev);
      b.get("samples_per_class", d.blobs.samples_per_class);
      b.get("feature_dim", d.blobs.feature_dim);
    });
  });
  root.get("output_dir", cfg.output_dir);
  root.get("master_seed", cfg.master_seed);
  root.get("instances", cfg.instances);
  root.get("fl_instances", cfg.fl_instances);
  root.get("record_wall_clock", cfg.record_wall_clock);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw ValidationError("config " + path.string() + " is not valid JSON");
  return experiment_config_from_json(j);
}

std::uint64_t instance_seed(const ExperimentConfig& cfg, std::string_view label, int index) {
  return derive_seed(cfg.master_seed, label, static_cast<std::uint64_t>(index));
}

// --- results -------------------------------------------------------------------

namespace {

std::ostringstream csv_stream() {
  std::ostringstream out;
  out.precision(17);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

std::string sumrate_trace_csv(const std::vector<SeededTrace>& traces, bool with_wall_clock) {
  auto out = csv_stream();
  out << "solver,seed,iteration,sum_rate_bps,wall_ms\n";
  for (const auto& t : traces)
    for (const auto& p : t.trace.points)
      out << t.trace.solver_name << ',' << t.seed << ',' << p.iteration << ',' << p.sum_rate_bps << ','
          << (with_wall_clock ? p.wall_ms : 0.0) << '\n';
  return out.str();
}

std::string fl_rounds_csv(const std::vector<SeededRounds>& runs) {
  auto out = csv_stream();
  out << "arm,seed,round,accuracy,loss,round_latency_s,cumulative_time_s\n";
  for (const auto& run : runs)
    for (const auto& r : run.records)
      out << run.arm << ',' << run.seed << ',' << r.round << ',' << r.accuracy << ',' << r.loss << ','
          << r.round_latency_s << ',' << r.cumulative_time_s << '\n';
  return out.str();
}

OptimizeOutcome run_optimize_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto count = static_cast<std::size_t>(cfg.instances);
  std::vector<SolverResult> qaoa(count);
  std::vector<SolverResult> sca(count);
  std::vector<std::uint64_t> seeds(count);
  parallel_for(count, [&](std::size_t i) {
    NetworkConfig net = cfg.network;
    net.seed = instance_seed(cfg, "network", static_cast<int>(i));
    seeds[i] = net.seed;
    const NetworkInstance instance = sample_network(net);
    BcdConfig bcd = cfg.bcd;
    bcd.seed = instance_seed(cfg, "bcd", static_cast<int>(i));
    qaoa[i] = solve_qaoa_bcd(instance, bcd);
    sca[i] = solve_sca_baseline(instance, bcd);
  });

  OptimizeOutcome out;
  std::vector<double> qf, sf, qi, si;
  json per_instance = json::array();
  for (std::size_t i = 0; i < count; ++i) {
    out.traces.push_back({seeds[i], qaoa[i].trace});
    out.traces.push_back({seeds[i], sca[i].trace});
    qf.push_back(qaoa[i].trace.final_sum_rate());
    sf.push_back(sca[i].trace.final_sum_rate());
    qi.push_back(qaoa[i].trace.iterations_to(0.95));
    si.push_back(sca[i].trace.iterations_to(0.95));
    per_instance.push_back({{"seed", seeds[i]},
                            {"qaoa_bcd_final_sum_rate_bps", qf.back()},
                            {"sca_final_sum_rate_bps", sf.back()},
                            {"qaoa_bcd_iterations_to_95", qi.back()},
                            {"sca_iterations_to_95", si.back()}});
  }
  const double q_mean = mean_of(qf);
  const double s_mean = mean_of(sf);
  out.summary = {
      {"experiment", "optimize"},
      {"instances", cfg.instances},
      {"qaoa_bcd", {{"mean_final_sum_rate_bps", q_mean}, {"mean_iterations_to_95", mean_of(qi)}}},
      {"sca", {{"mean_final_sum_rate_bps", s_mean}, {"mean_iterations_to_95", mean_of(si)}}},
      {"sum_rate_gap_percent", s_mean > 0.0 ? 100.0 * (q_mean / s_mean - 1.0) : 0.0},
      {"per_instance", per_instance},
  };
  return out;
}

LabeledDataset load_experiment_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  if (d.kind == DataSource::Kind::Idx) {
    const IdxFile images = parse_idx(read_file(d.images_path));
    const IdxFile labels = parse_idx(read_file(d.labels_path));
    require(images.magic == kIdxImagesMagic, "data.images_path is not an IDX image file");
    require(labels.magic == kIdxLabelsMagic, "data.labels_path is not an IDX label file");
    require(images.dims[1] == 28 && images.dims[2] == 28, "IDX images must be 28x28");
    const LabeledDataset all = pair_idx(images, labels, 10);
    return select_classes(pool_images(all, 28, d.pooled_side), d.classes);
  }
  BlobSpec spec = d.blobs;
  spec.seed = instance_seed(cfg, "data.blobs", 0);
  if (spec.centers.empty())
    spec.centers = default_blob_centers(static_cast<int>(d.classes.size()), spec.feature_dim,
                                        instance_seed(cfg, "data.centers", 0));
  return synth_blobs(spec);
}

FederateOutcome run_federate_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const LabeledDataset data = load_experiment_data(cfg);
  const auto count = static_cast<std::size_t>(cfg.fl_instances);
  std::vector<FederationResult> results(count);
  std::vector<std::uint64_t> seeds(count);
  std::vector<double> q_rate(count), s_rate(count);
  std::vector<std::vector<double>> q_devices(count), s_devices(count);
  parallel_for(count, [&](std::size_t i) {
    const int index = static_cast<int>(i);
    NetworkConfig net = cfg.network;
    net.num_devices = cfg.fl.num_devices;
    net.num_channels = cfg.fl_num_channels;
    net.seed = instance_seed(cfg, "fl.network", index);
    const NetworkInstance instance = sample_network(net);
    BcdConfig bcd = cfg.bcd;
    bcd.seed = instance_seed(cfg, "fl.bcd", index);
    const SolverResult q = solve_qaoa_bcd(instance, bcd);
    const SolverResult s = solve_sca_baseline(instance, bcd);
    q_rate[i] = q.trace.final_sum_rate();
    s_rate[i] = s.trace.final_sum_rate();
    const Eigen::VectorXd rq = device_rates(instance, q.assignment, q.powers);
    const Eigen::VectorXd rs = device_rates(instance, s.assignment, s.powers);
    FederationConfig fl = cfg.fl;
    fl.seed = instance_seed(cfg, "fl", index);
    seeds[i] = fl.seed;
    q_devices[i].assign(rq.begin(), rq.end());
    s_devices[i].assign(rs.begin(), rs.end());
    results[i] = run_federation(data, fl, q_devices[i], s_devices[i]);
  });

  FederateOutcome out;
  std::vector<double> qa, fa, qt, ft;
  for (std::size_t i = 0; i < count; ++i) {
    out.runs.push_back({"qfl", seeds[i], results[i].qfl, q_devices[i]});
    out.runs.push_back({"fl", seeds[i], results[i].fl, s_devices[i]});
    qa.push_back(results[i].qfl.back().accuracy);
    fa.push_back(results[i].fl.back().accuracy);
    qt.push_back(results[i].qfl.back().cumulative_time_s);
    ft.push_back(results[i].fl.back().cumulative_time_s);
  }
  out.summary = {
      {"experiment", "federate"},
      {"instances", cfg.fl_instances},
      {"rounds", cfg.fl.rounds},
      {"qfl",
       {{"mean_final_accuracy", mean_of(qa)},
        {"mean_total_time_s", mean_of(qt)},
        {"mean_sum_rate_bps", mean_of(q_rate)}}},
      {"fl",
       {{"mean_final_accuracy", mean_of(fa)},
        {"mean_total_time_s", mean_of(ft)},
        {"mean_sum_rate_bps", mean_of(s_rate)}}},
      {"time_saving_percent", mean_of(ft) > 0.0 ? 100.0 * (1.0 - mean_of(qt) / mean_of(ft)) : 0.0},
  };
  return out;
}

void write_output(const ExperimentConfig& cfg, const std::string& name, std::string_view contents) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.output_dir + ": " + ec.message());
  write_file(std::filesystem::path(cfg.output_dir) / name, contents);
}

}  // namespace qfl
