#include "uagc/cli.hpp"

#include <omp.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uagc/activity.hpp"
#include "uagc/error.hpp"
#include "uagc/geodata.hpp"
#include "uagc/graphbuild.hpp"
#include "uagc/pathgen.hpp"
#include "uagc/sparse.hpp"
#include "uagc/text.hpp"

namespace uagc::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kArtifactVersion = "uagc-1";

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

// ---- scenario windows ------------------------------------------------------

namespace {

int parse_clock(std::string_view text, std::string_view whole) {
  const auto parts = split(trim(text), ':');
  auto bad = [&] { return UsageError("scenario window '" + std::string(whole) + "': expected HH:MM-HH:MM"); };
  if (parts.size() != 2) throw bad();
  std::int64_t h = 0, m = 0;
  try {
    h = parse_int(parts[0]);
    m = parse_int(parts[1]);
  } catch (const InputError&) {
    throw bad();
  }
  if (h < 0 || h > 23 || m < 0 || m > 59) throw bad();
  const int minute = static_cast<int>(h * 60 + m);
  if (minute % kBinMinutes != 0)
    throw UsageError("scenario window '" + std::string(whole) + "' is not on the 5-minute grid");
  return minute;
}

}  // namespace

ScenarioWindow ScenarioWindow::parse(std::string_view text) {
  const auto dash = text.find('-');
  if (dash == std::string_view::npos)
    throw UsageError("scenario window '" + std::string(text) + "': expected HH:MM-HH:MM");
  ScenarioWindow w{parse_clock(text.substr(0, dash), text), parse_clock(text.substr(dash + 1), text)};
  if (w.end_minute <= w.start_minute)
    throw UsageError("scenario window '" + std::string(text) + "' ends before it starts");
  return w;
}

Timestamp scenario_start(int weekday, const ScenarioWindow& w, std::size_t p) {
  if (weekday < 0 || weekday > 6) throw UsageError("weekday must be in 0..6 (Monday = 0)");
  if (w.start_minute + static_cast<int>(p - 1) * kBinMinutes > w.end_minute)
    throw UsageError("scenario window shorter than the " + std::to_string(p) + "-step history");
  return training::synthetic_start().plus_minutes(weekday * kMinutesPerDay + w.start_minute);
}

double SimulationResult::max_abs_delta() const {
  double m = 0.0;
  for (const double d : delta) m = std::max(m, std::abs(d));
  return m;
}

SimulationResult simulate_activity_response(models::Model& model, const training::Scaler& scaler,
                                            const ActivityTable* activity, Timestamp first, Timestamp second,
                                            double speed_mph, std::size_t step) {
  const auto& c = model.config();
  if (step == 0 || step > c.q) throw UsageError("horizon step outside 1.." + std::to_string(c.q));
  const std::size_t n = c.n_sensors;
  auto run = [&](Timestamp start) {
    models::Batch b;
    b.size = 1;
    b.history = ad::Tensor(ad::Shape{1, c.p, n}, scaler.apply(speed_mph));
    b.target = ad::Tensor(ad::Shape{1, c.q, n});
    b.mask = ad::Tensor(ad::Shape{1, c.q, n});
    const auto rows = training::context_window(c.embedding, activity, start, c.p, c.q);
    if (!rows.empty()) {
      b.context = ad::Tensor(ad::Shape{1, c.p + c.q, c.context_width()});
      std::copy(rows.begin(), rows.end(), b.context.data());
    }
    ad::Tape tape;
    const auto y = model.forward(tape, b);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = scaler.invert(y.value()[(step - 1) * n + i]);
    return out;
  };
  SimulationResult r;
  r.first = run(first);
  r.second = run(second);
  for (std::size_t i = 0; i < n; ++i) r.delta.push_back(r.first[i] - r.second[i]);
  return r;
}

namespace {

// ---- plumbing --------------------------------------------------------------

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  return out;
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  auto out = open_out(path);
  fn(out);
  out.flush();
  if (!out) throw UsageError("write failed: " + path);
}

/// Runs a pipeline stage, prefixing errors with the stage name.
template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), name + ": " + e.what());
  }
}

/// Records option values as they resolve so the manifest can list them.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T& var, const std::string& help) {
    values_.emplace_back(name, [&var] { return json(var); });
    return app_->add_option("--" + name, var, help)->capture_default_str();
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    values_.emplace_back(name, [&var] { return json(var); });
    return app_->add_flag("--" + name, var, help);
  }

  json resolved() const {
    json j = json::object();
    for (const auto& [name, get] : values_) j[name] = get();
    return j;
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<json()>>> values_;
};

struct Manifest {
  std::string command;
  json flags;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json extra = json::object();

  void write(const std::string& path) const {
    json j;
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["flags"] = flags;
    json in = json::object(), out = json::object();
    for (const auto& p : inputs)
      if (!p.empty()) in[p] = sha256_file(p);
    for (const auto& p : outputs) out[p] = sha256_file(p);
    j["inputs"] = in;
    j["outputs"] = out;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    write_file(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  }
};

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

void set_threads(int threads) {
  if (threads < 0) throw UsageError("--threads must be >= 0");
  if (threads > 0) omp_set_num_threads(threads);
}

// ---- shared loaders --------------------------------------------------------

struct RoadArgs {
  std::string nodes, edges, osm, highways;
  std::string sensors;

  void add(FlagSet& f) {
    f.option("nodes", nodes, "nodes CSV (node_id,lat,lon)");
    f.option("edges", edges, "edges CSV (edge_id,from_node,to_node,length_miles,is_freeway)");
    f.option("osm", osm, "OpenStreetMap XML instead of nodes/edges CSVs");
    f.option("highways", highways, "comma-separated highway tag filter for --osm (default: drivable classes)");
    f.option("sensors", sensors, "sensors CSV (sensor_id,lat,lon)")->required();
  }

  std::vector<std::string> inputs() const { return {nodes, edges, osm, sensors}; }

  RoadGraph graph() const {
    if (!osm.empty()) {
      if (!nodes.empty() || !edges.empty()) throw UsageError("give either --osm or --nodes/--edges, not both");
      std::set<std::string> filter = default_highway_filter();
      if (!highways.empty()) {
        filter.clear();
        for (const auto h : split(highways, ',')) filter.emplace(trim(h));
      }
      auto in = open_in(osm);
      return stage("osm", [&] { return parse_osm_xml(in, filter); });
    }
    if (nodes.empty() || edges.empty()) throw UsageError("road network needs --nodes and --edges (or --osm)");
    auto n = open_in(nodes);
    auto e = open_in(edges);
    return stage("roads", [&] { return parse_edge_csv(n, e); });
  }

  std::vector<Sensor> snapped(const RoadGraph& g) const {
    auto in = open_in(sensors);
    auto s = stage("sensors", [&] { return parse_sensor_csv(in); });
    return stage("snap", [&] { return snap_sensors(g, std::move(s)); });
  }
};

struct GridArgs {
  double cell_miles = 2.0;
  double padding_miles = 2.0;
  std::string coeffs = "1.0,0.9,0.8";
  std::uint32_t reps = 5;

  void add(FlagSet& f) {
    f.option("cell-miles", cell_miles, "grid cell size in miles");
    f.option("padding-miles", padding_miles, "grid padding around the sensors in miles");
    f.option("coeffs", coeffs, "freeway coefficients");
    f.option("reps", reps, "endpoint draws per ordered cell pair");
  }

  PathGenConfig config(std::uint64_t seed, int threads) const {
    PathGenConfig c;
    c.coefficients = parse_double_list(coeffs);
    c.repetitions = reps;
    c.seed = seed;
    c.threads = threads;
    return c;
  }
};

PathSet generate_paths(const RoadGraph& g, const std::vector<Sensor>& sensors, const GridArgs& grid,
                       std::uint64_t seed, int threads) {
  const auto gr = stage("grid", [&] { return make_grid(sensors, grid.cell_miles, grid.padding_miles); });
  return stage("paths", [&] { return generate_path_set(g, gr, sensors, grid.config(seed, threads)); });
}

SparseMatrix load_adjacency(const std::string& path, std::size_t n) {
  auto in = open_in(path);
  auto a = stage("adjacency", [&] { return read_sparse(in); });
  if (a.rows() != a.cols()) throw InputError("adjacency: matrix is not square");
  if (a.rows() != n)
    throw InputError("adjacency has N=" + std::to_string(a.rows()) + " but the traffic/model has N=" +
                     std::to_string(n));
  return a;
}

ActivityTable load_activity(const std::string& path, bool center) {
  auto in = open_in(path);
  auto raw = stage("activity", [&] { return read_activity_csv(in); });
  return normalize_activity(raw, center);
}

/// Model, scaler and sensor list restored from a checkpoint and its manifest.
struct LoadedModel {
  models::ModelConfig config;
  training::Scaler scaler;
  std::vector<std::string> sensor_ids;
  bool activity_center = true;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  std::unique_ptr<models::Model> model;
  std::optional<ActivityTable> activity;
};

LoadedModel load_model(const std::string& checkpoint, const std::string& adjacency, const std::string& activity) {
  LoadedModel m;
  json j;
  {
    auto in = open_in(manifest_path(checkpoint));
    try {
      j = json::parse(in);
      m.config = models::config_from_json(j.at("model"));
      m.scaler = {j.at("scaler").at("mean").get<double>(), j.at("scaler").at("std").get<double>()};
      m.sensor_ids = j.at("sensors").get<std::vector<std::string>>();
      m.activity_center = j.at("activity_center").get<bool>();
      m.train_fraction = j.at("split").at("train").get<double>();
      m.val_fraction = j.at("split").at("val").get<double>();
    } catch (const json::exception& e) {
      throw InputError("checkpoint manifest " + manifest_path(checkpoint) + ": " + e.what());
    }
  }
  models::GraphOperators graph;
  if (m.config.uses_graph()) {
    if (adjacency.empty()) throw UsageError(models::to_string(m.config.architecture) + " needs --adjacency");
    graph = models::GraphOperators::from(adjacency_from_matrix(load_adjacency(adjacency, m.config.n_sensors)));
  }
  if (m.config.embedding == models::EmbeddingMode::activity) {
    if (activity.empty()) throw UsageError("activity embedding needs --activity");
    m.activity = load_activity(activity, m.activity_center);
    if (m.activity->categories() != m.config.n_categories)
      throw InputError("activity table has " + std::to_string(m.activity->categories()) +
                       " categories, model expects " + std::to_string(m.config.n_categories));
  }
  m.model = std::make_unique<models::Model>(m.config, std::move(graph), 0);
  auto in = open_in(checkpoint);
  stage("checkpoint", [&] { models::load_checkpoint(m.model->params(), in); });
  return m;
}

training::TrafficSeries load_series(const std::string& path, const std::vector<std::string>* ids) {
  auto in = open_in(path);
  return stage("traffic", [&] { return training::load_traffic_csv(in, ids); });
}

std::string describe_adjacency(const SensorAdjacency& adj) {
  const auto bc = betweenness_centrality(adj.combined);
  std::ostringstream s;
  s << "N=" << adj.size() << " NNZ=" << adj.nnz() << " mean_betweenness=" << format_double(bc.mean);
  return s.str();
}

// ---- commands --------------------------------------------------------------

void add_synth_data(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("synth-data", "Write the synthetic ring fixture (roads, sensors, traffic, survey)");
  auto f = std::make_shared<FlagSet>(sub);
  auto o = std::make_shared<std::tuple<std::string, training::SyntheticConfig>>();
  auto& [dir, sc] = *o;
  dir = "ring";
  f->option("out-dir", dir, "output directory");
  f->option("sensors", sc.n_sensors, "number of ring sensors");
  f->option("days", sc.n_days, "days of 5-minute traffic");
  f->option("seed", sc.seed, "random seed");
  f->option("survey-rows", sc.survey_rows, "activity survey rows");
  f->option("missing-rate", sc.missing_rate, "fraction of traffic entries left blank");
  f->option("noise-mph", sc.noise_mph, "measurement noise std (mph)");
  sub->callback([f, o, &out] {
    const auto& [dir, sc] = *o;
    const auto b = training::make_synthetic_dataset(sc);
    const std::string nodes = dir + "/nodes.csv", edges = dir + "/edges.csv", sensors = dir + "/sensors.csv",
                      traffic = dir + "/traffic.csv", survey = dir + "/survey.csv";
    {
      auto n = open_out(nodes);
      auto e = open_out(edges);
      write_edge_csv(b.graph, n, e);
    }
    write_file(sensors, [&](std::ostream& s) { write_sensor_csv(b.sensors, s); });
    write_file(traffic, [&](std::ostream& s) { training::write_traffic_csv(b.series, s); });
    write_file(survey, [&](std::ostream& s) { write_survey_csv(b.survey, s); });
    Manifest m{"synth-data", f->resolved(), sc.seed, {}, {nodes, edges, sensors, traffic, survey}};
    m.write(dir + "/synth-data.manifest.json");
    out << "wrote " << b.series.sensors() << " sensors x " << b.series.steps() << " steps to " << dir << '\n';
  });
}

void add_gen_paths(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("gen-paths", "Generate A* travel paths between grid cells");
  auto f = std::make_shared<FlagSet>(sub);
  struct Opts {
    RoadArgs roads;
    GridArgs grid;
    std::string out;
    std::uint64_t seed = 0;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  o->roads.add(*f);
  o->grid.add(*f);
  f->option("out", o->out, "path set output")->required();
  f->option("seed", o->seed, "random seed");
  f->option("threads", o->threads, "OpenMP threads (0 = default)");
  sub->callback([f, o, &out] {
    set_threads(o->threads);
    const auto g = o->roads.graph();
    const auto sensors = o->roads.snapped(g);
    const auto paths = generate_paths(g, sensors, o->grid, o->seed, o->threads);
    write_file(o->out, [&](std::ostream& s) { write_path_set(paths, g, s); });
    Manifest{"gen-paths", f->resolved(), o->seed, o->roads.inputs(), {o->out}}.write(manifest_path(o->out));
    out << "paths=" << paths.paths().size() << " unreachable=" << paths.unreachable << '\n';
  });
}

void add_build_graph(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("build-graph", "Build the sensor adjacency A = A^(D) * A^(S)");
  auto f = std::make_shared<FlagSet>(sub);
  struct Opts {
    RoadArgs roads;
    GridArgs grid;
    std::string paths, out_dir;
    double sigma = kDefaultSigmaMiles, kappa = kDefaultKappaMiles;
    std::uint64_t seed = 0;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  o->roads.add(*f);
  o->grid.add(*f);
  f->option("paths", o->paths, "reuse an existing path set instead of generating one");
  f->option("out-dir", o->out_dir, "output directory")->required();
  f->option("sigma", o->sigma, "Gaussian kernel bandwidth (miles)");
  f->option("kappa", o->kappa, "distance cutoff (miles)");
  f->option("seed", o->seed, "random seed for path generation");
  f->option("threads", o->threads, "OpenMP threads (0 = default)");
  sub->callback([f, o, &out] {
    set_threads(o->threads);
    const auto g = o->roads.graph();
    const auto sensors = o->roads.snapped(g);
    std::vector<std::string> outputs;
    PathSet paths;
    if (!o->paths.empty()) {
      auto in = open_in(o->paths);
      paths = stage("paths", [&] { return read_path_set(in, g, sensors); });
    } else {
      paths = generate_paths(g, sensors, o->grid, o->seed, o->threads);
      const auto p = o->out_dir + "/paths.txt";
      write_file(p, [&](std::ostream& s) { write_path_set(paths, g, s); });
      outputs.push_back(p);
    }
    auto dist = stage("distance",
                      [&] { return distance_adjacency(g, sensors, o->sigma, o->kappa, o->threads); });
    auto cooc = stage("cooccurrence", [&] { return cooccurrence_matrix(paths); });
    const auto adj = stage("combine", [&] { return combine_adjacency(dist, cooc, o->sigma, o->kappa); });
    const auto d = o->out_dir + "/distance.txt", c = o->out_dir + "/cooccurrence.txt",
               a = o->out_dir + "/adjacency.txt";
    write_file(d, [&](std::ostream& s) { write_sparse(adj.dist, s); });
    write_file(c, [&](std::ostream& s) { write_sparse(adj.cooc, s); });
    write_file(a, [&](std::ostream& s) { write_sparse(adj.combined, s); });
    outputs.insert(outputs.end(), {d, c, a});
    auto inputs = o->roads.inputs();
    inputs.push_back(o->paths);
    const auto summary = describe_adjacency(adj);
    Manifest m{"build-graph", f->resolved(), o->seed, inputs, outputs};
    std::vector<std::string> ids;
    for (const auto& s : sensors) ids.push_back(s.id);
    m.extra["sensors"] = ids;
    m.extra["nnz"] = adj.nnz();
    m.write(manifest_path(a));
    out << summary << '\n';
  });
}

void add_build_activity(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("build-activity", "Smooth a survey into a weekly activity table");
  auto f = std::make_shared<FlagSet>(sub);
  struct Opts {
    std::string in, out;
    double sigma = 2.0;
  };
  auto o = std::make_shared<Opts>();
  f->option("in", o->in, "survey CSV (category,weekday,start_minute)")->required();
  f->option("out", o->out, "activity CSV output")->required();
  f->option("sigma", o->sigma, "smoothing bandwidth in 5-minute bins");
  sub->callback([f, o, &out] {
    auto in = open_in(o->in);
    const auto rows = stage("survey", [&] { return parse_survey_csv(in); });
    const auto table = smooth_histogram(build_histogram(rows), o->sigma);
    write_file(o->out, [&](std::ostream& s) { write_activity_csv(table, s); });
    Manifest{"build-activity", f->resolved(), 0, {o->in}, {o->out}}.write(manifest_path(o->out));
    out << "rows=" << rows.size() << " categories=" << table.categories() << '\n';
  });
}

struct ModelArgs {
  std::string arch = "GCRN", embedding = "AE";
  bool no_se = false;
  std::size_t d_model = 64, p = 12, q = 12, k = 1, layers = 3, heads = 8, d_key = 8;

  void add(FlagSet& f) {
    f.option("arch", arch, "GCRN, GCTF, LSTM or TF");
    f.option("embedding", embedding, "AE (activity), TE (timestamp) or none");
    f.flag("no-se", no_se, "disable the sensor embedding");
    f.option("d-model", d_model, "hidden width D");
    f.option("p", p, "history steps");
    f.option("q", q, "forecast steps");
    f.option("k", k, "diffusion steps K");
    f.option("layers", layers, "transformer layers");
    f.option("heads", heads, "attention heads");
    f.option("d-key", d_key, "attention key width per head");
  }

  models::ModelConfig config(std::size_t n, std::size_t categories) const {
    models::ModelConfig c;
    c.architecture = models::parse_architecture(arch);
    c.embedding = models::parse_embedding_mode(embedding);
    c.sensor_embedding = !no_se;
    c.n_sensors = n;
    c.d_model = d_model;
    c.p = p;
    c.q = q;
    c.k_diffusion = k;
    c.n_layers = layers;
    c.n_heads = heads;
    c.d_key = d_key;
    c.n_categories = categories;
    c.validate();
    return c;
  }
};

std::string report_comment(const LoadedModel& m, const std::string& range) {
  std::ostringstream s;
  s << std::setprecision(6) << "# split=" << m.train_fraction << '/' << m.val_fraction << '/'
    << 1.0 - m.train_fraction - m.val_fraction << " range=" << range
    << " loss=masked_mae units=mph model=" << models::to_string(m.config.architecture) << '\n';
  return s.str();
}

void add_train(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("train", "Train a forecaster");
  auto f = std::make_shared<FlagSet>(sub);
  struct Opts {
    std::string traffic, adjacency, activity, out, log;
    ModelArgs model;
    training::TrainConfig train;
    bool no_center = false, no_time = false;
    double train_fraction = 0.7, val_fraction = 0.1;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  f->option("traffic", o->traffic, "traffic CSV (timestamp,<sensor ids>)")->required();
  f->option("adjacency", o->adjacency, "adjacency from build-graph (graph architectures)");
  f->option("activity", o->activity, "activity CSV from build-activity (AE embedding)");
  f->option("out", o->out, "checkpoint output")->required();
  f->option("log", o->log, "JSON-lines training log (default <out>.log.jsonl)");
  o->model.add(*f);
  f->option("batch", o->train.batch_size, "batch size");
  f->option("lr", o->train.lr, "initial Adam learning rate");
  f->option("epochs", o->train.max_epochs, "maximum epochs");
  f->option("patience", o->train.patience, "early-stopping patience (epochs)");
  f->option("lr-patience", o->train.lr_patience, "non-improving epochs before the lr is cut");
  f->option("lr-factor", o->train.lr_factor, "lr multiplier on a cut");
  f->option("stride", o->train.window_stride, "step between training windows");
  f->option("sampling-k", o->train.sampling_k, "inverse-sigmoid scheduled sampling k (0 = teacher forcing)");
  f->option("seed", o->train.seed, "random seed");
  f->option("train-fraction", o->train_fraction, "chronological training share");
  f->option("val-fraction", o->val_fraction, "chronological validation share");
  f->flag("no-center", o->no_center, "scale activity by its std without subtracting the mean");
  f->flag("no-time", o->no_time, "log seconds as 0 so logs are byte-comparable");
  f->option("threads", o->threads, "OpenMP threads (0 = default)");
  sub->callback([f, o, &out] {
    set_threads(o->threads);
    const auto series = load_series(o->traffic, nullptr);
    const std::size_t n = series.sensors();
    std::optional<ActivityTable> activity;
    const auto mode = models::parse_embedding_mode(o->model.embedding);
    if (mode == models::EmbeddingMode::activity) {
      if (o->activity.empty()) throw UsageError("activity embedding needs --activity");
      activity = load_activity(o->activity, !o->no_center);
    }
    const auto config = o->model.config(n, activity ? activity->categories() : kDefaultActivityCategories);
    models::GraphOperators graph;
    if (config.uses_graph()) {
      if (o->adjacency.empty()) throw UsageError(o->model.arch + " needs --adjacency");
      graph = models::GraphOperators::from(adjacency_from_matrix(load_adjacency(o->adjacency, n)));
    }
    const auto split = stage("split", [&] {
      return training::split_dataset(series, config.p, config.q, o->train_fraction, o->val_fraction);
    });
    const training::Dataset data(series, split, config.embedding, activity);
    models::Model model(config, std::move(graph), derive_seed(o->train.seed, 0x4d4f44));
    out << "parameters=" << model.parameter_count() << '\n';

    auto tc = o->train;
    tc.record_time = !o->no_time;
    const std::string log_path = o->log.empty() ? o->out + ".log.jsonl" : o->log;
    auto log = open_out(log_path);
    const auto result = training::train(model, data, tc, [&](const training::EpochRecord& r) {
      log << training::to_jsonl(r) << '\n';
      log.flush();
    });
    log.close();
    write_file(o->out, [&](std::ostream& s) { s << result.best_checkpoint; });

    Manifest m{"train", f->resolved(), o->train.seed, {o->traffic, o->adjacency, o->activity}, {o->out, log_path}};
    m.extra["model"] = models::to_json(config);
    m.extra["parameters"] = model.parameter_count();
    m.extra["scaler"] = {{"mean", split.scaler.mean}, {"std", split.scaler.std}};
    m.extra["split"] = {{"train", o->train_fraction}, {"val", o->val_fraction}};
    m.extra["activity_center"] = !o->no_center;
    m.extra["sensors"] = series.sensor_ids;
    m.extra["best_epoch"] = result.best_epoch;
    m.extra["best_val_mae"] = result.best_val_mae;
    m.write(manifest_path(o->out));
    out << "best_epoch=" << result.best_epoch << " val_mae=" << format_double(result.best_val_mae) << '\n';
  });
}

void add_eval(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("eval", "Masked MAE/RMSE/MAPE at horizon steps 3, 6 and Q");
  auto f = std::make_shared<FlagSet>(sub);
  struct Opts {
    std::string checkpoint, traffic, adjacency, activity, out, range = "test", baseline;
    int threads = 0;
  };
  auto o = std::make_shared<Opts>();
  f->option("checkpoint", o->checkpoint, "checkpoint from train")->required();
  f->option("traffic", o->traffic, "traffic CSV")->required();
  f->option("adjacency", o->adjacency, "adjacency (graph architectures)");
  f->option("activity", o->activity, "activity CSV (AE embedding)");
  f->option("out", o->out, "report CSV output")->required();
  f->option("split", o->range, "test, val or train")->check(CLI::IsMember({"test", "val", "train"}));
  f->option("baseline", o->baseline, "also report a baseline (last-repeat)")->check(CLI::IsMember({"last-repeat"}));
  f->option("threads", o->threads, "OpenMP threads (0 = default)");
  sub->callback([f, o, &out] {
    set_threads(o->threads);
    auto m = load_model(o->checkpoint, o->adjacency, o->activity);
    const auto series = load_series(o->traffic, &m.sensor_ids);
    auto split = training::split_dataset(series, m.config.p, m.config.q, m.train_fraction, m.val_fraction);
    split.scaler = m.scaler;
    const training::Dataset data(series, split, m.config.embedding, m.activity);
    const auto range = o->range == "test" ? split.test : o->range == "val" ? split.val : split.train;
    const auto starts = split.windows(range);
    if (starts.empty()) throw InputError("the " + o->range + " range holds no complete window");
    const auto truth = training::window_truth(data, starts);
    const auto steps = training::report_steps(m.config.q);
    const auto rows = training::masked_metrics(training::predict(*m.model, data, starts), truth.values,
                                               truth.observed, m.config.q, data.sensors(), steps);
    write_file(o->out, [&](std::ostream& s) {
      s << report_comment(m, o->range);
      if (o->baseline.empty()) {
        training::write_report_csv(rows, s);
        return;
      }
      std::ostringstream model_rows, base_rows;
      training::write_report_csv(rows, model_rows, "model", models::to_string(m.config.architecture));
      const auto base = training::masked_metrics(training::last_repeat(data, starts), truth.values, truth.observed,
                                                 m.config.q, data.sensors(), steps);
      training::write_report_csv(base, base_rows, "model", "last-repeat");
      s << model_rows.str();
      const auto b = base_rows.str();
      s << b.substr(b.find('\n') + 1);  // drop the repeated header
    });
    Manifest{"eval", f->resolved(), 0, {o->checkpoint, o->traffic, o->adjacency, o->activity}, {o->out}}.write(
        manifest_path(o->out));
    for (const auto& r : rows)
      out << "step " << r.step << ": mae=" << format_double(r.mae) << " rmse=" << format_double(r.rmse)
          << " mape=" << format_double(r.mape_percent) << "%\n";
  });
}

void add_predict(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("predict", "Q-step speed forecast from a given history start");
  auto f = std::make_shared<FlagSet>(sub);
  struct Opts {
    std::string checkpoint, traffic, adjacency, activity, out, start;
  };
  auto o = std::make_shared<Opts>();
  f->option("checkpoint", o->checkpoint, "checkpoint from train")->required();
  f->option("traffic", o->traffic, "traffic CSV holding the history")->required();
  f->option("adjacency", o->adjacency, "adjacency (graph architectures)");
  f->option("activity", o->activity, "activity CSV (AE embedding)");
  f->option("start", o->start, "timestamp of the first of the P history steps")->required();
  f->option("out", o->out, "prediction CSV output")->required();
  sub->callback([f, o, &out] {
    auto m = load_model(o->checkpoint, o->adjacency, o->activity);
    const auto series = load_series(o->traffic, &m.sensor_ids);
    const auto start = Timestamp::parse(o->start);
    const auto it = std::find(series.timestamps.begin(), series.timestamps.end(), start);
    if (it == series.timestamps.end()) throw InputError("start " + o->start + " is not in the traffic file");
    const auto s0 = static_cast<std::size_t>(it - series.timestamps.begin());
    const auto& c = m.config;
    const std::size_t n = c.n_sensors;
    if (s0 + c.p > series.steps())
      throw InputError("traffic file ends before the " + std::to_string(c.p) + "-step history");
    models::Batch b;
    b.size = 1;
    b.history = ad::Tensor(ad::Shape{1, c.p, n});
    for (std::size_t t = 0; t < c.p; ++t)
      for (std::size_t i = 0; i < n; ++i)
        if (series.is_observed(s0 + t, i)) b.history[t * n + i] = m.scaler.apply(series.value(s0 + t, i));
    b.target = ad::Tensor(ad::Shape{1, c.q, n});
    b.mask = ad::Tensor(ad::Shape{1, c.q, n});
    const auto rows = training::context_window(c.embedding, m.activity ? &*m.activity : nullptr, start, c.p, c.q);
    if (!rows.empty()) {
      b.context = ad::Tensor(ad::Shape{1, c.p + c.q, c.context_width()});
      std::copy(rows.begin(), rows.end(), b.context.data());
    }
    ad::Tape tape;
    const auto y = m.model->forward(tape, b);
    write_file(o->out, [&](std::ostream& s) {
      s << "timestamp";
      for (const auto& id : m.sensor_ids) s << ',' << id;
      s << '\n';
      for (std::size_t q = 0; q < c.q; ++q) {
        s << start.plus_minutes(static_cast<std::int64_t>(c.p + q) * kBinMinutes).iso();
        for (std::size_t i = 0; i < n; ++i) s << ',' << format_double(m.scaler.invert(y.value()[q * n + i]));
        s << '\n';
      }
    });
    Manifest{"predict", f->resolved(), 0, {o->checkpoint, o->traffic, o->adjacency, o->activity}, {o->out}}.write(
        manifest_path(o->out));
    out << "wrote " << c.q << " steps to " << o->out << '\n';
  });
}

void add_simulate(CLI::App& app, std::ostream& out) {
  auto* sub = app.add_subcommand("simulate", "Activity-response simulation: constant speed, two activity windows");
  auto f = std::make_shared<FlagSet>(sub);
  struct Opts {
    std::string checkpoint, adjacency, activity, out;
    std::string first = "06:35-08:20", second = "16:45-18:30";
    int weekday = 0;
    double speed = 30.0;
    std::size_t step = 3;
  };
  auto o = std::make_shared<Opts>();
  f->option("checkpoint", o->checkpoint, "checkpoint from train")->required();
  f->option("adjacency", o->adjacency, "adjacency (graph architectures)");
  f->option("activity", o->activity, "activity CSV (AE embedding)");
  f->option("out", o->out, "per-sensor delta CSV output")->required();
  f->option("window1", o->first, "first scenario window HH:MM-HH:MM");
  f->option("window2", o->second, "second scenario window HH:MM-HH:MM");
  f->option("weekday", o->weekday, "weekday of both windows (Monday = 0)");
  f->option("speed", o->speed, "constant history speed (mph)");
  f->option("step", o->step, "horizon step reported (3 = 15 minutes)");
  sub->callback([f, o, &out] {
    auto m = load_model(o->checkpoint, o->adjacency, o->activity);
    const auto w1 = ScenarioWindow::parse(o->first), w2 = ScenarioWindow::parse(o->second);
    const auto r = simulate_activity_response(*m.model, m.scaler, m.activity ? &*m.activity : nullptr,
                                              scenario_start(o->weekday, w1, m.config.p),
                                              scenario_start(o->weekday, w2, m.config.p), o->speed, o->step);
    write_file(o->out, [&](std::ostream& s) {
      s << "sensor_id,window1_mph,window2_mph,delta_mph\n";
      for (std::size_t i = 0; i < r.delta.size(); ++i)
        s << m.sensor_ids[i] << ',' << format_double(r.first[i]) << ',' << format_double(r.second[i]) << ','
          << format_double(r.delta[i]) << '\n';
    });
    Manifest{"simulate", f->resolved(), 0, {o->checkpoint, o->adjacency, o->activity}, {o->out}}.write(
        manifest_path(o->out));
    out << "max_abs_delta=" << format_double(r.max_abs_delta()) << '\n';
  });
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Urban-activity graph traffic forecasting pipeline", "uagc"};
  app.require_subcommand(1);
  add_synth_data(app, out);
  add_gen_paths(app, out);
  add_build_graph(app, out);
  add_build_activity(app, out);
  add_train(app, out);
  add_eval(app, out);
  add_predict(app, out);
  add_simulate(app, out);
  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[2]: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const Error& e) {
    const int code = static_cast<int>(e.kind());
    err << "error[" << code << "]: " << one_line(e.what()) << '\n';
    return code;
  } catch (const fs::filesystem_error& e) {
    err << "error[2]: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error[1]: " << one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace uagc::cli
