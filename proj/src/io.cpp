#include "netid/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "netid/error.hpp"

namespace netid {

using nlohmann::json;

namespace {

// Line of the first occurrence of "key" in the source text (1-based), or 0.
int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigReader {
 public:
  ConfigReader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    const int line = line_of_key(text_, key);
    throw Error(ErrorCode::kConfig,
                source_ + ":" + (line > 0 ? std::to_string(line) : std::string("?")) + ": " + message);
  }

  template <class T>
  T get(const json& obj, const std::string& key, const T& fallback) const {
    if (!obj.contains(key)) return fallback;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      fail(key, "'" + key + "' has the wrong type");
    }
  }

  template <class T>
  T require(const json& obj, const std::string& key) const {
    if (!obj.contains(key)) fail(key, "missing required key '" + key + "'");
    return get<T>(obj, key, T{});
  }

 private:
  const std::string& text_;
  std::string source_;
};

Eigen::MatrixXi int_matrix(const ConfigReader& rd, const json& j, const std::string& key, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    rd.fail(key, "'" + key + "' must be a " + std::to_string(rows) + " x " + std::to_string(cols) + " integer array");
  }
  Eigen::MatrixXi m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      rd.fail(key, "'" + key + "' must be a " + std::to_string(rows) + " x " + std::to_string(cols) + " integer array");
    }
    for (int c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number_integer()) rd.fail(key, "'" + key + "' entries must be integers");
      m(i, c) = row[static_cast<std::size_t>(c)].get<int>();
    }
  }
  return m;
}

json int_matrix_json(const Eigen::MatrixXi& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    out.push_back(row);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string provenance_line(const char* kind, const Provenance& prov) {
  return std::string("# netid ") + kind + " config_hash=" + prov.config_hash + " seed=" + std::to_string(prov.seed) + "\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = split(line, ',');
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::kSchema, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                          std::to_string(t.header.size()) + " columns");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kSchema, path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(ErrorCode::kSchema, path.string() + ": missing header");
  return t;
}

void expect_header(const CsvTable& t, const std::vector<std::string>& expected, const std::filesystem::path& path) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::kSchema, path.string() + ": header must be '" + want + "'");
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][0] != static_cast<double>(i + 1)) {
      throw Error(ErrorCode::kSchema, path.string() + ": sample index must run 1..N");
    }
  }
}

}  // namespace

ParameterVector ExperimentConfig::truth() const {
  if (theta_true) return *theta_true;
  if (plants.empty()) throw Error(ErrorCode::kEvaluation, "config has no ground truth (plants or theta_true)");
  std::vector<SubsystemModel> models;
  for (const auto& p : plants) {
    const auto d = zoh_discretize(p, ts);
    models.push_back({d.a, d.b, {}});
  }
  return pack_theta(models);
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto pos = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
    throw Error(ErrorCode::kConfig, source + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
  }
  ConfigReader rd(text, source);
  if (!root.is_object()) throw Error(ErrorCode::kConfig, source + ":1: top level must be an object");
  ExperimentConfig c;

  if (!root.contains("topology")) rd.fail("topology", "missing required key 'topology'");
  const json& tj = root["topology"];
  NetworkTopology& t = c.topology;
  t.subsystems = rd.require<int>(tj, "subsystems");
  if (t.subsystems < 1) rd.fail("subsystems", "'subsystems' must be >= 1");
  t.exogenous = rd.require<int>(tj, "exogenous");
  if (t.exogenous < 0) rd.fail("exogenous", "'exogenous' must be >= 0");
  if (!tj.contains("lambda")) rd.fail("lambda", "missing required key 'lambda'");
  t.lambda = int_matrix(rd, tj["lambda"], "lambda", t.subsystems, t.subsystems);
  if (!tj.contains("omega")) rd.fail("omega", "missing required key 'omega'");
  t.omega = int_matrix(rd, tj["omega"], "omega", t.subsystems, t.exogenous);
  for (const auto& name : rd.require<std::vector<std::string>>(tj, "observed")) {
    try {
      t.observed.push_back(SignalId::parse(name));
    } catch (const Error& e) {
      rd.fail("observed", e.what());
    }
  }
  if (!tj.contains("orders") || !tj["orders"].is_array()) rd.fail("orders", "'orders' must be an array");
  for (const auto& oj : tj["orders"]) {
    SubsystemOrders o;
    o.na = rd.get<int>(oj, "na", 0);
    o.nb = rd.get<int>(oj, "nb", 0);
    o.nc = rd.get<int>(oj, "nc", 0);
    t.orders.push_back(o);
  }
  try {
    t.validate();
  } catch (const Error& e) {
    rd.fail("topology", e.what());
  }

  if (root.contains("plants")) {
    for (const auto& pj : root["plants"]) {
      ContinuousPlant p;
      p.num = Polynomial(rd.require<std::vector<double>>(pj, "num"));
      p.den = Polynomial(rd.require<std::vector<double>>(pj, "den"));
      c.plants.push_back(p);
    }
    if (static_cast<int>(c.plants.size()) != t.subsystems) rd.fail("plants", "one plant per subsystem required");
  }
  if (root.contains("theta_true")) {
    const auto v = rd.get<std::vector<double>>(root, "theta_true", {});
    if (static_cast<int>(v.size()) != t.theta_size()) rd.fail("theta_true", "'theta_true' length does not match the orders");
    c.theta_true = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  const long long n = rd.get<long long>(root, "N", 500);
  if (n < 1) rd.fail("N", "'N' must be positive");
  c.n = static_cast<std::size_t>(n);
  c.ts = rd.get<double>(root, "Ts", 0.5);
  if (!(c.ts > 0.0)) rd.fail("Ts", "'Ts' must be positive");
  c.lambda_true = rd.get<double>(root, "lambda_true", 0.1);
  if (!(c.lambda_true > 0.0)) rd.fail("lambda_true", "'lambda_true' must be positive");
  c.seed = rd.get<std::uint64_t>(root, "seed", 1);

  if (root.contains("optimizer")) {
    const json& oj = root["optimizer"];
    OptimizerSettings& s = c.optimizer;
    s.max_iter = rd.get<int>(oj, "max_iter", s.max_iter);
    s.grad_tol = rd.get<double>(oj, "grad_tol", s.grad_tol);
    s.step_init = rd.get<double>(oj, "step_init", s.step_init);
    s.armijo_c = rd.get<double>(oj, "armijo_c", s.armijo_c);
    s.shrink = rd.get<double>(oj, "shrink", s.shrink);
    s.max_backtracks = rd.get<int>(oj, "max_backtracks", s.max_backtracks);
    s.warm_start_step = rd.get<bool>(oj, "warm_start_step", s.warm_start_step);
    s.seed = rd.get<std::uint64_t>(oj, "seed", c.seed);
    try {
      s.validate();
    } catch (const Error& e) {
      rd.fail("optimizer", e.what());
    }
  } else {
    c.optimizer.seed = c.seed;
  }
  c.n_starts = rd.get<int>(root, "n_starts", c.n_starts);
  if (c.n_starts < 1) rd.fail("n_starts", "'n_starts' must be >= 1");
  const auto init = rd.get<std::string>(root, "init_strategy", "random-stable");
  if (init == "random-stable") {
    c.init_strategy = InitStrategy::kRandomStable;
  } else if (init == "indirect") {
    c.init_strategy = InitStrategy::kIndirect;
  } else if (init == "file") {
    c.init_strategy = InitStrategy::kFile;
    c.init_file = rd.get<std::string>(root, "init_file", "");
    if (c.init_file.empty()) rd.fail("init_strategy", "init_strategy 'file' needs 'init_file'");
  } else {
    rd.fail("init_strategy", "'init_strategy' must be random-stable, indirect or file");
  }
  const auto dof = rd.get<std::string>(root, "variance_dof", "observed");
  if (dof == "observed") {
    c.dof = VarianceDof::kObserved;
  } else if (dof == "rows") {
    c.dof = VarianceDof::kRows;
  } else {
    rd.fail("variance_dof", "'variance_dof' must be observed or rows");
  }
  if (root.contains("evaluation")) {
    const json& ej = root["evaluation"];
    if (ej.contains("seed")) c.evaluation_seed = rd.get<std::uint64_t>(ej, "seed", 0);
    const auto noise = rd.get<std::string>(ej, "noise", "none");
    if (noise == "none") {
      c.evaluation_noise = EvaluationNoise::kNone;
    } else if (noise == "shared") {
      c.evaluation_noise = EvaluationNoise::kShared;
    } else {
      rd.fail("noise", "'noise' must be none or shared");
    }
    try {
      c.fit_variant = parse_fit_variant(rd.get<std::string>(ej, "fit_variant", "standard"));
    } catch (const Error& e) {
      rd.fail("fit_variant", e.what());
    }
  }
  c.output_dir = rd.get<std::string>(root, "output_dir", c.output_dir);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path), path.string());
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  json t;
  t["subsystems"] = c.topology.subsystems;
  t["exogenous"] = c.topology.exogenous;
  t["lambda"] = int_matrix_json(c.topology.lambda);
  t["omega"] = int_matrix_json(c.topology.omega);
  json obs = json::array();
  for (const auto& id : c.topology.observed) obs.push_back(id.name());
  t["observed"] = obs;
  json orders = json::array();
  for (const auto& o : c.topology.orders) orders.push_back({{"na", o.na}, {"nb", o.nb}, {"nc", o.nc}});
  t["orders"] = orders;
  j["topology"] = t;
  if (!c.plants.empty()) {
    json plants = json::array();
    for (const auto& p : c.plants) plants.push_back({{"num", p.num.coeffs}, {"den", p.den.coeffs}});
    j["plants"] = plants;
  }
  if (c.theta_true) j["theta_true"] = vector_to_json(*c.theta_true);
  j["N"] = c.n;
  j["Ts"] = c.ts;
  j["lambda_true"] = c.lambda_true;
  j["seed"] = c.seed;
  const auto& s = c.optimizer;
  j["optimizer"] = {{"max_iter", s.max_iter},         {"grad_tol", s.grad_tol}, {"step_init", s.step_init},
                    {"armijo_c", s.armijo_c},         {"shrink", s.shrink},     {"max_backtracks", s.max_backtracks},
                    {"warm_start_step", s.warm_start_step}, {"seed", s.seed}};
  j["n_starts"] = c.n_starts;
  j["init_strategy"] = c.init_strategy == InitStrategy::kRandomStable ? "random-stable"
                       : c.init_strategy == InitStrategy::kIndirect   ? "indirect"
                                                                      : "file";
  if (c.init_strategy == InitStrategy::kFile) j["init_file"] = c.init_file;
  j["variance_dof"] = c.dof == VarianceDof::kObserved ? "observed" : "rows";
  json e;
  if (c.evaluation_seed) e["seed"] = *c.evaluation_seed;
  e["noise"] = c.evaluation_noise == EvaluationNoise::kNone ? "none" : "shared";
  e["fit_variant"] = to_string(c.fit_variant);
  j["evaluation"] = e;
  j["output_dir"] = c.output_dir;
  return j;
}

ExperimentConfig default_experiment_config(const std::vector<std::string>& observed) {
  ExperimentConfig c;
  c.topology = experiment_topology(observed);
  c.plants = experiment_plants();
  c.optimizer.seed = c.seed;
  return c;
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp);
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename onto " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_csv(const Dataset& data, const NetworkTopology& topology, const Provenance& prov) {
  std::string out = provenance_line("dataset", prov);
  out += "k";
  for (int q = 0; q < topology.exogenous; ++q) out += ",r" + std::to_string(q + 1);
  for (const auto& id : topology.observed) out += "," + id.name();
  out += "\n";
  for (Eigen::Index k = 0; k < data.r.rows(); ++k) {
    out += std::to_string(k + 1);
    for (Eigen::Index q = 0; q < data.r.cols(); ++q) out += "," + fmt(data.r(k, q));
    for (Eigen::Index j = 0; j < data.observed.cols(); ++j) out += "," + fmt(data.observed(k, j));
    out += "\n";
  }
  return out;
}

std::string ground_truth_csv(const Matrix& state, const NetworkTopology& topology, const Provenance& prov) {
  std::string out = provenance_line("ground_truth", prov);
  out += "k";
  for (int s = 0; s < 2 * topology.subsystems; ++s) out += "," + SignalId::from_natural_index(s, topology.subsystems).name();
  out += "\n";
  for (Eigen::Index k = 0; k < state.rows(); ++k) {
    out += std::to_string(k + 1);
    for (Eigen::Index j = 0; j < state.cols(); ++j) out += "," + fmt(state(k, j));
    out += "\n";
  }
  return out;
}

Dataset read_dataset_csv(const std::filesystem::path& path, const NetworkTopology& topology) {
  const CsvTable t = read_csv(path);
  std::vector<std::string> expected{"k"};
  for (int q = 0; q < topology.exogenous; ++q) expected.push_back("r" + std::to_string(q + 1));
  for (const auto& id : topology.observed) expected.push_back(id.name());
  expect_header(t, expected, path);
  Dataset d;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  if (n == 0) throw Error(ErrorCode::kSchema, path.string() + ": no samples");
  d.n = t.rows.size();
  d.r.resize(n, topology.exogenous);
  d.observed.resize(n, topology.observed_count());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& row = t.rows[static_cast<std::size_t>(k)];
    for (int q = 0; q < topology.exogenous; ++q) d.r(k, q) = row[static_cast<std::size_t>(1 + q)];
    for (int j = 0; j < topology.observed_count(); ++j) {
      d.observed(k, j) = row[static_cast<std::size_t>(1 + topology.exogenous + j)];
    }
  }
  for (const auto& id : topology.observed) d.observed_names.push_back(id.name());
  return d;
}

Matrix read_ground_truth_csv(const std::filesystem::path& path, const NetworkTopology& topology) {
  const CsvTable t = read_csv(path);
  std::vector<std::string> expected{"k"};
  for (int s = 0; s < 2 * topology.subsystems; ++s) {
    expected.push_back(SignalId::from_natural_index(s, topology.subsystems).name());
  }
  expect_header(t, expected, path);
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), 2 * topology.subsystems);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    for (int s = 0; s < 2 * topology.subsystems; ++s) {
      m(static_cast<Eigen::Index>(k), s) = t.rows[k][static_cast<std::size_t>(1 + s)];
    }
  }
  return m;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

json to_json(const RunResult& run) {
  json trace = json::array();
  for (const auto& p : run.trace) trace.push_back({p.cost, p.grad_norm});
  return {{"run_index", run.run_index},
          {"cost", finite_or_null(run.cost)},
          {"lambda_hat", run.lambda_hat},
          {"grad_norm", finite_or_null(run.grad_norm)},
          {"iterations", run.iterations},
          {"converged", run.converged},
          {"termination", to_string(run.termination)},
          {"message", run.message},
          {"theta_hat", vector_to_json(run.theta_hat)},
          {"theta_init", vector_to_json(run.theta_init)},
          {"trace", trace}};
}

RunResult run_from_json(const json& j) {
  RunResult r;
  r.run_index = j.at("run_index").get<int>();
  r.cost = number_or_inf(j.at("cost"));
  r.lambda_hat = j.value("lambda_hat", 0.0);
  r.grad_norm = number_or_inf(j.at("grad_norm"));
  r.iterations = j.value("iterations", 0);
  r.converged = j.value("converged", false);
  const auto term = j.value("termination", std::string("failed"));
  r.termination = term == "converged"            ? Termination::kConverged
                  : term == "max_iterations"     ? Termination::kMaxIterations
                  : term == "line_search_failed" ? Termination::kLineSearchFailed
                                                 : Termination::kFailed;
  r.message = j.value("message", std::string());
  r.theta_hat = vector_from_json(j.at("theta_hat"));
  if (j.contains("theta_init")) r.theta_init = vector_from_json(j.at("theta_init"));
  if (j.contains("trace")) {
    for (const auto& p : j.at("trace")) r.trace.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return r;
}

json to_json(const Polynomial& p) { return p.coeffs; }
Polynomial polynomial_from_json(const json& j) { return Polynomial(j.get<std::vector<double>>()); }

json to_json(const SubsystemModel& m) { return {{"a", m.a}, {"b", m.b}, {"c", m.c}}; }

SubsystemModel subsystem_from_json(const json& j) {
  SubsystemModel m;
  m.a = j.at("a").get<std::vector<double>>();
  m.b = j.at("b").get<std::vector<double>>();
  m.c = j.value("c", std::vector<double>{});
  return m;
}

json to_json(const IndirectResult& r) {
  json rec = json::array();
  for (const auto& g : r.recovered) rec.push_back({{"num", to_json(g.num)}, {"den", to_json(g.den)}});
  json high = json::array();
  for (const auto& m : r.high_order) high.push_back(to_json(m));
  json red = json::array();
  for (const auto& m : r.reduced) red.push_back(to_json(m));
  return {{"closed_loop",
           {{"abar", to_json(r.closed_loop.abar)},
            {"bbar1", to_json(r.closed_loop.bbar1)},
            {"bbar2", to_json(r.closed_loop.bbar2)},
            {"bbar3", to_json(r.closed_loop.bbar3)}}},
          {"recovered", rec},
          {"high_order", high},
          {"reduced", red},
          {"theta_init", vector_to_json(r.theta_init)},
          {"unstable_bbar1_zeros", r.unstable_bbar1_zeros}};
}

json to_json(const FitReport& r) {
  json per = json::object();
  for (const auto& [k, v] : r.per_signal) per[k] = finite_or_null(v);
  return {{"observed", finite_or_null(r.observed)},
          {"missing", finite_or_null(r.missing)},
          {"missing_signals", r.missing_signals},
          {"per_signal", per}};
}

}  // namespace netid
