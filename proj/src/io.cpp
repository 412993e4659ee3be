#include "otk/io.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "otk/cnd.hpp"
#include "otk/gw.hpp"
#include "otk/linear_ot.hpp"
#include "otk/polytope.hpp"

namespace otk {

namespace {

using json = nlohmann::ordered_json;

double parse_cell(const std::string& token, int line, int column) {
  std::string trimmed = token;
  trimmed.erase(0, trimmed.find_first_not_of(" \t"));
  trimmed.erase(trimmed.find_last_not_of(" \t") + 1);
  const char* begin = trimmed.data();
  const char* end = begin + trimmed.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || trimmed.empty())
    throw std::invalid_argument("csv parse failure at line " +
                                std::to_string(line) + ", column " +
                                std::to_string(column));
  if (!std::isfinite(value))
    throw std::invalid_argument("non-finite value at line " +
                                std::to_string(line) + ", column " +
                                std::to_string(column));
  return value;
}

std::vector<std::vector<double>> parse_rows(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw std::invalid_argument("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(file, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string token;
    int column = 0;
    while (std::getline(ss, token, ',')) {
      ++column;
      row.push_back(parse_cell(token, lineno, column));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("empty csv file: " + path);
  return rows;
}

}  // namespace

Matrix load_matrix(const std::string& path) {
  const auto rows = parse_rows(path);
  const std::size_t cols = rows.front().size();
  for (std::size_t r = 1; r < rows.size(); ++r)
    if (rows[r].size() != cols)
      throw std::invalid_argument("ragged row " + std::to_string(r + 1) +
                                  " in " + path);
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
  return m;
}

std::vector<Vector> load_rows(const std::string& path) {
  const auto rows = parse_rows(path);
  std::vector<Vector> out;
  for (const auto& row : rows) {
    Vector v(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) v(c) = row[c];
    out.push_back(std::move(v));
  }
  return out;
}

PointCloud load_points(const std::string& path) {
  PointCloud cloud;
  cloud.points = load_rows(path);
  for (const Vector& p : cloud.points)
    if (p.size() != cloud.points.front().size())
      throw std::invalid_argument("points in " + path +
                                  " have inconsistent dimensions");
  return cloud;
}

CostMatrix pairwise_sqdist(const PointCloud& cloud) {
  const int n = static_cast<int>(cloud.points.size());
  if (n == 0) throw std::invalid_argument("pairwise_sqdist: empty cloud");
  Matrix c = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) {
      const double d = (cloud.points[i] - cloud.points[k]).squaredNorm();
      c(i, k) = d;
      c(k, i) = d;
    }
  return CostMatrix(std::move(c), true);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

const char* verdict_name(CndVerdict v) {
  switch (v) {
    case CndVerdict::cnd:
      return "cnd";
    case CndVerdict::cpd:
      return "cpd";
    case CndVerdict::both:
      return "both";
    default:
      return "neither";
  }
}

json certificate_to_json(const CndCertificate& cert) {
  json out;
  out["verdict"] = verdict_name(cert.verdict);
  out["max_eigenvalue"] = cert.max_eigenvalue;
  out["min_eigenvalue"] = cert.min_eigenvalue;
  out["extreme_eigenvalue"] = cert.extreme_eigenvalue();
  out["witness_vector"] = vector_to_json(cert.witness_vector());
  out["tol"] = cert.tol;
  return out;
}

json monotonicity_to_json(const MonotonicityReport& report) {
  json out;
  out["pass"] = report.pass;
  out["max_n_checked"] = report.max_n_checked;
  if (report.violation) {
    json pairs = json::array();
    for (const IndexPair& p : report.violation->pairs)
      pairs.push_back({p.i, p.j});
    out["violation"] = {{"pairs", std::move(pairs)},
                        {"sigma", report.violation->sigma},
                        {"deficit", report.violation->deficit}};
  }
  return out;
}

void flatten_csv(const json& node, const std::string& prefix,
                 std::ostream& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it)
      flatten_csv(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(),
                  out);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i)
      flatten_csv(node[i], prefix + "." + std::to_string(i), out);
  } else if (node.is_number_float()) {
    out << prefix << "," << format_double(node.get<double>()) << "\n";
  } else if (node.is_boolean()) {
    out << prefix << "," << (node.get<bool>() ? "true" : "false") << "\n";
  } else {
    out << prefix << "," << node.dump() << "\n";
  }
}

struct CommonOptions {
  double tol = 1e-9;
  unsigned seed = 0;
  std::string loss = "square";
  int max_size = 25;
  std::string format = "json";
  std::string points_path;
  std::string cost_path;
  std::string cost2_path;
  std::string weights_path;
};

void add_common_options(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--tol", opts.tol, "numeric tolerance");
  cmd->add_option("--seed", opts.seed, "random seed");
  cmd->add_option("--loss", opts.loss, "ground loss preset")
      ->check(CLI::IsMember({"square", "kl"}));
  cmd->add_option("--max-size", opts.max_size, "enumeration size cap");
  cmd->add_option("--format", opts.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd->add_option("--points", opts.points_path, "point cloud csv");
  cmd->add_option("--cost", opts.cost_path, "cost (or matrix) csv");
  cmd->add_option("--cost2", opts.cost2_path, "second cost csv");
  cmd->add_option("--weights", opts.weights_path,
                  "marginal weights csv (one or two rows)");
}

std::pair<Histogram, Histogram> load_marginals(const CommonOptions& opts,
                                               int n, int m) {
  if (opts.weights_path.empty())
    return {Histogram::uniform(n), Histogram::uniform(m)};
  const auto rows = load_rows(opts.weights_path);
  if (rows.size() == 1) {
    if (n != m || rows[0].size() != n)
      throw std::invalid_argument(
          "weights: a single row requires equal marginal sizes");
    Histogram h = make_histogram(rows[0]);
    return {h, h};
  }
  if (rows.size() == 2) {
    if (rows[0].size() != n || rows[1].size() != m)
      throw std::invalid_argument("weights: row lengths do not match costs");
    return {make_histogram(rows[0]), make_histogram(rows[1])};
  }
  throw std::invalid_argument("weights: expected one or two rows");
}

CostMatrix load_intra_cost(const std::string& points_path,
                           const std::string& cost_path, const char* which) {
  if (!points_path.empty()) return pairwise_sqdist(load_points(points_path));
  if (cost_path.empty())
    throw std::invalid_argument(std::string("missing --points or --") + which);
  return CostMatrix(load_matrix(cost_path), true);
}

LossPreset parse_loss(const std::string& name) {
  return name == "kl" ? LossPreset::kl : LossPreset::square;
}

struct CommandResult {
  json instance;
  json results;
  bool pass = true;
};

CommandResult cmd_lot_solve(const CommonOptions& opts) {
  if (opts.cost_path.empty())
    throw std::invalid_argument("lot solve: missing --cost");
  const Matrix c = load_matrix(opts.cost_path);
  auto [a, b] = load_marginals(opts, static_cast<int>(c.rows()),
                               static_cast<int>(c.cols()));
  const LinearSolution sol = solve_linear_ot(c, a, b);
  const bool extreme = is_extreme(sol.plan);
  const auto supp = support(sol.plan);
  const MonotonicityReport mono =
      check_cyclical_monotonicity(c, sol.plan, 3, opts.tol);

  CommandResult out;
  out.instance = {{"n", c.rows()}, {"m", c.cols()}};
  out.results["value"] = sol.value;
  out.results["plan"] = matrix_to_json(sol.plan.matrix());
  out.results["iterations"] = sol.iterations;
  out.results["support_size"] = supp.size();
  out.results["support_bound"] = c.rows() + c.cols() - 1;
  out.results["is_extreme"] = extreme;
  out.results["monotonicity"] = monotonicity_to_json(mono);
  out.pass = extreme && mono.pass &&
             static_cast<long>(supp.size()) <= c.rows() + c.cols() - 1;
  return out;
}

CommandResult cmd_lot_monotonicity(const CommonOptions& opts) {
  if (opts.cost_path.empty() || opts.cost2_path.empty())
    throw std::invalid_argument(
        "lot monotonicity: needs --cost (costs) and --cost2 (plan)");
  const Matrix c = load_matrix(opts.cost_path);
  const Matrix p = load_matrix(opts.cost2_path);
  if (p.rows() != c.rows() || p.cols() != c.cols())
    throw std::invalid_argument("lot monotonicity: plan shape mismatch");
  const Histogram a = make_histogram(p.rowwise().sum());
  const Histogram b = make_histogram(p.colwise().sum().transpose());
  const Coupling plan(p / p.sum(), a, b);
  const MonotonicityReport mono =
      check_cyclical_monotonicity(c, plan, 3, opts.tol);

  CommandResult out;
  out.instance = {{"n", c.rows()}, {"m", c.cols()}};
  out.results["monotonicity"] = monotonicity_to_json(mono);
  out.pass = mono.pass;
  return out;
}

CommandResult cmd_gw_check_cnd(const CommonOptions& opts) {
  const CostMatrix c = load_intra_cost(opts.points_path, opts.cost_path, "cost");
  const CostMatrix cb = load_intra_cost("", opts.cost2_path, "cost2");
  const SeparableLoss loss = loss_from_preset(parse_loss(opts.loss));
  const ConcavityCheck check = separable_concavity_check(loss, c, cb);

  CommandResult out;
  out.instance = {{"n", c.rows()}, {"m", cb.rows()}, {"loss", opts.loss}};
  out.results["concave"] = check.concave;
  out.results["h1_certificate"] = certificate_to_json(check.h1_certificate);
  out.results["h2_certificate"] = certificate_to_json(check.h2_certificate);
  if (!check.concave) {
    auto [a, b] = load_marginals(opts, c.rows(), cb.rows());
    const ConcavityWitness witness =
        build_concavity_witness(loss, c, cb, a, b);
    out.results["witness"] = {{"midpoint_gap", witness.midpoint_gap},
                              {"p1", matrix_to_json(witness.p1.matrix())},
                              {"p2", matrix_to_json(witness.p2.matrix())}};
  }
  out.pass = check.concave;
  return out;
}

CommandResult cmd_gw_solve(const CommonOptions& opts) {
  const CostMatrix c = load_intra_cost(opts.points_path, opts.cost_path, "cost");
  const CostMatrix cb = load_intra_cost("", opts.cost2_path, "cost2");
  const SeparableLoss loss = loss_from_preset(parse_loss(opts.loss));
  auto [a, b] = load_marginals(opts, c.rows(), cb.rows());
  const ConcavityCheck check = separable_concavity_check(loss, c, cb);
  const TensorOperator op = TensorOperator::from_separable(loss, c, cb);

  CommandResult out;
  out.instance = {{"n", c.rows()}, {"m", cb.rows()}, {"loss", opts.loss}};
  if (check.concave &&
      c.rows() * cb.rows() <= std::min(opts.max_size, kVertexEnumerationCap)) {
    const GwSolution sol = solve_gw_exact_concave(loss, c, cb, a, b);
    out.results["method"] = "exact_concave";
    out.results["value"] = sol.value;
    out.results["plan"] = matrix_to_json(sol.plan.matrix());
    out.results["support_size"] = support(sol.plan).size();
    out.results["is_extreme"] = is_extreme(sol.plan);
    const StationarityReport st = check_qp_lp_stationarity(op, sol.plan);
    out.results["stationarity_pass"] = st.pass;
    out.pass = st.pass && is_extreme(sol.plan);
  } else {
    const GwSolution sol = solve_gw_multistart(op, a, b, 10, opts.seed);
    out.results["method"] = "frank_wolfe";
    out.results["label"] = "upper bound";
    out.results["value"] = sol.value;
    out.results["plan"] = matrix_to_json(sol.plan.matrix());
    out.results["fw_gap"] = sol.fw_gap.value_or(0.0);
    out.results["converged"] = sol.converged;
    out.pass = sol.converged;
  }
  out.results["concave"] = check.concave;
  return out;
}

CommandResult cmd_gw_tightness(const CommonOptions& opts) {
  const CostMatrix c = load_intra_cost(opts.points_path, opts.cost_path, "cost");
  const CostMatrix cb = load_intra_cost("", opts.cost2_path, "cost2");
  const SeparableLoss loss = loss_from_preset(parse_loss(opts.loss));
  auto [a, b] = load_marginals(opts, c.rows(), cb.rows());
  const TightnessReport report =
      check_bilinear_tightness(loss, c, cb, a, b, opts.seed);

  CommandResult out;
  out.instance = {{"n", c.rows()}, {"m", cb.rows()}, {"loss", opts.loss}};
  out.results["concave"] = report.concave;
  out.results["bilinear_value"] = report.bilinear_value;
  out.results["gw_value"] = report.gw_value;
  out.results["relaxation_holds"] = report.relaxation_holds;
  if (report.concave) {
    out.results["tight"] = report.tight;
    out.results["pair_attains"] = report.pair_attains;
    out.pass = report.tight && report.pair_attains && report.relaxation_holds;
  } else {
    out.results["label"] = "relaxation only: bilinear <= GW";
    out.pass = report.relaxation_holds;
  }
  return out;
}

CommandResult cmd_gw_stationarity(const CommonOptions& opts) {
  const CostMatrix c = load_intra_cost(opts.points_path, opts.cost_path, "cost");
  const CostMatrix cb = load_intra_cost("", opts.cost2_path, "cost2");
  const SeparableLoss loss = loss_from_preset(parse_loss(opts.loss));
  auto [a, b] = load_marginals(opts, c.rows(), cb.rows());
  const ConcavityCheck check = separable_concavity_check(loss, c, cb);
  const TensorOperator op = TensorOperator::from_separable(loss, c, cb);

  GwSolution sol =
      (check.concave && c.rows() * cb.rows() <= kVertexEnumerationCap)
          ? solve_gw_exact_concave(loss, c, cb, a, b)
          : solve_gw_multistart(op, a, b, 10, opts.seed);
  const StationarityReport st = check_qp_lp_stationarity(op, sol.plan);
  const MonotonicityReport mono = gw_monotonicity_check(op, sol.plan);

  CommandResult out;
  out.instance = {{"n", c.rows()}, {"m", cb.rows()}, {"loss", opts.loss}};
  out.results["method"] =
      sol.method == GwMethod::exact_concave ? "exact_concave" : "frank_wolfe";
  out.results["value"] = sol.value;
  out.results["stationarity"] = {{"pass", st.pass},
                                 {"plan_value", st.plan_value},
                                 {"lp_value", st.lp_value}};
  out.results["monotonicity"] = monotonicity_to_json(mono);
  out.pass = st.pass && mono.pass;
  return out;
}

CommandResult cmd_polytope_decompose(const CommonOptions& opts) {
  if (opts.cost_path.empty())
    throw std::invalid_argument("polytope decompose: missing --cost (plan)");
  Matrix p = load_matrix(opts.cost_path);
  if (p.minCoeff() < 0.0 || p.sum() <= 0.0)
    throw std::invalid_argument("polytope decompose: not a coupling matrix");
  p /= p.sum();
  const Histogram a = make_histogram(p.rowwise().sum());
  const Histogram b = make_histogram(p.colwise().sum().transpose());
  const Coupling plan(p, a, b);
  const ConvexDecomposition decomposition = extreme_decomposition(plan);

  Matrix reconstruction = Matrix::Zero(p.rows(), p.cols());
  double weight_sum = 0.0;
  bool all_extreme = true;
  bool all_permutations = p.rows() == p.cols();
  json components = json::array();
  for (const auto& comp : decomposition.components) {
    reconstruction += comp.weight * comp.point.matrix();
    weight_sum += comp.weight;
    all_extreme = all_extreme && is_extreme(comp.point);
    json entry = {{"weight", comp.weight},
                  {"plan", matrix_to_json(comp.point.matrix())}};
    if (p.rows() == p.cols()) {
      const auto perm = as_permutation(comp.point);
      if (perm)
        entry["permutation"] = perm->indices();
      else
        all_permutations = false;
    }
    components.push_back(std::move(entry));
  }
  const double recon_error = (reconstruction - p).cwiseAbs().maxCoeff();

  CommandResult out;
  out.instance = {{"n", p.rows()}, {"m", p.cols()}};
  out.results["component_count"] = decomposition.components.size();
  out.results["components"] = std::move(components);
  out.results["weight_sum"] = weight_sum;
  out.results["reconstruction_error"] = recon_error;
  out.results["all_extreme"] = all_extreme;
  if (p.rows() == p.cols())
    out.results["all_permutations"] = all_permutations;
  out.pass = all_extreme && std::abs(weight_sum - 1.0) <= 1e-10 &&
             recon_error <= 1e-9;
  return out;
}

CommandResult cmd_polytope_vertices(const CommonOptions& opts) {
  if (opts.weights_path.empty())
    throw std::invalid_argument("polytope vertices: missing --weights");
  const auto rows = load_rows(opts.weights_path);
  Histogram a = make_histogram(rows[0]);
  Histogram b = rows.size() > 1 ? make_histogram(rows[1]) : a;
  if (a.size() * b.size() > std::min(opts.max_size, kVertexEnumerationCap))
    throw std::invalid_argument("polytope vertices: size cap exceeded");

  const std::vector<Coupling> vertices = enumerate_vertices(a, b);
  bool all_extreme = true;
  bool support_bound = true;
  json list = json::array();
  for (const Coupling& v : vertices) {
    all_extreme = all_extreme && is_extreme(v);
    support_bound =
        support_bound && static_cast<int>(support(v).size()) <=
                             a.size() + b.size() - 1;
    list.push_back(matrix_to_json(v.matrix()));
  }

  CommandResult out;
  out.instance = {{"n", a.size()}, {"m", b.size()}};
  out.results["vertex_count"] = vertices.size();
  out.results["vertices"] = std::move(list);
  out.results["all_extreme"] = all_extreme;
  out.results["support_bound_holds"] = support_bound;
  out.pass = all_extreme && support_bound;
  return out;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"Discrete optimal transport toolkit"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string selected;
  auto leaf = [&](CLI::App* parent, const std::string& name,
                  const std::string& desc, const std::string& id) {
    CLI::App* cmd = parent->add_subcommand(name, desc);
    add_common_options(cmd, opts);
    cmd->callback([&selected, id] { selected = id; });
    return cmd;
  };

  CLI::App* lot = app.add_subcommand("lot", "linear optimal transport");
  lot->require_subcommand(1);
  leaf(lot, "solve", "solve linear OT exactly", "lot.solve");
  leaf(lot, "monotonicity", "check cyclical monotonicity of a plan",
       "lot.monotonicity");

  CLI::App* gw = app.add_subcommand("gw", "Gromov-Wasserstein");
  gw->require_subcommand(1);
  leaf(gw, "solve", "solve the GW problem", "gw.solve");
  leaf(gw, "check-cnd", "certify concavity of a separable instance",
       "gw.check-cnd");
  leaf(gw, "tightness", "check tightness of the bilinear relaxation",
       "gw.tightness");
  leaf(gw, "stationarity", "QP -> LP stationarity of a GW solution",
       "gw.stationarity");

  CLI::App* polytope = app.add_subcommand("polytope", "transportation polytope");
  polytope->require_subcommand(1);
  leaf(polytope, "decompose", "decompose a coupling into extreme points",
       "polytope.decompose");
  leaf(polytope, "vertices", "enumerate polytope vertices",
       "polytope.vertices");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help() << std::flush;
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help() << std::flush;
    return 2;
  }

  json report;
  report["schema_version"] = 1;
  std::string echo;
  for (const auto& a : args) echo += (echo.empty() ? "" : " ") + a;
  report["command"] = echo;

  CommandResult result;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (selected == "lot.solve")
      result = cmd_lot_solve(opts);
    else if (selected == "lot.monotonicity")
      result = cmd_lot_monotonicity(opts);
    else if (selected == "gw.solve")
      result = cmd_gw_solve(opts);
    else if (selected == "gw.check-cnd")
      result = cmd_gw_check_cnd(opts);
    else if (selected == "gw.tightness")
      result = cmd_gw_tightness(opts);
    else if (selected == "gw.stationarity")
      result = cmd_gw_stationarity(opts);
    else if (selected == "polytope.decompose")
      result = cmd_polytope_decompose(opts);
    else if (selected == "polytope.vertices")
      result = cmd_polytope_vertices(opts);
    else {
      err << "unknown subcommand\n";
      return 2;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  const auto t1 = std::chrono::steady_clock::now();

  result.instance["seed"] = opts.seed;
  report["instance"] = std::move(result.instance);
  report["results"] = std::move(result.results);
  report["results"]["pass"] = result.pass;
  report["timings_ms"] = {
      {"total",
       std::chrono::duration<double, std::milli>(t1 - t0).count()}};

  if (opts.format == "csv")
    flatten_csv(report, "", out);
  else
    out << report.dump(2) << "\n";
  out << std::flush;
  return result.pass ? 0 : 1;
}

}  // namespace otk
