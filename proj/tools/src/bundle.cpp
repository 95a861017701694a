#include "bundle.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace funnel::tools {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::scientific, 16);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), last, v);
  if (ec != std::errc() || ptr != last) throw Error("not a number: '" + token + "'");
  return v;
}

int Table::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error("table has no column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

namespace {

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void append(std::vector<std::string>& row, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(format_double(v(i)));
}

void append_blank(std::vector<std::string>& row, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) row.emplace_back();
}

void indexed(std::vector<std::string>& header, const std::string& prefix, int n) {
  for (int i = 0; i < n; ++i) header.push_back(prefix + std::to_string(i));
}

void matrix_header(std::vector<std::string>& header, const std::string& name, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      header.push_back(name + "_" + std::to_string(i) + "_" + std::to_string(j));
}

void append_rowmajor(std::vector<std::string>& row, const Matrix& M) {
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(format_double(M(i, j)));
}

Vector read_vector(const Table& t, std::size_t r, const std::string& prefix, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = parse_double(t.rows[r].at(t.column(prefix + std::to_string(i))));
  return v;
}

Matrix read_rowmajor(const Table& t, std::size_t r, const std::string& name, int rows, int cols) {
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      M(i, j) = parse_double(
          t.rows[r].at(t.column(name + "_" + std::to_string(i) + "_" + std::to_string(j))));
  return M;
}

}  // namespace

void write_table(const std::string& path, const Table& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path + ": cannot write");
  out << join(table.header) << '\n';
  for (const auto& row : table.rows) out << join(row) << '\n';
  if (!out) throw Error(path + ": write failed");
}

Table read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open file");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": empty table");
  t.header = split(line);
  while (std::getline(in, line)) {
    auto row = split(line);
    if (row.size() != t.header.size()) {
      throw Error(path + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                  std::to_string(row.size()) + " cells, expected " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table trajectory_table(const Trajectory& t) {
  const int nx = static_cast<int>(t.states.front().size());
  const int nu = t.inputs.empty() ? 0 : static_cast<int>(t.inputs.front().size());
  Table out;
  out.header = {"k", "t"};
  indexed(out.header, "x", nx);
  indexed(out.header, "u", nu);
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    std::vector<std::string> row{std::to_string(k), format_double(t.times[k])};
    append(row, t.states[k]);
    if (k < t.inputs.size()) {
      append(row, t.inputs[k]);
    } else {
      append_blank(row, nu);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

Trajectory trajectory_from(const Table& table, int nx, int nu) {
  require(!table.rows.empty(), "trajectory table is empty");
  Trajectory t;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    t.times.push_back(parse_double(table.rows[r].at(table.column("t"))));
    t.states.push_back(read_vector(table, r, "x", nx));
    if (r + 1 < table.rows.size()) t.inputs.push_back(read_vector(table, r, "u", nu));
  }
  t.check();
  return t;
}

Table funnel_table(const Funnel& f, int nx, int nu) {
  Table out;
  out.header = {"k", "beta"};
  for (int j = 0; j < nx; ++j)
    for (int i = j; i < nx; ++i) out.header.push_back("Q_" + std::to_string(i) + "_" + std::to_string(j));
  matrix_header(out.header, "Y", nu, nx);
  matrix_header(out.header, "K", nu, nx);
  for (std::size_t k = 0; k < f.Q.size(); ++k) {
    std::vector<std::string> row{std::to_string(k), format_double(f.beta[k])};
    for (int j = 0; j < nx; ++j)
      for (int i = j; i < nx; ++i) row.push_back(format_double(f.Q[k](i, j)));
    if (k < f.K.size()) {
      append_rowmajor(row, f.Y[k]);
      append_rowmajor(row, f.K[k]);
    } else {
      append_blank(row, 2 * nu * nx);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

Funnel funnel_from(const Table& table, int nx, int nu) {
  require(table.rows.size() >= 2, "funnel table needs at least two nodes");
  Funnel f;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    f.beta.push_back(parse_double(table.rows[r].at(table.column("beta"))));
    Matrix Q(nx, nx);
    for (int j = 0; j < nx; ++j)
      for (int i = j; i < nx; ++i)
        Q(i, j) = Q(j, i) = parse_double(
            table.rows[r].at(table.column("Q_" + std::to_string(i) + "_" + std::to_string(j))));
    f.Q.push_back(Q);
    if (r + 1 < table.rows.size()) {
      f.Y.push_back(read_rowmajor(table, r, "Y", nu, nx));
      f.K.push_back(read_rowmajor(table, r, "K", nu, nx));
    }
  }
  f.check();
  return f;
}

Table iterations_table(const std::vector<IterationRecord>& history) {
  Table out;
  out.header = {"iteration",        "delta_T",  "delta_F",   "trajectory_cost",
                "funnel_objective", "virtual_control_norm", "lambda_w",  "max_gamma",
                "max_beta_hat",     "solver_iterations"};
  for (const IterationRecord& r : history) {
    out.rows.push_back({std::to_string(r.iteration), format_double(r.delta_T),
                        format_double(r.delta_F), format_double(r.trajectory_cost),
                        format_double(r.funnel_objective), format_double(r.virtual_control_norm),
                        format_double(r.lambda_w), format_double(r.max_gamma),
                        format_double(r.max_beta_hat), std::to_string(r.trajectory_solver_iterations)});
  }
  return out;
}

Table verification_table(const VerificationReport& report, const ConstraintSet& constraints) {
  Table out;
  out.header = {"sample", "node", "containment"};
  for (const auto& c : constraints.state) out.header.push_back("margin_" + c.name);
  for (const auto& c : constraints.input) out.header.push_back("margin_" + c.name);
  for (std::size_t s = 0; s < report.records.size(); ++s) {
    const SampleRecord& rec = report.records[s];
    for (std::size_t k = 0; k < rec.containment.size(); ++k) {
      std::vector<std::string> row{std::to_string(s), std::to_string(k),
                                   format_double(rec.containment[k])};
      for (double m : rec.margins.state[k]) row.push_back(format_double(m));
      if (k < rec.margins.input.size()) {
        for (double m : rec.margins.input[k]) row.push_back(format_double(m));
      } else {
        append_blank(row, static_cast<Eigen::Index>(constraints.input.size()));
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

Table paths_table(const VerificationReport& report) {
  Table out;
  out.header = {"sample", "k"};
  if (report.records.empty()) return out;
  const RolloutPath& p0 = report.records.front().path;
  const auto nx = static_cast<int>(p0.states.front().size());
  const auto nu = p0.inputs.empty() ? 0 : static_cast<int>(p0.inputs.front().size());
  const auto nw = p0.disturbances.empty() ? 0 : static_cast<int>(p0.disturbances.front().size());
  indexed(out.header, "x", nx);
  indexed(out.header, "u", nu);
  indexed(out.header, "w", nw);
  for (std::size_t s = 0; s < report.records.size(); ++s) {
    const RolloutPath& p = report.records[s].path;
    for (std::size_t k = 0; k < p.states.size(); ++k) {
      std::vector<std::string> row{std::to_string(s), std::to_string(k)};
      append(row, p.states[k]);
      if (k < p.inputs.size()) {
        append(row, p.inputs[k]);
        append(row, p.disturbances[k]);
      } else {
        append_blank(row, nu + nw);
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

nlohmann::json verification_summary(const VerificationReport& r, const VerifySettings& settings) {
  return {{"samples", r.samples},
          {"seed", settings.seed},
          {"disturbance",
           settings.disturbance == DisturbanceMode::kWorstCase ? "worst-case" : "random"},
          {"passed", r.passed},
          {"contained", r.contained_count},
          {"feasible", r.feasible_count},
          {"worst_containment", r.worst_containment},
          {"worst_sample", r.worst_sample},
          {"worst_node", r.worst_node},
          {"min_margin", r.min_margin}};
}

void write_json(const std::string& path, const nlohmann::json& document) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path + ": cannot write");
  out << document.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(path + ": cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace funnel::tools
