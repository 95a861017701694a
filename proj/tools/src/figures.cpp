#include "figures.hpp"

#include <filesystem>
#include <limits>
#include <numbers>

#include "bundle.hpp"
#include "funnel/linalg.hpp"

namespace funnel::tools {

namespace fs = std::filesystem;

Matrix project_shape(const Matrix& Q, int i, int j) {
  const auto n = static_cast<int>(Q.rows());
  require(i >= 0 && j >= 0 && i < n && j < n && i != j, "project_shape: bad coordinates");
  const Matrix P = inverse_spd(Q);
  std::vector<int> rest;
  for (int r = 0; r < n; ++r)
    if (r != i && r != j) rest.push_back(r);
  const std::vector<int> keep{i, j};
  Matrix Paa = P(keep, keep);
  if (!rest.empty()) {
    const Matrix Pab = P(keep, rest);
    const Matrix Pbb = P(rest, rest);
    Paa -= Pab * inverse_spd(Pbb) * Pab.transpose();
  }
  return inverse_spd(symmetrize(Paa));
}

std::vector<Vector> ellipse_polyline(const Vector& center, const Matrix& shape, int points) {
  require(points >= 3, "ellipse_polyline: need at least three points");
  const Matrix root = sqrtm_psd(shape);
  std::vector<Vector> out;
  for (int p = 0; p < points; ++p) {
    const double t = 2.0 * std::numbers::pi * p / points;
    out.push_back(center + root * (Vector(2) << std::cos(t), std::sin(t)).finished());
  }
  return out;
}

FigureCounts export_figure_data(const std::string& dir) {
  const ConfigFile cfg = load_config((fs::path(dir) / files::kConfig).string());
  const ModelPtr model = make_model(cfg.run.model);
  const int nx = model->state_dim(), nu = model->input_dim();
  const Trajectory traj =
      trajectory_from(read_table((fs::path(dir) / files::kTrajectory).string()), nx, nu);
  const Table funnel_rows = read_table((fs::path(dir) / files::kFunnel).string());
  const Table iterations = read_table((fs::path(dir) / files::kIterations).string());
  const fs::path out_dir = fs::path(dir) / files::kFigures;
  fs::create_directories(out_dir);

  // position plane
  const int cx = 0, cy = 1;
  FigureCounts counts;

  Table nominal{{"k", "t", "x", "y"}, {}};
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    nominal.rows.push_back({std::to_string(k), format_double(traj.times[k]),
                            format_double(traj.states[k](cx)), format_double(traj.states[k](cy))});
  }
  write_table((out_dir / "nominal.csv").string(), nominal);

  Table ellipses{{"node", "point", "x", "y"}, {}};
  if (!funnel_rows.rows.empty()) {
    const Funnel f = funnel_from(funnel_rows, nx, nu);
    for (std::size_t k = 0; k < f.Q.size(); ++k) {
      const Vector c = (Vector(2) << traj.states[k](cx), traj.states[k](cy)).finished();
      const auto poly = ellipse_polyline(c, project_shape(f.certified_shape(static_cast<int>(k)), cx, cy));
      for (std::size_t p = 0; p < poly.size(); ++p) {
        ellipses.rows.push_back({std::to_string(k), std::to_string(p), format_double(poly[p](0)),
                                 format_double(poly[p](1))});
      }
      ++counts.ellipses;
    }
  }
  write_table((out_dir / "ellipses.csv").string(), ellipses);

  Table obstacles{{"obstacle", "point", "x", "y"}, {}};
  for (std::size_t o = 0; o < cfg.run.obstacles.size(); ++o) {
    const EllipseObstacle& ob = cfg.run.obstacles[o];
    const Matrix shape = Vector(ob.diameters.array().square() / 4.0).asDiagonal();
    const auto poly = ellipse_polyline(ob.center, shape);
    for (std::size_t p = 0; p < poly.size(); ++p) {
      obstacles.rows.push_back({std::to_string(o + 1), std::to_string(p),
                                format_double(poly[p](0)), format_double(poly[p](1))});
    }
    ++counts.obstacles;
  }
  write_table((out_dir / "obstacles.csv").string(), obstacles);

  // piecewise-constant inputs as step polylines
  Table inputs{{"k", "t"}, {}};
  for (int i = 0; i < nu; ++i) inputs.header.push_back("u" + std::to_string(i));
  for (std::size_t k = 0; k < traj.inputs.size(); ++k) {
    for (double t : {traj.times[k], traj.times[k + 1]}) {
      std::vector<std::string> row{std::to_string(k), format_double(t)};
      for (int i = 0; i < nu; ++i) row.push_back(format_double(traj.inputs[k](i)));
      inputs.rows.push_back(std::move(row));
    }
  }
  write_table((out_dir / "inputs.csv").string(), inputs);

  Table envelope{{"k", "t_start", "t_end"}, {}};
  for (int i = 0; i < nu; ++i) {
    envelope.header.push_back("u" + std::to_string(i) + "_min");
    envelope.header.push_back("u" + std::to_string(i) + "_max");
  }
  const fs::path paths_file = fs::path(dir) / files::kPaths;
  if (fs::exists(paths_file)) {
    const Table paths = read_table(paths_file.string());
    const int N = traj.intervals();
    Matrix lo = Matrix::Constant(N, nu, std::numeric_limits<double>::infinity());
    Matrix hi = Matrix::Constant(N, nu, -std::numeric_limits<double>::infinity());
    int samples = 0;
    for (const auto& row : paths.rows) {
      const int k = std::stoi(row.at(paths.column("k")));
      samples = std::max(samples, std::stoi(row.at(paths.column("sample"))) + 1);
      if (k >= N) continue;
      for (int i = 0; i < nu; ++i) {
        const double u = parse_double(row.at(paths.column("u" + std::to_string(i))));
        lo(k, i) = std::min(lo(k, i), u);
        hi(k, i) = std::max(hi(k, i), u);
      }
    }
    counts.samples = samples;
    if (samples > 0) {
      for (int k = 0; k < N; ++k) {
        std::vector<std::string> row{std::to_string(k), format_double(traj.times[k]),
                                     format_double(traj.times[k + 1])};
        for (int i = 0; i < nu; ++i) {
          row.push_back(format_double(lo(k, i)));
          row.push_back(format_double(hi(k, i)));
        }
        envelope.rows.push_back(std::move(row));
      }
    }
  }
  write_table((out_dir / "input_envelope.csv").string(), envelope);

  Table convergence{{"iteration", "delta_T", "delta_F"}, {}};
  for (const auto& row : iterations.rows) {
    convergence.rows.push_back({row.at(iterations.column("iteration")),
                                row.at(iterations.column("delta_T")),
                                row.at(iterations.column("delta_F"))});
  }
  counts.iterations = static_cast<int>(convergence.rows.size());
  write_table((out_dir / "convergence.csv").string(), convergence);

  write_json((out_dir / "manifest.json").string(),
             {{"ellipses", counts.ellipses},
              {"points_per_ellipse", 64},
              {"obstacles", counts.obstacles},
              {"iterations", counts.iterations},
              {"samples", counts.samples},
              {"trajectory_tol", cfg.run.trajectory_tol},
              {"funnel_tol", cfg.run.funnel_tol},
              {"input_lower", std::vector<double>(cfg.run.input_lower.data(),
                                                  cfg.run.input_lower.data() + nu)},
              {"input_upper", std::vector<double>(cfg.run.input_upper.data(),
                                                  cfg.run.input_upper.data() + nu)}});
  return counts;
}

}  // namespace funnel::tools
