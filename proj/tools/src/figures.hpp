#pragma once

#include <string>
#include <vector>

#include "funnel/common.hpp"

namespace funnel::tools {

/// Shape matrix of the shadow of {x : x' Q^-1 x <= 1} on coordinates (i, j),
/// through the Schur complement of Q^-1.
Matrix project_shape(const Matrix& Q, int i, int j);

/// `points` samples of center + S^(1/2) (cos t, sin t), t = 2 pi p / points.
std::vector<Vector> ellipse_polyline(const Vector& center, const Matrix& shape, int points = 64);

struct FigureCounts {
  int ellipses = 0;
  int obstacles = 0;
  int iterations = 0;
  int samples = 0;
};

/// Writes the per-figure data files below `<dir>/figures` from a solution
/// directory. Verification paths are used when present.
FigureCounts export_figure_data(const std::string& dir);

}  // namespace funnel::tools
