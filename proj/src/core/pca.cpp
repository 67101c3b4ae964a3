#include "core/pca.hpp"

#include <cmath>
#include <cstdio>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace sentifuse {

namespace {

constexpr double kTolerance = 1e-9;
constexpr int kMaxIterations = 1000;
// An eigenvalue this far below the leading one counts as numerical zero.
constexpr double kRankRatio = 1e-12;

// Largest eigenvector of the symmetric PSD matrix C (d x d, row-major)
// by power iteration. The start vector comes from a fixed-seed draw, so
// the routine is deterministic; the seed is independent of the data, which
// makes an exactly orthogonal start practically impossible.
std::vector<double> power_iterate(const std::vector<double>& C, size_t d) {
  Rng rng(0x70ca5eedULL);
  std::vector<double> v(d);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.uniform(-1.0, 1.0);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;

  std::vector<double> w(d);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    for (size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (size_t j = 0; j < d; ++j) s += C[i * d + j] * v[j];
      w[i] = s;
    }
    double wn = 0.0;
    for (const double x : w) wn += x * x;
    wn = std::sqrt(wn);
    if (wn == 0.0) return v;  // C annihilates v: the eigenvalue is zero
    double delta = 0.0;
    for (size_t i = 0; i < d; ++i) {
      w[i] /= wn;
      delta = std::max(delta, std::abs(w[i] - v[i]));
    }
    v = w;
    if (delta < kTolerance) break;
  }
  return v;
}

double rayleigh(const std::vector<double>& C, const std::vector<double>& v,
                size_t d) {
  double q = 0.0;
  for (size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < d; ++j) s += C[i * d + j] * v[j];
    q += v[i] * s;
  }
  return q;
}

// Flip the vector so its largest-magnitude entry is positive (first such
// entry on ties), fixing the sign ambiguity of eigenvectors.
void canonicalize_sign(std::vector<double>& v) {
  size_t arg = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0.0) {
    for (double& x : v) x = -x;
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_coord(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

Projection project_2d(const std::vector<Tensor>& outputs,
                      const std::vector<PointMeta>& meta) {
  if (outputs.size() < 2) {
    throw Error(ErrCode::Contract,
                "project_2d: need at least 2 vectors, got " +
                    std::to_string(outputs.size()));
  }
  if (meta.size() != outputs.size()) {
    throw Error(ErrCode::Contract,
                "project_2d: " + std::to_string(outputs.size()) +
                    " vectors but " + std::to_string(meta.size()) +
                    " meta entries");
  }
  const size_t n = outputs.size();
  const size_t d = outputs.front().size();
  for (const Tensor& t : outputs) {
    if (t.rank() != 1 || t.size() != d) {
      throw Error(ErrCode::Dimension,
                  "project_2d: mixed vector shapes, " +
                      outputs.front().shape_str() + " vs " + t.shape_str());
    }
  }

  // Center the data.
  std::vector<double> mean(d, 0.0);
  for (const Tensor& t : outputs) {
    for (size_t j = 0; j < d; ++j) mean[j] += t[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> X(n * d);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) X[i * d + j] = outputs[i][j] - mean[j];
  }

  // Covariance (up to the constant 1/(n-1), which leaves directions and
  // rank untouched).
  std::vector<double> C(d * d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t a = 0; a < d; ++a) {
      const double xa = X[i * d + a];
      if (xa == 0.0) continue;
      for (size_t b = 0; b < d; ++b) C[a * d + b] += xa * X[i * d + b];
    }
  }

  Projection result;
  result.points.resize(n);
  for (size_t i = 0; i < n; ++i) {
    result.points[i].folder = meta[i].folder;
    result.points[i].label = meta[i].label;
  }

  double trace = 0.0;
  for (size_t a = 0; a < d; ++a) trace += C[a * d + a];
  if (trace <= 0.0) {
    // All vectors identical: nothing to project, everything at the origin.
    result.rank_deficient = true;
    return result;
  }

  // Leading component.
  std::vector<double> v1 = power_iterate(C, d);
  const double lambda1 = rayleigh(C, v1, d);
  canonicalize_sign(v1);

  // Deflate and repeat for the second component.
  std::vector<double> C2 = C;
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = 0; b < d; ++b) C2[a * d + b] -= lambda1 * v1[a] * v1[b];
  }
  std::vector<double> v2 = power_iterate(C2, d);
  const double lambda2 = rayleigh(C2, v2, d);
  canonicalize_sign(v2);

  const bool second_degenerate =
      !(lambda2 > kRankRatio * lambda1) || lambda1 <= 0.0;
  if (second_degenerate) result.rank_deficient = true;

  for (size_t i = 0; i < n; ++i) {
    double x = 0.0;
    double y = 0.0;
    for (size_t j = 0; j < d; ++j) {
      x += X[i * d + j] * v1[j];
      if (!second_degenerate) y += X[i * d + j] * v2[j];
    }
    result.points[i].x = x;
    result.points[i].y = y;
  }
  return result;
}

std::string projection_csv(const Projection& projection) {
  std::string out = "x,y,folder,label\n";
  for (const ProjectedPoint& p : projection.points) {
    out += format_coord(p.x);
    out += ',';
    out += format_coord(p.y);
    out += ',';
    out += csv_field(p.folder);
    out += ',';
    out += csv_field(p.label);
    out += '\n';
  }
  return out;
}

}  // namespace sentifuse
