#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "textvol/solver.hpp"

namespace textvol {

// Stack of atlas slices sharing one layout. source_labels records the
// frame each texel was copied from (gutter texels inherit their face's).
struct TextureVolume {
  int size = 0;
  std::vector<Image8> slices;                    // [t], RGB
  std::vector<std::vector<int32_t>> source_labels;  // [t][texel], -1 = unwritten
  std::vector<uint8_t> coverage;                 // shared across slices
  std::string manifest;
};

namespace detail {

// 1-texel dilation into the gutter so bilinear atlas sampling never pulls
// in background. Deterministic: averages already-written 8-neighbors.
inline void dilate_gutter(Image8& slice, std::vector<int32_t>& labels,
                          std::vector<uint8_t>& written, int size) {
  std::vector<uint8_t> src_written = written;
  std::vector<int32_t> src_labels = labels;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      size_t i = size_t(y) * size + x;
      if (src_written[i]) continue;
      int acc[3] = {0, 0, 0};
      int n = 0;
      int32_t label = -1;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= size || ny >= size) continue;
          size_t j = size_t(ny) * size + nx;
          if (!src_written[j]) continue;
          for (int c = 0; c < 3; ++c) acc[c] += slice.at(nx, ny, c);
          if (label < 0) label = src_labels[j];
          ++n;
        }
      if (n > 0) {
        for (int c = 0; c < 3; ++c) slice.at(x, y, c) = uint8_t((acc[c] + n / 2) / n);
        labels[i] = label;
        written[i] = 1;
      }
    }
  }
}

}  // namespace detail

// Fills every atlas texel of every slice by sampling image labels[f][t]
// through the optimized coordinates. Faces whose labels are missing or
// whose coordinates are undefined abort with the offending face list.
inline TextureVolume assemble(const LabelField& labels, const TexCoordTable& table,
                              const FrameStream& stream, const TriMesh& mesh,
                              const AtlasLayout& layout) {
  const int T = int(labels.labels.empty() ? 0 : labels.labels[0].size());
  const int F = mesh.face_count();

  std::vector<int> bad;
  for (int f = 0; f < F; ++f) {
    for (int t = 0; t < T; ++t) {
      int l = labels.labels[f][t];
      bool ok = l >= 0 && l < stream.frame_count();
      for (int k = 0; ok && k < 3; ++k) ok = table.has(mesh.faces[f][k], l);
      if (!ok) {
        bad.push_back(f);
        break;
      }
    }
  }
  if (!bad.empty()) {
    std::string msg = "assemble: faces without usable source labels:";
    for (size_t i = 0; i < bad.size() && i < 16; ++i) msg += " " + std::to_string(bad[i]);
    if (bad.size() > 16) msg += " ... (" + std::to_string(bad.size()) + " total)";
    throw ContractError(msg);
  }

  TextureVolume vol;
  vol.size = layout.size;
  vol.slices.assign(T, Image8(layout.size, layout.size, 3));
  vol.source_labels.assign(T, std::vector<int32_t>(size_t(layout.size) * layout.size, -1));
  vol.coverage.assign(size_t(layout.size) * layout.size, 0);

  // silhouette-safe sampling sources
  std::vector<Image8> padded = stream.padded_colors();

  std::vector<std::vector<uint8_t>> written(T);
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < T; ++t) {
    written[t].assign(size_t(layout.size) * layout.size, 0);
    Image8& slice = vol.slices[t];
    for (int f = 0; f < F; ++f) {
      int l = labels.labels[f][t];
      const auto& tri = mesh.faces[f];
      const Image8& img = padded[l];
      for (int texel : layout.face_texels[f]) {
        const float* b = &layout.bary[size_t(texel) * 3];
        double px = b[0] * table.u[table.idx(tri[0], l)] +
                    b[1] * table.u[table.idx(tri[1], l)] +
                    b[2] * table.u[table.idx(tri[2], l)];
        double py = b[0] * table.v[table.idx(tri[0], l)] +
                    b[1] * table.v[table.idx(tri[1], l)] +
                    b[2] * table.v[table.idx(tri[2], l)];
        float rgb[3];
        img.sample_rgb(px, py, rgb);
        int x = texel % layout.size, y = texel / layout.size;
        for (int c = 0; c < 3; ++c) slice.at(x, y, c) = to_byte(rgb[c]);
        vol.source_labels[t][texel] = l;
        written[t][texel] = 1;
      }
    }
    detail::dilate_gutter(slice, vol.source_labels[t], written[t], layout.size);
  }
  if (T > 0) vol.coverage = written[0];

  // every texel the layout owns must have been written
  for (int t = 0; t < T; ++t)
    for (size_t i = 0; i < vol.coverage.size(); ++i)
      if (layout.face_id[i] >= 0 && !written[t][i])
        throw ContractError("assemble: uncovered atlas texel");
  return vol;
}

// Mean absolute color difference across texel pairs with different source
// labels (4-neighborhood, each pair once). [0,1] color scale.
inline double seam_metric(const Image8& slice, const std::vector<int32_t>& labels) {
  const int size = slice.width;
  double acc = 0;
  long n = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      size_t i = size_t(y) * size + x;
      if (labels[i] < 0) continue;
      if (x + 1 < size) {
        size_t j = i + 1;
        if (labels[j] >= 0 && labels[j] != labels[i]) {
          for (int c = 0; c < 3; ++c)
            acc += std::abs(int(slice.at(x, y, c)) - int(slice.at(x + 1, y, c))) / 255.0;
          ++n;
        }
      }
      if (y + 1 < size) {
        size_t j = i + size;
        if (labels[j] >= 0 && labels[j] != labels[i]) {
          for (int c = 0; c < 3; ++c)
            acc += std::abs(int(slice.at(x, y, c)) - int(slice.at(x, y + 1, c))) / 255.0;
          ++n;
        }
      }
    }
  return n > 0 ? acc / (3.0 * n) : 0.0;
}

struct ColorCorrectOptions {
  double alpha_screen = 0.03;
  double cg_tol = 1e-6;  // relative residual
  int cg_max_iter = 2000;
};

// Screened Poisson per slice: keep the assembled gradients except across
// label boundaries (target gradient 0 there), anchored to the assembled
// colors by the screening term. Per-channel conjugate gradient.
inline TextureVolume color_correct(const TextureVolume& vol,
                                   const ColorCorrectOptions& opts = {}) {
  TextureVolume out = vol;
  const int size = vol.size;
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < int(vol.slices.size()); ++t) {
    const auto& labels = vol.source_labels[t];
    // domain = written texels
    std::vector<int32_t> dof(size_t(size) * size, -1);
    std::vector<int> texel_of;
    for (size_t i = 0; i < labels.size(); ++i)
      if (labels[i] >= 0) {
        dof[i] = int(texel_of.size());
        texel_of.push_back(int(i));
      }
    const int n = int(texel_of.size());
    if (n == 0) continue;

    // edges inside the domain; seam edges get zero target gradient
    struct Edge {
      int a, b;
      bool seam;
    };
    std::vector<Edge> edges;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        size_t i = size_t(y) * size + x;
        if (dof[i] < 0) continue;
        if (x + 1 < size && dof[i + 1] >= 0)
          edges.push_back({dof[i], dof[i + 1], labels[i] != labels[i + 1]});
        if (y + 1 < size && dof[i + size] >= 0)
          edges.push_back({dof[i], dof[i + size], labels[i] != labels[i + size]});
      }

    std::vector<double> c(n), v(n), b(n), r(n), p(n), ap(n), diag(n);
    for (int ch = 0; ch < 3; ++ch) {
      for (int k = 0; k < n; ++k) {
        int i = texel_of[k];
        c[k] = vol.slices[t].data[size_t(i) * 3 + ch] / 255.0;
      }
      // A = alpha*I + L, b = alpha*c + div(g)
      for (int k = 0; k < n; ++k) {
        b[k] = opts.alpha_screen * c[k];
        diag[k] = opts.alpha_screen;
        v[k] = c[k];
      }
      for (const auto& e : edges) {
        diag[e.a] += 1;
        diag[e.b] += 1;
        if (!e.seam) {
          double g = c[e.a] - c[e.b];
          b[e.a] += g;
          b[e.b] -= g;
        }
      }
      auto apply_A = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (int k = 0; k < n; ++k) y[k] = opts.alpha_screen * x[k];
        for (const auto& e : edges) {
          double d = x[e.a] - x[e.b];
          y[e.a] += d;
          y[e.b] -= d;
        }
      };
      apply_A(v, ap);
      double bnorm = 0;
      for (int k = 0; k < n; ++k) {
        r[k] = b[k] - ap[k];
        p[k] = r[k] / diag[k];
        bnorm += b[k] * b[k];
      }
      bnorm = std::sqrt(std::max(bnorm, 1e-30));
      std::vector<double> z(n);
      for (int k = 0; k < n; ++k) z[k] = r[k] / diag[k];
      double rz = 0;
      for (int k = 0; k < n; ++k) rz += r[k] * z[k];
      for (int iter = 0; iter < opts.cg_max_iter; ++iter) {
        double rnorm = 0;
        for (int k = 0; k < n; ++k) rnorm += r[k] * r[k];
        if (std::sqrt(rnorm) <= opts.cg_tol * bnorm) break;
        apply_A(p, ap);
        double pap = 0;
        for (int k = 0; k < n; ++k) pap += p[k] * ap[k];
        if (pap <= 0) break;
        double alpha = rz / pap;
        for (int k = 0; k < n; ++k) {
          v[k] += alpha * p[k];
          r[k] -= alpha * ap[k];
        }
        for (int k = 0; k < n; ++k) z[k] = r[k] / diag[k];
        double rz_new = 0;
        for (int k = 0; k < n; ++k) rz_new += r[k] * z[k];
        double beta = rz_new / rz;
        rz = rz_new;
        for (int k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
      }
      for (int k = 0; k < n; ++k)
        out.slices[t].data[size_t(texel_of[k]) * 3 + ch] = to_byte(float(v[k]));
    }
  }
  return out;
}

struct CoverageReport {
  double naive_fraction = 0;    // (face, frame) pairs with t in L_f
  double labeled_fraction = 0;  // must be 1 for a complete labeling
  std::vector<double> naive_per_frame;
  std::vector<int> empty_faces;

  std::string text() const {
    std::string s;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "naive_coverage %.6f\n", naive_fraction);
    s += buf;
    std::snprintf(buf, sizeof(buf), "labeled_coverage %.6f\n", labeled_fraction);
    s += buf;
    for (size_t t = 0; t < naive_per_frame.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "frame %zu naive %.6f\n", t, naive_per_frame[t]);
      s += buf;
    }
    if (!empty_faces.empty()) {
      s += "empty_candidate_faces:";
      for (int f : empty_faces) s += " " + std::to_string(f);
      s += "\n";
    }
    return s;
  }
};

inline CoverageReport coverage_report(const LabelField* labels, const CandidateSets& cand,
                                      int T) {
  CoverageReport rep;
  const int F = int(cand.frames.size());
  rep.empty_faces = cand.empty_faces();
  rep.naive_per_frame.assign(T, 0.0);
  long naive = 0;
  for (int f = 0; f < F; ++f)
    for (int l : cand.frames[f]) {
      ++naive;
      rep.naive_per_frame[l] += 1.0;
    }
  for (auto& v : rep.naive_per_frame) v /= std::max(1, F);
  rep.naive_fraction = double(naive) / (double(F) * std::max(1, T));
  if (labels) {
    long assigned = 0;
    for (int f = 0; f < F; ++f)
      for (int t = 0; t < T; ++t)
        if (labels->labels[f][t] >= 0 && cand.index_of(f, labels->labels[f][t]) >= 0)
          ++assigned;
    rep.labeled_fraction = double(assigned) / (double(F) * std::max(1, T));
  }
  return rep;
}

}  // namespace textvol
