#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "textvol/mesh.hpp"
#include "textvol/pngio.hpp"
#include "textvol/shot.hpp"
#include "textvol/solver.hpp"
#include "textvol/texcoord.hpp"

namespace textvol {

namespace fs = std::filesystem;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << content;
}

inline uint64_t hash_bytes(const void* data, size_t n) {
  Fnv1a h;
  h.update(data, n);
  return h.digest();
}

inline uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  Fnv1a h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.update(buf, size_t(in.gcount()));
  }
  return h.digest();
}

// Flat key=value configuration text; '#' starts a comment.
inline std::map<std::string, std::string> parse_keyvalues(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t a = line.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r\n");
    line = line.substr(a, b - a + 1);
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      size_t x = s.find_first_not_of(" \t");
      size_t y = s.find_last_not_of(" \t");
      return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

inline std::map<std::string, std::string> parse_keyvalue_file(const std::string& path) {
  try {
    return parse_keyvalues(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// --- mesh: "v x y z", "vt u v", "f a/b c/d e/f" (1-based); each position
// index must always pair with the same texture index -------------------

inline TriMesh read_mesh_obj(const std::string& path) {
  std::string text = read_text_file(path);
  std::istringstream in(text);
  std::vector<Vec3> positions;
  std::vector<Vec2> texcoords;
  std::vector<std::array<std::pair<int, int>, 3>> face_refs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z))
        throw IoError(path + ":" + std::to_string(lineno) + ": bad vertex");
      positions.emplace_back(x, y, z);
    } else if (tag == "vt") {
      double u, v;
      if (!(ls >> u >> v)) throw IoError(path + ":" + std::to_string(lineno) + ": bad vt");
      texcoords.emplace_back(u, v);
    } else if (tag == "f") {
      std::array<std::pair<int, int>, 3> refs;
      for (int k = 0; k < 3; ++k) {
        std::string token;
        if (!(ls >> token)) throw IoError(path + ":" + std::to_string(lineno) + ": bad face");
        int vi = 0, ti = 0;
        if (std::sscanf(token.c_str(), "%d/%d", &vi, &ti) != 2)
          throw IoError(path + ":" + std::to_string(lineno) + ": face needs v/vt indices");
        refs[k] = {vi - 1, ti - 1};
      }
      std::string extra;
      if (ls >> extra) throw IoError(path + ":" + std::to_string(lineno) + ": only triangles are supported");
      face_refs.push_back(refs);
    }
  }
  TriMesh mesh;
  mesh.vertices = positions;
  mesh.uv.assign(positions.size(), Vec2(-1, -1));
  std::vector<int> vt_of(positions.size(), -1);
  for (const auto& refs : face_refs) {
    std::array<int, 3> face;
    for (int k = 0; k < 3; ++k) {
      auto [vi, ti] = refs[k];
      if (vi < 0 || vi >= int(positions.size()) || ti < 0 || ti >= int(texcoords.size()))
        throw IoError(path + ": face index out of range");
      if (vt_of[vi] == -1) {
        vt_of[vi] = ti;
        mesh.uv[vi] = texcoords[ti];
      } else if (vt_of[vi] != ti) {
        throw IoError(path + ": vertex " + std::to_string(vi + 1) +
                      " pairs with multiple texture coordinates; one uv per vertex is required");
      }
      face[k] = vi;
    }
    mesh.faces.push_back(face);
  }
  for (size_t v = 0; v < positions.size(); ++v)
    if (vt_of[v] == -1) mesh.uv[v] = Vec2(0, 0);  // unreferenced vertex
  mesh.build_adjacency();
  mesh.validate();
  return mesh;
}

inline void write_mesh_obj(const std::string& path, const TriMesh& mesh) {
  std::ostringstream out;
  char buf[160];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9f %.9f %.9f\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& t : mesh.uv) {
    std::snprintf(buf, sizeof(buf), "vt %.9f %.9f\n", t.x(), t.y());
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %d/%d %d/%d %d/%d\n", f[0] + 1, f[0] + 1,
                  f[1] + 1, f[1] + 1, f[2] + 1, f[2] + 1);
    out << buf;
  }
  write_text_file(path, out.str());
}

// --- per-frame positions: one text row per vertex, "x y z" in meters ----

inline std::vector<Vec3> read_positions(const std::string& path) {
  std::string text = read_text_file(path);
  std::istringstream in(text);
  std::vector<Vec3> out;
  double x, y, z;
  while (in >> x >> y >> z) out.emplace_back(x, y, z);
  if (out.empty()) throw IoError("no positions in " + path);
  return out;
}

inline void write_positions(const std::string& path, const std::vector<Vec3>& pos) {
  std::ostringstream out;
  char buf[160];
  for (const auto& p : pos) {
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f\n", p.x(), p.y(), p.z());
    out << buf;
  }
  write_text_file(path, out.str());
}

// --- camera: "fx fy cx cy width height" ---------------------------------

inline Camera read_camera(const std::string& path) {
  std::istringstream in(read_text_file(path));
  Camera cam;
  if (!(in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height))
    throw IoError("bad camera file: " + path);
  cam.validate();
  return cam;
}

inline void write_camera(const std::string& path, const Camera& cam) {
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f %d %d\n", cam.fx, cam.fy, cam.cx,
                cam.cy, cam.width, cam.height);
  write_text_file(path, buf);
}

// --- frame streams -------------------------------------------------------

inline std::string frame_name(const char* prefix, int t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05d.%s", prefix, t, ext);
  return buf;
}

inline void write_stream(const std::string& dir, const FrameStream& stream,
                         bool use_ppm = false) {
  fs::create_directories(dir);
  write_camera(dir + "/camera.txt", stream.camera);
  for (int t = 0; t < stream.frame_count(); ++t) {
    if (use_ppm) {
      write_ppm(dir + "/" + frame_name("color", t, "ppm"), stream.colors[t]);
      write_pgm16(dir + "/" + frame_name("depth", t, "pgm"), stream.camera.width,
                  stream.camera.height, stream.depths[t]);
    } else {
      write_png_rgb8(dir + "/" + frame_name("color", t, "png"), stream.colors[t]);
      write_png_gray16(dir + "/" + frame_name("depth", t, "png"), stream.camera.width,
                       stream.camera.height, stream.depths[t]);
    }
  }
}

inline FrameStream read_stream(const std::string& dir) {
  FrameStream stream;
  stream.camera = read_camera(dir + "/camera.txt");
  for (int t = 0;; ++t) {
    std::string png = dir + "/" + frame_name("color", t, "png");
    std::string ppm = dir + "/" + frame_name("color", t, "ppm");
    if (fs::exists(png)) {
      stream.colors.push_back(read_png_rgb8(png));
      int w, h;
      stream.depths.push_back(read_png_gray16(dir + "/" + frame_name("depth", t, "png"), &w, &h));
    } else if (fs::exists(ppm)) {
      stream.colors.push_back(read_ppm(ppm));
      int w, h;
      stream.depths.push_back(read_pgm16(dir + "/" + frame_name("depth", t, "pgm"), &w, &h));
    } else {
      break;
    }
  }
  if (stream.frame_count() == 0) throw IoError("no frames found in " + dir);
  stream.validate();
  return stream;
}

// --- binary tables: one text header line, then little-endian payload -----

namespace detail {

inline void write_blob(std::ofstream& out, const void* data, size_t n) {
  out.write(static_cast<const char*>(data), std::streamsize(n));
}

inline void read_blob(std::ifstream& in, void* data, size_t n, const std::string& path) {
  in.read(static_cast<char*>(data), std::streamsize(n));
  if (size_t(in.gcount()) != n) throw IoError("truncated table: " + path);
}

}  // namespace detail

inline void write_texcoord_table(const std::string& path, const TexCoordTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "texcoords v1 " << table.V << " " << table.T << "\n";
  detail::write_blob(out, table.defined.data(), table.defined.size());
  detail::write_blob(out, table.u.data(), table.u.size() * sizeof(double));
  detail::write_blob(out, table.v.data(), table.v.size() * sizeof(double));
  detail::write_blob(out, table.phi_u.data(), table.phi_u.size() * sizeof(double));
  detail::write_blob(out, table.phi_v.data(), table.phi_v.size() * sizeof(double));
}

inline TexCoordTable read_texcoord_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string magic, ver;
  TexCoordTable table;
  in >> magic >> ver >> table.V >> table.T;
  if (magic != "texcoords" || ver != "v1") throw IoError("bad texcoord table: " + path);
  in.ignore(1);
  size_t n = size_t(table.V) * table.T;
  table.defined.resize(n);
  table.u.resize(n);
  table.v.resize(n);
  table.phi_u.resize(n);
  table.phi_v.resize(n);
  detail::read_blob(in, table.defined.data(), n, path);
  detail::read_blob(in, table.u.data(), n * sizeof(double), path);
  detail::read_blob(in, table.v.data(), n * sizeof(double), path);
  detail::read_blob(in, table.phi_u.data(), n * sizeof(double), path);
  detail::read_blob(in, table.phi_v.data(), n * sizeof(double), path);
  return table;
}

inline void write_label_field(const std::string& path, const LabelField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  int F = int(field.labels.size());
  int T = F > 0 ? int(field.labels[0].size()) : 0;
  out << "labels v1 " << F << " " << T << "\n";
  for (const auto& row : field.labels) {
    std::vector<int32_t> raw(row.begin(), row.end());
    detail::write_blob(out, raw.data(), raw.size() * sizeof(int32_t));
  }
}

inline LabelField read_label_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string magic, ver;
  int F = 0, T = 0;
  in >> magic >> ver >> F >> T;
  if (magic != "labels" || ver != "v1") throw IoError("bad label table: " + path);
  in.ignore(1);
  LabelField field;
  field.labels.assign(F, std::vector<int>(T));
  std::vector<int32_t> raw(T);
  for (int f = 0; f < F; ++f) {
    detail::read_blob(in, raw.data(), raw.size() * sizeof(int32_t), path);
    for (int t = 0; t < T; ++t) field.labels[f][t] = raw[t];
  }
  return field;
}

inline void write_shot_table(const std::string& path, const ShotTable& table, int V) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "shot v1 " << table.frames.size() << " " << V << " " << table.dim << " "
      << table.radius << "\n";
  std::vector<int32_t> frames(table.frames.begin(), table.frames.end());
  detail::write_blob(out, frames.data(), frames.size() * sizeof(int32_t));
  for (const auto& block : table.desc)
    detail::write_blob(out, block.data(), block.size() * sizeof(float));
}

inline ShotTable read_shot_table(const std::string& path, int V) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string magic, ver;
  size_t S = 0;
  int file_v = 0;
  ShotTable table;
  in >> magic >> ver >> S >> file_v >> table.dim >> table.radius;
  if (magic != "shot" || ver != "v1" || file_v != V) throw IoError("bad shot table: " + path);
  in.ignore(1);
  std::vector<int32_t> frames(S);
  detail::read_blob(in, frames.data(), S * sizeof(int32_t), path);
  table.frames.assign(frames.begin(), frames.end());
  table.desc.resize(S);
  for (size_t i = 0; i < S; ++i) {
    table.desc[i].resize(size_t(V) * table.dim);
    detail::read_blob(in, table.desc[i].data(), table.desc[i].size() * sizeof(float), path);
  }
  return table;
}

// Debug overlay: dot at the projected position, line to the optimized one.
inline Image8 texcoord_overlay(const Image8& frame, const TexCoordTable& table, int t) {
  Image8 out = frame;
  auto put = [&](int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) return;
    out.at(x, y, 0) = r;
    out.at(x, y, 1) = g;
    out.at(x, y, 2) = b;
  };
  for (int v = 0; v < table.V; ++v) {
    if (!table.has(v, t)) continue;
    Vec2 a = table.phi(v, t), b = table.coord(v, t);
    int steps = std::max(2, int((b - a).norm() * 2));
    for (int s = 0; s <= steps; ++s) {
      Vec2 p = a + (b - a) * (double(s) / steps);
      put(int(std::lround(p.x())), int(std::lround(p.y())), 60, 120, 255);
    }
    put(int(std::lround(a.x())), int(std::lround(a.y())), 255, 40, 40);
  }
  return out;
}

// Color-coded per-label atlas overlay for label debugging.
inline Image8 label_debug_image(const LabelField& field, const AtlasLayout& layout, int t) {
  Image8 out(layout.size, layout.size, 3);
  for (int y = 0; y < layout.size; ++y)
    for (int x = 0; x < layout.size; ++x) {
      int f = layout.id_at(x, y);
      if (f < 0) continue;
      uint64_t h = splitmix64(uint64_t(field.labels[f][t]) + 0x9e37);
      out.at(x, y, 0) = uint8_t(64 + (h & 0x7f));
      out.at(x, y, 1) = uint8_t(64 + ((h >> 8) & 0x7f));
      out.at(x, y, 2) = uint8_t(64 + ((h >> 16) & 0x7f));
    }
  return out;
}

}  // namespace textvol
