#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "textvol/energy.hpp"

namespace textvol {

// Spatiotemporal MRF: one node per (face, frame); spatial edges replicate
// the face adjacency at each frame, temporal edges chain frames.
struct MrfGraph {
  int faces = 0, frames = 0;
  std::vector<std::pair<int, int>> spatial_pairs;

  long node_count() const { return long(faces) * frames; }
  long spatial_edge_count() const { return long(spatial_pairs.size()) * frames; }
  long temporal_edge_count() const { return long(faces) * std::max(0, frames - 1); }
};

inline MrfGraph build_graph(const TriMesh& mesh, int frames) {
  MrfGraph g;
  g.faces = mesh.face_count();
  g.frames = frames;
  g.spatial_pairs = mesh.face_adjacency;
  return g;
}

struct LabelField {
  std::vector<std::vector<int>> labels;  // [f][t] -> source frame id
  std::vector<double> energy_trace;      // incumbent energy per outer iteration
};

// labels[f][t] = t where the face is visible at t; otherwise the best
// unary label, ties broken toward the frame nearest t then the smaller id.
inline LabelField initialize_labels(const CostTables& tables) {
  LabelField field;
  field.labels.assign(tables.F, std::vector<int>(tables.T, -1));
  for (int f = 0; f < tables.F; ++f) {
    const auto& L = tables.cand.frames[f];
    if (L.empty()) throw ContractError("initialize_labels: empty candidate set");
    for (int t = 0; t < tables.T; ++t) {
      int li_self = tables.cand.index_of(f, t);
      if (li_self >= 0) {
        field.labels[f][t] = t;
        continue;
      }
      int best_li = 0;
      double best_cost = tables.unary_at(f, t, 0);
      for (int li = 1; li < int(L.size()); ++li) {
        double c = tables.unary_at(f, t, li);
        if (c < best_cost ||
            (c == best_cost && (std::abs(L[li] - t) < std::abs(L[best_li] - t) ||
                                (std::abs(L[li] - t) == std::abs(L[best_li] - t) &&
                                 L[li] < L[best_li])))) {
          best_cost = c;
          best_li = li;
        }
      }
      field.labels[f][t] = L[best_li];
    }
  }
  return field;
}

struct SolveOptions {
  int max_outer = 20;
  double tol = 1e-4;  // relative incumbent decrease
  int sweep_cap = 10;
  uint64_t seed = 1;
  bool first_pass_skip_temporal = true;
  int restarts = 2;  // extra diverse starts (unary argmin, seeded random)
  // frames whose joint spatial state space is at most this large are
  // solved exactly instead of by ICM sweeps
  long exact_state_cap = 4096;
};

namespace detail {

// Enumerates every labeling of one frame's spatial MRF (with temporal
// terms already folded per node by the caller-provided cost callback).
// Only worth it for tiny state spaces; returns the number of changes.
template <typename NodeCost>
long solve_frame_exact(std::vector<std::vector<int>>& label_idx, const CostTables& tables,
                       int t, NodeCost&& node_cost) {
  const Params& p = tables.params;
  const int F = tables.F;
  std::vector<int> state(F), best_state(F);
  for (int f = 0; f < F; ++f) state[f] = 0;
  double best = kInf;
  bool done = false;
  while (!done) {
    double e = 0;
    for (int f = 0; f < F; ++f) e += node_cost(f, state[f]);
    for (size_t ei = 0; ei < tables.edges.size(); ++ei) {
      const auto& et = tables.edges[ei];
      e += p.lambda * p.omega_s * et.mult *
           tables.spatial_at(int(ei), state[et.f0], state[et.f1]);
    }
    if (e < best) {
      best = e;
      best_state = state;
    }
    // odometer increment
    done = true;
    for (int f = 0; f < F; ++f) {
      if (++state[f] < int(tables.cand.frames[f].size())) {
        done = false;
        break;
      }
      state[f] = 0;
    }
  }
  long changes = 0;
  for (int f = 0; f < F; ++f) {
    if (label_idx[f][t] != best_state[f]) {
      label_idx[f][t] = best_state[f];
      ++changes;
    }
  }
  return changes;
}

// One pass over the frames of one parity. Temporal neighbors belong to
// the other (fixed) parity, so their terms fold into per-node unaries and
// distinct frames decouple. Tiny frames are solved exactly, the rest by
// ICM sweeps.
inline long icm_parity_pass(std::vector<std::vector<int>>& label_idx, const CostTables& tables,
                            int parity, bool use_temporal, const SolveOptions& opts,
                            int outer) {
  const Params& p = tables.params;
  std::vector<int> pass_frames;
  for (int t = parity; t < tables.T; t += 2) pass_frames.push_back(t);

  double state_space = 1;
  for (int f = 0; f < tables.F; ++f) {
    state_space *= double(tables.cand.frames[f].size());
    if (state_space > double(opts.exact_state_cap)) break;
  }
  const bool exact = state_space <= double(opts.exact_state_cap);

  // identical per-sweep orders for every frame keep frames exchangeable
  std::vector<std::vector<int>> sweep_orders(opts.sweep_cap);
  for (int s = 0; s < opts.sweep_cap; ++s) {
    sweep_orders[s].resize(tables.F);
    for (int f = 0; f < tables.F; ++f) sweep_orders[s][f] = f;
    Rng rng(mix_seed(opts.seed, {0x49434dull, uint64_t(outer), uint64_t(s)}));
    rng.shuffle(sweep_orders[s]);
  }

  std::vector<long> changes_per_frame(pass_frames.size(), 0);
#pragma omp parallel for schedule(dynamic, 1)
  for (int fi = 0; fi < int(pass_frames.size()); ++fi) {
    int t = pass_frames[fi];
    if (exact) {
      changes_per_frame[fi] = solve_frame_exact(
          label_idx, tables, t, [&](int f, int li) {
            const auto& L = tables.cand.frames[f];
            double c = tables.unary[f][size_t(t) * L.size() + li];
            if (use_temporal && t > 0)
              c += p.lambda * p.omega_t * tables.temporal_at(f, label_idx[f][t - 1], li);
            if (use_temporal && t + 1 < tables.T)
              c += p.lambda * p.omega_t * tables.temporal_at(f, li, label_idx[f][t + 1]);
            return c;
          });
      continue;
    }
    long changed_total = 0;
    for (int sweep = 0; sweep < opts.sweep_cap; ++sweep) {
      long changed = 0;
      for (int f : sweep_orders[sweep]) {
        const auto& L = tables.cand.frames[f];
        if (L.size() <= 1) continue;
        int cur = label_idx[f][t];
        // folded cost of assigning label index li to node (f, t)
        int li_prev = (use_temporal && t > 0) ? label_idx[f][t - 1] : -1;
        int li_next = (use_temporal && t + 1 < tables.T) ? label_idx[f][t + 1] : -1;
        auto folded_cost = [&](int li) {
          double c = tables.unary[f][size_t(t) * L.size() + li];
          for (auto [e, side] : tables.face_edges[f]) {
            const auto& et = tables.edges[e];
            int other_f = side == 0 ? et.f1 : et.f0;
            int lo = label_idx[other_f][t];
            double w = p.lambda * p.omega_s * et.mult;
            c += w * (side == 0 ? tables.spatial_at(e, li, lo) : tables.spatial_at(e, lo, li));
          }
          if (li_prev >= 0) c += p.lambda * p.omega_t * tables.temporal_at(f, li_prev, li);
          if (li_next >= 0) c += p.lambda * p.omega_t * tables.temporal_at(f, li, li_next);
          return c;
        };
        // move only on a meaningful strict improvement; the current label
        // wins all ties
        int best = cur;
        double best_cost = folded_cost(cur);
        for (int li = 0; li < int(L.size()); ++li) {
          if (li == cur) continue;
          double c = folded_cost(li);
          if (c < best_cost - 1e-12) {
            best_cost = c;
            best = li;
          }
        }
        if (best != cur) {
          label_idx[f][t] = best;
          ++changed;
        }
      }
      changed_total += changed;
      if (changed == 0) break;
    }
    changes_per_frame[fi] = changed_total;
  }
  long total = 0;
  for (long c : changes_per_frame) total += c;
  return total;
}

// Exact block solve of one face's temporal chain (Viterbi), all other
// faces fixed. A complementary BCD block family: the even/odd alternation
// cannot jointly move (f,t) and (f,t+1), chains can.
inline long chain_sweep(std::vector<std::vector<int>>& label_idx, const CostTables& tables,
                        const SolveOptions& opts) {
  const Params& p = tables.params;
  const int T = tables.T;
  long changes = 0;
  std::vector<double> cost_prev, cost_cur;
  std::vector<int> back;
  for (int f = 0; f < tables.F; ++f) {
    const auto& L = tables.cand.frames[f];
    const int n = int(L.size());
    if (n <= 1 || T <= 1) continue;
    if (double(n) * n * T > double(opts.exact_state_cap) * 64) continue;  // cost guard
    auto node_cost = [&](int t, int li) {
      double c = tables.unary[f][size_t(t) * n + li];
      for (auto [e, side] : tables.face_edges[f]) {
        const auto& et = tables.edges[e];
        int other_f = side == 0 ? et.f1 : et.f0;
        int lo = label_idx[other_f][t];
        double w = p.lambda * p.omega_s * et.mult;
        c += w * (side == 0 ? tables.spatial_at(e, li, lo) : tables.spatial_at(e, lo, li));
      }
      return c;
    };
    cost_prev.assign(n, 0.0);
    back.assign(size_t(n) * T, 0);
    for (int li = 0; li < n; ++li) cost_prev[li] = node_cost(0, li);
    for (int t = 1; t < T; ++t) {
      cost_cur.assign(n, kInf);
      for (int li = 0; li < n; ++li) {
        double best = kInf;
        int arg = 0;
        for (int lp = 0; lp < n; ++lp) {
          double c = cost_prev[lp] + p.lambda * p.omega_t * tables.temporal_at(f, lp, li);
          if (c < best) {
            best = c;
            arg = lp;
          }
        }
        cost_cur[li] = best + node_cost(t, li);
        back[size_t(li) * T + t] = arg;
      }
      std::swap(cost_prev, cost_cur);
    }
    int arg = 0;
    for (int li = 1; li < n; ++li)
      if (cost_prev[li] < cost_prev[arg]) arg = li;
    std::vector<int> path(T);
    path[T - 1] = arg;
    for (int t = T - 1; t > 0; --t) path[t - 1] = back[size_t(path[t]) * T + t];
    for (int t = 0; t < T; ++t) {
      if (label_idx[f][t] != path[t]) {
        label_idx[f][t] = path[t];
        ++changes;
      }
    }
  }
  return changes;
}

// Fusion sweep with uniform proposals: try relabeling every node to one
// source frame (nodes whose candidate sets lack it keep their labels) and
// accept on strict total-energy decrease. This is the coarse block move
// that lets whole episodes trade dynamism for smoothness and back; per-node
// passes cannot cross that barrier when spatial coupling is strong.
inline long fusion_sweep(std::vector<std::vector<int>>& label_idx, const CostTables& tables) {
  auto to_labels = [&](const std::vector<std::vector<int>>& idx) {
    std::vector<std::vector<int>> out(tables.F, std::vector<int>(tables.T));
    for (int f = 0; f < tables.F; ++f)
      for (int t = 0; t < tables.T; ++t) out[f][t] = tables.cand.frames[f][idx[f][t]];
    return out;
  };
  long changes = 0;
  double current = total_energy(to_labels(label_idx), tables);
  for (int proposal = 0; proposal < tables.T; ++proposal) {
    std::vector<std::vector<int>> cand_idx = label_idx;
    bool any = false;
    for (int f = 0; f < tables.F; ++f) {
      int li = tables.cand.index_of(f, proposal);
      if (li < 0) continue;
      for (int t = 0; t < tables.T; ++t) {
        if (cand_idx[f][t] != li) any = true;
        cand_idx[f][t] = li;
      }
    }
    if (!any) continue;
    double energy = total_energy(to_labels(cand_idx), tables);
    if (energy < current - 1e-12) {
      for (int f = 0; f < tables.F; ++f)
        for (int t = 0; t < tables.T; ++t)
          if (label_idx[f][t] != cand_idx[f][t]) ++changes;
      label_idx = std::move(cand_idx);
      current = energy;
    }
  }
  return changes;
}

}  // namespace detail

// Alternating even/odd block coordinate descent with per-frame ICM.
// The very first even pass of a start runs without temporal terms;
// afterwards both parities fold the fixed neighbors' temporal terms into
// their unaries. A few diverse deterministic starts feed one incumbent:
// the returned field is the best labeling seen, so the trace is
// non-increasing and never exceeds the initialization energy.
inline LabelField solve(const MrfGraph& graph, const CostTables& tables,
                        const SolveOptions& opts, const LabelField& init) {
  (void)graph;
  auto index_of_labels = [&](const std::vector<std::vector<int>>& labels) {
    std::vector<std::vector<int>> idx(tables.F, std::vector<int>(tables.T));
    for (int f = 0; f < tables.F; ++f)
      for (int t = 0; t < tables.T; ++t) {
        int li = tables.cand.index_of(f, labels[f][t]);
        if (li < 0) throw ContractError("solve: initial label outside candidate set");
        idx[f][t] = li;
      }
    return idx;
  };
  auto to_labels = [&](const std::vector<std::vector<int>>& idx) {
    std::vector<std::vector<int>> out(tables.F, std::vector<int>(tables.T));
    for (int f = 0; f < tables.F; ++f)
      for (int t = 0; t < tables.T; ++t) out[f][t] = tables.cand.frames[f][idx[f][t]];
    return out;
  };

  LabelField best;
  best.labels = init.labels;
  double best_energy = total_energy(init.labels, tables);
  best.energy_trace.push_back(best_energy);

  // start 0: the supplied initialization; start 1: per-node unary argmin;
  // further starts: seeded random candidates
  std::vector<std::vector<std::vector<int>>> starts;
  starts.push_back(index_of_labels(init.labels));
  for (int r = 1; r <= opts.restarts; ++r) {
    std::vector<std::vector<int>> idx(tables.F, std::vector<int>(tables.T));
    if (r == 1) {
      for (int f = 0; f < tables.F; ++f) {
        size_t L = tables.cand.frames[f].size();
        for (int t = 0; t < tables.T; ++t) {
          int arg = 0;
          for (size_t li = 1; li < L; ++li)
            if (tables.unary[f][size_t(t) * L + li] < tables.unary[f][size_t(t) * L + arg])
              arg = int(li);
          idx[f][t] = arg;
        }
      }
    } else {
      Rng rng(mix_seed(opts.seed, {0x737461727473ull, uint64_t(r)}));
      for (int f = 0; f < tables.F; ++f)
        for (int t = 0; t < tables.T; ++t)
          idx[f][t] = rng.uniform_int(0, int(tables.cand.frames[f].size()) - 1);
    }
    starts.push_back(std::move(idx));
  }

  for (size_t s = 0; s < starts.size(); ++s) {
    std::vector<std::vector<int>> label_idx = starts[s];
    std::vector<std::vector<int>> start_best_idx = label_idx;
    double start_best = total_energy(to_labels(label_idx), tables);
    for (int outer = 0; outer < opts.max_outer; ++outer) {
      bool skip_temporal_even = opts.first_pass_skip_temporal && outer == 0;
      long ch_even =
          detail::icm_parity_pass(label_idx, tables, 0, !skip_temporal_even, opts, outer);
      long ch_odd = detail::icm_parity_pass(label_idx, tables, 1, true, opts, outer);
      long ch_chain = detail::chain_sweep(label_idx, tables, opts);
      long ch_fuse = detail::fusion_sweep(label_idx, tables);

      double energy = total_energy(to_labels(label_idx), tables);
      double prev = start_best;
      if (energy < start_best) {
        start_best = energy;
        start_best_idx = label_idx;
      } else if (energy > start_best) {
        // monotone safeguard: do not wander above the best of this start
        label_idx = start_best_idx;
      }
      double prev_best = best_energy;
      if (start_best < best_energy) {
        best_energy = start_best;
        best.labels = to_labels(start_best_idx);
      }
      best.energy_trace.push_back(best_energy);
      (void)prev_best;

      if (ch_even + ch_odd + ch_chain + ch_fuse == 0) break;
      double rel = (prev - start_best) / std::max(1e-12, std::abs(prev));
      if (outer > 0 && rel < opts.tol) break;
    }
  }
  return best;
}

}  // namespace textvol
