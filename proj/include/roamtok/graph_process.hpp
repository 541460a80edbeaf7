#ifndef ROAMTOK_GRAPH_PROCESS_HPP
#define ROAMTOK_GRAPH_PROCESS_HPP

// Directed adjacency matrices, time-varying graph processes (i.i.d. link
// failures over a backbone, deterministic sequences, static graphs), geometric
// backbone generation and connectivity checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "roamtok/errors.hpp"
#include "roamtok/random.hpp"

namespace roamtok {

/// n×n 0/1 matrix with zero diagonal. Row i lists the out-edges of node i:
/// (i, j) present means i can send to j.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t n) : n_(n), bits_(n * n, 0) {}

  static Adjacency complete(std::size_t n) {
    Adjacency a(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) a.bits_[i * n + j] = 1;
    return a;
  }

  static Adjacency from_edges(std::size_t n,
                              const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    Adjacency a(n);
    for (auto [i, j] : edges) a.set(i, j, true);
    return a;
  }

  /// Rows of 0/1 entries; nonzero diagonal entries are rejected.
  static Adjacency from_rows(const std::vector<std::vector<int>>& rows) {
    const std::size_t n = rows.size();
    Adjacency a(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) {
        throw std::invalid_argument("adjacency row " + std::to_string(i) + " has " +
                                    std::to_string(rows[i].size()) + " entries, expected " +
                                    std::to_string(n));
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (rows[i][j] != 0 && rows[i][j] != 1) {
          throw std::invalid_argument("adjacency entries must be 0 or 1");
        }
        if (rows[i][j]) a.set(i, j, true);
      }
    }
    return a;
  }

  std::size_t n() const noexcept { return n_; }

  bool operator()(std::size_t i, std::size_t j) const noexcept { return bits_[i * n_ + j] != 0; }

  void set(std::size_t i, std::size_t j, bool v) {
    if (i >= n_ || j >= n_) throw std::out_of_range("adjacency index out of range");
    if (i == j && v) throw std::invalid_argument("adjacency diagonal must be zero");
    bits_[i * n_ + j] = v ? 1 : 0;
  }

  void clear() noexcept { std::fill(bits_.begin(), bits_.end(), std::uint8_t{0}); }

  std::size_t out_degree(std::size_t i) const noexcept {
    std::size_t d = 0;
    for (std::size_t j = 0; j < n_; ++j) d += bits_[i * n_ + j];
    return d;
  }

  std::size_t edge_count() const noexcept {
    std::size_t e = 0;
    for (auto b : bits_) e += b;
    return e;
  }

  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        if ((*this)(i, j)) out.emplace_back(i, j);
    return out;
  }

  std::vector<std::vector<int>> to_rows() const {
    std::vector<std::vector<int>> rows(n_, std::vector<int>(n_, 0));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) rows[i][j] = (*this)(i, j) ? 1 : 0;
    return rows;
  }

  /// Edge union, in place.
  Adjacency& operator|=(const Adjacency& other) {
    if (other.n_ != n_) throw std::invalid_argument("adjacency size mismatch in union");
    for (std::size_t k = 0; k < bits_.size(); ++k) bits_[k] |= other.bits_[k];
    return *this;
  }

  bool operator==(const Adjacency&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Nodes reachable from `src` following edges forward (or backward if
/// `reverse`), including `src`.
inline std::vector<char> reachable_from(const Adjacency& a, std::size_t src, bool reverse = false) {
  const std::size_t n = a.n();
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{src};
  seen[src] = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < n; ++v) {
      const bool edge = reverse ? a(v, u) : a(u, v);
      if (edge && !seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return seen;
}

/// True iff every ordered pair is joined by a directed path.
inline bool is_strongly_connected(const Adjacency& a) {
  if (a.n() <= 1) return true;
  const auto fwd = reachable_from(a, 0, false);
  const auto bwd = reachable_from(a, 0, true);
  return std::all_of(fwd.begin(), fwd.end(), [](char c) { return c != 0; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](char c) { return c != 0; });
}

/// Directed edges over n(n-1).
inline double relative_degree(const Adjacency& a) {
  if (a.n() < 2) throw std::invalid_argument("relative_degree needs n >= 2");
  return static_cast<double>(a.edge_count()) / static_cast<double>(a.n() * (a.n() - 1));
}

inline Adjacency union_of(const std::vector<Adjacency>& frames, std::size_t begin,
                          std::size_t end) {
  Adjacency u(frames.at(begin).n());
  for (std::size_t k = begin; k < end; ++k) u |= frames[k];
  return u;
}

/// True iff the edge union of every complete window frames[t, t+b) is
/// strongly connected. Trailing partial windows are not checked.
inline bool window_union_connected(const std::vector<Adjacency>& frames, std::size_t b) {
  if (b < 1) throw std::invalid_argument("window size must be >= 1");
  if (frames.size() < b) throw std::invalid_argument("fewer frames than the window size");
  for (std::size_t t = 0; t + b <= frames.size(); ++t) {
    if (!is_strongly_connected(union_of(frames, t, t + b))) return false;
  }
  return true;
}

/// Reachable set after propagating from `src` through frames[begin, end),
/// where at frame k every reached node may stay put or cross an edge of
/// frames[k].
inline std::vector<char> sequential_reach(const std::vector<Adjacency>& frames, std::size_t src,
                                          std::size_t begin, std::size_t end) {
  const std::size_t n = frames.empty() ? 0 : frames.front().n();
  std::vector<char> reach(n, 0);
  reach[src] = 1;
  std::vector<char> next;
  for (std::size_t k = begin; k < end; ++k) {
    next = reach;
    for (std::size_t u = 0; u < n; ++u) {
      if (!reach[u]) continue;
      for (std::size_t v = 0; v < n; ++v)
        if (frames[k](u, v)) next[v] = 1;
    }
    reach.swap(next);
  }
  return reach;
}

/// True iff a sequential path with self-loops leads from i to j through the
/// given frames (step k uses frames[k]).
inline bool sequentially_connected_with_self_loops(const std::vector<Adjacency>& frames,
                                                   std::size_t i, std::size_t j) {
  if (frames.empty()) throw std::invalid_argument("need at least one frame");
  const std::size_t n = frames.front().n();
  if (i >= n || j >= n) throw std::out_of_range("node index out of range");
  if (i == j) return true;
  return sequential_reach(frames, i, 0, frames.size())[j] != 0;
}

// ---------------------------------------------------------------------------
// Graph processes

struct IidFailure {
  Adjacency backbone;
  double p_fail = 0.0;
};

struct DeterministicSequence {
  std::vector<Adjacency> frames;
  bool cycle = true;
};

struct StaticGraph {
  Adjacency graph;
};

class GraphProcessSpec {
 public:
  using Kind = std::variant<IidFailure, DeterministicSequence, StaticGraph>;

  GraphProcessSpec(Kind kind) : kind_(std::move(kind)) { validate(); }  // NOLINT

  const Kind& kind() const noexcept { return kind_; }

  std::size_t n() const {
    return std::visit(
        [](const auto& k) -> std::size_t {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IidFailure>) return k.backbone.n();
          else if constexpr (std::is_same_v<T, DeterministicSequence>) return k.frames.front().n();
          else return k.graph.n();
        },
        kind_);
  }

  bool is_iid() const noexcept { return std::holds_alternative<IidFailure>(kind_); }
  bool is_static() const noexcept { return std::holds_alternative<StaticGraph>(kind_); }
  bool is_deterministic() const noexcept {
    return std::holds_alternative<DeterministicSequence>(kind_);
  }

  /// Graph of every edge that can ever appear.
  Adjacency support() const {
    return std::visit(
        [](const auto& k) -> Adjacency {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IidFailure>) {
            return k.p_fail >= 1.0 ? Adjacency(k.backbone.n()) : k.backbone;
          } else if constexpr (std::is_same_v<T, DeterministicSequence>) {
            return union_of(k.frames, 0, k.frames.size());
          } else {
            return k.graph;
          }
        },
        kind_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, IidFailure>) {
            if (k.backbone.n() == 0) throw std::invalid_argument("backbone has no nodes");
            if (!(k.p_fail >= 0.0 && k.p_fail <= 1.0)) {
              throw std::invalid_argument("p_fail must lie in [0, 1]");
            }
          } else if constexpr (std::is_same_v<T, DeterministicSequence>) {
            if (k.frames.empty()) throw std::invalid_argument("sequence has no frames");
            for (const auto& f : k.frames) {
              if (f.n() != k.frames.front().n()) {
                throw std::invalid_argument("frames disagree on node count");
              }
            }
            if (k.frames.front().n() == 0) throw std::invalid_argument("frames have no nodes");
          } else {
            if (k.graph.n() == 0) throw std::invalid_argument("static graph has no nodes");
          }
        },
        kind_);
  }

  Kind kind_;
};

/// Writes A(t) into `out`. IidFailure consumes one uniform per backbone edge
/// (row-major order) so paired runs sharing a graph stream see identical draws.
inline void next_adjacency_into(const GraphProcessSpec& spec, long t, Rng& rng, Adjacency& out) {
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, IidFailure>) {
          const std::size_t n = k.backbone.n();
          if (out.n() != n) out = Adjacency(n);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              if (!k.backbone(i, j)) {
                out.set(i, j, false);
                continue;
              }
              out.set(i, j, !bernoulli(rng, k.p_fail));
            }
          }
        } else if constexpr (std::is_same_v<T, DeterministicSequence>) {
          if (t < 0) throw std::invalid_argument("negative time");
          const auto len = static_cast<long>(k.frames.size());
          if (!k.cycle && t >= len) {
            throw SequenceExhausted("deterministic sequence has " + std::to_string(len) +
                                    " frames; requested t=" + std::to_string(t));
          }
          out = k.frames[static_cast<std::size_t>(k.cycle ? t % len : t)];
        } else {
          out = k.graph;
        }
      },
      spec.kind());
}

inline Adjacency next_adjacency(const GraphProcessSpec& spec, long t, Rng& rng) {
  Adjacency a(spec.n());
  next_adjacency_into(spec, t, rng, a);
  return a;
}

// ---------------------------------------------------------------------------
// Geometric backbones

inline constexpr int kDefaultMaxRetries = 1000;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline std::vector<Point2> sample_unit_square(std::size_t n, Rng& rng) {
  std::vector<Point2> pts(n);
  for (auto& p : pts) {
    p.x = uniform01(rng);
    p.y = uniform01(rng);
  }
  return pts;
}

inline Adjacency geometric_graph(const std::vector<Point2>& pts, double radius) {
  Adjacency a(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) < radius) {
        a.set(i, j, true);
        a.set(j, i, true);
      }
    }
  }
  return a;
}

/// n uniform points in the unit square, bidirectional edges for pairs closer
/// than `radius`; point sets are redrawn until the graph is strongly connected.
inline Adjacency generate_geometric_backbone(std::size_t n, double radius, Rng& rng,
                                             int max_retries = kDefaultMaxRetries) {
  if (n < 2) throw std::invalid_argument("geometric backbone needs n >= 2");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    Adjacency a = geometric_graph(sample_unit_square(n, rng), radius);
    if (is_strongly_connected(a)) return a;
  }
  throw GenerationFailed("no strongly connected geometric graph with n=" + std::to_string(n) +
                         " radius=" + std::to_string(radius) + " after " +
                         std::to_string(max_retries) + " attempts");
}

struct Backbone {
  Adjacency graph;
  double radius = 0.0;
};

inline constexpr double kDefaultDegreeTolerance = 0.02;

/// Like generate_geometric_backbone, but the radius is chosen per point set:
/// it links the round(target * n(n-1)/2) closest pairs, or, if that leaves the
/// graph disconnected, the fewest closest pairs that connect it. A point set
/// is kept only if the resulting relative degree is within `tolerance` of the
/// target.
inline Backbone generate_geometric_backbone_for_degree(std::size_t n, double target, Rng& rng,
                                                       int max_retries = kDefaultMaxRetries,
                                                       double tolerance = kDefaultDegreeTolerance) {
  if (n < 2) throw std::invalid_argument("geometric backbone needs n >= 2");
  if (!(target > 0.0 && target <= 1.0)) {
    throw std::invalid_argument("target relative degree must lie in (0, 1]");
  }
  const std::size_t pairs = n * (n - 1) / 2;
  const auto k = static_cast<std::size_t>(
      std::clamp<double>(std::round(target * static_cast<double>(pairs)), 1.0,
                         static_cast<double>(pairs)));
  struct Pair {
    double d;
    std::size_t i, j;
  };
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    const auto pts = sample_unit_square(n, rng);
    std::vector<Pair> d;
    d.reserve(pairs);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        d.push_back({std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y), i, j});
    std::sort(d.begin(), d.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });

    // Smallest prefix of sorted pairs that connects every point.
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    auto root = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::size_t components = n, connect_at = pairs;
    for (std::size_t e = 0; e < pairs && components > 1; ++e) {
      const auto a = root(d[e].i), b = root(d[e].j);
      if (a != b) {
        parent[a] = b;
        if (--components == 1) connect_at = e + 1;
      }
    }
    const std::size_t linked = std::max(k, connect_at);
    if (std::abs(static_cast<double>(linked) / static_cast<double>(pairs) - target) > tolerance) {
      continue;
    }
    const double radius =
        linked < pairs ? 0.5 * (d[linked - 1].d + d[linked].d) : d.back().d * 1.0000001 + 1e-12;
    Adjacency a = geometric_graph(pts, radius);
    if (is_strongly_connected(a)) return {std::move(a), radius};
  }
  throw GenerationFailed("no strongly connected geometric graph with n=" + std::to_string(n) +
                         " relative degree " + std::to_string(target) + " after " +
                         std::to_string(max_retries) + " attempts");
}

// ---------------------------------------------------------------------------
// Edge-list CSV (t,from,to) for deterministic sequences

inline void write_edge_list_csv(std::ostream& os, const std::vector<Adjacency>& frames) {
  os << "t,from,to\n";
  for (std::size_t t = 0; t < frames.size(); ++t)
    for (auto [i, j] : frames[t].edges()) os << t << ',' << i << ',' << j << '\n';
}

/// Reads frames of an n-node sequence. `frame_count` of 0 means one past the
/// largest t in the file.
inline std::vector<Adjacency> read_edge_list_csv(std::istream& is, std::size_t n,
                                                 std::size_t frame_count = 0) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> rows;
  std::size_t max_t = 0;
  bool any = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("t,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',')) {
      throw ConfigError("edge list line " + std::to_string(lineno) + ": expected t,from,to");
    }
    try {
      const auto t = std::stoul(a), i = std::stoul(b), j = std::stoul(c);
      if (i >= n || j >= n) {
        throw ConfigError("edge list line " + std::to_string(lineno) + ": node out of range");
      }
      if (i == j) {
        throw ConfigError("edge list line " + std::to_string(lineno) + ": self-loop not allowed");
      }
      rows.emplace_back(t, i, j);
      max_t = std::max<std::size_t>(max_t, t);
      any = true;
    } catch (const std::logic_error&) {
      throw ConfigError("edge list line " + std::to_string(lineno) + ": not an integer triple");
    }
  }
  const std::size_t count = frame_count ? frame_count : (any ? max_t + 1 : 0);
  std::vector<Adjacency> frames(count, Adjacency(n));
  for (auto [t, i, j] : rows) {
    if (t >= count) throw ConfigError("edge list frame " + std::to_string(t) + " beyond count");
    frames[t].set(i, j, true);
  }
  return frames;
}

}  // namespace roamtok

#endif  // ROAMTOK_GRAPH_PROCESS_HPP
