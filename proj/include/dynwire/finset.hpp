#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dynwire/errors.hpp"

namespace dynwire {

using Index = std::size_t;
using Vec = std::vector<double>;

// A finite set {0, ..., n-1}, optionally carrying display labels.
class FinSet {
 public:
  FinSet() = default;
  explicit FinSet(std::size_t size) : size_(size) {}
  explicit FinSet(std::vector<std::string> labels) : size_(labels.size()) {
    auto table = std::make_shared<Labels>();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!table->index.emplace(labels[i], i).second) {
        throw StructureError("duplicate label '" + labels[i] + "'");
      }
    }
    table->names = std::move(labels);
    labels_ = std::move(table);
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  bool has_labels() const noexcept { return labels_ != nullptr; }

  // Display name of element i; unlabeled sets render as prefix + i.
  std::string label(Index i, std::string_view prefix = "#") const {
    if (labels_) return labels_->names.at(i);
    return std::string(prefix) + std::to_string(i);
  }

  std::vector<std::string> labels(std::string_view prefix = "#") const {
    std::vector<std::string> out;
    out.reserve(size_);
    for (Index i = 0; i < size_; ++i) out.push_back(label(i, prefix));
    return out;
  }

  std::optional<Index> find(std::string_view name) const {
    if (!labels_) return std::nullopt;
    auto it = labels_->index.find(std::string(name));
    if (it == labels_->index.end()) return std::nullopt;
    return it->second;
  }

  Index index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw StructureError("unknown name '" + std::string(name) + "'");
  }

  // Same set with every label prefixed by `prefix` (labels are materialized
  // with the default scheme if absent).
  FinSet prefixed(std::string_view prefix) const {
    std::vector<std::string> out;
    out.reserve(size_);
    for (Index i = 0; i < size_; ++i) out.push_back(std::string(prefix) + label(i, ""));
    return FinSet(std::move(out));
  }

  friend bool same_size(const FinSet& a, const FinSet& b) noexcept {
    return a.size_ == b.size_;
  }

 private:
  struct Labels {
    std::vector<std::string> names;
    std::unordered_map<std::string, Index> index;
  };

  std::size_t size_ = 0;
  std::shared_ptr<const Labels> labels_;
};

inline void require_size(const FinSet& set, std::size_t n, const char* what) {
  if (set.size() != n) {
    throw MismatchError(std::string(what) + ": expected " + std::to_string(set.size()) +
                        " elements, got " + std::to_string(n));
  }
}

inline void require_same(const FinSet& a, const FinSet& b, const char* what) {
  if (!same_size(a, b)) {
    throw MismatchError(std::string(what) + ": sets of size " + std::to_string(a.size()) +
                        " and " + std::to_string(b.size()) + " do not match");
  }
}

// A total function dom -> cod.
class FinMap {
 public:
  FinMap() = default;
  FinMap(FinSet dom, FinSet cod, std::vector<Index> targets)
      : dom_(std::move(dom)), cod_(std::move(cod)), targets_(std::move(targets)) {
    require_size(dom_, targets_.size(), "FinMap targets");
    for (Index t : targets_) {
      if (t >= cod_.size()) {
        throw StructureError("FinMap target " + std::to_string(t) + " out of range for codomain of size " +
                             std::to_string(cod_.size()));
      }
    }
  }

  static FinMap identity(const FinSet& set) {
    std::vector<Index> t(set.size());
    for (Index i = 0; i < t.size(); ++i) t[i] = i;
    return FinMap(set, set, std::move(t));
  }

  static FinMap from_empty(const FinSet& cod) { return FinMap(FinSet(0), cod, {}); }

  const FinSet& dom() const noexcept { return dom_; }
  const FinSet& cod() const noexcept { return cod_; }
  const std::vector<Index>& targets() const noexcept { return targets_; }
  Index operator()(Index a) const { return targets_.at(a); }

  bool injective() const {
    std::vector<bool> hit(cod_.size(), false);
    for (Index t : targets_) {
      if (hit[t]) return false;
      hit[t] = true;
    }
    return true;
  }

  std::vector<Index> preimage(Index b) const {
    std::vector<Index> out;
    for (Index a = 0; a < targets_.size(); ++a) {
      if (targets_[a] == b) out.push_back(a);
    }
    return out;
  }

 private:
  FinSet dom_;
  FinSet cod_;
  std::vector<Index> targets_;
};

// g ∘ f : first f, then g.
inline FinMap compose_maps(const FinMap& f, const FinMap& g) {
  require_same(f.cod(), g.dom(), "compose_maps");
  std::vector<Index> t(f.dom().size());
  for (Index a = 0; a < t.size(); ++a) t[a] = g(f(a));
  return FinMap(f.dom(), g.cod(), std::move(t));
}

// f*(x) = x ∘ f
inline Vec pullback_vec(const FinMap& f, std::span<const double> x) {
  require_size(f.cod(), x.size(), "pullback_vec");
  Vec out(f.dom().size());
  for (Index a = 0; a < out.size(); ++a) out[a] = x[f(a)];
  return out;
}

// f_*(x)(b) = sum of x over the preimage of b
inline Vec pushforward_vec(const FinMap& f, std::span<const double> x) {
  require_size(f.dom(), x.size(), "pushforward_vec");
  Vec out(f.cod().size(), 0.0);
  for (Index a = 0; a < x.size(); ++a) out[f(a)] += x[a];
  return out;
}

// A span A <-left- apex -right-> B.
class Span {
 public:
  Span() = default;
  Span(FinMap left, FinMap right) : left_(std::move(left)), right_(std::move(right)) {
    require_same(left_.dom(), right_.dom(), "Span legs");
  }

  // One apex element per (source, target) pair, in the given order.
  static Span from_pairs(const FinSet& src, const FinSet& tgt,
                         const std::vector<std::pair<Index, Index>>& pairs) {
    FinSet apex(pairs.size());
    std::vector<Index> l, r;
    l.reserve(pairs.size());
    r.reserve(pairs.size());
    for (auto [a, b] : pairs) {
      l.push_back(a);
      r.push_back(b);
    }
    return Span(FinMap(apex, src, std::move(l)), FinMap(apex, tgt, std::move(r)));
  }

  static Span identity(const FinSet& set) {
    FinSet apex(set.size());
    std::vector<Index> t(set.size());
    for (Index i = 0; i < t.size(); ++i) t[i] = i;
    return Span(FinMap(apex, set, t), FinMap(apex, set, t));
  }

  static Span empty(const FinSet& src, const FinSet& tgt) { return from_pairs(src, tgt, {}); }

  const FinSet& apex() const noexcept { return left_.dom(); }
  const FinSet& src() const noexcept { return left_.cod(); }
  const FinSet& tgt() const noexcept { return right_.cod(); }
  const FinMap& left() const noexcept { return left_; }
  const FinMap& right() const noexcept { return right_; }
  std::size_t size() const noexcept { return apex().size(); }

  std::pair<Index, Index> leg_pair(Index e) const { return {left_(e), right_(e)}; }

 private:
  FinMap left_;
  FinMap right_;
};

// The same legs over relabeled (equal-size) endpoint sets.
inline Span reseat_span(const Span& r, const FinSet& src, const FinSet& tgt) {
  require_same(r.src(), src, "reseat_span source");
  require_same(r.tgt(), tgt, "reseat_span target");
  return Span(FinMap(r.apex(), src, r.left().targets()), FinMap(r.apex(), tgt, r.right().targets()));
}

inline FinMap reseat_map(const FinMap& f, const FinSet& dom, const FinSet& cod) {
  return FinMap(dom, cod, f.targets());
}

// R*(x) = t_*(s*(x)): value at b is the sum of x over everything related to b.
inline Vec span_apply(const Span& r, std::span<const double> x) {
  require_size(r.src(), x.size(), "span_apply");
  Vec out(r.tgt().size(), 0.0);
  for (Index e = 0; e < r.size(); ++e) out[r.right()(e)] += x[r.left()(e)];
  return out;
}

struct FiberProduct {
  FinSet apex;
  FinMap p;  // apex -> A
  FinMap q;  // apex -> B
};

// Pairs (a, b) with f(a) = g(b), enumerated in lexicographic order.
inline FiberProduct fiber_product(const FinMap& f, const FinMap& g) {
  require_same(f.cod(), g.cod(), "fiber_product");
  std::vector<std::vector<Index>> by_image(g.cod().size());
  for (Index b = 0; b < g.dom().size(); ++b) by_image[g(b)].push_back(b);
  std::vector<Index> ps, qs;
  for (Index a = 0; a < f.dom().size(); ++a) {
    for (Index b : by_image[f(a)]) {
      ps.push_back(a);
      qs.push_back(b);
    }
  }
  FinSet apex(ps.size());
  return {apex, FinMap(apex, f.dom(), std::move(ps)), FinMap(apex, g.dom(), std::move(qs))};
}

// A <- R x_B S -> C
inline Span compose_spans(const Span& r, const Span& s) {
  require_same(r.tgt(), s.src(), "compose_spans");
  auto fp = fiber_product(r.right(), s.left());
  return Span(compose_maps(fp.p, r.left()), compose_maps(fp.q, s.right()));
}

// A binary relation between two finite sets; pairs are kept sorted and unique.
class Relation {
 public:
  using Pair = std::pair<Index, Index>;

  Relation() = default;
  Relation(FinSet src, FinSet tgt, std::vector<Pair> pairs = {})
      : src_(std::move(src)), tgt_(std::move(tgt)), pairs_(std::move(pairs)) {
    for (auto [a, b] : pairs_) {
      if (a >= src_.size() || b >= tgt_.size()) {
        throw StructureError("relation pair (" + std::to_string(a) + "," + std::to_string(b) +
                             ") out of range");
      }
    }
    std::sort(pairs_.begin(), pairs_.end());
    pairs_.erase(std::unique(pairs_.begin(), pairs_.end()), pairs_.end());
  }

  static Relation diagonal(const FinSet& set) {
    std::vector<Pair> p;
    for (Index i = 0; i < set.size(); ++i) p.emplace_back(i, i);
    return Relation(set, set, std::move(p));
  }

  static Relation full(const FinSet& src, const FinSet& tgt) {
    std::vector<Pair> p;
    for (Index a = 0; a < src.size(); ++a)
      for (Index b = 0; b < tgt.size(); ++b) p.emplace_back(a, b);
    return Relation(src, tgt, std::move(p));
  }

  const FinSet& src() const noexcept { return src_; }
  const FinSet& tgt() const noexcept { return tgt_; }
  const std::vector<Pair>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }

  bool contains(Index a, Index b) const {
    return std::binary_search(pairs_.begin(), pairs_.end(), Pair{a, b});
  }

  // Elements of src related to b.
  std::vector<Index> related_to(Index b) const {
    std::vector<Index> out;
    for (auto [x, y] : pairs_)
      if (y == b) out.push_back(x);
    return out;
  }

  Span to_span() const { return Span::from_pairs(src_, tgt_, pairs_); }

  friend bool operator==(const Relation& l, const Relation& r) {
    return same_size(l.src_, r.src_) && same_size(l.tgt_, r.tgt_) && l.pairs_ == r.pairs_;
  }

 private:
  FinSet src_;
  FinSet tgt_;
  std::vector<Pair> pairs_;
};

inline Relation span_to_relation(const Span& r) {
  std::vector<Relation::Pair> p;
  p.reserve(r.size());
  for (Index e = 0; e < r.size(); ++e) p.push_back(r.leg_pair(e));
  return Relation(r.src(), r.tgt(), std::move(p));
}

// pairs(r) ⊆ pairs(s)
inline bool relation_leq(const Relation& r, const Relation& s) {
  require_same(r.src(), s.src(), "relation_leq source");
  require_same(r.tgt(), s.tgt(), "relation_leq target");
  return std::includes(s.pairs().begin(), s.pairs().end(), r.pairs().begin(), r.pairs().end());
}

// Pairs of r missing from s.
inline std::vector<Relation::Pair> relation_excess(const Relation& r, const Relation& s) {
  std::vector<Relation::Pair> out;
  std::set_difference(r.pairs().begin(), r.pairs().end(), s.pairs().begin(), s.pairs().end(),
                      std::back_inserter(out));
  return out;
}

inline Relation relation_union(const Relation& r, const Relation& s) {
  require_same(r.src(), s.src(), "relation_union source");
  require_same(r.tgt(), s.tgt(), "relation_union target");
  auto p = r.pairs();
  p.insert(p.end(), s.pairs().begin(), s.pairs().end());
  return Relation(r.src(), r.tgt(), std::move(p));
}

// Relational composite: (a, c) iff some b has (a, b) in r and (b, c) in s.
inline Relation relation_compose(const Relation& r, const Relation& s) {
  return span_to_relation(compose_spans(r.to_span(), s.to_span()));
}

// A directed multigraph with edge source/target maps.
class DiGraph {
 public:
  DiGraph() = default;
  DiGraph(FinMap src, FinMap tgt) : src_(std::move(src)), tgt_(std::move(tgt)) {
    require_same(src_.dom(), tgt_.dom(), "DiGraph edge maps");
    require_same(src_.cod(), tgt_.cod(), "DiGraph vertex sets");
  }
  explicit DiGraph(const Span& s) : DiGraph(s.left(), s.right()) {
    require_same(s.src(), s.tgt(), "DiGraph from span");
  }

  const FinSet& vertices() const noexcept { return src_.cod(); }
  const FinSet& edges() const noexcept { return src_.dom(); }
  const FinMap& src() const noexcept { return src_; }
  const FinMap& tgt() const noexcept { return tgt_; }

  // Outgoing edge lists, indexed by vertex.
  std::vector<std::vector<Index>> out_edges() const {
    std::vector<std::vector<Index>> out(vertices().size());
    for (Index e = 0; e < edges().size(); ++e) out[src_(e)].push_back(e);
    return out;
  }

 private:
  FinMap src_;
  FinMap tgt_;
};

// (u, v) iff a directed path u -> v of length >= 1 exists; `reflexive`
// also adds every (v, v).
inline Relation path_closure(const DiGraph& g, bool reflexive) {
  const std::size_t n = g.vertices().size();
  auto adj = g.out_edges();
  std::vector<Relation::Pair> pairs;
  std::vector<char> seen(n);
  std::vector<Index> stack;
  for (Index u = 0; u < n; ++u) {
    std::fill(seen.begin(), seen.end(), 0);
    stack.clear();
    for (Index e : adj[u]) stack.push_back(g.tgt()(e));
    while (!stack.empty()) {
      Index v = stack.back();
      stack.pop_back();
      if (seen[v]) continue;
      seen[v] = 1;
      for (Index e : adj[v]) stack.push_back(g.tgt()(e));
    }
    if (reflexive) seen[u] = 1;
    for (Index v = 0; v < n; ++v)
      if (seen[v]) pairs.emplace_back(u, v);
  }
  return Relation(g.vertices(), g.vertices(), std::move(pairs));
}

struct TopoResult {
  bool acyclic = true;
  std::vector<Index> order;        // every vertex after all of its parents
  std::vector<Index> cycle_edges;  // witness cycle, consecutive edges, when cyclic
};

// Kahn's algorithm; on failure walks back through the residual graph to
// extract one cycle.
inline TopoResult topological_order(const DiGraph& g) {
  const std::size_t n = g.vertices().size();
  auto adj = g.out_edges();
  std::vector<std::size_t> indeg(n, 0);
  for (Index e = 0; e < g.edges().size(); ++e) ++indeg[g.tgt()(e)];

  TopoResult res;
  std::vector<Index> ready;
  for (Index v = n; v-- > 0;)
    if (indeg[v] == 0) ready.push_back(v);
  std::vector<char> done(n, 0);
  while (!ready.empty()) {
    Index v = ready.back();
    ready.pop_back();
    done[v] = 1;
    res.order.push_back(v);
    for (Index e : adj[v]) {
      if (--indeg[g.tgt()(e)] == 0) ready.push_back(g.tgt()(e));
    }
  }
  if (res.order.size() == n) return res;

  res.acyclic = false;
  // Every remaining vertex has an incoming edge from another remaining
  // vertex, so following those backwards must revisit a vertex.
  std::vector<Index> in_edge(n, static_cast<Index>(-1));
  for (Index e = 0; e < g.edges().size(); ++e) {
    Index s = g.src()(e), t = g.tgt()(e);
    if (!done[s] && !done[t] && in_edge[t] == static_cast<Index>(-1)) in_edge[t] = e;
  }
  Index v = 0;
  while (done[v]) ++v;
  std::vector<std::size_t> visit(n, static_cast<std::size_t>(-1));
  std::vector<Index> walk;  // edges traversed backwards
  while (visit[v] == static_cast<std::size_t>(-1)) {
    visit[v] = walk.size();
    Index e = in_edge[v];
    walk.push_back(e);
    v = g.src()(e);
  }
  std::vector<Index> cycle(walk.begin() + static_cast<std::ptrdiff_t>(visit[v]), walk.end());
  std::reverse(cycle.begin(), cycle.end());
  res.cycle_edges = std::move(cycle);
  res.order.clear();
  return res;
}

inline bool is_acyclic(const DiGraph& g) { return topological_order(g).acyclic; }

// --- coproducts -----------------------------------------------------------

struct Coproduct {
  FinSet set;
  FinMap inl;
  FinMap inr;
};

// Left block first. Labels are kept when they do not collide; colliding
// labels on either side get "left." / "right." prefixes.
inline Coproduct finset_coproduct(const FinSet& a, const FinSet& b) {
  FinSet sum(a.size() + b.size());
  if (a.has_labels() || b.has_labels()) {
    auto la = a.labels(), lb = b.labels();
    std::unordered_set<std::string> left(la.begin(), la.end());
    bool clash = std::any_of(lb.begin(), lb.end(), [&](const auto& x) { return left.count(x) > 0; });
    std::vector<std::string> all;
    all.reserve(la.size() + lb.size());
    for (auto& x : la) all.push_back(clash ? "left." + x : x);
    for (auto& x : lb) all.push_back(clash ? "right." + x : x);
    sum = FinSet(std::move(all));
  }
  std::vector<Index> l(a.size()), r(b.size());
  for (Index i = 0; i < l.size(); ++i) l[i] = i;
  for (Index i = 0; i < r.size(); ++i) r[i] = a.size() + i;
  return {sum, FinMap(a, sum, std::move(l)), FinMap(b, sum, std::move(r))};
}

// f + g : A + B -> C + D
inline FinMap finmap_coproduct(const FinMap& f, const FinMap& g, const FinSet& dom, const FinSet& cod) {
  std::vector<Index> t;
  t.reserve(f.dom().size() + g.dom().size());
  for (Index x : f.targets()) t.push_back(x);
  for (Index x : g.targets()) t.push_back(f.cod().size() + x);
  return FinMap(dom, cod, std::move(t));
}

inline FinMap finmap_coproduct(const FinMap& f, const FinMap& g) {
  auto dom = finset_coproduct(f.dom(), g.dom()).set;
  auto cod = finset_coproduct(f.cod(), g.cod()).set;
  return finmap_coproduct(f, g, dom, cod);
}

// Blockwise span on A + A' <- R + R' -> B + B', with given port sets.
inline Span span_coproduct(const Span& r, const Span& s, const FinSet& src, const FinSet& tgt) {
  require_size(src, r.src().size() + s.src().size(), "span_coproduct source");
  require_size(tgt, r.tgt().size() + s.tgt().size(), "span_coproduct target");
  FinSet apex(r.size() + s.size());
  return Span(finmap_coproduct(r.left(), s.left(), apex, src),
              finmap_coproduct(r.right(), s.right(), apex, tgt));
}

inline Span span_coproduct(const Span& r, const Span& s) {
  return span_coproduct(r, s, finset_coproduct(r.src(), s.src()).set,
                        finset_coproduct(r.tgt(), s.tgt()).set);
}

// R + S over the same endpoints: the apexes are juxtaposed.
inline Span span_sum(const Span& r, const Span& s) {
  require_same(r.src(), s.src(), "span_sum source");
  require_same(r.tgt(), s.tgt(), "span_sum target");
  FinSet apex(r.size() + s.size());
  std::vector<Index> l = r.left().targets(), t = r.right().targets();
  l.insert(l.end(), s.left().targets().begin(), s.left().targets().end());
  t.insert(t.end(), s.right().targets().begin(), s.right().targets().end());
  return Span(FinMap(apex, r.src(), std::move(l)), FinMap(apex, r.tgt(), std::move(t)));
}

inline Relation relation_coproduct(const Relation& r, const Relation& s, const FinSet& src,
                                   const FinSet& tgt) {
  require_size(src, r.src().size() + s.src().size(), "relation_coproduct source");
  require_size(tgt, r.tgt().size() + s.tgt().size(), "relation_coproduct target");
  auto p = r.pairs();
  for (auto [a, b] : s.pairs()) p.emplace_back(a + r.src().size(), b + r.tgt().size());
  return Relation(src, tgt, std::move(p));
}

inline Relation relation_coproduct(const Relation& r, const Relation& s) {
  return relation_coproduct(r, s, finset_coproduct(r.src(), s.src()).set,
                            finset_coproduct(r.tgt(), s.tgt()).set);
}

inline DiGraph graph_coproduct(const DiGraph& g, const DiGraph& h) {
  auto v = finset_coproduct(g.vertices(), h.vertices()).set;
  FinSet e(g.edges().size() + h.edges().size());
  return DiGraph(finmap_coproduct(g.src(), h.src(), e, v), finmap_coproduct(g.tgt(), h.tgt(), e, v));
}

// --- dependency probing ---------------------------------------------------

using VecFn = std::function<Vec(std::span<const double>)>;

struct ProbeViolation {
  Index output = 0;
  Index perturbed_input = 0;
  Vec base;
  double delta = 0.0;  // change in the output coordinate, NaN if non-finite
};

struct ProbeReport {
  std::vector<ProbeViolation> violations;
  std::vector<Vec> nonfinite_points;  // probe points where fn returned non-finite values
  bool ok() const { return violations.empty() && nonfinite_points.empty(); }
};

struct ProbeOptions {
  std::size_t trials = 32;
  double tol = 1e-9;
  std::uint64_t seed = 0xC0FFEE;
};

// Falsification test for "fn respects rel": perturbs each input coordinate in
// turn and checks that outputs unrelated to it do not move.
inline ProbeReport respects_probe(const VecFn& fn, const Relation& rel, ProbeOptions opt = {}) {
  const std::size_t n = rel.src().size(), m = rel.tgt().size();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> base_dist(-2.0, 2.0), noise(-1.0, 1.0);
  ProbeReport report;
  auto finite = [](const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    Vec x(n);
    for (auto& xi : x) xi = base_dist(rng);
    Vec y = fn(x);
    require_size(rel.tgt(), y.size(), "respects_probe output");
    if (!finite(y)) {
      report.nonfinite_points.push_back(x);
      continue;
    }
    for (Index a = 0; a < n; ++a) {
      Vec xp = x;
      double d = noise(rng) * std::max(1.0, std::abs(x[a]));
      if (d == 0.0) d = 0.5;
      xp[a] += d;
      Vec yp = fn(xp);
      if (!finite(yp)) {
        report.nonfinite_points.push_back(xp);
        continue;
      }
      for (Index b = 0; b < m; ++b) {
        if (rel.contains(a, b)) continue;
        double delta = yp[b] - y[b];
        if (std::abs(delta) > opt.tol) report.violations.push_back({b, a, x, delta});
      }
    }
  }
  return report;
}

}  // namespace dynwire
