#include "cpagrid/guarantees.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

#include "cpagrid/lp.hpp"
#include "cpagrid/recovery.hpp"

namespace cpagrid {

Certificate failcover_certify(const TruthView& t, const FailCoverSet& cover, LinkId link, double eta, bool check);

namespace {

constexpr double kMargin = 1e-9;
constexpr double kWitnessMargin = 2e-8;
constexpr double kInf = std::numeric_limits<double>::infinity();

int sign(double v) { return (v > 0.0) - (v < 0.0); }

int find_sorted(const std::vector<int>& v, int id) {
  const auto it = std::lower_bound(v.begin(), v.end(), id);
  return (it != v.end() && *it == id) ? static_cast<int>(it - v.begin()) : -1;
}

// Membership mask over local node indices; empty when U leaves V_H.
std::vector<bool> local_mask(const TruthView& t, std::span<const NodeId> nodes) {
  std::vector<bool> in(t.nodes.size(), false);
  for (NodeId v : nodes) {
    const int i = t.local_node(v);
    if (i < 0) return {};
    in[static_cast<std::size_t>(i)] = true;
  }
  return in;
}

bool connected_within(const TruthView& t, const std::vector<bool>& in) {
  const auto start = std::find(in.begin(), in.end(), true);
  if (start == in.end()) return false;
  std::vector<bool> seen(in.size(), false);
  std::deque<int> queue{static_cast<int>(start - in.begin())};
  seen[static_cast<std::size_t>(queue.front())] = true;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    for (const auto& nb : t.grid->neighbors(t.nodes[static_cast<std::size_t>(i)])) {
      const int j = t.local_node(nb.node);
      if (j < 0 || !in[static_cast<std::size_t>(j)] || seen[static_cast<std::size_t>(j)]) continue;
      seen[static_cast<std::size_t>(j)] = true;
      ++reached;
      queue.push_back(j);
    }
  }
  return reached == static_cast<std::size_t>(std::count(in.begin(), in.end(), true));
}

Vector aggregate(const TruthView& t, const std::vector<bool>& in) {
  Vector agg = Vector::Zero(static_cast<Eigen::Index>(t.links.size()));
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in[i]) agg += t.flows.row(static_cast<Eigen::Index>(i)).transpose();
  return agg;
}

// Local endpoints of local link j.
std::pair<int, int> ends(const TruthView& t, int j) {
  const auto& l = t.grid->link(t.links[static_cast<std::size_t>(j)]);
  return {t.local_node(l.from), t.local_node(l.to)};
}

bool on_boundary(const TruthView& t, const std::vector<bool>& in, int j) {
  const auto [a, b] = ends(t, j);
  return in[static_cast<std::size_t>(a)] != in[static_cast<std::size_t>(b)];
}

double sum_over(const Vector& g, const std::vector<bool>& in) {
  double s = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in[i]) s += g[static_cast<Eigen::Index>(i)];
  return s;
}

std::vector<NodeId> to_nodes(const TruthView& t, const std::vector<bool>& in) {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in[i]) out.push_back(t.nodes[i]);
  return out;
}

int require_link(const TruthView& t, LinkId link) {
  const int j = t.local_link(link);
  if (j < 0) throw Error(ErrorCode::InvalidArgument, "link " + std::to_string(link) + " is not in the attacked area");
  return j;
}

void require_hypothesis(const TruthView& t, int j, Hypothesis h) {
  if (t.failed[static_cast<std::size_t>(j)] != (h == Hypothesis::Failed))
    throw Error(ErrorCode::PreconditionViolated, "hypothesis disagrees with the ground truth of link " +
                                                     std::to_string(t.links[static_cast<std::size_t>(j)]));
}

Certificate blank(LinkId link, Hypothesis h, Mechanism m) {
  Certificate c;
  c.link = link;
  c.hypothesis = h;
  c.mechanism = m;
  return c;
}

void finish(Certificate& c, const GaleSystem& sys, Vector z) {
  const double total = z.sum();
  c.value = total > 0.0 ? sys.g.dot(z) / total : 0.0;
  c.verdict = validate_witness(sys, z) ? Verdict::Certified : Verdict::NotCertified;
  c.z = std::move(z);
}

// Conditions 1-3 of the hyper-node theorems for U given as a mask. On success
// the explicit witness is returned.
std::optional<Vector> hypernode_witness(const TruthView& t, const std::vector<bool>& in, int l, Hypothesis h,
                                        double eta, const GaleSystem& sys) {
  if (!on_boundary(t, in, l)) return std::nullopt;
  const Vector agg = aggregate(t, in);
  const int sigma = sign(agg[l]);
  if (sigma == 0) return std::nullopt;
  const bool miss = h == Hypothesis::Failed;
  const auto m = static_cast<int>(t.links.size());
  for (int e = 0; e < m; ++e) {
    if (e == l || !on_boundary(t, in, e)) continue;
    const bool f = t.failed[static_cast<std::size_t>(e)];
    const int s = sign(agg[e]) * sigma;
    if (miss ? (f ? s <= 0 : s > 0) : (f ? s > 0 : s <= 0)) return std::nullopt;
  }
  // The z_{D,u} block pairs with a negative aggregated flow on l for a miss
  // and with a positive one for a false alarm.
  const bool plus = miss ? sigma < 0 : sigma > 0;
  const double fg = sum_over(plus ? t.g_plus : t.g_minus, in);
  const double slack = miss ? fg + (eta - 1.0) * std::abs(agg[l]) : fg - eta * std::abs(agg[l]);
  if (!(slack < -kMargin)) return std::nullopt;

  Vector z = Vector::Zero(sys.a.cols());
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in[i]) z[plus ? sys.col_d_plus(static_cast<int>(i)) : sys.col_d_minus(static_cast<int>(i))] = 1.0;
  z[sys.col_w()] = std::abs(agg[l]);
  for (int e = 0; e < m; ++e) {
    if (e == l || !on_boundary(t, in, e)) continue;
    if (t.failed[static_cast<std::size_t>(e)])
      z[sys.col_x_plus(e)] = std::abs(agg[e]);
    else
      z[sys.col_x_minus(e)] = std::abs(agg[e]);
  }
  return z;
}

bool fail_cover_member(const TruthView& t, const std::vector<bool>& in, const Vector& agg, int* side) {
  int s = 0;
  for (std::size_t j = 0; j < t.links.size(); ++j) {
    if (!t.failed[j] || !on_boundary(t, in, static_cast<int>(j))) continue;
    const int sj = sign(agg[static_cast<Eigen::Index>(j)]);
    if (sj == 0 || (s != 0 && sj != s)) return false;
    s = sj;
  }
  if (side) *side = s;
  return s != 0;
}

int count_certified(const TruthView& t, const FailCoverSet& cover, double eta) {
  int n = 0;
  for (LinkId e : t.links)
    if (failcover_certify(t, cover, e, eta, false).certified()) ++n;
  return n;
}

}  // namespace

// ---------------------------------------------------------------------------

int TruthView::local_node(NodeId v) const { return find_sorted(nodes, v); }
int TruthView::local_link(LinkId e) const { return find_sorted(links, e); }

bool TruthView::is_failed(LinkId e) const {
  const int j = local_link(e);
  return j >= 0 && failed[static_cast<std::size_t>(j)];
}

std::vector<LinkId> TruthView::failed_links() const {
  std::vector<LinkId> out;
  for (std::size_t j = 0; j < links.size(); ++j)
    if (failed[j]) out.push_back(links[j]);
  return out;
}

TruthView truth_view(std::shared_ptr<const Grid> grid, std::span<const NodeId> nodes, std::span<const LinkId> failed,
                     const Vector& theta_post, const Vector& delta) {
  if (!grid) throw Error(ErrorCode::InvalidArgument, "truth_view: null grid");
  TruthView t;
  t.grid = grid;
  t.nodes.assign(nodes.begin(), nodes.end());
  std::sort(t.nodes.begin(), t.nodes.end());
  t.links = induced_links(*grid, t.nodes);
  t.failed.assign(t.links.size(), false);
  for (LinkId e : failed) {
    const int j = t.local_link(e);
    if (j < 0) throw Error(ErrorCode::InvalidArgument, "failed link " + std::to_string(e) + " is not in the attacked area");
    t.failed[static_cast<std::size_t>(j)] = true;
  }
  const auto a = area_system(*grid, t.nodes, t.links, theta_post, theta_post);
  t.flows = a.flows;
  const auto k = static_cast<Eigen::Index>(t.nodes.size());
  t.delta.resize(k);
  t.injections = a.injections;
  t.g_plus.resize(k);
  t.g_minus.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = t.injections[i], d = delta[t.nodes[static_cast<std::size_t>(i)]];
    t.delta[i] = d;
    if (p > 0.0) {
      t.g_plus[i] = p - d;
      t.g_minus[i] = d;
    } else {
      t.g_plus[i] = -d;
      t.g_minus[i] = -(p - d);
    }
  }
  t.grid_connected = islands(*grid, failed).size() == 1;
  return t;
}

TruthView truth_view(const AttackScenario& s) {
  return truth_view(s.grid, s.attacked_nodes, s.failed_links, s.post.theta, s.delta);
}

std::string_view to_string(Hypothesis h) { return h == Hypothesis::Failed ? "failed" : "operational"; }
std::string_view to_string(Verdict v) { return v == Verdict::Certified ? "certified" : "not-certified"; }
std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::Gale: return "gale";
    case Mechanism::HyperNodeNoMiss: return "hyper-node-no-miss";
    case Mechanism::HyperNodeNoFA: return "hyper-node-no-false-alarm";
    case Mechanism::FailCover: return "fail-cover";
    case Mechanism::CorollaryConnected: return "corollary-connected";
    case Mechanism::CorollaryIslanding: return "corollary-islanding";
  }
  return "unknown";
}

GaleSystem gale_system(const TruthView& t, LinkId link, Hypothesis h, double eta) {
  const int l = require_link(t, link);
  GaleSystem s;
  s.k = static_cast<Eigen::Index>(t.nodes.size());
  s.m = static_cast<Eigen::Index>(t.links.size());
  const Eigen::Index cols = 2 * s.k + 2 * s.m + 2;
  s.a = Matrix::Zero(s.m, cols);
  s.g = Vector::Zero(cols);
  for (Eigen::Index u = 0; u < s.k; ++u) {
    s.a.col(s.col_d_plus(static_cast<int>(u))) = t.flows.row(u).transpose();
    s.a.col(s.col_d_minus(static_cast<int>(u))) = -t.flows.row(u).transpose();
    s.g[s.col_d_plus(static_cast<int>(u))] = t.g_plus[u];
    s.g[s.col_d_minus(static_cast<int>(u))] = t.g_minus[u];
  }
  for (Eigen::Index e = 0; e < s.m; ++e) {
    const double x = t.failed[static_cast<std::size_t>(e)] ? 1.0 : 0.0;
    s.a(e, s.col_x_minus(static_cast<int>(e))) = -1.0;
    s.g[s.col_x_minus(static_cast<int>(e))] = x;
    s.a(e, s.col_x_plus(static_cast<int>(e))) = 1.0;
    s.g[s.col_x_plus(static_cast<int>(e))] = 1.0 - x;
  }
  if (h == Hypothesis::Failed) {
    s.a(l, s.col_w()) = 1.0;
    s.g[s.col_w()] = eta - 1.0;
  } else {
    s.a(l, s.col_w()) = -1.0;
    s.g[s.col_w()] = -eta;
  }
  s.a.col(s.col_star()).setOnes();
  return s;
}

bool validate_witness(const GaleSystem& s, const Vector& z) {
  if (z.size() != s.a.cols() || z.size() == 0) return false;
  if (z.minCoeff() < 0.0 || !z.allFinite()) return false;
  const double total = z.sum();
  if (!(total > 0.0)) return false;
  const double scale = std::max(1.0, (s.a.cwiseAbs() * z).maxCoeff());
  if (s.a.rows() > 0 && (s.a * z).cwiseAbs().maxCoeff() > 1e-9 * scale) return false;
  return s.g.dot(z) < -kWitnessMargin * total;
}

Certificate gale_certify(const TruthView& t, LinkId link, Hypothesis h, double eta) {
  const int l = require_link(t, link);
  require_hypothesis(t, l, h);
  const GaleSystem sys = gale_system(t, link, h, eta);
  Certificate c = blank(link, h, Mechanism::Gale);
  const Alternative alt = alternative_feasible(sys.a, sys.g);
  if (alt.exists) {
    finish(c, sys, alt.z);
  } else {
    c.z = alt.z;
    c.value = alt.value;
  }
  return c;
}

HyperNode hypernode_props(const TruthView& t, std::span<const NodeId> nodes) {
  const auto in = local_mask(t, nodes);
  if (in.empty() || !connected_within(t, in))
    throw Error(ErrorCode::NotConnected, "node set does not induce a connected subgraph of the attacked area");
  HyperNode u;
  u.nodes = to_nodes(t, in);
  u.aggregated = aggregate(t, in);
  bool any_failed = false, failed_negative = false, operational_positive = false;
  u.f1 = kInf;
  for (std::size_t j = 0; j < t.links.size(); ++j) {
    if (!on_boundary(t, in, static_cast<int>(j))) continue;
    u.boundary.push_back(t.links[j]);
    const double a = u.aggregated[static_cast<Eigen::Index>(j)];
    if (t.failed[j]) {
      any_failed = true;
      failed_negative = failed_negative || a < 0.0;
      u.f1 = std::min(u.f1, std::abs(a));
    } else {
      operational_positive = operational_positive || a > 0.0;
    }
  }
  if (any_failed) {
    for (std::size_t j = 0; j < t.links.size(); ++j) {
      if (t.failed[j] || !on_boundary(t, in, static_cast<int>(j))) continue;
      const double a = u.aggregated[static_cast<Eigen::Index>(j)];
      for (std::size_t f = 0; f < t.links.size(); ++f) {
        if (!t.failed[f] || !on_boundary(t, in, static_cast<int>(f))) continue;
        if (u.aggregated[static_cast<Eigen::Index>(f)] * a > 0.0) {
          u.s_u.push_back(t.links[j]);
          u.f0 = std::max(u.f0, std::abs(a));
          break;
        }
      }
    }
    u.fg = sum_over(failed_negative ? t.g_plus : t.g_minus, in);
  } else {
    u.fg = sum_over(operational_positive ? t.g_plus : t.g_minus, in);
  }
  return u;
}

bool certify_no_miss(const TruthView& t, std::span<const NodeId> nodes, LinkId link, double eta) {
  const int l = require_link(t, link);
  if (!t.failed[static_cast<std::size_t>(l)]) return false;
  const auto in = local_mask(t, nodes);
  if (in.empty() || !connected_within(t, in)) return false;
  const auto sys = gale_system(t, link, Hypothesis::Failed, eta);
  const auto z = hypernode_witness(t, in, l, Hypothesis::Failed, eta, sys);
  return z && validate_witness(sys, *z);
}

bool certify_no_false_alarm(const TruthView& t, std::span<const NodeId> nodes, LinkId link, double eta) {
  const int l = require_link(t, link);
  if (t.failed[static_cast<std::size_t>(l)]) return false;
  const auto in = local_mask(t, nodes);
  if (in.empty() || !connected_within(t, in)) return false;
  const auto sys = gale_system(t, link, Hypothesis::Operational, eta);
  const auto z = hypernode_witness(t, in, l, Hypothesis::Operational, eta, sys);
  return z && validate_witness(sys, *z);
}

Certificate bfs_witness_search(const TruthView& t, LinkId link, Hypothesis h, double eta) {
  const int l = require_link(t, link);
  require_hypothesis(t, l, h);
  const bool miss = h == Hypothesis::Failed;
  Certificate best = blank(link, h, miss ? Mechanism::HyperNodeNoMiss : Mechanism::HyperNodeNoFA);
  const auto sys = gale_system(t, link, h, eta);
  const auto [a, b] = ends(t, l);
  const auto k = t.nodes.size();
  for (const auto& [start, other] : {std::pair{a, b}, std::pair{b, a}}) {
    std::vector<bool> in(k, false);
    in[static_cast<std::size_t>(start)] = true;
    for (std::size_t round = 0; round < k; ++round) {
      const Vector agg = aggregate(t, in);
      const int sigma = sign(agg[l]);
      if (sigma == 0) break;
      std::set<int> add;
      for (int e = 0; e < static_cast<int>(t.links.size()); ++e) {
        if (e == l || !on_boundary(t, in, e)) continue;
        const bool f = t.failed[static_cast<std::size_t>(e)];
        const int s = sign(agg[e]) * sigma;
        if (miss ? (f ? s <= 0 : s > 0) : (f ? s > 0 : s <= 0)) {
          const auto [x, y] = ends(t, e);
          add.insert(in[static_cast<std::size_t>(x)] ? y : x);
        }
      }
      if (add.empty()) {
        if (auto z = hypernode_witness(t, in, l, h, eta, sys)) {
          Certificate c = blank(link, h, best.mechanism);
          c.witness_nodes = {to_nodes(t, in)};
          finish(c, sys, std::move(*z));
          if (c.certified()) return c;
        }
        break;
      }
      if (add.count(other)) break;
      for (int v : add) in[static_cast<std::size_t>(v)] = true;
    }
  }
  return best;
}

FailCoverSet make_failcover_set(const TruthView& t, const std::vector<std::vector<NodeId>>& members) {
  if (members.empty()) throw Error(ErrorCode::PreconditionViolated, "fail-cover set is empty");
  FailCoverSet cover;
  std::vector<Vector> aggs;
  std::vector<double> f1s, fgs;
  for (const auto& nodes : members) {
    const HyperNode u = hypernode_props(t, nodes);
    const auto in = local_mask(t, u.nodes);
    int side = 0;
    if (!fail_cover_member(t, in, u.aggregated, &side))
      throw Error(ErrorCode::PreconditionViolated, "member is not a fail-cover hyper-node");
    cover.members.push_back(u.nodes);
    cover.negative.push_back(side < 0);
    aggs.push_back(u.aggregated);
    f1s.push_back(u.f1);
    fgs.push_back(u.fg);
  }
  const double top = *std::max_element(f1s.begin(), f1s.end());
  cover.aggregated = Vector::Zero(static_cast<Eigen::Index>(t.links.size()));
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double r = top / f1s[i];
    cover.weights.push_back(r);
    cover.aggregated += (cover.negative[i] ? r : -r) * aggs[i];
    cover.fg += r * fgs[i];
  }
  cover.f1 = kInf;
  for (std::size_t j = 0; j < t.links.size(); ++j)
    if (t.failed[j]) cover.f1 = std::min(cover.f1, std::abs(cover.aggregated[static_cast<Eigen::Index>(j)]));
  for (std::size_t j = 0; j < t.links.size(); ++j) {
    if (t.failed[j]) continue;
    const double a = cover.aggregated[static_cast<Eigen::Index>(j)];
    for (std::size_t f = 0; f < t.links.size(); ++f)
      if (t.failed[f] && cover.aggregated[static_cast<Eigen::Index>(f)] * a > 0.0) {
        cover.s_t.push_back(t.links[j]);
        cover.f0 = std::max(cover.f0, std::abs(a));
        break;
      }
  }
  return cover;
}

bool failcover_conditions(const TruthView& t, const FailCoverSet& cover) {
  if (!(cover.f1 >= cover.f0)) return false;
  for (std::size_t j = 0; j < t.links.size(); ++j) {
    if (!t.failed[j]) continue;
    bool covered = false;
    for (const auto& nodes : cover.members) {
      const auto in = local_mask(t, nodes);
      if (on_boundary(t, in, static_cast<int>(j))) {
        covered = true;
        break;
      }
    }
    if (!covered) return false;
  }
  return true;
}

Certificate failcover_certify(const TruthView& t, const FailCoverSet& cover, LinkId link, double eta, bool check) {
  if (check && !failcover_conditions(t, cover))
    throw Error(ErrorCode::PreconditionViolated, "fail-cover set violates conditions 1-2");
  const int l = require_link(t, link);
  const bool miss = t.failed[static_cast<std::size_t>(l)];
  const Hypothesis h = miss ? Hypothesis::Failed : Hypothesis::Operational;
  Certificate c = blank(link, h, Mechanism::FailCover);
  c.witness_nodes = cover.members;
  const double d = cover.aggregated[l];
  const bool in_s = std::binary_search(cover.s_t.begin(), cover.s_t.end(), link);
  double slack;
  if (miss)
    slack = cover.fg + (eta - 1.0) * (std::abs(d) - cover.f0);
  else
    slack = cover.fg - eta * (cover.f1 + (in_s ? -std::abs(d) : std::abs(d)));
  if (!(slack < -kMargin)) return c;

  const auto sys = gale_system(t, link, h, eta);
  Vector z = Vector::Zero(sys.a.cols());
  for (std::size_t i = 0; i < cover.members.size(); ++i)
    for (NodeId v : cover.members[i]) {
      const int u = t.local_node(v);
      z[cover.negative[i] ? sys.col_d_plus(u) : sys.col_d_minus(u)] += cover.weights[i];
    }
  const double star = miss ? cover.f0 : cover.f1;
  z[sys.col_star()] = star;
  for (int e = 0; e < static_cast<int>(t.links.size()); ++e) {
    if (e == l) continue;
    const double a = cover.aggregated[e];
    if (t.failed[static_cast<std::size_t>(e)])
      z[sys.col_x_plus(e)] = std::abs(a) - star;
    else
      z[sys.col_x_minus(e)] = a + star;
  }
  z[sys.col_w()] = miss ? std::abs(d) - star : d + star;
  finish(c, sys, std::move(z));
  return c;
}

Certificate failcover_certify(const TruthView& t, const FailCoverSet& cover, LinkId link, double eta) {
  return failcover_certify(t, cover, link, eta, true);
}

std::optional<FailCoverSet> build_failcover_set(const TruthView& t, double eta) {
  const auto failed = t.failed_links();
  if (failed.empty()) return std::nullopt;

  struct Candidate {
    NodeId node;
    std::vector<LinkId> covers;
    double fg;
  };
  std::vector<Candidate> candidates;
  std::set<NodeId> endpoints;
  for (LinkId e : failed) {
    endpoints.insert(t.grid->link(e).from);
    endpoints.insert(t.grid->link(e).to);
  }
  for (NodeId v : endpoints) {
    const std::vector<NodeId> single{v};
    const auto in = local_mask(t, single);
    const HyperNode u = hypernode_props(t, single);
    if (!fail_cover_member(t, in, u.aggregated, nullptr)) continue;
    Candidate c{v, {}, u.fg};
    for (LinkId e : u.boundary)
      if (t.is_failed(e)) c.covers.push_back(e);
    candidates.push_back(std::move(c));
  }
  if (candidates.empty()) return std::nullopt;

  std::vector<std::vector<std::vector<NodeId>>> seeds;
  {
    std::set<LinkId> open(failed.begin(), failed.end());
    std::vector<bool> used(candidates.size(), false);
    std::vector<std::vector<NodeId>> pick;
    while (!open.empty()) {
      int best = -1;
      std::size_t best_gain = 0;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (used[i]) continue;
        std::size_t gain = 0;
        for (LinkId e : candidates[i].covers) gain += open.count(e);
        if (gain == 0) continue;
        if (best < 0 || gain > best_gain ||
            (gain == best_gain && candidates[i].fg < candidates[static_cast<std::size_t>(best)].fg)) {
          best = static_cast<int>(i);
          best_gain = gain;
        }
      }
      if (best < 0) break;
      used[static_cast<std::size_t>(best)] = true;
      pick.push_back({candidates[static_cast<std::size_t>(best)].node});
      for (LinkId e : candidates[static_cast<std::size_t>(best)].covers) open.erase(e);
    }
    if (open.empty()) seeds.push_back(pick);
  }
  {
    std::vector<std::vector<NodeId>> all;
    for (const auto& c : candidates) all.push_back({c.node});
    seeds.push_back(all);
  }

  std::optional<FailCoverSet> chosen;
  int chosen_score = -1;
  for (auto members : seeds) {
    FailCoverSet cover = make_failcover_set(t, members);
    // Repair: a member whose E_U carries an offending S_T link absorbs the
    // link's far endpoint, as long as it stays a fail-cover hyper-node.
    for (std::size_t round = 0; round < t.nodes.size() && !(cover.f1 >= cover.f0); ++round) {
      bool grown = false;
      for (LinkId e : cover.s_t) {
        if (std::abs(cover.aggregated[t.local_link(e)]) <= cover.f1) continue;
        for (auto& member : members) {
          auto in = local_mask(t, member);
          const int j = t.local_link(e);
          if (!on_boundary(t, in, j)) continue;
          const auto [x, y] = ends(t, j);
          in[static_cast<std::size_t>(in[static_cast<std::size_t>(x)] ? y : x)] = true;
          if (!fail_cover_member(t, in, aggregate(t, in), nullptr)) continue;
          member = to_nodes(t, in);
          grown = true;
          break;
        }
        if (grown) break;
      }
      if (!grown) break;
      cover = make_failcover_set(t, members);
    }
    if (!failcover_conditions(t, cover)) continue;
    const int score = count_certified(t, cover, eta);
    if (score > chosen_score) {
      chosen_score = score;
      chosen = std::move(cover);
    }
  }
  return chosen;
}

CorollaryFlags corollary_checks(const TruthView& t) {
  CorollaryFlags out;
  out.acyclic_h = is_acyclic(*t.grid, t.links);
  bool has_gen = false, has_load = false;
  for (Eigen::Index i = 0; i < t.injections.size(); ++i) (t.injections[i] > 0.0 ? has_gen : has_load) = true;
  out.connected_case = t.grid_connected && out.acyclic_h && !(has_gen && has_load);

  const auto failed = t.failed_links();
  if (failed.empty()) return out;
  // Islands of H after the failures.
  const auto k = t.nodes.size();
  std::vector<int> comp(k, -1);
  int count = 0;
  for (std::size_t s = 0; s < k; ++s) {
    if (comp[s] >= 0) continue;
    std::deque<int> queue{static_cast<int>(s)};
    comp[s] = count;
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      for (const auto& nb : t.grid->neighbors(t.nodes[static_cast<std::size_t>(i)])) {
        const int j = t.local_node(nb.node);
        if (j < 0 || comp[static_cast<std::size_t>(j)] >= 0 || t.is_failed(nb.link)) continue;
        comp[static_cast<std::size_t>(j)] = count;
        queue.push_back(j);
      }
    }
    ++count;
  }
  for (LinkId e : failed) {
    const auto [a, b] = ends(t, t.local_link(e));
    if (comp[static_cast<std::size_t>(a)] == comp[static_cast<std::size_t>(b)]) return out;
  }
  std::set<LinkId> covered;
  for (int c = 0; c < count; ++c) {
    std::vector<LinkId> cut;
    int side = 0;
    bool ok = true;
    for (LinkId e : failed) {
      const int j = t.local_link(e);
      const auto [a, b] = ends(t, j);
      const int v = comp[static_cast<std::size_t>(a)] == c ? a : (comp[static_cast<std::size_t>(b)] == c ? b : -1);
      if (v < 0) continue;
      cut.push_back(e);
      const double f = t.flows(v, j);
      const int s = sign(f);
      if (s == 0 || (side != 0 && s != side)) ok = false;
      side = s;
      const double tol = 1e-9 * std::max(1.0, std::abs(t.injections[v]));
      if (f < 0.0 && std::abs(t.g_plus[v]) > tol) ok = false;
      if (f > 0.0 && std::abs(t.g_minus[v]) > tol) ok = false;
      const std::vector<NodeId> single{t.nodes[static_cast<std::size_t>(v)]};
      const HyperNode u = hypernode_props(t, single);
      if (!(u.f0 + kMargin < u.f1)) ok = false;
    }
    if (ok) covered.insert(cut.begin(), cut.end());
  }
  out.islanding_case = covered.size() == failed.size();
  return out;
}

ScenarioCertificates certify_scenario(const TruthView& t, double eta) {
  ScenarioCertificates out;
  out.links = t.links;
  out.cover = build_failcover_set(t, eta);
  out.corollaries = corollary_checks(t);
  for (std::size_t j = 0; j < t.links.size(); ++j) {
    const LinkId e = t.links[j];
    const Hypothesis h = t.failed[j] ? Hypothesis::Failed : Hypothesis::Operational;
    out.gale.push_back(gale_certify(t, e, h, eta));
    out.hyper_node.push_back(bfs_witness_search(t, e, h, eta));
    if (out.cover)
      out.fail_cover.push_back(failcover_certify(t, *out.cover, e, eta));
    else
      out.fail_cover.push_back(blank(e, h, Mechanism::FailCover));
  }
  return out;
}

std::string dump_certificates(const TruthView& t, const ScenarioCertificates& certs) {
  std::ostringstream os;
  os.precision(12);
  auto nodes = [&](const std::vector<NodeId>& u) {
    std::string s = "{";
    for (std::size_t i = 0; i < u.size(); ++i) s += (i ? "," : "") + std::to_string(u[i]);
    return s + "}";
  };
  os << "# certificates\n";
  os << "corollary connected=" << certs.corollaries.connected_case << " islanding=" << certs.corollaries.islanding_case
     << " acyclic=" << certs.corollaries.acyclic_h << "\n";
  if (certs.cover) {
    os << "fail-cover";
    for (std::size_t i = 0; i < certs.cover->members.size(); ++i)
      os << " " << (certs.cover->negative[i] ? "n" : "p") << nodes(certs.cover->members[i]) << "*"
         << certs.cover->weights[i];
    os << " f0=" << certs.cover->f0 << " f1=" << certs.cover->f1 << " fg=" << certs.cover->fg << "\n";
  } else {
    os << "fail-cover none\n";
  }
  for (std::size_t j = 0; j < certs.links.size(); ++j) {
    const auto& l = t.grid->link(certs.links[j]);
    os << "link " << certs.links[j] << " " << l.from << "-" << l.to << " " << to_string(certs.gale[j].hypothesis)
       << " gale=" << to_string(certs.gale[j].verdict) << " value=" << certs.gale[j].value
       << " hyper-node=" << to_string(certs.hyper_node[j].verdict);
    if (certs.hyper_node[j].certified()) os << " U=" << nodes(certs.hyper_node[j].witness_nodes.front());
    os << " fail-cover=" << to_string(certs.fail_cover[j].verdict) << "\n";
  }
  return os.str();
}

}  // namespace cpagrid
